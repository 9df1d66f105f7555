#pragma once

#include "rbridge/manifold.hpp"

namespace rbridge {

/// Unit sphere S^d embedded in R^{d+1}.
class Sphere final : public Manifold {
public:
    explicit Sphere(int d);

    std::string id() const override;
    int dim() const override { return d_; }
    int coord_size() const override { return d_ + 1; }

    void validate_point(const Point& x) const override;
    Point project_point(const Point& x) const override;
    Tangent project_tangent(const Point& x, const Tangent& w) const override;

    double distance(const Point& x, const Point& v) const override;
    LogResult log_map(const Point& x, const Point& v) const override;
    Point exp_map(const Point& x, const Tangent& w) const override;
    CutLocusInfo cut_locus_query(const Point& x, const Point& v) const override;

    double theta_jacobian(const Point& v, const Point& x) const override;
    double d_r_log_theta_negsqrt(const Point& v, const Point& x) const override;
    double half_laplacian_sq_dist(const Point& x, const Point& v) const override;

    FramePoint parallel_transport_step(const FramePoint& f, const Tangent& w) const override;
    Mat default_frame(const Point& x) const override;

    /// North pole e_{d+1}.
    Point north() const;

private:
    int d_;
};

}  // namespace rbridge
