#pragma once

#include "rbridge/manifold.hpp"

#include <vector>

namespace rbridge {

/// Flat product of circles and lines: each coordinate is either a periodic
/// angle in [0, 2pi) or an unbounded real. The cylinder S^1 x R and the flat
/// torus (S^1)^d are the two instances used.
class FlatProduct final : public Manifold {
public:
    FlatProduct(std::string id, std::vector<bool> periodic);

    static FlatProduct cylinder();
    static FlatProduct flat_torus(int d);

    std::string id() const override { return id_; }
    int dim() const override { return static_cast<int>(periodic_.size()); }
    int coord_size() const override { return dim(); }
    bool is_flat() const override { return true; }
    bool is_periodic(int i) const { return periodic_[static_cast<std::size_t>(i)]; }

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

    /// Coordinate-wise difference v - x with angles wrapped to [-pi, pi).
    Vec wrapped_difference(const Point& x, const Point& v) const;

private:
    std::string id_;
    std::vector<bool> periodic_;
};

/// Wraps an angle to [0, 2pi).
double wrap_angle(double a);
/// Wraps an angle difference to [-pi, pi).
double wrap_difference(double a);

}  // namespace rbridge
