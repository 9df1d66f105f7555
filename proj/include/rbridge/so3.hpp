#pragma once

#include "rbridge/manifold.hpp"

namespace rbridge {

/// SO(3) with the bi-invariant metric <A, B> = tr(A^T B) / 2 on the Lie
/// algebra, so that geodesic distance equals the rotation angle and the cut
/// distance is pi. Points are rotations stored column-major; tangent vectors
/// at R are body-frame skew matrices Omega (the actual tangent is R Omega).
class SO3 final : public Manifold {
public:
    std::string id() const override { return "so3"; }
    int dim() const override { return 3; }
    int coord_size() const override { return 9; }

    void validate_point(const Point& x) const override;
    Point project_point(const Point& x) const override;
    Tangent project_tangent(const Point& x, const Tangent& w) const override;

    double inner(const Point& x, const Tangent& a, const Tangent& b) const override;

    double distance(const Point& x, const Point& v) const override;
    LogResult log_map(const Point& x, const Point& v) const override;
    Point exp_map(const Point& x, const Tangent& w) const override;
    CutLocusInfo cut_locus_query(const Point& x, const Point& v) const override;

    double theta_jacobian(const Point& v, const Point& x) const override;
    double d_r_log_theta_negsqrt(const Point& v, const Point& x) const override;

    FramePoint parallel_transport_step(const FramePoint& f, const Tangent& w) const override;
    Mat default_frame(const Point& x) const override;

    static Eigen::Matrix3d to_matrix(const Point& x);
    static Point from_matrix(const Eigen::Matrix3d& r);
    static Eigen::Matrix3d hat(const Eigen::Vector3d& w);
    static Eigen::Vector3d vee(const Eigen::Matrix3d& s);
    /// Skew 9-vector <-> axis-angle 3-vector.
    static Tangent tangent_from_vector(const Eigen::Vector3d& w);
    static Eigen::Vector3d vector_from_tangent(const Tangent& w);
    /// Rodrigues formula.
    static Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w);
    /// Principal matrix logarithm as an axis-angle vector, angle in [0, pi].
    static Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r);
};

}  // namespace rbridge
