#pragma once

#include "rbridge/manifold.hpp"

#include <array>
#include <cstdint>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

namespace rbridge {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// A closed surface in R^3 given both by a chart embedding q -> f(q) and by
/// an implicit equation F(p) = 0. The chart is used for user-facing
/// coordinates and the metric; the implicit form drives geodesics globally
/// without chart singularities.
class ParamSurface {
public:
    enum class Kind { torus, ellipsoid };

    /// Standard torus: ((R + rho cos q2) cos q1, (R + rho cos q2) sin q1, rho sin q2).
    static ParamSurface torus(double major, double minor);
    /// Ellipsoid: (a sin q2 cos q1, b sin q2 sin q1, c cos q2), q1 azimuth, q2 polar.
    static ParamSurface ellipsoid(double a, double b, double c);

    Kind kind() const { return kind_; }
    const std::vector<double>& parameters() const { return params_; }
    std::array<bool, 2> periodic() const;
    std::string id() const;

    Vec3 embedding(const Vec2& q) const;
    /// Columns are the partial derivatives d f / d q^i.
    Eigen::Matrix<double, 3, 2> embedding_jacobian(const Vec2& q) const;
    /// Chart coordinates of a point on the surface.
    Vec2 chart(const Vec3& p) const;

    double implicit(const Vec3& p) const;
    Vec3 implicit_gradient(const Vec3& p) const;
    Mat3 implicit_hessian(const Vec3& p) const;
    double gaussian_curvature(const Vec3& p) const;

    /// Newton projection along the implicit gradient.
    Vec3 project(const Vec3& p) const;

private:
    ParamSurface(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

    Kind kind_;
    std::vector<double> params_;
};

/// Metric matrix G_ij = <d_i f, d_j f> in the chart; throws NumericalError
/// when the embedding is not an immersion at q.
Mat2 surface_metric(const ParamSurface& s, const Vec2& q);

struct GeodesicSolution {
    std::vector<Vec3> points;      ///< nodes from start to end
    std::vector<Vec3> velocities;  ///< d/ds at the nodes, s in [0, 1]
    Vec3 initial_velocity = Vec3::Zero();  ///< Log of the endpoint at the start
    double length = 0.0;
    bool converged = false;
    double residual = 0.0;
    /// True when a different homotopy class reaches the endpoint with a
    /// length within the cut band.
    bool near_cut = false;
    /// Length of the best distinct competitor, or +inf when none converged.
    double runner_up_length = 0.0;
};

/// Minimizing geodesic between two chart points via multiple shooting over
/// winding classes. Throws NumericalError when no restart converges.
GeodesicSolution geodesic_bvp(const ParamSurface& s, const Vec2& x, const Vec2& v);

/// Same, between two points on the surface given in ambient coordinates.
GeodesicSolution geodesic_bvp_ambient(const ParamSurface& s, const Vec3& x, const Vec3& v);

/// Theta_v(x) for the geodesic g running from x to v, from the Jacobi
/// equation integrated from v back to x.
double jacobi_theta(const ParamSurface& s, const GeodesicSolution& g);

/// Theta and d/dr log Theta^{-1/2} at the end of the unit-parameter geodesic
/// leaving `start` with velocity `velocity`.
struct JacobiResult {
    double theta = 1.0;
    double eta = 0.0;
};
JacobiResult jacobi_along(const ParamSurface& s, const Vec3& start, const Vec3& velocity,
                          int steps = 200);

/// Geodesic integrator for the implicit surface.
struct GeodesicFlow {
    Vec3 position;
    Vec3 velocity;
    std::vector<Vec3> transported;  ///< vectors parallel-transported along the way
};
GeodesicFlow integrate_geodesic(const ParamSurface& s, const Vec3& p, const Vec3& w,
                                std::vector<Vec3> transported = {},
                                std::vector<Vec3>* nodes = nullptr,
                                std::vector<Vec3>* node_velocities = nullptr);

/// Manifold adapter for a ParamSurface; points are ambient R^3 coordinates.
class SurfaceManifold final : public Manifold {
public:
    explicit SurfaceManifold(ParamSurface s);

    const ParamSurface& surface() const { return surface_; }

    std::string id() const override { return surface_.id(); }
    int dim() const override { return 2; }
    int coord_size() const override { return 3; }

    void validate_point(const Point& x) const override;
    Point project_point(const Point& x) const override;
    Tangent project_tangent(const Point& x, const Tangent& w) const override;

    double distance(const Point& x, const Point& v) const override;
    LogResult log_map(const Point& x, const Point& v) const override;
    Point exp_map(const Point& x, const Tangent& w) const override;
    CutLocusInfo cut_locus_query(const Point& x, const Point& v) const override;

    double theta_jacobian(const Point& v, const Point& x) const override;
    double d_r_log_theta_negsqrt(const Point& v, const Point& x) const override;

    RadialInfo radial_info(const Point& x, const Point& v, bool need_eta,
                           const Tangent* hint = nullptr) const override;

    FramePoint parallel_transport_step(const FramePoint& f, const Tangent& w) const override;
    Mat default_frame(const Point& x) const override;

    /// Solves the geodesic problem from x to v, seeding the search with the
    /// BVP cache and `hint` when given. Without `full_path` only the two end
    /// nodes of the geodesic are stored.
    GeodesicSolution solve(const Vec3& x, const Vec3& v, const Vec3* hint, bool full_path = true) const;

    std::size_t cache_size() const;

private:
    struct Key {
        std::array<std::int64_t, 6> q;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const;
    };
    static Key quantize(const Vec3& x, const Vec3& v);

    ParamSurface surface_;
    mutable std::shared_mutex cache_mutex_;
    mutable std::unordered_map<Key, Vec3, KeyHash> cache_;
};

}  // namespace rbridge
