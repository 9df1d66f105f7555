#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>

namespace rbridge {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Coordinates of a point in the manifold's own representation: unit vector
/// in R^{d+1} for spheres, (angle, height) for the cylinder, angles for the
/// flat torus, a column-major 3x3 rotation for SO(3), ambient R^3 for
/// surfaces.
using Point = Vec;

/// Tangent vector in the representation of its base point. SO(3) tangents
/// are left-trivialized skew matrices (column-major, 9 entries).
using Tangent = Vec;

/// Band around the cut locus in which the radial gradient is set to zero.
inline constexpr double kCutEpsilon = 1e-6;

struct CutLocusInfo {
    bool is_near_cut = false;
    double distance_to_cut = 0.0;
};

struct LogResult {
    Tangent vector;
    bool at_cut = false;
};

/// Everything the guided step and the likelihood need about the radial
/// function at one point.
struct RadialInfo {
    Tangent log;       ///< Log_x(v), zero in the cut band
    double r = 0.0;    ///< d(x, v)
    bool at_cut = false;
    double eta = 0.0;  ///< d/dr log Theta_v^{-1/2}(x), zero in the cut band
};

/// A point together with an orthonormal frame of its tangent space; column i
/// of `frame` is the tangent vector u(e_i).
struct FramePoint {
    Point base;
    Mat frame;
};

/// Closed-form or numeric Riemannian geometry of a d-dimensional manifold.
///
/// Implementations are immutable after construction and all member
/// functions may be called concurrently.
class Manifold {
public:
    virtual ~Manifold() = default;

    virtual std::string id() const = 0;
    virtual int dim() const = 0;
    /// Length of the coordinate vector of points and tangents.
    virtual int coord_size() const = 0;
    virtual bool is_flat() const { return false; }

    /// Throws UsageError when `x` violates the representation invariants.
    virtual void validate_point(const Point& x) const = 0;
    /// Restores the representation invariants of a slightly perturbed point.
    virtual Point project_point(const Point& x) const = 0;
    virtual Tangent project_tangent(const Point& x, const Tangent& w) const = 0;

    virtual double inner(const Point& x, const Tangent& a, const Tangent& b) const;
    double norm(const Point& x, const Tangent& a) const;

    virtual double distance(const Point& x, const Point& v) const = 0;
    /// Log_x(v); zero vector and `at_cut` inside the cut band.
    virtual LogResult log_map(const Point& x, const Point& v) const = 0;
    virtual Point exp_map(const Point& x, const Tangent& w) const = 0;
    virtual CutLocusInfo cut_locus_query(const Point& x, const Point& v) const = 0;

    /// Gradient of d(., v)^2 / 2 at x, i.e. -Log_x(v); zero at the cut locus.
    Tangent grad_half_sq_dist(const Point& x, const Point& v) const;

    /// Jacobian determinant Theta_v(x) of the exponential map at v.
    virtual double theta_jacobian(const Point& v, const Point& x) const = 0;
    /// d/dr log Theta_v^{-1/2}(x), the integrand of the Brownian likelihood.
    virtual double d_r_log_theta_negsqrt(const Point& v, const Point& x) const = 0;
    /// (1/2) Laplacian of r_v^2 at x.
    virtual double half_laplacian_sq_dist(const Point& x, const Point& v) const;

    /// Log, distance and (optionally) the eta integrand in one call. `hint`
    /// is a previous Log value near the answer; numeric backends use it as a
    /// warm start, closed-form ones ignore it.
    virtual RadialInfo radial_info(const Point& x, const Point& v, bool need_eta,
                                   const Tangent* hint = nullptr) const;

    /// Moves the base along exp(w) and parallel-transports the frame. The
    /// returned frame is not re-orthonormalized.
    virtual FramePoint parallel_transport_step(const FramePoint& f, const Tangent& w) const = 0;

    /// An orthonormal frame at x, deterministic in x.
    virtual Mat default_frame(const Point& x) const = 0;

    /// Frame coordinates u^{-1}(w) of a tangent vector.
    Vec frame_coords(const FramePoint& f, const Tangent& w) const;

    /// Gram-Schmidt under the Riemannian inner product at f.base.
    void orthonormalize(FramePoint& f) const;
};

/// Builds a manifold from its string id: "sphere2", "sphere<d>",
/// "cylinder", "flat-torus", "flat-torus<d>", "so3", "torus:R,rho",
/// "ellipsoid:a,b,c".
std::shared_ptr<const Manifold> make_manifold(const std::string& id);

/// Parses point coordinates given by the user. Surfaces accept chart
/// coordinates (2 entries) or ambient coordinates (3 entries); the result is
/// always in the manifold's own representation. SO(3) also accepts an
/// axis-angle 3-vector.
Point parse_point(const Manifold& m, const Vec& raw);

}  // namespace rbridge
