#include "rbridge/sphere.hpp"

#include "rbridge/errors.hpp"

#include <cmath>
#include <numbers>

namespace rbridge {

namespace {

constexpr double kPi = std::numbers::pi;

// sin(r)/r with its series near zero.
double sinc(double r) {
    if (std::abs(r) < 1e-4) return 1.0 - r * r / 6.0 + r * r * r * r / 120.0;
    return std::sin(r) / r;
}

}  // namespace

Sphere::Sphere(int d) : d_(d) {
    if (d < 1) throw UsageError("sphere dimension must be >= 1");
}

std::string Sphere::id() const { return "sphere" + std::to_string(d_); }

Point Sphere::north() const {
    Point n = Point::Zero(d_ + 1);
    n(d_) = 1.0;
    return n;
}

void Sphere::validate_point(const Point& x) const {
    if (x.size() != d_ + 1)
        throw UsageError(id() + " point needs " + std::to_string(d_ + 1) + " coordinates");
    if (!x.allFinite() || std::abs(x.norm() - 1.0) > 1e-10)
        throw UsageError(id() + " point must have unit norm");
}

Point Sphere::project_point(const Point& x) const {
    const double n = x.norm();
    if (!(n > 0.0)) throw NumericalError("cannot project the zero vector onto the sphere");
    return x / n;
}

Tangent Sphere::project_tangent(const Point& x, const Tangent& w) const {
    return w - x.dot(w) * x;
}

double Sphere::distance(const Point& x, const Point& v) const {
    if (x.size() != v.size()) throw UsageError("points belong to different manifolds");
    // Stable for both tiny and near-antipodal separations.
    return 2.0 * std::atan2((x - v).norm(), (x + v).norm());
}

LogResult Sphere::log_map(const Point& x, const Point& v) const {
    const double r = distance(x, v);
    LogResult out{Tangent::Zero(x.size()), false};
    if (r > kPi - kCutEpsilon) {
        out.at_cut = true;
        return out;
    }
    if (r == 0.0) return out;
    Tangent u = v - x.dot(v) * x;
    const double un = u.norm();
    if (un == 0.0) return out;
    out.vector = (r / un) * u;
    return out;
}

Point Sphere::exp_map(const Point& x, const Tangent& w) const {
    const double t = w.norm();
    if (t < 1e-15) return project_point(x + w);
    return project_point(std::cos(t) * x + (std::sin(t) / t) * w);
}

CutLocusInfo Sphere::cut_locus_query(const Point& x, const Point& v) const {
    const double r = distance(x, v);
    CutLocusInfo info;
    info.is_near_cut = r > kPi - kCutEpsilon;
    info.distance_to_cut = info.is_near_cut ? 0.0 : kPi - r;
    return info;
}

double Sphere::theta_jacobian(const Point& v, const Point& x) const {
    const double r = distance(x, v);
    if (r > kPi - kCutEpsilon) throw NumericalError("Theta is undefined at the cut locus");
    return std::pow(sinc(r), d_ - 1);
}

double Sphere::d_r_log_theta_negsqrt(const Point& v, const Point& x) const {
    const double r = distance(x, v);
    if (r > kPi - kCutEpsilon) throw NumericalError("eta integrand is undefined at the cut locus");
    // -(d-1)/2 (cot r - 1/r)
    if (r < 1e-3) return (d_ - 1) * (r / 6.0 + r * r * r / 90.0);
    return -0.5 * (d_ - 1) * (std::cos(r) / std::sin(r) - 1.0 / r);
}

double Sphere::half_laplacian_sq_dist(const Point& x, const Point& v) const {
    const double r = distance(x, v);
    if (r > kPi - kCutEpsilon) throw NumericalError("Laplacian of r^2 is undefined at the cut locus");
    const double rcot = r < 1e-4 ? 1.0 - r * r / 3.0 : r * std::cos(r) / std::sin(r);
    return 1.0 + (d_ - 1) * rcot;
}

FramePoint Sphere::parallel_transport_step(const FramePoint& f, const Tangent& w) const {
    const double t = w.norm();
    FramePoint out{exp_map(f.base, w), f.frame};
    if (t < 1e-15) return out;
    const Vec e = w / t;
    const Vec shift = (std::cos(t) - 1.0) * e - std::sin(t) * f.base;
    for (Eigen::Index i = 0; i < out.frame.cols(); ++i) {
        const double a = e.dot(f.frame.col(i));
        out.frame.col(i) += a * shift;
    }
    return out;
}

Mat Sphere::default_frame(const Point& x) const {
    // Drop the axis most aligned with x, Gram-Schmidt the rest in the tangent space.
    Eigen::Index skip = 0;
    x.cwiseAbs().maxCoeff(&skip);
    FramePoint f{x, Mat::Zero(d_ + 1, d_)};
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i <= d_; ++i) {
        if (i == skip) continue;
        f.frame.col(col++) = Vec::Unit(d_ + 1, i);
    }
    orthonormalize(f);
    return f.frame;
}

}  // namespace rbridge
