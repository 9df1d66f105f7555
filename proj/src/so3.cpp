#include "rbridge/so3.hpp"

#include "rbridge/errors.hpp"

#include <cmath>
#include <numbers>

namespace rbridge {

namespace {
constexpr double kPi = std::numbers::pi;
}

Eigen::Matrix3d SO3::to_matrix(const Point& x) {
    if (x.size() != 9) throw UsageError("so3 points need 9 coordinates");
    return Eigen::Map<const Eigen::Matrix3d>(x.data());
}

Point SO3::from_matrix(const Eigen::Matrix3d& r) {
    return Eigen::Map<const Vec>(r.data(), 9);
}

Eigen::Matrix3d SO3::hat(const Eigen::Vector3d& w) {
    Eigen::Matrix3d s;
    s << 0.0, -w.z(), w.y(),
         w.z(), 0.0, -w.x(),
         -w.y(), w.x(), 0.0;
    return s;
}

Eigen::Vector3d SO3::vee(const Eigen::Matrix3d& s) {
    return {s(2, 1), s(0, 2), s(1, 0)};
}

Tangent SO3::tangent_from_vector(const Eigen::Vector3d& w) { return from_matrix(hat(w)); }

Eigen::Vector3d SO3::vector_from_tangent(const Tangent& w) {
    const Eigen::Matrix3d s = to_matrix(w);
    return 0.5 * vee(s - s.transpose());
}

Eigen::Matrix3d SO3::rodrigues(const Eigen::Vector3d& w) {
    const double t = w.norm();
    const Eigen::Matrix3d k = hat(w);
    double a, b;
    if (t < 1e-4) {
        a = 1.0 - t * t / 6.0;
        b = 0.5 - t * t / 24.0;
    } else {
        a = std::sin(t) / t;
        b = (1.0 - std::cos(t)) / (t * t);
    }
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Vector3d SO3::rotation_log(const Eigen::Matrix3d& r) {
    const Eigen::Vector3d s = 0.5 * vee(r - r.transpose());
    const double c = 0.5 * (r.trace() - 1.0);
    const double sn = s.norm();
    const double t = std::atan2(sn, c);
    if (t < kPi - 1e-3) {
        const double f = t < 1e-6 ? 1.0 + t * t / 6.0 : t / sn;
        return f * s;
    }
    // Near pi the antisymmetric part vanishes; recover the axis from (R + R^T)/2 - cI.
    const Eigen::Matrix3d m = 0.5 * (r + r.transpose()) - c * Eigen::Matrix3d::Identity();
    Eigen::Index k = 0;
    m.diagonal().maxCoeff(&k);
    Eigen::Vector3d a = m.col(k) / std::sqrt(std::max(m(k, k), 1e-300) * (1.0 - c));
    a.normalize();
    if (a.dot(s) < 0.0) a = -a;
    return t * a;
}

void SO3::validate_point(const Point& x) const {
    if (x.size() != 9) throw UsageError("so3 points need 9 coordinates");
    const Eigen::Matrix3d r = to_matrix(x);
    if (!r.allFinite() || (r.transpose() * r - Eigen::Matrix3d::Identity()).norm() > 1e-9 ||
        std::abs(r.determinant() - 1.0) > 1e-9)
        throw UsageError("so3 point must be a rotation matrix");
}

Point SO3::project_point(const Point& x) const {
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(to_matrix(x), Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
    return from_matrix(u * v.transpose());
}

Tangent SO3::project_tangent(const Point&, const Tangent& w) const {
    const Eigen::Matrix3d a = to_matrix(w);
    return from_matrix(0.5 * (a - a.transpose()));
}

double SO3::inner(const Point&, const Tangent& a, const Tangent& b) const { return 0.5 * a.dot(b); }

double SO3::distance(const Point& x, const Point& v) const {
    if (x.size() != 9 || v.size() != 9) throw UsageError("points belong to different manifolds");
    return rotation_log(to_matrix(x).transpose() * to_matrix(v)).norm();
}

LogResult SO3::log_map(const Point& x, const Point& v) const {
    const Eigen::Vector3d w = rotation_log(to_matrix(x).transpose() * to_matrix(v));
    if (w.norm() > kPi - kCutEpsilon) return {Tangent::Zero(9), true};
    return {tangent_from_vector(w), false};
}

Point SO3::exp_map(const Point& x, const Tangent& w) const {
    return from_matrix(to_matrix(x) * rodrigues(vector_from_tangent(w)));
}

CutLocusInfo SO3::cut_locus_query(const Point& x, const Point& v) const {
    const double r = distance(x, v);
    CutLocusInfo info;
    info.is_near_cut = r > kPi - kCutEpsilon;
    info.distance_to_cut = info.is_near_cut ? 0.0 : kPi - r;
    return info;
}

double SO3::theta_jacobian(const Point& v, const Point& x) const {
    const double r = distance(x, v);
    if (r > kPi - kCutEpsilon) throw NumericalError("Theta is undefined at the cut locus");
    const double h = 0.5 * r;
    const double s = h < 1e-4 ? 1.0 - h * h / 6.0 : std::sin(h) / h;
    return s * s;
}

double SO3::d_r_log_theta_negsqrt(const Point& v, const Point& x) const {
    const double r = distance(x, v);
    if (r > kPi - kCutEpsilon) throw NumericalError("eta integrand is undefined at the cut locus");
    // 1/r - cot(r/2)/2
    if (r < 1e-3) return r / 12.0 + r * r * r / 720.0;
    return 1.0 / r - 0.5 / std::tan(0.5 * r);
}

FramePoint SO3::parallel_transport_step(const FramePoint& f, const Tangent& w) const {
    // Body-frame transport along R exp(t Omega) for a bi-invariant metric:
    // eta(1) = exp(-Omega/2) eta(0) exp(Omega/2).
    const Eigen::Vector3d om = vector_from_tangent(w);
    const Eigen::Matrix3d half_back = rodrigues(-0.5 * om);
    FramePoint out{exp_map(f.base, w), f.frame};
    for (Eigen::Index i = 0; i < f.frame.cols(); ++i)
        out.frame.col(i) = tangent_from_vector(half_back * vector_from_tangent(f.frame.col(i)));
    return out;
}

Mat SO3::default_frame(const Point&) const {
    Mat f(9, 3);
    for (int i = 0; i < 3; ++i) f.col(i) = tangent_from_vector(Eigen::Vector3d::Unit(i));
    return f;
}

}  // namespace rbridge
