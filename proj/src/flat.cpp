#include "rbridge/flat.hpp"

#include "rbridge/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rbridge {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w >= kTwoPi) w = 0.0;
    return w;
}

double wrap_difference(double a) {
    double w = std::fmod(a + kPi, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w - kPi;
}

FlatProduct::FlatProduct(std::string id, std::vector<bool> periodic)
    : id_(std::move(id)), periodic_(std::move(periodic)) {
    if (periodic_.empty()) throw UsageError("flat manifold needs at least one coordinate");
}

FlatProduct FlatProduct::cylinder() { return FlatProduct("cylinder", {true, false}); }

FlatProduct FlatProduct::flat_torus(int d) {
    return FlatProduct(d == 2 ? "flat-torus" : "flat-torus" + std::to_string(d),
                       std::vector<bool>(static_cast<std::size_t>(d), true));
}

void FlatProduct::validate_point(const Point& x) const {
    if (x.size() != dim())
        throw UsageError(id_ + " point needs " + std::to_string(dim()) + " coordinates");
    if (!x.allFinite()) throw UsageError(id_ + " point must be finite");
    for (int i = 0; i < dim(); ++i)
        if (is_periodic(i) && (x(i) < 0.0 || x(i) >= kTwoPi))
            throw UsageError(id_ + " angles must lie in [0, 2pi)");
}

Point FlatProduct::project_point(const Point& x) const {
    Point p = x;
    for (int i = 0; i < dim(); ++i)
        if (is_periodic(i)) p(i) = wrap_angle(p(i));
    return p;
}

Tangent FlatProduct::project_tangent(const Point&, const Tangent& w) const { return w; }

Vec FlatProduct::wrapped_difference(const Point& x, const Point& v) const {
    if (x.size() != dim() || v.size() != dim())
        throw UsageError("points belong to different manifolds");
    Vec d = v - x;
    for (int i = 0; i < dim(); ++i)
        if (is_periodic(i)) d(i) = wrap_difference(d(i));
    return d;
}

double FlatProduct::distance(const Point& x, const Point& v) const {
    return wrapped_difference(x, v).norm();
}

LogResult FlatProduct::log_map(const Point& x, const Point& v) const {
    LogResult out{wrapped_difference(x, v), false};
    if (cut_locus_query(x, v).is_near_cut) {
        out.vector.setZero();
        out.at_cut = true;
    }
    return out;
}

Point FlatProduct::exp_map(const Point& x, const Tangent& w) const {
    return project_point(x + w);
}

CutLocusInfo FlatProduct::cut_locus_query(const Point& x, const Point& v) const {
    const Vec d = wrapped_difference(x, v);
    double to_cut = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim(); ++i)
        if (is_periodic(i)) to_cut = std::min(to_cut, kPi - std::abs(d(i)));
    CutLocusInfo info;
    info.is_near_cut = to_cut < kCutEpsilon;
    info.distance_to_cut = info.is_near_cut ? 0.0 : to_cut;
    return info;
}

double FlatProduct::theta_jacobian(const Point& v, const Point& x) const {
    if (cut_locus_query(x, v).is_near_cut) throw NumericalError("Theta is undefined at the cut locus");
    return 1.0;
}

double FlatProduct::d_r_log_theta_negsqrt(const Point& v, const Point& x) const {
    if (cut_locus_query(x, v).is_near_cut)
        throw NumericalError("eta integrand is undefined at the cut locus");
    return 0.0;
}

double FlatProduct::half_laplacian_sq_dist(const Point& x, const Point& v) const {
    if (cut_locus_query(x, v).is_near_cut)
        throw NumericalError("Laplacian of r^2 is undefined at the cut locus");
    return dim();
}

FramePoint FlatProduct::parallel_transport_step(const FramePoint& f, const Tangent& w) const {
    return FramePoint{exp_map(f.base, w), f.frame};
}

Mat FlatProduct::default_frame(const Point&) const { return Mat::Identity(dim(), dim()); }

}  // namespace rbridge
