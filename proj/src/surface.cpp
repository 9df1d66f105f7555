#include "rbridge/surface.hpp"

#include "rbridge/errors.hpp"
#include "rbridge/flat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace rbridge {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Maximum geodesic step length in ambient units for the RK4 integrators.
constexpr double kGeodesicStep = 0.05;
constexpr double kShootTolerance = 1e-12;

std::string fmt_param(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

Mat3 cofactor_sym(const Mat3& h) {
    Mat3 c;
    c(0, 0) = h(1, 1) * h(2, 2) - h(1, 2) * h(2, 1);
    c(0, 1) = h(1, 2) * h(2, 0) - h(1, 0) * h(2, 2);
    c(0, 2) = h(1, 0) * h(2, 1) - h(1, 1) * h(2, 0);
    c(1, 0) = h(0, 2) * h(2, 1) - h(0, 1) * h(2, 2);
    c(1, 1) = h(0, 0) * h(2, 2) - h(0, 2) * h(2, 0);
    c(1, 2) = h(0, 1) * h(2, 0) - h(0, 0) * h(2, 1);
    c(2, 0) = h(0, 1) * h(1, 2) - h(0, 2) * h(1, 1);
    c(2, 1) = h(0, 2) * h(1, 0) - h(0, 0) * h(1, 2);
    c(2, 2) = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
    return c;
}

Mat3 tangent_frame3(const ParamSurface& s, const Vec3& p, Vec3* normal = nullptr) {
    const Vec3 n = s.implicit_gradient(p).normalized();
    Eigen::Index k = 0;
    n.cwiseAbs().minCoeff(&k);
    Vec3 e1 = Vec3::Unit(k) - n(k) * n;
    e1.normalize();
    const Vec3 e2 = n.cross(e1);
    if (normal) *normal = n;
    Mat3 out;
    out.col(0) = e1;
    out.col(1) = e2;
    out.col(2) = n;
    return out;
}

}  // namespace

// ---------------------------------------------------------------- ParamSurface

ParamSurface ParamSurface::torus(double major, double minor) {
    if (!(minor > 0.0) || !(major > minor))
        throw UsageError("torus radii must satisfy R > rho > 0");
    return ParamSurface(Kind::torus, {major, minor});
}

ParamSurface ParamSurface::ellipsoid(double a, double b, double c) {
    if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0))
        throw UsageError("ellipsoid semi-axes must be positive");
    return ParamSurface(Kind::ellipsoid, {a, b, c});
}

std::array<bool, 2> ParamSurface::periodic() const {
    return kind_ == Kind::torus ? std::array<bool, 2>{true, true} : std::array<bool, 2>{true, false};
}

std::string ParamSurface::id() const {
    if (kind_ == Kind::torus) return "torus:" + fmt_param(params_[0]) + "," + fmt_param(params_[1]);
    return "ellipsoid:" + fmt_param(params_[0]) + "," + fmt_param(params_[1]) + "," +
           fmt_param(params_[2]);
}

Vec3 ParamSurface::embedding(const Vec2& q) const {
    const double c1 = std::cos(q(0)), s1 = std::sin(q(0));
    const double c2 = std::cos(q(1)), s2 = std::sin(q(1));
    if (kind_ == Kind::torus) {
        const double R = params_[0], rho = params_[1];
        const double w = R + rho * c2;
        return {w * c1, w * s1, rho * s2};
    }
    return {params_[0] * s2 * c1, params_[1] * s2 * s1, params_[2] * c2};
}

Eigen::Matrix<double, 3, 2> ParamSurface::embedding_jacobian(const Vec2& q) const {
    const double c1 = std::cos(q(0)), s1 = std::sin(q(0));
    const double c2 = std::cos(q(1)), s2 = std::sin(q(1));
    Eigen::Matrix<double, 3, 2> j;
    if (kind_ == Kind::torus) {
        const double R = params_[0], rho = params_[1];
        const double w = R + rho * c2;
        j.col(0) << -w * s1, w * c1, 0.0;
        j.col(1) << -rho * s2 * c1, -rho * s2 * s1, rho * c2;
    } else {
        const double a = params_[0], b = params_[1], c = params_[2];
        j.col(0) << -a * s2 * s1, b * s2 * c1, 0.0;
        j.col(1) << a * c2 * c1, b * c2 * s1, -c * s2;
    }
    return j;
}

Vec2 ParamSurface::chart(const Vec3& p) const {
    if (kind_ == Kind::torus) {
        const double s = std::hypot(p.x(), p.y());
        return {wrap_angle(std::atan2(p.y(), p.x())), wrap_angle(std::atan2(p.z(), s - params_[0]))};
    }
    const double z = std::clamp(p.z() / params_[2], -1.0, 1.0);
    return {wrap_angle(std::atan2(p.y() / params_[1], p.x() / params_[0])), std::acos(z)};
}

double ParamSurface::implicit(const Vec3& p) const {
    if (kind_ == Kind::torus) {
        const double s = std::hypot(p.x(), p.y()) - params_[0];
        return s * s + p.z() * p.z() - params_[1] * params_[1];
    }
    const double a = params_[0], b = params_[1], c = params_[2];
    return p.x() * p.x() / (a * a) + p.y() * p.y() / (b * b) + p.z() * p.z() / (c * c) - 1.0;
}

Vec3 ParamSurface::implicit_gradient(const Vec3& p) const {
    if (kind_ == Kind::torus) {
        const double s = std::max(std::hypot(p.x(), p.y()), 1e-300);
        const double f = 2.0 * (s - params_[0]) / s;
        return {f * p.x(), f * p.y(), 2.0 * p.z()};
    }
    const double a = params_[0], b = params_[1], c = params_[2];
    return {2.0 * p.x() / (a * a), 2.0 * p.y() / (b * b), 2.0 * p.z() / (c * c)};
}

Mat3 ParamSurface::implicit_hessian(const Vec3& p) const {
    Mat3 h = Mat3::Zero();
    if (kind_ == Kind::torus) {
        const double x = p.x(), y = p.y();
        const double s = std::max(std::hypot(x, y), 1e-300);
        const double s2 = s * s, s3 = s2 * s;
        const double e = s - params_[0];
        h(0, 0) = 2.0 * (x * x / s2 + e * y * y / s3);
        h(1, 1) = 2.0 * (y * y / s2 + e * x * x / s3);
        h(0, 1) = h(1, 0) = 2.0 * (x * y / s2 - e * x * y / s3);
        h(2, 2) = 2.0;
        return h;
    }
    const double a = params_[0], b = params_[1], c = params_[2];
    h(0, 0) = 2.0 / (a * a);
    h(1, 1) = 2.0 / (b * b);
    h(2, 2) = 2.0 / (c * c);
    return h;
}

double ParamSurface::gaussian_curvature(const Vec3& p) const {
    const Vec3 g = implicit_gradient(p);
    const double g2 = g.squaredNorm();
    return g.dot(cofactor_sym(implicit_hessian(p)) * g) / (g2 * g2);
}

Vec3 ParamSurface::project(const Vec3& p) const {
    Vec3 q = p;
    for (int it = 0; it < 8; ++it) {
        const double f = implicit(q);
        if (std::abs(f) < 1e-15) break;
        const Vec3 g = implicit_gradient(q);
        q -= (f / g.squaredNorm()) * g;
    }
    return q;
}

Mat2 surface_metric(const ParamSurface& s, const Vec2& q) {
    const auto j = s.embedding_jacobian(q);
    const Mat2 g = j.transpose() * j;
    const Eigen::SelfAdjointEigenSolver<Mat2> es(g, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues()(0) > 1e-8))
        throw NumericalError("degenerate metric: embedding is not an immersion at this chart point");
    return g;
}

// ---------------------------------------------------------------- integrators

namespace {

struct FlowState {
    Vec3 p;
    Vec3 u;
};

inline Vec3 geodesic_accel(const ParamSurface& s, const Vec3& p, const Vec3& u, Vec3* g_out,
                           Mat3* h_out) {
    const Vec3 g = s.implicit_gradient(p);
    const Mat3 h = s.implicit_hessian(p);
    if (g_out) *g_out = g;
    if (h_out) *h_out = h;
    return -(u.dot(h * u) / g.squaredNorm()) * g;
}

}  // namespace

GeodesicFlow integrate_geodesic(const ParamSurface& s, const Vec3& p0, const Vec3& w,
                                std::vector<Vec3> transported, std::vector<Vec3>* nodes,
                                std::vector<Vec3>* node_velocities) {
    const double len = w.norm();
    const int n = std::max(4, static_cast<int>(std::ceil(len / kGeodesicStep)));
    const double h = 1.0 / n;
    const std::size_t m = transported.size();

    Vec3 p = p0, u = w;
    std::vector<Vec3>& vs = transported;
    std::vector<Vec3> kv1(m), kv2(m), kv3(m), kv4(m), vtmp(m);

    if (nodes) {
        nodes->assign(1, p);
        node_velocities->assign(1, u);
    }
    auto transport_rate = [&](const Vec3& g, const Mat3& hm, const Vec3& uu, const Vec3& vv) -> Vec3 {
        return -(vv.dot(hm * uu) / g.squaredNorm()) * g;
    };

    for (int step = 0; step < n; ++step) {
        Vec3 g;
        Mat3 hm;
        const Vec3 a1 = geodesic_accel(s, p, u, &g, &hm);
        const Vec3 dp1 = u;
        for (std::size_t k = 0; k < m; ++k) kv1[k] = transport_rate(g, hm, u, vs[k]);

        const Vec3 p2 = p + 0.5 * h * dp1, u2 = u + 0.5 * h * a1;
        const Vec3 a2 = geodesic_accel(s, p2, u2, &g, &hm);
        for (std::size_t k = 0; k < m; ++k) {
            vtmp[k] = vs[k] + 0.5 * h * kv1[k];
            kv2[k] = transport_rate(g, hm, u2, vtmp[k]);
        }

        const Vec3 p3 = p + 0.5 * h * u2, u3 = u + 0.5 * h * a2;
        const Vec3 a3 = geodesic_accel(s, p3, u3, &g, &hm);
        for (std::size_t k = 0; k < m; ++k) {
            vtmp[k] = vs[k] + 0.5 * h * kv2[k];
            kv3[k] = transport_rate(g, hm, u3, vtmp[k]);
        }

        const Vec3 p4 = p + h * u3, u4 = u + h * a3;
        const Vec3 a4 = geodesic_accel(s, p4, u4, &g, &hm);
        for (std::size_t k = 0; k < m; ++k) {
            vtmp[k] = vs[k] + h * kv3[k];
            kv4[k] = transport_rate(g, hm, u4, vtmp[k]);
        }

        p += (h / 6.0) * (dp1 + 2.0 * u2 + 2.0 * u3 + u4);
        u += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        for (std::size_t k = 0; k < m; ++k)
            vs[k] += (h / 6.0) * (kv1[k] + 2.0 * kv2[k] + 2.0 * kv3[k] + kv4[k]);

        // Stay on the surface; keep constant speed.
        p = s.project(p);
        const Vec3 nrm = s.implicit_gradient(p).normalized();
        u -= u.dot(nrm) * nrm;
        const double un = u.norm();
        if (un > 0.0) u *= len / un;
        for (std::size_t k = 0; k < m; ++k) vs[k] -= vs[k].dot(nrm) * nrm;
        if (!p.allFinite()) throw NumericalError("geodesic integration produced a non-finite state");

        if (nodes) {
            nodes->push_back(p);
            node_velocities->push_back(u);
        }
    }
    return GeodesicFlow{p, u, std::move(transported)};
}

JacobiResult jacobi_along(const ParamSurface& s, const Vec3& start, const Vec3& velocity, int steps) {
    const double len = velocity.norm();
    JacobiResult out;
    if (len < 1e-3) {
        // Series: Theta = 1 - K r^2 / 6, eta = K r / 6.
        const double k = s.gaussian_curvature(start);
        out.theta = 1.0 - k * len * len / 6.0;
        out.eta = k * len / 6.0;
        return out;
    }
    // Normal Jacobi field J'' = -K L^2 J in the unit parameter, J(0) = 0, J'(0) = L.
    struct S {
        Vec3 p, u;
        double j, dj;
    };
    auto rate = [&](const S& x) {
        const Vec3 a = geodesic_accel(s, x.p, x.u, nullptr, nullptr);
        return S{x.u, a, x.dj, -s.gaussian_curvature(x.p) * len * len * x.j};
    };
    auto axpy = [](const S& x, double h, const S& k) {
        return S{x.p + h * k.p, x.u + h * k.u, x.j + h * k.j, x.dj + h * k.dj};
    };
    S x{start, velocity, 0.0, len};
    const double h = 1.0 / steps;
    for (int i = 0; i < steps; ++i) {
        const S k1 = rate(x);
        const S k2 = rate(axpy(x, 0.5 * h, k1));
        const S k3 = rate(axpy(x, 0.5 * h, k2));
        const S k4 = rate(axpy(x, h, k3));
        x.p += (h / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
        x.u += (h / 6.0) * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
        x.j += (h / 6.0) * (k1.j + 2.0 * k2.j + 2.0 * k3.j + k4.j);
        x.dj += (h / 6.0) * (k1.dj + 2.0 * k2.dj + 2.0 * k3.dj + k4.dj);
        x.p = s.project(x.p);
        if (x.j <= 0.0) throw NumericalError("conjugate point on the geodesic segment");
    }
    out.theta = x.j / len;
    out.eta = -0.5 * (x.dj / x.j - 1.0) / len;
    return out;
}

double jacobi_theta(const ParamSurface& s, const GeodesicSolution& g) {
    if (!g.converged) throw UsageError("jacobi_theta needs a converged geodesic");
    if (g.points.empty() || g.length == 0.0) return 1.0;
    return jacobi_along(s, g.points.back(), -g.velocities.back(), 200).theta;
}

// ---------------------------------------------------------------- shooting

namespace {

struct Shot {
    Vec3 w;
    Vec3 end = Vec3::Zero();
    Vec3 end_velocity = Vec3::Zero();
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
};

struct Fire {
    Vec3 end;
    Vec3 end_velocity;
    Eigen::Matrix<double, 3, 2> jac;  ///< d end / d c
};

// Geodesic from x with velocity E c, together with the exact derivative of
// the endpoint: radial directions map to the end velocity / L, the normal
// direction to f(1) times the transported normal, f'' = -K L^2 f.
Fire fire(const ParamSurface& s, const Vec3& x, const Eigen::Matrix<double, 3, 2>& e, const Vec3& normal,
          const Vec2& c) {
    const Vec3 w = e * c;
    const double len = w.norm();
    Fire out;
    if (len < 1e-12) {
        out.end = x;
        out.end_velocity = w;
        out.jac = e;
        return out;
    }
    const Vec3 uhat = w / len;
    const Vec3 perp0 = normal.cross(uhat);
    const int n = std::max(4, static_cast<int>(std::ceil(len / kGeodesicStep)));
    const double h = 1.0 / n;
    const double l2 = len * len;

    struct S {
        Vec3 p, u, t;
        double f, df;
    };
    auto rate = [&](const S& z) {
        const Vec3 g = s.implicit_gradient(z.p);
        const Mat3 hm = s.implicit_hessian(z.p);
        const double g2 = g.squaredNorm();
        const double k = g.dot(cofactor_sym(hm) * g) / (g2 * g2);
        return S{z.u, -(z.u.dot(hm * z.u) / g2) * g, -(z.t.dot(hm * z.u) / g2) * g, z.df, -k * l2 * z.f};
    };
    auto axpy = [](const S& z, double hh, const S& k) {
        return S{z.p + hh * k.p, z.u + hh * k.u, z.t + hh * k.t, z.f + hh * k.f, z.df + hh * k.df};
    };
    S z{x, w, perp0, 0.0, 1.0};
    for (int i = 0; i < n; ++i) {
        const S k1 = rate(z);
        const S k2 = rate(axpy(z, 0.5 * h, k1));
        const S k3 = rate(axpy(z, 0.5 * h, k2));
        const S k4 = rate(axpy(z, h, k3));
        z.p += (h / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
        z.u += (h / 6.0) * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
        z.t += (h / 6.0) * (k1.t + 2.0 * k2.t + 2.0 * k3.t + k4.t);
        z.f += (h / 6.0) * (k1.f + 2.0 * k2.f + 2.0 * k3.f + k4.f);
        z.df += (h / 6.0) * (k1.df + 2.0 * k2.df + 2.0 * k3.df + k4.df);
        z.p = s.project(z.p);
        const Vec3 nrm = s.implicit_gradient(z.p).normalized();
        z.u -= z.u.dot(nrm) * nrm;
        z.u *= len / z.u.norm();
        z.t -= z.t.dot(nrm) * nrm;
    }
    if (!z.p.allFinite()) throw NumericalError("geodesic integration produced a non-finite state");
    out.end = z.p;
    out.end_velocity = z.u;
    for (int i = 0; i < 2; ++i) {
        const Vec3 ei = e.col(i);
        out.jac.col(i) = ei.dot(uhat) * z.u / len + ei.dot(perp0) * z.f * z.t;
    }
    return out;
}

Shot newton_shoot(const ParamSurface& s, const Vec3& x, const Vec3& v, const Mat3& frame, const Vec3& w0) {
    const Eigen::Matrix<double, 3, 2> e = frame.leftCols<2>();
    const Vec3 normal = frame.col(2);
    Vec2 c = e.transpose() * w0;
    Fire cur = fire(s, x, e, normal, c);
    double rn = (cur.end - v).norm();
    Shot out;
    for (int it = 0; it < 40 && rn >= kShootTolerance; ++it) {
        const Vec3 res = cur.end - v;
        Vec2 step = (cur.jac.transpose() * cur.jac).ldlt().solve(-cur.jac.transpose() * res);
        if (!step.allFinite()) break;
        if (step.norm() > 1.0) step *= 1.0 / step.norm();
        bool improved = false;
        for (int ls = 0; ls < 8; ++ls) {
            const Vec2 cn = c + step;
            Fire trial = fire(s, x, e, normal, cn);
            const double tn = (trial.end - v).norm();
            if (tn < rn) {
                c = cn;
                cur = std::move(trial);
                rn = tn;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    out.w = e * c;
    out.end = cur.end;
    out.end_velocity = cur.end_velocity;
    out.residual = rn;
    out.converged = rn < kShootTolerance;
    return out;
}

// Radius below which a warm-started shot is trusted to be minimizing.
double trusted_radius(const ParamSurface& s) {
    const auto& p = s.parameters();
    if (s.kind() == ParamSurface::Kind::torus) {
        const double kmax = 1.0 / (p[1] * (p[0] + p[1]));
        return 0.9 * std::min(kPi / std::sqrt(kmax), kPi * std::min(p[1], p[0] - p[1]));
    }
    const double a = p[0], b = p[1], c = p[2];
    const double kmax = std::max({a * a / (b * b * c * c), b * b / (a * a * c * c), c * c / (a * a * b * b)});
    // Closed convex surface: the injectivity radius is at least pi / sqrt(K_max).
    return 0.99 * kPi / std::sqrt(kmax);
}

GeodesicSolution finish(const ParamSurface& s, const Vec3& x, const Shot& best, bool full_path) {
    GeodesicSolution sol;
    sol.converged = best.converged;
    sol.residual = best.residual;
    sol.initial_velocity = best.w;
    sol.length = best.w.norm();
    if (full_path) {
        integrate_geodesic(s, x, best.w, {}, &sol.points, &sol.velocities);
    } else {
        sol.points = {x, best.end};
        sol.velocities = {best.w, best.end_velocity};
    }
    sol.runner_up_length = std::numeric_limits<double>::infinity();
    return sol;
}

std::vector<Vec3> chart_candidates(const ParamSurface& s, const Vec3& x, const Vec3& v,
                                   const Mat3& frame) {
    std::vector<Vec3> out;
    const Vec2 qx = s.chart(x), qv = s.chart(v);
    const auto per = s.periodic();
    const auto j = s.embedding_jacobian(qx);
    const bool chart_ok = (j.transpose() * j).determinant() > 1e-6;
    Vec2 base = qv - qx;
    for (int i = 0; i < 2; ++i)
        if (per[static_cast<std::size_t>(i)]) base(i) = wrap_difference(base(i));
    const int k0 = per[0] ? 1 : 0, k1 = per[1] ? 1 : 0;
    if (chart_ok) {
        for (int a = -k0; a <= k0; ++a)
            for (int b = -k1; b <= k1; ++b) {
                const Vec2 dq = base + Vec2(a * kTwoPi, b * kTwoPi);
                out.push_back(j * dq);
            }
    }
    // Chord direction with the chord length, always available.
    const Vec3 n = frame.col(2);
    Vec3 chord = v - x;
    const double cl = chord.norm();
    chord -= chord.dot(n) * n;
    if (chord.norm() > 0.0) {
        out.push_back(chord * (cl / chord.norm()));
        out.push_back(-chord * ((kTwoPi * 0.5) / chord.norm()));
    }
    return out;
}

}  // namespace

GeodesicSolution geodesic_bvp_ambient(const ParamSurface& s, const Vec3& x, const Vec3& v) {
    SurfaceManifold m(s);
    return m.solve(x, v, nullptr, true);
}

GeodesicSolution geodesic_bvp(const ParamSurface& s, const Vec2& x, const Vec2& v) {
    return geodesic_bvp_ambient(s, s.embedding(x), s.embedding(v));
}

// ---------------------------------------------------------------- SurfaceManifold

SurfaceManifold::SurfaceManifold(ParamSurface s) : surface_(std::move(s)) {}

std::size_t SurfaceManifold::KeyHash::operator()(const Key& k) const {
    std::size_t h = 1469598103934665603ull;
    for (auto q : k.q) {
        h ^= static_cast<std::size_t>(q) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
}

SurfaceManifold::Key SurfaceManifold::quantize(const Vec3& x, const Vec3& v) {
    Key k;
    for (int i = 0; i < 3; ++i) {
        k.q[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::llround(x(i) / 1e-3));
        k.q[static_cast<std::size_t>(i + 3)] = static_cast<std::int64_t>(std::llround(v(i) / 1e-3));
    }
    return k;
}

std::size_t SurfaceManifold::cache_size() const {
    std::shared_lock lock(cache_mutex_);
    return cache_.size();
}

GeodesicSolution SurfaceManifold::solve(const Vec3& x, const Vec3& v, const Vec3* hint, bool full_path) const {
    if ((x - v).norm() < 1e-14) {
        GeodesicSolution sol;
        sol.converged = true;
        sol.points = {x, x};
        sol.velocities = {Vec3::Zero(), Vec3::Zero()};
        sol.runner_up_length = std::numeric_limits<double>::infinity();
        return sol;
    }
    Vec3 normal;
    const Mat3 frame = tangent_frame3(surface_, x, &normal);
    auto tangent = [&](const Vec3& w) { return Vec3(w - w.dot(normal) * normal); };

    if (hint) {
        const Shot shot = newton_shoot(surface_, x, v, frame, tangent(*hint));
        if (shot.converged && shot.w.norm() < trusted_radius(surface_)) return finish(surface_, x, shot, full_path);
    }

    std::vector<Vec3> starts;
    if (hint) starts.push_back(tangent(*hint));
    const Key key = quantize(x, v);
    {
        std::shared_lock lock(cache_mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) starts.push_back(tangent(it->second));
    }
    for (const Vec3& c : chart_candidates(surface_, x, v, frame)) starts.push_back(c);

    std::vector<Shot> converged;
    double best_residual = std::numeric_limits<double>::infinity();
    for (const Vec3& w0 : starts) {
        const Shot shot = newton_shoot(surface_, x, v, frame, w0);
        best_residual = std::min(best_residual, shot.residual);
        if (!shot.converged) continue;
        const bool dup = std::any_of(converged.begin(), converged.end(),
                                     [&](const Shot& o) { return (o.w - shot.w).norm() < 1e-6; });
        if (!dup) converged.push_back(shot);
    }
    if (converged.empty()) {
        // Fan of directions around x, for chart poles and nearly antipodal pairs.
        const double len = 0.5 * kPi * (v - x).norm();
        for (int k = 0; k < 8; ++k) {
            const double a = k * kTwoPi / 8;
            const Vec3 w0 = len * (std::cos(a) * frame.col(0) + std::sin(a) * frame.col(1));
            starts.push_back(w0);
            const Shot shot = newton_shoot(surface_, x, v, frame, w0);
            best_residual = std::min(best_residual, shot.residual);
            if (!shot.converged) continue;
            const bool dup = std::any_of(converged.begin(), converged.end(),
                                         [&](const Shot& o) { return (o.w - shot.w).norm() < 1e-6; });
            if (!dup) converged.push_back(shot);
        }
    }
    if (converged.empty()) {
        std::ostringstream os;
        os << "geodesic BVP did not converge from " << starts.size()
           << " restarts (best endpoint residual " << best_residual << ")";
        throw NumericalError(os.str());
    }
    std::sort(converged.begin(), converged.end(),
              [](const Shot& a, const Shot& b) { return a.w.norm() < b.w.norm(); });
    GeodesicSolution sol = finish(surface_, x, converged.front(), full_path);
    if (converged.size() > 1) {
        sol.runner_up_length = converged[1].w.norm();
        sol.near_cut = sol.runner_up_length - sol.length < 2.0 * kCutEpsilon;
    }
    if (!sol.near_cut) {
        std::unique_lock lock(cache_mutex_);
        cache_[key] = converged.front().w;
    }
    return sol;
}

void SurfaceManifold::validate_point(const Point& x) const {
    if (x.size() != 3) throw UsageError(id() + " points need 3 ambient coordinates");
    if (!x.allFinite() || std::abs(surface_.implicit(x)) > 1e-8)
        throw UsageError("point does not lie on " + id());
}

Point SurfaceManifold::project_point(const Point& x) const {
    if (x.size() != 3) throw UsageError(id() + " points need 3 ambient coordinates");
    return surface_.project(Vec3(x));
}

Tangent SurfaceManifold::project_tangent(const Point& x, const Tangent& w) const {
    const Vec3 n = surface_.implicit_gradient(Vec3(x)).normalized();
    return w - w.dot(n) * n;
}

double SurfaceManifold::distance(const Point& x, const Point& v) const {
    if (x.size() != 3 || v.size() != 3) throw UsageError("points belong to different manifolds");
    return solve(x, v, nullptr, false).length;
}

LogResult SurfaceManifold::log_map(const Point& x, const Point& v) const {
    const GeodesicSolution sol = solve(x, v, nullptr, false);
    if (sol.near_cut) return {Tangent::Zero(3), true};
    return {sol.initial_velocity, false};
}

Point SurfaceManifold::exp_map(const Point& x, const Tangent& w) const {
    return integrate_geodesic(surface_, x, project_tangent(x, w)).position;
}

CutLocusInfo SurfaceManifold::cut_locus_query(const Point& x, const Point& v) const {
    const GeodesicSolution sol = solve(x, v, nullptr, false);
    CutLocusInfo info;
    info.is_near_cut = sol.near_cut;
    info.distance_to_cut = sol.near_cut ? 0.0 : 0.5 * (sol.runner_up_length - sol.length);
    return info;
}

double SurfaceManifold::theta_jacobian(const Point& v, const Point& x) const {
    const GeodesicSolution sol = solve(x, v, nullptr, false);
    if (sol.near_cut) throw NumericalError("Theta is undefined at the cut locus");
    return jacobi_theta(surface_, sol);
}

double SurfaceManifold::d_r_log_theta_negsqrt(const Point& v, const Point& x) const {
    const GeodesicSolution sol = solve(x, v, nullptr, false);
    if (sol.near_cut) throw NumericalError("eta integrand is undefined at the cut locus");
    if (sol.length == 0.0) return 0.0;
    return jacobi_along(surface_, sol.points.back(), -sol.velocities.back(), 200).eta;
}

RadialInfo SurfaceManifold::radial_info(const Point& x, const Point& v, bool need_eta,
                                        const Tangent* hint) const {
    Vec3 h;
    if (hint && hint->size() == 3 && hint->norm() > 0.0) h = *hint;
    const GeodesicSolution sol = solve(x, v, (hint && hint->norm() > 0.0) ? &h : nullptr, false);
    RadialInfo info;
    info.r = sol.length;
    info.at_cut = sol.near_cut;
    info.log = sol.near_cut ? Tangent(Tangent::Zero(3)) : Tangent(sol.initial_velocity);
    if (need_eta && !sol.near_cut && sol.length > 0.0) {
        const int steps = std::clamp(static_cast<int>(std::ceil(sol.length / 0.015)), 16, 200);
        info.eta = jacobi_along(surface_, sol.points.back(), -sol.velocities.back(), steps).eta;
    }
    return info;
}

FramePoint SurfaceManifold::parallel_transport_step(const FramePoint& f, const Tangent& w) const {
    std::vector<Vec3> cols;
    for (Eigen::Index i = 0; i < f.frame.cols(); ++i) cols.emplace_back(f.frame.col(i));
    GeodesicFlow flow = integrate_geodesic(surface_, f.base, project_tangent(f.base, w), std::move(cols));
    FramePoint out{flow.position, Mat(3, f.frame.cols())};
    for (Eigen::Index i = 0; i < f.frame.cols(); ++i)
        out.frame.col(i) = flow.transported[static_cast<std::size_t>(i)];
    return out;
}

Mat SurfaceManifold::default_frame(const Point& x) const {
    return tangent_frame3(surface_, x).leftCols<2>();
}

}  // namespace rbridge
