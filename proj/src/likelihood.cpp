#include "rbridge/likelihood.hpp"

#include "rbridge/errors.hpp"
#include "rbridge/sde.hpp"

#include <cmath>
#include <string>

namespace rbridge {

namespace {

double time_to_go(double t, double T) {
    const double tau = T - t;
    if (!(tau > 0.0)) throw UsageError("likelihood terms need t < T");
    return tau;
}

}  // namespace

double g_value(double t, double T, double r, const Vec& z, const Vec& xi, const DriverSpec& spec) {
    const double tau = time_to_go(t, T);
    if (spec.is_brownian) return r * r * xi.squaredNorm() / tau;
    return r * r * xi.dot(spec.precision_at(t, z) * xi) / tau;
}

GFunctionTerms g_terms(double t, double T, double r, const Vec& z, const Vec& xi, const DriverSpec& spec) {
    const double tau = time_to_go(t, T);
    const int d = spec.dim;
    GFunctionTerms g;
    g.A = spec.precision_at(t, z);
    const Vec axi = g.A * xi;
    const double q = xi.dot(axi);
    g.E = r * r * q / (tau * tau);
    g.F = 2.0 * r * q / tau;
    g.G = 2.0 * q / tau;
    g.I = (4.0 * r / tau) * axi;
    g.J = (2.0 * r * r / tau) * axi;
    g.Jij = (2.0 * r * r / tau) * g.A;
    g.H = Vec::Zero(d);
    g.K = Mat::Zero(d, d);
    if (!spec.is_constant_sigma) {
        for (int j = 0; j < d; ++j) {
            const Mat da = spec.d_precision_at(t, z, j);
            const Vec daxi = da * xi;
            g.H(j) = 2.0 * r / tau * xi.dot(daxi);
            g.K.col(j) = (2.0 * r * r / tau) * daxi;
        }
    }
    return g;
}

double g_expansion_increment(const LikelihoodState& s, double T, const DriverSpec& spec, const GeneralStep& step) {
    const double tau = time_to_go(s.t, T);
    const GFunctionTerms g = g_terms(s.t, T, s.r, s.z, s.xi, spec);
    const double dr = step.r_next - s.r;
    const Vec dz = step.z_next - s.z;
    const Vec dxi = step.xi_next - s.xi;
    double sum = g.F * dr + g.J.dot(dxi) + 0.5 * (g.G * dr * dr + dxi.dot(g.Jij * dxi)) +
                 dr * g.H.dot(dz) + dr * g.I.dot(dxi) + dxi.dot(g.K * dz);
    if (!spec.is_constant_sigma) {
        const Mat da = spec.precision_at(s.t + step.dt, step.z_next) - g.A;
        sum += s.r * s.r / tau * s.xi.dot(da * s.xi);
    }
    return sum;
}

LikelihoodState update_log_phi_general(const LikelihoodState& s, double T, const DriverSpec& spec,
                                       const GeneralStep& step, GeneralMode mode) {
    if (step.dt == 0.0) return s;
    const double tau = time_to_go(s.t, T);
    LikelihoodState out = s;
    out.t = s.t + step.dt;
    out.r = step.r_next;
    out.z = step.z_next;
    out.xi = step.xi_next;

    const Mat a = spec.precision_at(s.t, s.z);
    const double e_term = s.r * s.r * s.xi.dot(a * s.xi) / (tau * tau);
    const double two_dlogd = -2.0 * s.r / tau * s.xi.dot(a * step.noise) + e_term * step.dt;

    double inc = 0.0;
    if (mode == GeneralMode::expansion) {
        inc = g_expansion_increment(s, T, spec, step);
    } else {
        const bool in_band = s.xi.isZero(0.0) || step.xi_next.isZero(0.0);
        if (in_band) {
            out.local_time_accum += step.dt;
        } else {
            const double tau_next = time_to_go(out.t, T);
            const double dg = g_value(out.t, T, out.r, out.z, out.xi, spec) - g_value(s.t, T, s.r, s.z, s.xi, spec);
            inc = dg - step.noise.dot(a * step.noise) / tau_next + two_dlogd;
        }
    }
    if (!std::isfinite(inc)) throw NumericalError("likelihood error: non-finite general increment");
    out.log_phi -= 0.5 * inc;
    out.log_d += 0.5 * two_dlogd;
    if (out.t < T) out.log_psi = log_psi(out.t, T, out.r, spec, out.z, out.xi);
    return out;
}

LikelihoodState update_log_phi_bm(const LikelihoodState& s, double dt, double T, double eta, bool at_cut) {
    const double tau = time_to_go(s.t, T);
    LikelihoodState out = s;
    out.t = s.t + dt;
    if (at_cut) {
        out.local_time_accum += dt;
        return out;
    }
    const double inc = s.r / tau * eta * dt;
    if (!std::isfinite(inc)) throw NumericalError("likelihood error: non-finite Brownian increment");
    out.log_phi += inc;
    out.eta_accum += eta * dt;
    return out;
}

LikelihoodState update_log_phi_bm(const LikelihoodState& s, double dt, double T, const Manifold& m,
                                  const Point& x, const Point& v) {
    const CutLocusInfo cut = m.cut_locus_query(x, v);
    const double eta = cut.is_near_cut ? 0.0 : m.d_r_log_theta_negsqrt(v, x);
    return update_log_phi_bm(s, dt, T, eta, cut.is_near_cut);
}

double log_psi(double t, double T, double r, const DriverSpec& spec, const Vec& z, const Vec& xi) {
    const double tau = time_to_go(t, T);
    if (spec.is_brownian) return -0.5 * r * r / tau;
    return -0.5 * g_value(t, T, r, z, xi, spec);
}

double log_radon_nikodym_bm(const BridgePath& path, double T) {
    const std::size_t n = path.increments.size();
    if (n == 0 || path.xis.size() != n || path.step_radials.size() != n || path.step_times.size() != n ||
        path.drift_increments.size() != n)
        throw UsageError("log_radon_nikodym_bm needs a path recorded with per-step increments");
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = path.step_times[k];
        const double dt = (k + 1 < n ? path.step_times[k + 1] : path.times.back()) - t;
        const double tau = time_to_go(t, T);
        const double r = path.step_radials[k];
        const Vec db = path.increments[k] + path.drift_increments[k];
        acc += -r / tau * path.xis[k].dot(db) - 0.5 * r * r / (tau * tau) * dt;
    }
    return acc;
}

double l2_radial_bound(double r0, double nu, double lambda, double t, double T) {
    if (!(t > 0.0 && t < T)) throw UsageError("l2_radial_bound needs 0 < t < T");
    if (nu < 1.0 || lambda < 0.0) throw UsageError("l2_radial_bound needs nu >= 1 and lambda >= 0");
    const double ratio = (T - t) / t;
    return (r0 * r0 + nu * t * t / (T - t)) * ratio * ratio * std::exp(lambda * t);
}

nlohmann::ordered_json likelihood_summary(double log_phi, double log_psi_value, long cut_crossings, double eta_accum) {
    nlohmann::ordered_json j;
    j["log_phi"] = log_phi;
    j["log_psi"] = log_psi_value;
    j["cut_crossings"] = cut_crossings;
    j["eta_accum"] = eta_accum;
    return j;
}

}  // namespace rbridge
