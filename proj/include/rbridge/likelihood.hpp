#pragma once

#include "rbridge/driver.hpp"
#include "rbridge/manifold.hpp"

#include <nlohmann/json.hpp>

namespace rbridge {

struct BridgePath;

/// Running Girsanov quantities of one guided path.
struct LikelihoodState {
    double t = 0.0;
    double r = 0.0;
    Vec z;   ///< driver state
    Vec xi;  ///< frame coordinates of the unit radial direction
    double log_phi = 0.0;
    double log_psi = 0.0;
    double local_time_accum = 0.0;  ///< time spent in the cut band
    double eta_accum = 0.0;         ///< integral of d/dr log Theta^{-1/2}
    double log_d = 0.0;             ///< log dQ/dP of the guided path so far
};

/// Partial derivatives of g(t, r, z, xi) = r^2 |sigma^{-1} xi|^2 / (T - t).
struct GFunctionTerms {
    Mat A;  ///< (sigma sigma^T)^{-1}
    double E = 0.0, F = 0.0, G = 0.0;
    Vec H, I, J;
    Mat Jij, K;  ///< K(i, j) = d^2 g / d xi_i d z_j
};

double g_value(double t, double T, double r, const Vec& z, const Vec& xi, const DriverSpec& spec);
GFunctionTerms g_terms(double t, double T, double r, const Vec& z, const Vec& xi, const DriverSpec& spec);

/// One step of a guided path as seen by the general accumulator.
struct GeneralStep {
    double dt = 0.0;
    double r_next = 0.0;
    Vec z_next;    ///< driver state after the step
    Vec xi_next;   ///< radial direction after the step
    Vec noise;     ///< martingale part sigma sqrt(dt) xi of the driver increment
};

/// Second-order Ito expansion of dg - E dt from the g-function terms with
/// quadratic variations taken as products of increments.
double g_expansion_increment(const LikelihoodState& s, double T, const DriverSpec& spec, const GeneralStep& step);

enum class GeneralMode {
    /// The expansion above used directly as -2 d log phi.
    expansion,
    /// -2 d log phi = dg - (noise^T A noise)/(T - t_next) + 2 d log D, with
    /// dg evaluated exactly; reduces to phi = 1 for Euclidean bridges.
    consistent,
};

/// Advances the general-semimartingale accumulator by one step. Throws
/// NumericalError on a non-finite increment.
LikelihoodState update_log_phi_general(const LikelihoodState& s, double T, const DriverSpec& spec,
                                       const GeneralStep& step, GeneralMode mode = GeneralMode::consistent);

/// Brownian accumulator: log phi += r/(T - t) * eta * dt, where eta is
/// d/dr log Theta_v^{-1/2}(x). Cut-band steps add to local_time_accum only.
LikelihoodState update_log_phi_bm(const LikelihoodState& s, double dt, double T, const Manifold& m,
                                  const Point& x, const Point& v);
/// Same with a precomputed radial evaluation.
LikelihoodState update_log_phi_bm(const LikelihoodState& s, double dt, double T, double eta, bool at_cut);

/// -g/2; equal to -r^2 / (2 (T - t)) for Brownian drivers.
double log_psi(double t, double T, double r, const DriverSpec& spec, const Vec& z, const Vec& xi);

/// log dQ/dP along a fully recorded Brownian path: -sum r_k/(T - t_k) <xi_k, dB_k>
/// - 1/2 sum r_k^2/(T - t_k)^2 dt_k, with dB_k the Brownian increment of the
/// unguided measure (driver increment plus guiding drift).
double log_radon_nikodym_bm(const BridgePath& path, double T);

/// (r0^2 + nu t^2/(T - t)) ((T - t)/t)^2 exp(lambda t).
double l2_radial_bound(double r0, double nu, double lambda, double t, double T);

nlohmann::ordered_json likelihood_summary(double log_phi, double log_psi, long cut_crossings, double eta_accum);

}  // namespace rbridge
