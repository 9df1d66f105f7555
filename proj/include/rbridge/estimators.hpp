#pragma once

#include "rbridge/manifold.hpp"
#include "rbridge/sde.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <vector>

namespace rbridge {

/// Self-normalized importance-sampling result.
struct WeightedMean {
    double value = 0.0;
    double std_error = 0.0;
    double ess = 0.0;
    bool low_confidence = false;  ///< ESS below 1% of the sample size
};

/// sum w_i f_i / sum w_i with w_i = exp(log_w_i); delta-method standard error.
/// Throws NumericalError when all weights vanish.
WeightedMean conditional_expectation(const std::vector<double>& values, const std::vector<double>& log_weights);

/// Same for a path functional over an ensemble, weighted by log_phi.
WeightedMean conditional_expectation(const std::function<double(const BridgePath&)>& f,
                                     const std::vector<BridgePath>& ensemble);

struct DensityEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double ess = 0.0;
    bool low_confidence = false;
    int paths = 0;
    int steps = 0;
    double T = 0.0;
    double log_value = 0.0;  ///< log of value, finite even when value underflows
};

/// (2 pi T)^{-d/2} exp(-r0^2/(2T)) mean(exp(log_phi)) over a Brownian guided ensemble.
DensityEstimate heat_kernel_bm(const Manifold& m, const Point& x0, const Point& v, double T,
                               const std::vector<BridgePath>& ensemble, int steps);

/// Runs the ensemble described by cfg (start x0, target v) and estimates the density.
DensityEstimate heat_kernel_bm(const Manifold& m, const BridgeConfig& cfg);

/// Truncated zonal expansion of the heat kernel of e^{t Delta} on the unit
/// sphere S^d; x and y are unit vectors in R^{d+1}.
double sphere_heat_kernel_series(const Vec& x, const Vec& y, double t, int l_max = 16);

struct ProfileRow {
    double arc = 0.0;
    Point target;
    DensityEstimate estimate;
    double series = 0.0;     ///< NaN when no series is available
    double euclidean = 0.0;  ///< (2 pi T)^{-d/2} exp(-r^2/(2T))
};

/// heat_kernel_bm at each target; cfg.start is the source point. `series_time`
/// maps the Brownian horizon to the series time (T/2 for generator Delta/2).
std::vector<ProfileRow> density_profile(const Manifold& m, const std::vector<Point>& targets,
                                        const BridgeConfig& cfg);
std::string profile_to_csv(const std::vector<ProfileRow>& rows);

struct MeanOptions {
    int max_iters = 50;
    double tol = 0.05;          ///< chart-gradient norm per datum
    double step_size = 0.5;     ///< initial ascent step, scaled by T / n
    double chart_step = 1e-3;
    int paths = 64;
    int steps = 100;
    std::uint64_t seed = 0;
    int threads = 0;
    std::optional<Point> initial;
};

struct MeanEstimate {
    std::vector<Point> iterates;
    std::vector<double> log_likelihoods;
    std::vector<double> gradient_norms;
    std::vector<double> step_sizes;
    bool converged = false;
    int iterations = 0;
};

/// Sum over data of log heat_kernel_bm(m, y_i, T) with fixed seeds.
double log_likelihood(const Manifold& m, const Point& mean, const std::vector<Point>& data, double T,
                      const MeanOptions& opt);

/// Likelihood ascent with common-random-number finite-difference gradients.
MeanEstimate diffusion_mean(const Manifold& m, const std::vector<Point>& data, double T, const MeanOptions& opt);

nlohmann::ordered_json to_json(const DensityEstimate& e);
nlohmann::ordered_json to_json(const MeanEstimate& e);

}  // namespace rbridge
