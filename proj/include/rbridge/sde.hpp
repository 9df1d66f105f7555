#pragma once

#include "rbridge/driver.hpp"
#include "rbridge/likelihood.hpp"
#include "rbridge/manifold.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rbridge {

struct BridgeConfig {
    std::string manifold = "sphere2";
    Point start;
    Point target;
    double T = 1.0;
    int steps = 1000;  ///< N; the grid is t_k = k T / N and paths stop at t_{N-1}
    int paths = 1;
    std::uint64_t seed = 0;
    bool guided = true;
    std::optional<double> drift_cap;
    /// Grid t_k = T (1 - (1 - k/N)^2), refined near T.
    bool geometric_grid = false;
    /// Stop after this many steps (default N - 1, i.e. at t_{N-1}).
    int stop_step = -1;
    /// Keep every k-th state; the first and last are always kept.
    int record_stride = 1;
    /// Keep per-step increments, drifts and radial directions.
    bool record_increments = false;
    bool keep_frames = false;
    /// Compute the eta integrand and the Brownian accumulator.
    bool track_likelihood = true;
    /// Also run the general accumulator.
    bool general_likelihood = false;
    GeneralMode general_mode = GeneralMode::consistent;
    /// Multiplies the guiding drift; -1 is the mutation hook used by self-checks.
    double drift_sign = 1.0;
    int threads = 0;  ///< 0 uses hardware concurrency

    void validate(const Manifold& m) const;
    int last_step() const { return stop_step >= 0 ? stop_step : steps - 1; }
    double time_at(int k) const;
};

struct BridgePath {
    std::vector<double> times;
    std::vector<Point> states;
    std::vector<Mat> frames;
    std::vector<double> radials;
    std::vector<double> log_phi_partial;
    /// Per step (record_increments): driver increment, guiding drift times dt,
    /// radial direction and radius at the start of the step.
    std::vector<Vec> increments;
    std::vector<Vec> drift_increments;
    std::vector<Vec> xis;
    std::vector<double> step_radials;
    std::vector<double> step_times;

    double log_phi = 0.0;
    double log_phi_general = 0.0;
    double log_psi = 0.0;
    double log_d = 0.0;  ///< log dQ/dP accumulated online
    double eta_accum = 0.0;
    double local_time_accum = 0.0;
    long cut_crossings = 0;
    long capped_steps = 0;
    bool guided = true;

    const Point& terminal() const { return states.back(); }
    double terminal_radial() const { return radials.back(); }
};

/// Moves along exp(sum_i dz_i frame_i), transports and re-orthonormalizes the frame.
FramePoint develop_step(const Manifold& m, const FramePoint& f, const Vec& dz);

/// U^{-1}(Log_x v)/(T - t) in frame coordinates; zero in the cut band.
/// With a cap, the result is rescaled to norm <= cap.
Vec guided_drift(const Manifold& m, const FramePoint& f, const Point& v, double t, double T,
                 std::optional<double> cap = std::nullopt);

/// Simulates one path; deterministic in (cfg.seed, path_index).
BridgePath simulate_path(const Manifold& m, const BridgeConfig& cfg, const DriverSpec& spec,
                         std::uint64_t path_index);

/// Paths 0..M-1, executed concurrently, returned in index order.
std::vector<BridgePath> sample_ensemble(const Manifold& m, const BridgeConfig& cfg, const DriverSpec& spec);

/// Endpoints at time T of unconditioned Brownian motion from `start`,
/// developed with `steps` geodesic steps; path i uses stream (seed, i).
std::vector<Point> sample_endpoints(const Manifold& m, const Point& start, double T, int steps, int count,
                                    std::uint64_t seed, int threads = 0);

/// Writes time, coord_0..coord_{m-1}, radial, log_phi_partial.
std::string path_to_csv(const BridgePath& path);

}  // namespace rbridge
