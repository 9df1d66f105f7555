#include "rbridge/sde.hpp"

#include "rbridge/errors.hpp"
#include "rbridge/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace rbridge {

void BridgeConfig::validate(const Manifold& m) const {
    if (steps < 2) throw UsageError("steps must be >= 2");
    if (!(T > 0.0) || !std::isfinite(T)) throw UsageError("T must be positive");
    if (paths < 1) throw UsageError("paths must be >= 1");
    if (record_stride < 1) throw UsageError("record_stride must be >= 1");
    if (stop_step == 0 || stop_step > steps - 1) throw UsageError("stop_step must lie in 1..steps-1");
    if (drift_cap && !(*drift_cap > 0.0)) throw UsageError("drift_cap must be positive");
    m.validate_point(start);
    m.validate_point(target);
}

double BridgeConfig::time_at(int k) const {
    const double u = static_cast<double>(k) / steps;
    if (geometric_grid) return T * (1.0 - (1.0 - u) * (1.0 - u));
    return T * u;
}

FramePoint develop_step(const Manifold& m, const FramePoint& f, const Vec& dz) {
    if (dz.size() != f.frame.cols()) throw UsageError("increment dimension does not match the frame");
    FramePoint out = m.parallel_transport_step(f, f.frame * dz);
    m.orthonormalize(out);
    return out;
}

Vec guided_drift(const Manifold& m, const FramePoint& f, const Point& v, double t, double T,
                 std::optional<double> cap) {
    if (!(t < T)) throw UsageError("guided drift needs t < T");
    const LogResult lg = m.log_map(f.base, v);
    Vec b = Vec::Zero(f.frame.cols());
    if (lg.at_cut) return b;
    b = m.frame_coords(f, lg.vector) / (T - t);
    if (cap && b.norm() > *cap) b *= *cap / b.norm();
    return b;
}

namespace {

Vec radial_direction(const Manifold& m, const FramePoint& f, const RadialInfo& info) {
    if (info.at_cut || info.r <= 0.0) return Vec::Zero(f.frame.cols());
    return -m.frame_coords(f, info.log) / info.r;
}

}  // namespace

BridgePath simulate_path(const Manifold& m, const BridgeConfig& cfg, const DriverSpec& spec,
                         std::uint64_t path_index) {
    if (spec.dim != m.dim()) throw UsageError("driver dimension must equal the manifold dimension");
    const int last = cfg.last_step();
    const double T = cfg.T;
    const int d = m.dim();
    const Point& v = cfg.target;
    const bool need_eta = cfg.track_likelihood;

    PhiloxStream rng(cfg.seed, path_index);
    FramePoint f{cfg.start, m.default_frame(cfg.start)};
    RadialInfo info = m.radial_info(f.base, v, need_eta, nullptr);
    Vec xi = radial_direction(m, f, info);

    BridgePath path;
    path.guided = cfg.guided;
    LikelihoodState bm;
    bm.r = info.r;
    bm.z = Vec::Zero(d);
    bm.xi = xi;
    LikelihoodState gen = bm;

    auto record = [&](int k) {
        path.times.push_back(cfg.time_at(k));
        path.states.push_back(f.base);
        path.radials.push_back(info.r);
        path.log_phi_partial.push_back(bm.log_phi);
        if (cfg.keep_frames) path.frames.push_back(f.frame);
    };
    record(0);

    Vec z = Vec::Zero(d);
    Vec normal(d);
    for (int k = 0; k < last; ++k) {
        const double t = cfg.time_at(k);
        const double dt = cfg.time_at(k + 1) - t;
        const double tau = T - t;

        Vec drift = Vec::Zero(d);
        if (info.at_cut) ++path.cut_crossings;
        if (cfg.guided && !info.at_cut) {
            drift = cfg.drift_sign * m.frame_coords(f, info.log) / tau;
            if (cfg.drift_cap && drift.norm() > *cfg.drift_cap) {
                drift *= *cfg.drift_cap / drift.norm();
                ++path.capped_steps;
            }
        }

        for (int i = 0; i < d; ++i) normal(i) = rng.normal();
        const Vec dz = driver_increment(spec, t, z, dt, normal);
        const Vec noise = spec.is_brownian ? dz : Vec(dz - spec.drift_at(t, z) * dt);

        if (cfg.record_increments) {
            path.increments.push_back(dz);
            path.drift_increments.push_back(drift * dt);
            path.xis.push_back(xi);
            path.step_radials.push_back(info.r);
            path.step_times.push_back(t);
        }

        if (cfg.track_likelihood) bm = update_log_phi_bm(bm, dt, T, info.eta, info.at_cut);
        {
            const Vec axi = spec.is_brownian ? xi : Vec(spec.precision_at(t, z) * xi);
            path.log_d += -info.r / tau * axi.dot(noise) + 0.5 * info.r * info.r * xi.dot(axi) / (tau * tau) * dt;
        }

        const Vec move = dz + drift * dt;
        const Vec log_coords = info.at_cut ? Vec() : Vec(m.frame_coords(f, info.log) - move);
        f = develop_step(m, f, move);
        if (!f.base.allFinite() || !f.frame.allFinite())
            throw StepError("non-finite state in path " + std::to_string(path_index), static_cast<std::size_t>(k));
        z += dz;

        // Warm start: the old Log in frame coordinates, shifted by the step.
        const Tangent hint = log_coords.size() ? Tangent(f.frame * log_coords) : Tangent();
        info = m.radial_info(f.base, v, need_eta, hint.size() ? &hint : nullptr);
        xi = radial_direction(m, f, info);
        bm.r = info.r;

        if (cfg.general_likelihood) {
            try {
                gen = update_log_phi_general(gen, T, spec, GeneralStep{dt, info.r, z, xi, noise}, cfg.general_mode);
            } catch (const NumericalError& e) {
                throw StepError(e.what(), static_cast<std::size_t>(k));
            }
        }

        if ((k + 1) % cfg.record_stride == 0 || k + 1 == last) record(k + 1);
    }

    const double t_end = cfg.time_at(last);
    path.log_phi = bm.log_phi;
    path.log_phi_general = gen.log_phi;
    path.eta_accum = bm.eta_accum;
    path.local_time_accum = bm.local_time_accum;
    path.log_psi = log_psi(t_end, T, info.r, spec, z, xi);
    if (!std::isfinite(path.log_phi)) throw StepError("non-finite log phi", static_cast<std::size_t>(last));
    return path;
}

std::vector<BridgePath> sample_ensemble(const Manifold& m, const BridgeConfig& cfg, const DriverSpec& spec) {
    cfg.validate(m);
    const auto count = static_cast<std::size_t>(cfg.paths);
    std::vector<BridgePath> out(count);
    std::vector<std::string> errors(count);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                out[i] = simulate_path(m, cfg, spec, i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                failed = true;
            }
        }
    };
    unsigned threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
    threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(std::min<std::size_t>(count, 256)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed) {
        std::size_t n = 0, first = count;
        for (std::size_t i = 0; i < count; ++i)
            if (!errors[i].empty()) {
                ++n;
                first = std::min(first, i);
            }
        throw NumericalError(std::to_string(n) + " of " + std::to_string(count) + " paths failed; path " +
                             std::to_string(first) + ": " + errors[first]);
    }
    return out;
}

std::vector<Point> sample_endpoints(const Manifold& m, const Point& start, double T, int steps, int count,
                                    std::uint64_t seed, int threads) {
    if (count < 1) throw UsageError("sample count must be >= 1");
    if (steps < 1) throw UsageError("steps must be >= 1");
    BridgeConfig c;
    c.manifold = m.id();
    c.start = start;
    c.target = start;
    c.guided = false;
    c.track_likelihood = false;
    // The engine stops one step short of its horizon; extend it by one step.
    c.steps = steps + 1;
    c.T = T * c.steps / static_cast<double>(steps);
    c.stop_step = steps;
    c.record_stride = c.steps;
    c.paths = count;
    c.seed = seed;
    c.threads = threads;
    const auto ens = sample_ensemble(m, c, DriverSpec::brownian(m.dim()));
    std::vector<Point> out;
    out.reserve(ens.size());
    for (const auto& p : ens) out.push_back(p.terminal());
    return out;
}

std::string path_to_csv(const BridgePath& path) {
    std::vector<std::string> header{"time"};
    const auto m = path.states.empty() ? 0 : path.states.front().size();
    for (Eigen::Index i = 0; i < m; ++i) header.push_back("coord_" + std::to_string(i));
    header.push_back("radial");
    header.push_back("log_phi_partial");
    std::string out = csv_line(header);
    for (std::size_t k = 0; k < path.states.size(); ++k) {
        std::vector<double> row{path.times[k]};
        for (Eigen::Index i = 0; i < m; ++i) row.push_back(path.states[k](i));
        row.push_back(path.radials[k]);
        row.push_back(path.log_phi_partial[k]);
        out += csv_line(row);
    }
    return out;
}

}  // namespace rbridge
