#include "rbridge/estimators.hpp"

#include "rbridge/errors.hpp"
#include "rbridge/flat.hpp"
#include "rbridge/io.hpp"
#include "rbridge/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rbridge {

namespace {

constexpr double kPi = std::numbers::pi;

double max_of(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    return m;
}

/// Wrapped Gaussian density of a flat product with 5 images per periodic axis.
double flat_image_sum(const FlatProduct& m, const Point& x, const Point& y, double T) {
    const int d = m.dim();
    const Vec diff = m.wrapped_difference(x, y);
    double total = 0.0;
    std::vector<int> k(static_cast<std::size_t>(d), -2);
    for (int i = 0; i < d; ++i)
        if (!m.is_periodic(i)) k[static_cast<std::size_t>(i)] = 0;
    for (;;) {
        double sq = 0.0;
        for (int i = 0; i < d; ++i) {
            const double o = diff(i) + 2.0 * kPi * k[static_cast<std::size_t>(i)];
            sq += o * o;
        }
        total += std::exp(-sq / (2.0 * T));
        int i = 0;
        for (; i < d; ++i) {
            auto& ki = k[static_cast<std::size_t>(i)];
            if (!m.is_periodic(i)) continue;
            if (ki < 2) {
                ++ki;
                break;
            }
            ki = -2;
        }
        if (i == d) break;
    }
    return total * std::pow(2.0 * kPi * T, -0.5 * d);
}

}  // namespace

WeightedMean conditional_expectation(const std::vector<double>& values, const std::vector<double>& log_weights) {
    if (values.size() != log_weights.size() || values.empty())
        throw UsageError("conditional_expectation needs matching, nonempty inputs");
    const double shift = max_of(log_weights);
    if (!std::isfinite(shift)) throw NumericalError("degenerate weights: all importance weights are zero");
    double sw = 0.0, sw2 = 0.0, swf = 0.0;
    std::vector<double> w(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        w[i] = std::exp(log_weights[i] - shift);
        sw += w[i];
        sw2 += w[i] * w[i];
        swf += w[i] * values[i];
    }
    if (!(sw > 0.0)) throw NumericalError("degenerate weights: all importance weights are zero");
    WeightedMean out;
    out.value = swf / sw;
    double var = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double dev = w[i] * (values[i] - out.value);
        var += dev * dev;
    }
    out.std_error = std::sqrt(var) / sw;
    out.ess = sw * sw / sw2;
    out.low_confidence = out.ess < 0.01 * static_cast<double>(values.size());
    return out;
}

WeightedMean conditional_expectation(const std::function<double(const BridgePath&)>& f,
                                     const std::vector<BridgePath>& ensemble) {
    std::vector<double> vals, lw;
    vals.reserve(ensemble.size());
    lw.reserve(ensemble.size());
    for (const auto& p : ensemble) {
        vals.push_back(f(p));
        lw.push_back(p.log_phi);
    }
    return conditional_expectation(vals, lw);
}

DensityEstimate heat_kernel_bm(const Manifold& m, const Point& x0, const Point& v, double T,
                               const std::vector<BridgePath>& ensemble, int steps) {
    if (ensemble.empty()) throw UsageError("heat_kernel_bm needs a nonempty ensemble");
    std::vector<double> lw;
    lw.reserve(ensemble.size());
    for (const auto& p : ensemble) lw.push_back(p.log_phi);
    const double shift = max_of(lw);
    if (!std::isfinite(shift)) throw NumericalError("degenerate weights: all importance weights are zero");
    double sw = 0.0, sw2 = 0.0;
    for (double l : lw) {
        const double w = std::exp(l - shift);
        sw += w;
        sw2 += w * w;
    }
    const double n = static_cast<double>(lw.size());
    const double mean = sw / n;
    const double var = std::max(0.0, sw2 / n - mean * mean) * n / std::max(1.0, n - 1.0);

    const double r0 = m.distance(x0, v);
    const double log_pref = -0.5 * m.dim() * std::log(2.0 * kPi * T) - r0 * r0 / (2.0 * T);
    DensityEstimate e;
    e.log_value = log_pref + shift + std::log(mean);
    e.value = std::exp(e.log_value);
    e.std_error = std::exp(log_pref + shift) * std::sqrt(var / n);
    e.ess = sw * sw / sw2;
    e.low_confidence = e.ess < 0.01 * n;
    e.paths = static_cast<int>(lw.size());
    e.steps = steps;
    e.T = T;
    return e;
}

DensityEstimate heat_kernel_bm(const Manifold& m, const BridgeConfig& cfg) {
    BridgeConfig c = cfg;
    c.guided = true;
    c.track_likelihood = true;
    c.record_stride = std::max(cfg.record_stride, cfg.steps);
    const auto ens = sample_ensemble(m, c, DriverSpec::brownian(m.dim()));
    return heat_kernel_bm(m, c.start, c.target, c.T, ens, c.steps);
}

double sphere_heat_kernel_series(const Vec& x, const Vec& y, double t, int l_max) {
    if (!(t > 0.0)) throw UsageError("series time must be positive");
    if (x.size() != y.size() || x.size() < 2) throw UsageError("series points must be unit vectors of equal size");
    if (l_max < 0) throw UsageError("l_max must be >= 0");
    const int d = static_cast<int>(x.size()) - 1;
    const double c = std::clamp(x.dot(y) / (x.norm() * y.norm()), -1.0, 1.0);
    if (d == 1) {
        const double theta = std::acos(c);
        double s = 1.0;
        for (int l = 1; l <= l_max; ++l) s += 2.0 * std::exp(-l * l * t) * std::cos(l * theta);
        return s / (2.0 * kPi);
    }
    // Gegenbauer C_l^{alpha} with alpha = (d-1)/2 by the three-term recurrence.
    const double alpha = 0.5 * (d - 1);
    const double area = 2.0 * std::pow(kPi, 0.5 * (d + 1)) / std::tgamma(0.5 * (d + 1));
    double cm1 = 1.0, cl = 2.0 * alpha * c;
    double sum = cm1;
    for (int l = 1; l <= l_max; ++l) {
        if (l > 1) {
            const double next = (2.0 * (l - 1 + alpha) * c * cl - (l - 2 + 2.0 * alpha) * cm1) / l;
            cm1 = cl;
            cl = next;
        }
        sum += std::exp(-l * (l + d - 1.0) * t) * ((2.0 * l + d - 1.0) / (d - 1.0)) * cl;
    }
    return sum / area;
}

std::vector<ProfileRow> density_profile(const Manifold& m, const std::vector<Point>& targets,
                                        const BridgeConfig& cfg) {
    if (targets.empty()) throw UsageError("density profile needs at least one target");
    const auto* sphere = dynamic_cast<const Sphere*>(&m);
    const auto* flat = dynamic_cast<const FlatProduct*>(&m);
    std::vector<ProfileRow> rows;
    std::vector<std::string> errors;
    double arc = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        BridgeConfig c = cfg;
        c.target = targets[i];
        c.seed = cfg.seed + i;
        ProfileRow row;
        if (i > 0) arc += m.distance(targets[i - 1], targets[i]);
        row.arc = arc;
        row.target = targets[i];
        try {
            row.estimate = heat_kernel_bm(m, c);
        } catch (const std::exception& e) {
            errors.push_back("target " + std::to_string(i) + ": " + e.what());
            continue;
        }
        const double r = m.distance(cfg.start, targets[i]);
        row.euclidean = std::pow(2.0 * kPi * cfg.T, -0.5 * m.dim()) * std::exp(-r * r / (2.0 * cfg.T));
        if (sphere)
            row.series = sphere_heat_kernel_series(cfg.start, targets[i], 0.5 * cfg.T);
        else if (flat)
            row.series = flat_image_sum(*flat, cfg.start, targets[i], cfg.T);
        else
            row.series = std::numeric_limits<double>::quiet_NaN();
        rows.push_back(std::move(row));
    }
    if (!errors.empty()) {
        std::string msg = std::to_string(errors.size()) + " profile points failed";
        for (const auto& e : errors) msg += "; " + e;
        throw NumericalError(msg);
    }
    return rows;
}

std::string profile_to_csv(const std::vector<ProfileRow>& rows) {
    std::vector<std::string> header{"arc"};
    const auto m = rows.empty() ? 0 : rows.front().target.size();
    for (Eigen::Index i = 0; i < m; ++i) header.push_back("coord_" + std::to_string(i));
    for (const char* h : {"estimate", "std_error", "ess", "series", "euclidean"}) header.emplace_back(h);
    std::string out = csv_line(header);
    for (const auto& r : rows) {
        std::vector<std::string> f{format_real(r.arc)};
        for (Eigen::Index i = 0; i < m; ++i) f.push_back(format_real(r.target(i)));
        f.push_back(format_real(r.estimate.value));
        f.push_back(format_real(r.estimate.std_error));
        f.push_back(format_real(r.estimate.ess));
        f.push_back(std::isnan(r.series) ? std::string() : format_real(r.series));
        f.push_back(format_real(r.euclidean));
        out += csv_line(f);
    }
    return out;
}

double log_likelihood(const Manifold& m, const Point& mean, const std::vector<Point>& data, double T,
                      const MeanOptions& opt) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        BridgeConfig c;
        c.manifold = m.id();
        c.start = mean;
        c.target = data[i];
        c.T = T;
        c.steps = opt.steps;
        c.paths = opt.paths;
        c.seed = opt.seed * 1000003ull + i;
        c.threads = opt.threads;
        total += heat_kernel_bm(m, c).log_value;
    }
    if (!std::isfinite(total)) throw NumericalError("estimation error: non-finite log-likelihood");
    return total;
}

MeanEstimate diffusion_mean(const Manifold& m, const std::vector<Point>& data, double T, const MeanOptions& opt) {
    if (data.empty()) throw UsageError("diffusion mean needs at least one data point");
    if (!(T > 0.0)) throw UsageError("T must be positive");
    Point cur;
    if (opt.initial) {
        cur = m.project_point(*opt.initial);
    } else {
        Vec avg = Vec::Zero(data.front().size());
        for (const auto& y : data) avg += y;
        cur = m.project_point(avg / static_cast<double>(data.size()));
    }
    m.validate_point(cur);
    const double n = static_cast<double>(data.size());
    double alpha = opt.step_size * T / n;

    MeanEstimate out;
    double ll = log_likelihood(m, cur, data, T, opt);
    for (int it = 0; it < opt.max_iters; ++it) {
        const Mat e = m.default_frame(cur);
        Tangent grad = Tangent::Zero(cur.size());
        for (Eigen::Index i = 0; i < e.cols(); ++i) {
            const Tangent h = opt.chart_step * e.col(i);
            const double lp = log_likelihood(m, m.exp_map(cur, h), data, T, opt);
            const double lm = log_likelihood(m, m.exp_map(cur, -h), data, T, opt);
            grad += (lp - lm) / (2.0 * opt.chart_step) * e.col(i);
        }
        const double gnorm = m.norm(cur, grad);
        out.iterates.push_back(cur);
        out.log_likelihoods.push_back(ll);
        out.gradient_norms.push_back(gnorm);
        out.iterations = it;
        if (gnorm / n < opt.tol) {
            out.converged = true;
            out.step_sizes.push_back(0.0);
            return out;
        }
        double a = alpha;
        bool accepted = false;
        for (int bt = 0; bt < 12; ++bt) {
            const Point cand = m.exp_map(cur, a * grad);
            const double lc = log_likelihood(m, cand, data, T, opt);
            if (lc >= ll) {
                cur = cand;
                ll = lc;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        out.step_sizes.push_back(accepted ? a : 0.0);
        if (!accepted) {
            // No ascent direction at the current resolution: report the iterate.
            out.iterations = it + 1;
            out.iterates.push_back(cur);
            out.log_likelihoods.push_back(ll);
            out.gradient_norms.push_back(gnorm);
            return out;
        }
    }
    out.iterations = opt.max_iters;
    out.iterates.push_back(cur);
    out.log_likelihoods.push_back(ll);
    out.gradient_norms.push_back(std::numeric_limits<double>::quiet_NaN());
    return out;
}

nlohmann::ordered_json to_json(const DensityEstimate& e) {
    nlohmann::ordered_json j;
    j["value"] = e.value;
    j["log_value"] = e.log_value;
    j["std_error"] = e.std_error;
    j["ess"] = e.ess;
    j["low_confidence"] = e.low_confidence;
    j["paths"] = e.paths;
    j["steps"] = e.steps;
    j["T"] = e.T;
    return j;
}

nlohmann::ordered_json to_json(const MeanEstimate& e) {
    nlohmann::ordered_json j;
    j["converged"] = e.converged;
    j["iterations"] = e.iterations;
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : e.iterates) pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    j["estimate"] = pts.empty() ? nlohmann::ordered_json() : pts.back();
    j["iterates"] = pts;
    j["log_likelihoods"] = e.log_likelihoods;
    auto g = nlohmann::ordered_json::array();
    for (double x : e.gradient_norms) g.push_back(std::isnan(x) ? nlohmann::ordered_json() : nlohmann::ordered_json(x));
    j["gradient_norms"] = g;
    j["step_sizes"] = e.step_sizes;
    return j;
}

}  // namespace rbridge
