// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 when any fails.

#include "rbridge/estimators.hpp"
#include "rbridge/flat.hpp"
#include "rbridge/likelihood.hpp"
#include "rbridge/sde.hpp"
#include "rbridge/so3.hpp"
#include "rbridge/sphere.hpp"
#include "rbridge/surface.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace rbridge;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Point polar_point(double angle) { return Eigen::Vector3d(std::sin(angle), 0.0, std::cos(angle)); }

std::vector<double> terminal_radials(const Manifold& m, BridgeConfig c) {
    c.record_stride = c.steps;
    c.track_likelihood = false;
    std::vector<double> out;
    for (const auto& p : sample_ensemble(m, c, DriverSpec::brownian(m.dim()))) out.push_back(p.terminal_radial());
    return out;
}

Outcome euclidean_reduction() {
    const auto m = make_manifold("flat-torus");
    BridgeConfig c;
    c.manifold = m->id();
    c.start = Eigen::Vector2d(1.0, 1.0);
    c.target = Eigen::Vector2d(2.5, 3.0);
    c.steps = 1000;
    c.paths = 500;
    c.seed = 101;
    c.record_stride = c.steps;
    std::vector<double> radials;
    double worst = 0.0;
    for (const auto& p : sample_ensemble(*m, c, DriverSpec::brownian(2))) {
        radials.push_back(p.terminal_radial());
        worst = std::max(worst, std::abs(p.log_phi));
    }
    const double med = median(radials);
    const double dt = c.T / c.steps;
    return {med < 0.05 && worst < 5 * dt,
            fmt("median terminal radial %.4f (< 0.05), max |log phi| %.2e (< %.1e)", med, worst, 5 * dt)};
}

struct SphereRun {
    double estimate, series, rel, ess;
};

SphereRun sphere_density(double T, double angle, int paths, std::uint64_t seed) {
    const Sphere s(2);
    BridgeConfig c;
    c.start = s.north();
    c.target = polar_point(angle);
    c.T = T;
    c.steps = 1000;
    c.paths = paths;
    c.seed = seed;
    const DensityEstimate e = heat_kernel_bm(s, c);
    const double series = sphere_heat_kernel_series(c.start, c.target, 0.5 * T);
    return {e.value, series, std::abs(e.value - series) / series, e.ess};
}

Outcome sphere_series(Outcome& antipode) {
    bool pass = true;
    double worst = 0.0;
    std::string worst_at;
    std::string anti;
    bool anti_pass = true;
    std::uint64_t seed = 200;
    for (double T : {0.5, 1.0, 2.0}) {
        for (int i = 0; i < 5; ++i) {
            const double angle = i * kPi / 5;
            const SphereRun r = sphere_density(T, angle, 10000, seed++);
            if (r.rel > worst) {
                worst = r.rel;
                worst_at = fmt("T=%.1f angle=%.3f mc=%.5g series=%.5g", T, angle, r.estimate, r.series);
            }
            pass = pass && r.rel <= 0.10;
        }
        const SphereRun a = sphere_density(T, kPi, 10000, seed++);
        anti_pass = anti_pass && a.rel <= 0.15;
        anti += fmt(" T=%.1f rel %.3f (ess %.0f);", T, a.rel, a.ess);
    }
    antipode = {anti_pass, "antipode, tolerance 0.15, no local-time term:" + anti};
    return {pass, fmt("worst relative error %.4f (<= 0.10) at %s", worst, worst_at.c_str())};
}

Outcome diagonal_value() {
    const Sphere s(2);
    const double series = sphere_heat_kernel_series(s.north(), s.north(), 1.0);
    const SphereRun r = sphere_density(2.0, 0.0, 10000, 300);
    return {std::abs(series - 0.11288) <= 1e-4 && r.rel <= 0.10,
            fmt("series p(1;x,x) = %.6f (0.11288 +- 1e-4), MC %.5f rel %.4f (<= 0.10)", series, r.estimate, r.rel)};
}

Outcome endpoint_convergence() {
    struct Case {
        std::string id;
        Vec start, target;
    };
    std::vector<Case> cases = {
        {"sphere2", Eigen::Vector3d(0, 0, 1), polar_point(2.0)},
        {"cylinder", Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(2.0, 1.0)},
        {"flat-torus", Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(2.5, 3.0)},
        {"so3", Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1.0, 0.5, 0.3)},
        {"ellipsoid:1,1.2,0.8", Eigen::Vector2d(0.3, 0.8), Eigen::Vector2d(2.0, 2.0)},
    };
    bool pass = true;
    std::string detail;
    for (const auto& cs : cases) {
        const auto m = make_manifold(cs.id);
        BridgeConfig c;
        c.manifold = m->id();
        c.start = parse_point(*m, cs.start);
        c.target = parse_point(*m, cs.target);
        c.paths = 500;
        c.seed = 400;
        c.steps = 1000;
        const double coarse = median(terminal_radials(*m, c));
        c.steps = 4000;
        const double fine = median(terminal_radials(*m, c));
        const bool ok = coarse < 0.1 && fine < coarse;
        pass = pass && ok;
        detail += fmt("%s %.4f -> %.4f%s; ", m->id().c_str(), coarse, fine, ok ? "" : " (!)");
    }
    return {pass, "median terminal radial N=1000 -> 4000: " + detail};
}

Outcome l2_bound() {
    const Sphere s(2);
    BridgeConfig c;
    c.start = s.north();
    c.target = polar_point(2.0);
    c.steps = 1000;
    c.paths = 1000;
    c.seed = 500;
    c.record_stride = 250;
    c.track_likelihood = false;
    const auto ens = sample_ensemble(s, c, DriverSpec::brownian(2));
    const double r0 = s.distance(c.start, c.target);
    bool pass = true;
    std::string detail;
    for (int q = 1; q <= 3; ++q) {
        double msq = 0.0;
        for (const auto& p : ens) msq += p.radials[q] * p.radials[q];
        msq /= static_cast<double>(ens.size());
        const double t = ens.front().times[q];
        const double bound = l2_radial_bound(r0, 2.0, 0.0, t, c.T);
        pass = pass && msq <= bound;
        detail += fmt("t/T=%.2f E r^2 %.4f <= %.4f; ", t / c.T, msq, bound);
    }
    return {pass, detail};
}

Outcome importance_identity() {
    const auto m = make_manifold("flat-torus");
    BridgeConfig c;
    c.manifold = m->id();
    c.start = Eigen::Vector2d(kPi - 0.75, 1.0);
    c.target = Eigen::Vector2d(kPi + 0.75, 3.0);
    c.steps = 1000;
    c.stop_step = 500;
    c.seed = 600;
    c.track_likelihood = false;
    c.record_stride = c.steps;
    const int M = 10000;
    auto h = [](const Point& x) { return x(0) < kPi ? 1.0 : 0.0; };

    double q_sum = 0.0, q_sq = 0.0;
    for (int i = 0; i < M; ++i) {
        const double v = h(simulate_path(*m, c, DriverSpec::brownian(2), i).terminal());
        q_sum += v;
        q_sq += v * v;
    }
    BridgeConfig p = c;
    p.guided = false;
    p.record_increments = true;
    p.seed = 601;
    double p_sum = 0.0, p_sq = 0.0;
    for (int i = 0; i < M; ++i) {
        const BridgePath path = simulate_path(*m, p, DriverSpec::brownian(2), i);
        const double v = std::exp(log_radon_nikodym_bm(path, c.T)) * h(path.terminal());
        p_sum += v;
        p_sq += v * v;
    }
    const double q_mean = q_sum / M, p_mean = p_sum / M;
    const double q_se = std::sqrt(std::max(q_sq / M - q_mean * q_mean, 0.0) / M);
    const double p_se = std::sqrt(std::max(p_sq / M - p_mean * p_mean, 0.0) / M);
    const double se = std::hypot(q_se, p_se);
    const double z = std::abs(q_mean - p_mean) / se;
    return {z <= 3.0, fmt("E_Q[h] %.4f +- %.4f, E_P[D h] %.4f +- %.4f, |diff|/se %.2f (<= 3)", q_mean, q_se, p_mean,
                          p_se, z)};
}

Outcome general_vs_bm() {
    const Sphere s(2);
    BridgeConfig c;
    c.start = s.north();
    c.target = polar_point(2.0);
    c.steps = 1000;
    c.paths = 200;
    c.seed = 700;
    c.record_stride = c.steps;
    c.general_likelihood = true;
    const auto ens = sample_ensemble(s, c, DriverSpec::brownian(2));
    int agree = 0;
    std::vector<double> diffs;
    for (const auto& p : ens) {
        const double d = std::abs(p.log_phi_general - p.log_phi);
        diffs.push_back(d);
        if (d <= 0.05) ++agree;
    }
    const double frac = agree / static_cast<double>(ens.size());
    return {frac >= 0.95, fmt("%.1f%% of paths within 0.05 (>= 95%%), median |diff| %.4f, max %.4f", 100 * frac,
                              median(diffs), *std::max_element(diffs.begin(), diffs.end()))};
}

Outcome diffusion_mean_recovery() {
    const Sphere s(2);
    bool pass = true;
    std::string detail;
    for (std::uint64_t seed : {801u, 802u, 803u}) {
        const auto data = sample_endpoints(s, s.north(), 1.0, 1000, 100, seed);
        MeanOptions opt;
        opt.tol = 1e-3;
        opt.step_size = 1.0;
        opt.seed = seed + 1000;
        const MeanEstimate e = diffusion_mean(s, data, 1.0, opt);
        const double dist = s.distance(e.iterates.back(), s.north());
        const bool ok = e.converged && e.iterations <= 50 && dist <= 0.2;
        pass = pass && ok;
        detail += fmt("seed %d: %d iterations, converged %d, distance %.4f; ", static_cast<int>(seed), e.iterations,
                      e.converged ? 1 : 0, dist);
    }
    return {pass, detail};
}

// Jacobi equation J'' = -R J, J(0) = 0, J'(0) = I in a parallel frame along
// the unit-parameter geodesic s -> exp(s u) with constant curvature operator
// R = R(., u)u; det J(1) is the Jacobian of exp at u.
double jacobi_theta_ode(const Eigen::MatrixXd& curvature, int dim) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(dim, dim), jd = Eigen::MatrixXd::Identity(dim, dim);
    const int n = 2000;
    const double h = 1.0 / n;
    auto acc = [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return -curvature * x; };
    for (int k = 0; k < n; ++k) {
        const Eigen::MatrixXd k1 = jd, l1 = acc(j);
        const Eigen::MatrixXd k2 = jd + 0.5 * h * l1, l2 = acc(j + 0.5 * h * k1);
        const Eigen::MatrixXd k3 = jd + 0.5 * h * l2, l3 = acc(j + 0.5 * h * k2);
        const Eigen::MatrixXd k4 = jd + h * l3, l4 = acc(j + h * k3);
        j += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        jd += h / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
    }
    return j.determinant();
}

Outcome geometry_oracles() {
    std::mt19937_64 gen(900);
    std::normal_distribution<double> nd;
    double roundtrip = 0.0, gradient = 0.0, theta = 0.0, surface = 0.0;

    for (const std::string id : {"sphere2", "sphere3", "cylinder", "flat-torus", "so3", "torus:3,1",
                                 "ellipsoid:1,1.2,0.8"}) {
        const auto m = make_manifold(id);
        const bool numeric = id.find(':') != std::string::npos;
        for (int k = 0; k < (numeric ? 10 : 50); ++k) {
            Vec raw(m->coord_size());
            for (auto& x : raw) x = nd(gen);
            const Point x = m->project_point(raw);
            Tangent w = Tangent::Zero(m->coord_size());
            const Mat e = m->default_frame(x);
            for (Eigen::Index i = 0; i < e.cols(); ++i) w += 0.5 * nd(gen) * e.col(i);
            const Point v = m->exp_map(x, w);
            if (m->cut_locus_query(x, v).distance_to_cut < 0.1) continue;
            const LogResult lg = m->log_map(x, v);
            if (!numeric || m->norm(x, w) < m->distance(x, v) + 1e-9)
                roundtrip = std::max(roundtrip, (m->exp_map(x, lg.vector) - v).norm());
            const Tangent g = m->grad_half_sq_dist(x, v);
            for (Eigen::Index i = 0; i < e.cols(); ++i) {
                const double hstep = 1e-5;
                const double fp = std::pow(m->distance(m->exp_map(x, hstep * e.col(i)), v), 2) / 2;
                const double fm = std::pow(m->distance(m->exp_map(x, -hstep * e.col(i)), v), 2) / 2;
                gradient = std::max(gradient, std::abs((fp - fm) / (2 * hstep) - m->inner(x, e.col(i), g)));
            }
        }
    }

    const Sphere s2(2);
    const SO3 so3;
    for (double r : {0.3, 1.0, 2.0, 2.8}) {
        // S^2 along e_0: R = |u|^2 (I - e_0 e_0^T).
        Eigen::MatrixXd rs = Eigen::MatrixXd::Identity(2, 2);
        rs(0, 0) = 0.0;
        const double ode_s = jacobi_theta_ode(r * r * rs, 2);
        theta = std::max(theta, std::abs(ode_s - s2.theta_jacobian(s2.north(), polar_point(r))));
        // SO(3): R(X, u)u = -1/4 [[X, u], u] for the bi-invariant metric.
        const Eigen::Vector3d u = Eigen::Vector3d(1.0, 2.0, -0.5).normalized() * r;
        const Eigen::Matrix3d hu = SO3::hat(u);
        const double ode_r = jacobi_theta_ode(-0.25 * hu * hu, 3);
        const Point x = SO3::from_matrix(Eigen::Matrix3d::Identity());
        const Point y = SO3::from_matrix(SO3::rodrigues(u));
        theta = std::max(theta, std::abs(ode_r - so3.theta_jacobian(x, y)));
    }

    const SurfaceManifold round(ParamSurface::ellipsoid(1.0, 1.0, 1.0));
    for (int k = 0; k < 20; ++k) {
        Eigen::Vector3d a(nd(gen), nd(gen), nd(gen)), b(nd(gen), nd(gen), nd(gen));
        a.normalize();
        b.normalize();
        if (s2.distance(a, b) > 2.9) continue;
        surface = std::max(surface, std::abs(round.distance(a, b) - s2.distance(a, b)));
        surface = std::max(surface, (round.log_map(a, b).vector - s2.log_map(a, b).vector).norm());
        surface = std::max(surface, std::abs(round.theta_jacobian(b, a) - s2.theta_jacobian(b, a)));
    }

    const bool pass = roundtrip <= 1e-7 && gradient <= 1e-5 && theta <= 1e-6 && surface <= 1e-5;
    return {pass, fmt("log/exp %.1e (1e-7), FD gradient %.1e (1e-5), Theta vs Jacobi ODE %.1e (1e-6), "
                      "surface vs sphere %.1e (1e-5)",
                      roundtrip, gradient, theta, surface)};
}

}  // namespace

int main(int argc, char** argv) {
    // Optional argument: comma-free list of criterion numbers to run, e.g. "169".
    const std::string only = argc > 1 ? argv[1] : "123456789";
    bool all = true;
    auto run = [&](char id, const char* name, const std::function<Outcome()>& fn) {
        if (only.find(id) == std::string::npos) return;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        all = all && o.pass;
        std::printf("[%s] criterion %c %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), sec);
        std::fflush(stdout);
    };
    Outcome antipode;
    run('1', "euclidean reduction", euclidean_reduction);
    run('2', "sphere heat kernel vs series", [&] { return sphere_series(antipode); });
    if (only.find('2') != std::string::npos) {
        all = all && antipode.pass;
        std::printf("[%s] criterion 2b %s\n", antipode.pass ? "PASS" : "FAIL", antipode.detail.c_str());
        std::fflush(stdout);
    }
    run('3', "diagonal value", diagonal_value);
    run('4', "endpoint convergence", endpoint_convergence);
    run('5', "L2 radial bound", l2_bound);
    run('6', "importance identity", importance_identity);
    run('7', "general vs Brownian likelihood", general_vs_bm);
    run('8', "diffusion mean", diffusion_mean_recovery);
    run('9', "geometry oracles", geometry_oracles);
    return all ? 0 : 1;
}
