#include <doctest.h>

#include "rbridge/errors.hpp"
#include "rbridge/flat.hpp"
#include "rbridge/likelihood.hpp"
#include "rbridge/sde.hpp"
#include "rbridge/sphere.hpp"

#include <cmath>

using namespace rbridge;

TEST_CASE("g and its time derivative in closed form") {
    const DriverSpec bm = DriverSpec::brownian(2);
    const Vec z = Vec::Zero(2);
    const Vec xi = Eigen::Vector2d(1.0, 0.0);
    CHECK(g_value(0.5, 1.0, 1.0, z, xi, bm) == doctest::Approx(2.0));
    CHECK(g_value(0.0, 1.0, 0.5, z, xi, bm) == doctest::Approx(0.25));
    CHECK(log_psi(0.5, 1.0, 1.0, bm, z, xi) == doctest::Approx(-1.0));
    CHECK(log_psi(0.0, 1.0, 1.0, bm, z, xi) == doctest::Approx(-0.5));
    const GFunctionTerms g = g_terms(0.5, 1.0, 1.0, z, xi, bm);
    CHECK(g.E == doctest::Approx(4.0));
    CHECK(g.A.isApprox(Mat::Identity(2, 2)));

    const DriverSpec wide = DriverSpec::constant(Vec::Zero(2), 2.0 * Mat::Identity(2, 2));
    CHECK(g_value(0.5, 1.0, 1.0, z, xi, wide) == doctest::Approx(0.5));
    CHECK_THROWS_AS(g_value(1.0, 1.0, 1.0, z, xi, bm), UsageError);
}

TEST_CASE("Brownian accumulator step") {
    LikelihoodState s;
    s.t = 0.5;
    s.r = 1.0;
    const LikelihoodState a = update_log_phi_bm(s, 0.01, 1.0, 0.3, false);
    CHECK(a.log_phi == doctest::Approx(0.006));
    CHECK(a.t == doctest::Approx(0.51));
    const LikelihoodState b = update_log_phi_bm(s, 0.01, 1.0, 0.3, true);
    CHECK(b.log_phi == 0.0);
    CHECK(b.local_time_accum == doctest::Approx(0.01));
}

TEST_CASE("L2 radial bound") {
    CHECK(l2_radial_bound(1.0, 2.0, 0.0, 0.5, 1.0) == doctest::Approx(2.0));
    CHECK(l2_radial_bound(0.0, 1.0, 1.0, 0.5, 1.0) == doctest::Approx(0.5 * std::exp(0.5)));
    CHECK_THROWS_AS(l2_radial_bound(1.0, 2.0, 0.0, 0.0, 1.0), UsageError);
    CHECK_THROWS_AS(l2_radial_bound(1.0, 0.5, 0.0, 0.5, 1.0), UsageError);
}

TEST_CASE("flat bridges have trivial likelihood in both accumulators") {
    const auto m = FlatProduct::flat_torus(2);
    BridgeConfig c;
    c.manifold = m.id();
    c.start = Eigen::Vector2d(1.0, 1.0);
    c.target = Eigen::Vector2d(2.0, 3.0);
    c.steps = 400;
    c.general_likelihood = true;
    Mat sigma(2, 2);
    sigma << 1.0, 0.3, 0.0, 0.8;
    for (const DriverSpec& spec : {DriverSpec::brownian(2), DriverSpec::constant(Vec::Zero(2), sigma)}) {
        for (std::uint64_t i = 0; i < 5; ++i) {
            const BridgePath p = simulate_path(m, c, spec, i);
            CHECK(p.log_phi == 0.0);
            CHECK(std::abs(p.log_phi_general) < 1e-9);
        }
    }
}

TEST_CASE("general and Brownian accumulators agree on the sphere as steps shrink") {
    const Sphere s(2);
    BridgeConfig c;
    c.start = s.north();
    c.target = Eigen::Vector3d(std::sin(1.5), 0.0, std::cos(1.5));
    c.general_likelihood = true;
    c.steps = 2000;
    c.record_stride = c.steps;
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 10; ++i) {
        const BridgePath p = simulate_path(s, c, DriverSpec::brownian(2), i);
        worst = std::max(worst, std::abs(p.log_phi_general - p.log_phi));
    }
    CHECK(worst < 0.1);
}

TEST_CASE("online and offline Radon-Nikodym derivatives agree") {
    const Sphere s(2);
    BridgeConfig c;
    c.start = s.north();
    c.target = Eigen::Vector3d(1, 0, 0);
    c.steps = 300;
    c.record_increments = true;
    const BridgePath p = simulate_path(s, c, DriverSpec::brownian(2), 0);
    CHECK(log_radon_nikodym_bm(p, c.T) == doctest::Approx(p.log_d).epsilon(1e-9));
    c.record_increments = false;
    CHECK_THROWS_AS(log_radon_nikodym_bm(simulate_path(s, c, DriverSpec::brownian(2), 0), c.T), UsageError);
}
