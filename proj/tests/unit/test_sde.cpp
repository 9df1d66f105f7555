#include <doctest.h>

#include "rbridge/errors.hpp"
#include "rbridge/flat.hpp"
#include "rbridge/rng.hpp"
#include "rbridge/sde.hpp"
#include "rbridge/sphere.hpp"

#include <cmath>
#include <numbers>

using namespace rbridge;

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(PhiloxStream::block({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(PhiloxStream::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(PhiloxStream::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("Philox streams are reproducible and independent") {
    PhiloxStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    int same_c = 0, same_d = 0;
    for (int i = 0; i < 100; ++i) {
        const std::uint32_t x = a.next_u32();
        CHECK(x == b.next_u32());
        same_c += x == c.next_u32();
        same_d += x == d.next_u32();
    }
    CHECK(same_c < 3);
    CHECK(same_d < 3);
}

TEST_CASE("normal variates have unit moments") {
    PhiloxStream g(1, 0);
    const int n = 200000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = g.normal();
        s1 += x;
        s2 += x * x;
        s4 += x * x * x * x;
    }
    CHECK(std::abs(s1 / n) < 0.01);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.03));
    PhiloxStream u(2, 0);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        CHECK((x > 0.0 && x < 1.0));
    }
}

TEST_CASE("driver increments have the prescribed moments") {
    Mat sigma(2, 2);
    sigma << 1.0, 0.3, 0.0, 0.8;
    const DriverSpec spec = DriverSpec::constant(Eigen::Vector2d(0.5, -1.0), sigma);
    PhiloxStream g(3, 0);
    const double dt = 0.01;
    const int n = 100000;
    Vec mean = Vec::Zero(2);
    Mat cov = Mat::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        const Vec dz = sample_driver_increment(spec, 0.0, Vec::Zero(2), dt, g);
        mean += dz;
        cov += dz * dz.transpose();
    }
    mean /= n;
    cov = cov / n - mean * mean.transpose();
    CHECK(mean(0) == doctest::Approx(0.5 * dt).epsilon(0.05));
    CHECK(mean(1) == doctest::Approx(-1.0 * dt).epsilon(0.05));
    const Mat expect = sigma * sigma.transpose() * dt;
    CHECK((cov - expect).norm() < 0.02 * expect.norm());
    CHECK(spec.precision_at(0.0, Vec::Zero(2)).isApprox((sigma * sigma.transpose()).inverse()));
}

TEST_CASE("ill-conditioned dispersion is rejected") {
    Mat sigma = Mat::Identity(2, 2);
    sigma(1, 1) = 1e-8;
    const DriverSpec spec = DriverSpec::constant(Vec::Zero(2), sigma);
    CHECK_THROWS_AS(spec.sigma_at(0.0, Vec::Zero(2)), NumericalError);
}

TEST_CASE("flat development and guided drift") {
    const auto m = FlatProduct::cylinder();
    const FramePoint f{Eigen::Vector2d(1.0, 0.0), Mat::Identity(2, 2)};
    const FramePoint g = develop_step(m, f, Eigen::Vector2d(0.25, -0.5));
    CHECK(g.base.isApprox(Eigen::Vector2d(1.25, -0.5)));
    const Vec drift = guided_drift(m, f, Eigen::Vector2d(2.0, 2.0), 0.5, 1.0);
    CHECK(drift.isApprox(Eigen::Vector2d(2.0, 4.0)));
    const Vec capped = guided_drift(m, f, Eigen::Vector2d(2.0, 2.0), 0.5, 1.0, 1.0);
    CHECK(capped.norm() == doctest::Approx(1.0));
    const auto t = FlatProduct::flat_torus(2);
    const FramePoint ft{Eigen::Vector2d(0.0, 0.0), Mat::Identity(2, 2)};
    CHECK(guided_drift(t, ft, Eigen::Vector2d(std::numbers::pi, 1.0), 0.0, 1.0).norm() == 0.0);
}

TEST_CASE("ensembles are deterministic across thread counts") {
    const Sphere s(2);
    BridgeConfig c;
    c.start = s.north();
    c.target = Eigen::Vector3d(1, 0, 0);
    c.steps = 200;
    c.paths = 6;
    c.seed = 99;
    c.threads = 1;
    const auto a = sample_ensemble(s, c, DriverSpec::brownian(2));
    c.threads = 3;
    const auto b = sample_ensemble(s, c, DriverSpec::brownian(2));
    const BridgePath p4 = simulate_path(s, c, DriverSpec::brownian(2), 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].terminal() == b[i].terminal());
        CHECK(a[i].log_phi == b[i].log_phi);
    }
    CHECK(p4.terminal() == a[4].terminal());
    CHECK(a[0].terminal() != a[1].terminal());
}

TEST_CASE("recording layout") {
    const auto m = FlatProduct::flat_torus(2);
    BridgeConfig c;
    c.manifold = m.id();
    c.start = Eigen::Vector2d(1.0, 1.0);
    c.target = Eigen::Vector2d(2.0, 2.0);
    c.steps = 100;
    c.record_stride = 30;
    c.keep_frames = true;
    const BridgePath p = simulate_path(m, c, DriverSpec::brownian(2), 0);
    // k = 0, 30, 60, 90 and the final k = 99.
    CHECK(p.times.size() == 5);
    CHECK(p.times.back() == doctest::Approx(0.99));
    CHECK(p.frames.size() == p.states.size());
    CHECK(p.radials.size() == p.states.size());
    c.geometric_grid = true;
    CHECK(c.time_at(50) == doctest::Approx(0.75));
    CHECK(c.time_at(100) == doctest::Approx(1.0));
}

TEST_CASE("unguided flat motion has variance T per coordinate") {
    const auto m = FlatProduct::cylinder();
    const auto ends = sample_endpoints(m, Eigen::Vector2d(0.0, 0.0), 2.0, 50, 4000, 17, 1);
    double s2 = 0.0;
    for (const auto& e : ends) s2 += e(1) * e(1);
    CHECK(s2 / ends.size() == doctest::Approx(2.0).epsilon(0.08));
}

TEST_CASE("config validation") {
    const Sphere s(2);
    BridgeConfig c;
    c.start = s.north();
    c.target = s.north();
    c.steps = 1;
    CHECK_THROWS_AS(c.validate(s), UsageError);
    c.steps = 10;
    c.stop_step = 10;
    CHECK_THROWS_AS(c.validate(s), UsageError);
    c.stop_step = -1;
    c.T = -1.0;
    CHECK_THROWS_AS(c.validate(s), UsageError);
    c.T = 1.0;
    c.start = Eigen::Vector3d(1, 1, 1);
    CHECK_THROWS_AS(c.validate(s), UsageError);
}
