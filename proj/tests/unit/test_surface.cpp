#include <doctest.h>

#include "rbridge/errors.hpp"
#include "rbridge/sphere.hpp"
#include "rbridge/surface.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace rbridge;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("torus metric and curvature") {
    const double R = 3.0, rho = 1.0;
    const ParamSurface t = ParamSurface::torus(R, rho);
    for (double q2 : {0.0, 0.7, 2.0, kPi}) {
        const Vec2 q(0.4, q2);
        const Mat2 g = surface_metric(t, q);
        CHECK(g(0, 0) == doctest::Approx(std::pow(R + rho * std::cos(q2), 2)));
        CHECK(g(1, 1) == doctest::Approx(rho * rho));
        CHECK(std::abs(g(0, 1)) < 1e-12);
        const Vec3 p = t.embedding(q);
        CHECK(std::abs(t.implicit(p)) < 1e-12);
        CHECK(t.gaussian_curvature(p) == doctest::Approx(std::cos(q2) / (rho * (R + rho * std::cos(q2)))));
        CHECK((t.embedding(t.chart(p)) - p).norm() < 1e-12);
    }
}

TEST_CASE("ellipsoid curvature at the pole") {
    const ParamSurface e = ParamSurface::ellipsoid(1.0, 1.2, 0.8);
    CHECK(e.gaussian_curvature(Vec3(0, 0, 0.8)) == doctest::Approx(0.64 / (1.0 * 1.44)));
    const Vec3 off(0.5, 0.5, 0.5);
    CHECK(std::abs(e.implicit(e.project(off))) < 1e-12);
}

TEST_CASE("torus geodesic lengths") {
    const SurfaceManifold m(ParamSurface::torus(3.0, 1.0));
    const auto outer = geodesic_bvp(m.surface(), Vec2(0.0, 0.0), Vec2(0.5, 0.0));
    REQUIRE(outer.converged);
    CHECK(outer.length == doctest::Approx(4.0 * 0.5).epsilon(1e-8));
    const auto inner = geodesic_bvp(m.surface(), Vec2(0.0, kPi), Vec2(0.5, kPi));
    CHECK(inner.length == doctest::Approx(2.0 * 0.5).epsilon(1e-8));
    const auto meridian = geodesic_bvp(m.surface(), Vec2(1.0, 0.2), Vec2(1.0, 1.2));
    CHECK(meridian.length == doctest::Approx(1.0).epsilon(1e-6));
    const auto quarter = geodesic_bvp(ParamSurface::torus(2.0, 1.0), Vec2(0.0, 0.0), Vec2(kPi / 2, 0.0));
    CHECK(quarter.length == doctest::Approx(3.0 * kPi / 2).epsilon(1e-8));
    // Across the chart seam.
    const auto seam = geodesic_bvp(m.surface(), Vec2(6.1, 0.0), Vec2(0.2, 0.0));
    CHECK(seam.length == doctest::Approx(4.0 * (0.2 + 2 * kPi - 6.1)).epsilon(1e-8));
}

TEST_CASE("round ellipsoid matches the unit sphere") {
    const SurfaceManifold round(ParamSurface::ellipsoid(1.0, 1.0, 1.0));
    const Sphere s(2);
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 15; ++k) {
        Vec3 a(nd(gen), nd(gen), nd(gen)), b(nd(gen), nd(gen), nd(gen));
        a.normalize();
        b.normalize();
        if (s.distance(a, b) > 2.9) continue;
        CHECK(round.distance(a, b) == doctest::Approx(s.distance(a, b)).epsilon(1e-7));
        CHECK((round.log_map(a, b).vector - s.log_map(a, b).vector).norm() < 1e-6);
        CHECK(round.theta_jacobian(b, a) == doctest::Approx(s.theta_jacobian(b, a)).epsilon(1e-6));
        CHECK(round.d_r_log_theta_negsqrt(b, a) == doctest::Approx(s.d_r_log_theta_negsqrt(b, a)).epsilon(1e-4));
        CHECK((round.exp_map(a, s.log_map(a, b).vector) - b).norm() < 1e-6);
    }
}

TEST_CASE("Jacobi field on the unit sphere") {
    const ParamSurface u = ParamSurface::ellipsoid(1.0, 1.0, 1.0);
    for (double r : {1e-4, 0.5, 1.5, 3.0}) {
        const JacobiResult j = jacobi_along(u, Vec3(0, 0, 1), Vec3(r, 0, 0));
        CHECK(j.theta == doctest::Approx(std::sin(r) / r).epsilon(1e-7));
    }
}

TEST_CASE("surface parallel transport keeps frames orthonormal and tangent") {
    const SurfaceManifold m(ParamSurface::torus(3.0, 1.0));
    const Point x = m.surface().embedding(Vec2(0.3, 0.9));
    FramePoint f{x, m.default_frame(x)};
    for (int k = 0; k < 20; ++k) f = m.parallel_transport_step(f, 0.05 * f.frame.col(k % 2) + 0.03 * f.frame.col(1));
    const Vec3 n = m.surface().implicit_gradient(f.base).normalized();
    CHECK(std::abs(m.surface().implicit(f.base)) < 1e-9);
    CHECK(std::abs(f.frame.col(0).dot(n)) < 1e-9);
    CHECK(f.frame.col(0).dot(f.frame.col(1)) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(f.frame.col(0).norm() == doctest::Approx(1.0));
}

TEST_CASE("surface cut band and cache") {
    const SurfaceManifold m(ParamSurface::ellipsoid(1.0, 1.0, 1.0));
    const Vec3 n(0, 0, 1);
    CHECK(m.cut_locus_query(n, -n).is_near_cut);
    CHECK(m.log_map(n, -n).at_cut);
    CHECK_FALSE(m.cut_locus_query(n, Vec3(1, 0, 0)).is_near_cut);
    // Mirror-symmetric pair on the torus: two classes of equal length.
    const SurfaceManifold t(ParamSurface::torus(2.0, 1.0));
    const auto& ts = t.surface();
    CHECK(t.cut_locus_query(ts.embedding(Vec2(0.0, 0.0)), ts.embedding(Vec2(kPi, 0.0))).is_near_cut);
    m.distance(n, Vec3(1, 0, 0));
    CHECK(m.cache_size() > 0);
    CHECK_THROWS_AS(m.validate_point(Point(Vec3(0, 0, 2))), UsageError);
}
