#pragma once

#include "rbridge/manifold.hpp"
#include "rbridge/rng.hpp"

#include <functional>

namespace rbridge {

/// Euclidean driving semimartingale dZ = a(t, Z) dt + sigma(t, Z) dW.
struct DriverSpec {
    using DriftFn = std::function<Vec(double, const Vec&)>;
    using SigmaFn = std::function<Mat(double, const Vec&)>;
    /// Optional analytic dA/dz_j for A = (sigma sigma^T)^{-1}.
    using DerivFn = std::function<Mat(double, const Vec&, int)>;

    int dim = 0;
    DriftFn drift;
    SigmaFn sigma;
    DerivFn d_precision;
    bool is_brownian = false;
    bool is_constant_sigma = false;

    static DriverSpec brownian(int d);
    /// Constant drift and dispersion.
    static DriverSpec constant(const Vec& drift, const Mat& sigma);

    Vec drift_at(double t, const Vec& z) const;
    /// sigma(t, z), checked for shape, finiteness and condition number < 1e6.
    Mat sigma_at(double t, const Vec& z) const;
    /// A = (sigma sigma^T)^{-1}.
    Mat precision_at(double t, const Vec& z) const;
    /// dA/dz_j, analytic when supplied, else central differences with step 1e-6 (1 + |z_j|).
    Mat d_precision_at(double t, const Vec& z, int j) const;
};

/// dZ = a dt + sigma sqrt(dt) xi for a given standard normal vector xi.
Vec driver_increment(const DriverSpec& spec, double t, const Vec& z, double dt, const Vec& xi);

/// Same with xi drawn from `rng`.
Vec sample_driver_increment(const DriverSpec& spec, double t, const Vec& z, double dt, PhiloxStream& rng);

}  // namespace rbridge
