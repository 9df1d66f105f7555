#include "rbridge/driver.hpp"

#include "rbridge/errors.hpp"

#include <cmath>

namespace rbridge {

DriverSpec DriverSpec::brownian(int d) {
    if (d < 1) throw UsageError("driver dimension must be >= 1");
    DriverSpec s;
    s.dim = d;
    s.drift = [d](double, const Vec&) { return Vec(Vec::Zero(d)); };
    s.sigma = [d](double, const Vec&) { return Mat(Mat::Identity(d, d)); };
    s.d_precision = [d](double, const Vec&, int) { return Mat(Mat::Zero(d, d)); };
    s.is_brownian = true;
    s.is_constant_sigma = true;
    return s;
}

DriverSpec DriverSpec::constant(const Vec& drift, const Mat& sigma) {
    const auto d = static_cast<int>(drift.size());
    if (d < 1 || sigma.rows() != d || sigma.cols() != d)
        throw UsageError("constant driver needs a d-vector drift and a d x d sigma");
    DriverSpec s;
    s.dim = d;
    s.drift = [drift](double, const Vec&) { return drift; };
    s.sigma = [sigma](double, const Vec&) { return sigma; };
    s.d_precision = [d](double, const Vec&, int) { return Mat(Mat::Zero(d, d)); };
    s.is_brownian = drift.isZero(0.0) && sigma.isIdentity(0.0);
    s.is_constant_sigma = true;
    return s;
}

Vec DriverSpec::drift_at(double t, const Vec& z) const {
    Vec a = drift ? drift(t, z) : Vec(Vec::Zero(dim));
    if (a.size() != dim || !a.allFinite()) throw NumericalError("driver error: drift evaluation failed");
    return a;
}

Mat DriverSpec::sigma_at(double t, const Vec& z) const {
    if (!sigma) throw UsageError("driver has no dispersion function");
    Mat s = sigma(t, z);
    if (s.rows() != dim || s.cols() != dim || !s.allFinite())
        throw NumericalError("driver error: sigma evaluation failed");
    if (!is_brownian) {
        const Eigen::JacobiSVD<Mat> svd(s);
        const auto& sv = svd.singularValues();
        const double smin = sv(sv.size() - 1);
        if (!(smin > 0.0) || sv(0) / smin >= 1e6)
            throw NumericalError("driver error: sigma is singular or ill-conditioned");
    }
    return s;
}

Mat DriverSpec::precision_at(double t, const Vec& z) const {
    if (is_brownian) return Mat::Identity(dim, dim);
    const Mat s = sigma_at(t, z);
    const Mat c = s * s.transpose();
    return c.llt().solve(Mat::Identity(dim, dim));
}

Mat DriverSpec::d_precision_at(double t, const Vec& z, int j) const {
    if (is_constant_sigma) return Mat::Zero(dim, dim);
    if (d_precision) return d_precision(t, z, j);
    const double h = 1e-6 * (1.0 + std::abs(z(j)));
    Vec zp = z, zm = z;
    zp(j) += h;
    zm(j) -= h;
    return (precision_at(t, zp) - precision_at(t, zm)) / (2.0 * h);
}

Vec driver_increment(const DriverSpec& spec, double t, const Vec& z, double dt, const Vec& xi) {
    if (!(dt > 0.0)) throw UsageError("time step must be positive");
    if (xi.size() != spec.dim) throw UsageError("noise dimension does not match the driver");
    const double sq = std::sqrt(dt);
    if (spec.is_brownian) return sq * xi;
    return spec.drift_at(t, z) * dt + spec.sigma_at(t, z) * (sq * xi);
}

Vec sample_driver_increment(const DriverSpec& spec, double t, const Vec& z, double dt, PhiloxStream& rng) {
    Vec xi(spec.dim);
    for (int i = 0; i < spec.dim; ++i) xi(i) = rng.normal();
    return driver_increment(spec, t, z, dt, xi);
}

}  // namespace rbridge
