#include "rbridge/errors.hpp"
#include "rbridge/estimators.hpp"
#include "rbridge/likelihood.hpp"
#include "rbridge/sde.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace rbridge;

namespace {

struct PyManifold {
    std::shared_ptr<const Manifold> m;

    explicit PyManifold(const std::string& id) : m(make_manifold(id)) {}
};

Mat stack(const std::vector<Point>& pts) {
    Mat out(static_cast<Eigen::Index>(pts.size()), pts.empty() ? 0 : pts.front().size());
    for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    return out;
}

BridgeConfig make_config(const PyManifold& pm, const Vec& start, const Vec& target, double T, int steps, int paths,
                         std::uint64_t seed, int threads) {
    BridgeConfig c;
    c.manifold = pm.m->id();
    c.start = parse_point(*pm.m, start);
    c.target = parse_point(*pm.m, target);
    c.T = T;
    c.steps = steps;
    c.paths = paths;
    c.seed = seed;
    c.threads = threads;
    return c;
}

py::dict path_dict(const BridgePath& p) {
    py::dict d;
    d["times"] = Vec(Eigen::Map<const Vec>(p.times.data(), static_cast<Eigen::Index>(p.times.size())));
    d["states"] = stack(p.states);
    d["radials"] = Vec(Eigen::Map<const Vec>(p.radials.data(), static_cast<Eigen::Index>(p.radials.size())));
    d["log_phi"] = p.log_phi;
    d["log_phi_general"] = p.log_phi_general;
    d["log_psi"] = p.log_psi;
    d["cut_crossings"] = p.cut_crossings;
    d["local_time"] = p.local_time_accum;
    return d;
}

py::dict density_dict(const DensityEstimate& e) {
    py::dict d;
    d["value"] = e.value;
    d["log_value"] = e.log_value;
    d["std_error"] = e.std_error;
    d["ess"] = e.ess;
    d["low_confidence"] = e.low_confidence;
    return d;
}

}  // namespace

PYBIND11_MODULE(_rbridge, mod) {
    mod.doc() = "Guided diffusion bridges on Riemannian manifolds";

    py::register_exception<NumericalError>(mod, "NumericalError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const UsageError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const IoError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        }
    });

    py::class_<PyManifold>(mod, "Manifold")
        .def(py::init<const std::string&>(), py::arg("id"))
        .def_property_readonly("id", [](const PyManifold& pm) { return pm.m->id(); })
        .def_property_readonly("dim", [](const PyManifold& pm) { return pm.m->dim(); })
        .def("point", [](const PyManifold& pm, const Vec& raw) { return parse_point(*pm.m, raw); }, py::arg("coords"),
             "Canonical representation of user coordinates.")
        .def("distance", [](const PyManifold& pm, const Vec& x, const Vec& v) { return pm.m->distance(x, v); })
        .def("log", [](const PyManifold& pm, const Vec& x, const Vec& v) {
            const LogResult r = pm.m->log_map(x, v);
            return py::make_tuple(r.vector, r.at_cut);
        })
        .def("exp", [](const PyManifold& pm, const Vec& x, const Vec& w) { return pm.m->exp_map(x, w); })
        .def("theta", [](const PyManifold& pm, const Vec& v, const Vec& x) { return pm.m->theta_jacobian(v, x); },
             py::arg("v"), py::arg("x"))
        .def("frame", [](const PyManifold& pm, const Vec& x) { return pm.m->default_frame(x); });

    mod.def(
        "simulate_bridges",
        [](const PyManifold& pm, const Vec& start, const Vec& target, double T, int steps, int paths,
           std::uint64_t seed, int record_stride, bool guided, bool general_likelihood, int threads) {
            BridgeConfig c = make_config(pm, start, target, T, steps, paths, seed, threads);
            c.record_stride = record_stride;
            c.guided = guided;
            c.general_likelihood = general_likelihood;
            std::vector<BridgePath> ens;
            {
                py::gil_scoped_release release;
                ens = sample_ensemble(*pm.m, c, DriverSpec::brownian(pm.m->dim()));
            }
            py::list out;
            for (const auto& p : ens) out.append(path_dict(p));
            return out;
        },
        py::arg("manifold"), py::arg("start"), py::arg("target"), py::arg("T") = 1.0, py::arg("steps") = 1000,
        py::arg("paths") = 1, py::arg("seed") = 0, py::arg("record_stride") = 1, py::arg("guided") = true,
        py::arg("general_likelihood") = false, py::arg("threads") = 0);

    mod.def(
        "heat_kernel",
        [](const PyManifold& pm, const Vec& x, const Vec& y, double T, int steps, int paths, std::uint64_t seed,
           int threads) {
            const BridgeConfig c = make_config(pm, x, y, T, steps, paths, seed, threads);
            DensityEstimate e;
            {
                py::gil_scoped_release release;
                e = heat_kernel_bm(*pm.m, c);
            }
            return density_dict(e);
        },
        py::arg("manifold"), py::arg("x"), py::arg("y"), py::arg("T") = 1.0, py::arg("steps") = 1000,
        py::arg("paths") = 1000, py::arg("seed") = 0, py::arg("threads") = 0);

    mod.def("sphere_heat_kernel_series", &sphere_heat_kernel_series, py::arg("x"), py::arg("y"), py::arg("t"),
            py::arg("l_max") = 16);

    mod.def(
        "sample_endpoints",
        [](const PyManifold& pm, const Vec& start, double T, int steps, int count, std::uint64_t seed, int threads) {
            const Point x = parse_point(*pm.m, start);
            std::vector<Point> pts;
            {
                py::gil_scoped_release release;
                pts = sample_endpoints(*pm.m, x, T, steps, count, seed, threads);
            }
            return stack(pts);
        },
        py::arg("manifold"), py::arg("start"), py::arg("T") = 1.0, py::arg("steps") = 1000, py::arg("count") = 100,
        py::arg("seed") = 0, py::arg("threads") = 0);

    py::class_<MeanEstimate>(mod, "MeanResult")
        .def_property_readonly("estimate", [](const MeanEstimate& e) { return e.iterates.back(); })
        .def_property_readonly("iterates", [](const MeanEstimate& e) { return stack(e.iterates); })
        .def_readonly("log_likelihoods", &MeanEstimate::log_likelihoods)
        .def_readonly("gradient_norms", &MeanEstimate::gradient_norms)
        .def_readonly("converged", &MeanEstimate::converged)
        .def_readonly("iterations", &MeanEstimate::iterations);

    mod.def(
        "diffusion_mean",
        [](const PyManifold& pm, const Mat& data, double T, int max_iters, double tol, double step_size, int paths,
           int steps, std::uint64_t seed, std::optional<Vec> initial, int threads) {
            std::vector<Point> pts;
            for (Eigen::Index i = 0; i < data.rows(); ++i) pts.push_back(parse_point(*pm.m, data.row(i).transpose()));
            MeanOptions opt;
            opt.max_iters = max_iters;
            opt.tol = tol;
            opt.step_size = step_size;
            opt.paths = paths;
            opt.steps = steps;
            opt.seed = seed;
            opt.threads = threads;
            if (initial) opt.initial = parse_point(*pm.m, *initial);
            py::gil_scoped_release release;
            return diffusion_mean(*pm.m, pts, T, opt);
        },
        py::arg("manifold"), py::arg("data"), py::arg("T") = 1.0, py::arg("max_iters") = 50, py::arg("tol") = 1e-3,
        py::arg("step_size") = 1.0, py::arg("paths") = 64, py::arg("steps") = 100, py::arg("seed") = 0,
        py::arg("initial") = std::nullopt, py::arg("threads") = 0);

    mod.def("l2_radial_bound", &l2_radial_bound, py::arg("r0"), py::arg("nu"), py::arg("lam"), py::arg("t"),
            py::arg("T"));

    mod.def(
        "conditional_expectation",
        [](const std::vector<double>& values, const std::vector<double>& log_weights) {
            const WeightedMean w = conditional_expectation(values, log_weights);
            py::dict d;
            d["value"] = w.value;
            d["std_error"] = w.std_error;
            d["ess"] = w.ess;
            d["low_confidence"] = w.low_confidence;
            return d;
        },
        py::arg("values"), py::arg("log_weights"));
}
