#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <tuple>

#include "mtsr/baselines.hpp"
#include "mtsr/cli.hpp"
#include "mtsr/datapipe.hpp"
#include "mtsr/error.hpp"
#include "mtsr/evaluation.hpp"

namespace py = pybind11;
using namespace mtsr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Grid to_grid(const Array& a) {
    if (a.ndim() != 2) throw DimensionError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dims");
    Grid g(std::size_t(a.shape(0)), std::size_t(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), g.values.begin());
    return g;
}

Array to_array(const Grid& g) {
    Array a({g.rows, g.cols});
    std::copy(g.values.begin(), g.values.end(), a.mutable_data());
    return a;
}

MetricConfig metric_config(double psnr_max) {
    MetricConfig c;
    c.psnr_max = psnr_max;
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Mobile traffic super-resolution core";

    py::register_exception<Error>(m, "MtsrError", PyExc_RuntimeError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "synth_series",
        [](std::size_t rows, std::size_t cols, std::size_t frames, std::size_t hotspots, std::uint64_t seed) {
            const TrafficSeries s = synth_series(rows, cols, frames, hotspots, seed);
            py::array_t<double> out({frames, rows, cols});
            double* dst = out.mutable_data();
            for (const Grid& f : s.frames) dst = std::copy(f.values.begin(), f.values.end(), dst);
            return out;
        },
        py::arg("rows"), py::arg("cols"), py::arg("frames"), py::arg("hotspots") = 4, py::arg("seed") = 0,
        "Synthetic traffic as a [frames, rows, cols] array.");

    m.def(
        "aggregate",
        [](const Array& frame, std::size_t factor) {
            const Grid g = to_grid(frame);
            return to_array(aggregate(g, ProbeLayout::uniform(g.rows, g.cols, factor)));
        },
        py::arg("frame"), py::arg("factor"), "Mean over each factor x factor probe.");

    m.def(
        "aggregate_mixture",
        [](const Array& frame) {
            const Grid g = to_grid(frame);
            if (g.rows != g.cols) throw DimensionError("mixture layout needs a square frame");
            return to_array(aggregate(g, ProbeLayout::mixture(g.rows)));
        },
        py::arg("frame"));

    m.def(
        "uniform_upsample",
        [](const Array& coarse, std::size_t factor) {
            const Grid c = to_grid(coarse);
            return to_array(uniform_upsample(c, ProbeLayout::uniform(c.rows * factor, c.cols * factor, factor)));
        },
        py::arg("coarse"), py::arg("factor"));

    m.def(
        "bicubic_upsample",
        [](const Array& coarse, std::size_t factor, double a, bool reflect) {
            BicubicConfig c;
            c.kernel_a = a;
            c.boundary = reflect ? BicubicConfig::Boundary::Reflect : BicubicConfig::Boundary::Replicate;
            return to_array(bicubic_upsample(to_grid(coarse), factor, c));
        },
        py::arg("coarse"), py::arg("factor"), py::arg("a") = -0.5, py::arg("reflect") = false);

    m.def(
        "nrmse", [](const Array& pred, const Array& truth) { return nrmse(to_grid(pred), to_grid(truth)); },
        py::arg("pred"), py::arg("truth"));
    m.def(
        "psnr",
        [](const Array& pred, const Array& truth, double psnr_max) {
            return psnr(to_grid(pred), to_grid(truth), metric_config(psnr_max));
        },
        py::arg("pred"), py::arg("truth"), py::arg("psnr_max") = MetricConfig{}.psnr_max);
    m.def(
        "ssim",
        [](const Array& pred, const Array& truth, double psnr_max) {
            return ssim(to_grid(pred), to_grid(truth), metric_config(psnr_max));
        },
        py::arg("pred"), py::arg("truth"), py::arg("psnr_max") = MetricConfig{}.psnr_max);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return std::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the mtsr command line; returns (exit_code, stdout, stderr).");
}
