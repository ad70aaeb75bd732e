#include "mtsr/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mtsr/error.hpp"

namespace mtsr {

Grid uniform_upsample(const Grid& coarse, const ProbeLayout& layout) {
    if (coarse.rows != layout.coarse_rows() || coarse.cols != layout.coarse_cols()) {
        throw DimensionError("uniform_upsample: coarse grid " + std::to_string(coarse.rows) + "x" +
                             std::to_string(coarse.cols) + " does not match layout " +
                             std::to_string(layout.coarse_rows()) + "x" + std::to_string(layout.coarse_cols()));
    }
    Grid fine(layout.fine_rows(), layout.fine_cols());
    const auto& probes = layout.probes();
    const auto& owner = layout.cell_probe();
    for (std::size_t i = 0; i < fine.size(); ++i) {
        const Probe& p = probes[owner[i]];
        fine.values[i] = coarse(p.coarse_row, p.coarse_col);
    }
    return fine;
}

double keys_kernel(double x, double a) {
    const double t = std::abs(x);
    if (t <= 1) return ((a + 2) * t - (a + 3)) * t * t + 1;
    if (t < 2) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
    return 0;
}

namespace {

std::size_t boundary_index(long i, std::size_t n, BicubicConfig::Boundary mode) {
    const long last = long(n) - 1;
    if (mode == BicubicConfig::Boundary::Replicate || n == 1) return std::size_t(std::clamp(i, 0L, last));
    // Mirror about the edge samples: -1 -> 1, n -> n-2.
    const long period = 2 * last;
    long m = i % period;
    if (m < 0) m += period;
    return std::size_t(m <= last ? m : period - m);
}

// Resamples one axis: [outer, n, inner] -> [outer, n * factor, inner].
std::vector<double> resample_axis(const std::vector<double>& src, std::size_t outer, std::size_t n,
                                  std::size_t inner, std::size_t factor, const BicubicConfig& config) {
    const std::size_t m = n * factor;
    std::vector<double> dst(outer * m * inner, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const double x = (double(j) + 0.5) / double(factor) - 0.5;
        const long base = long(std::floor(x));
        const double frac = x - double(base);
        double w[4];
        std::size_t idx[4];
        for (int k = 0; k < 4; ++k) {
            w[k] = keys_kernel(frac - double(k - 1), config.kernel_a);
            idx[k] = boundary_index(base + k - 1, n, config.boundary);
        }
        for (std::size_t o = 0; o < outer; ++o) {
            double* out = dst.data() + (o * m + j) * inner;
            for (int k = 0; k < 4; ++k) {
                const double* in = src.data() + (o * n + idx[k]) * inner;
                for (std::size_t i = 0; i < inner; ++i) out[i] += w[k] * in[i];
            }
        }
    }
    return dst;
}

}  // namespace

Grid bicubic_upsample(const Grid& coarse, std::size_t factor, const BicubicConfig& config) {
    if (factor < 1) throw ConfigError("bicubic_upsample: factor must be >= 1");
    if (!(config.kernel_a < 0)) throw ConfigError("bicubic_upsample: kernel parameter a must be negative");
    if (coarse.rows == 0 || coarse.cols == 0) throw DimensionError("bicubic_upsample: empty grid");
    if (factor == 1) return coarse;
    auto rows_done = resample_axis(coarse.values, 1, coarse.rows, coarse.cols, factor, config);
    auto both = resample_axis(rows_done, coarse.rows * factor, coarse.cols, 1, factor, config);
    Grid out(coarse.rows * factor, coarse.cols * factor);
    out.values = std::move(both);
    return out;
}

}  // namespace mtsr
