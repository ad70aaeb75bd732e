#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mtsr/datapipe.hpp"
#include "mtsr/error.hpp"

namespace mtsr {

namespace {
constexpr int kByteBits = 20;  // 1 MB = 2^20 bytes
}  // namespace

double Grid::sum() const {
    double acc = 0;
    for (double v : values) acc += v;
    return acc;
}

double Grid::max() const {
    if (values.empty()) throw DimensionError("max of an empty grid");
    return *std::max_element(values.begin(), values.end());
}

Grid Grid::crop(std::size_t row, std::size_t col, std::size_t height, std::size_t width) const {
    if (row + height > rows || col + width > cols) {
        throw DimensionError("crop " + std::to_string(height) + "x" + std::to_string(width) + " at (" +
                             std::to_string(row) + ", " + std::to_string(col) + ") exceeds grid " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    }
    Grid out(height, width);
    for (std::size_t r = 0; r < height; ++r)
        std::copy_n(values.begin() + std::ptrdiff_t((row + r) * cols + col), width,
                    out.values.begin() + std::ptrdiff_t(r * width));
    return out;
}

void TrafficSeries::validate() const {
    if (rows == 0 || cols == 0) throw ConfigError("series: rows and cols must be positive");
    if (interval_minutes == 0) throw ConfigError("series: interval must be positive");
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Grid& f = frames[t];
        if (f.rows != rows || f.cols != cols || f.values.size() != rows * cols) {
            throw ConfigError("series: frame " + std::to_string(t) + " has dims " + std::to_string(f.rows) + "x" +
                              std::to_string(f.cols) + ", expected " + std::to_string(rows) + "x" +
                              std::to_string(cols));
        }
        for (double v : f.values) {
            if (!std::isfinite(v) || v < 0) {
                throw ConfigError("series: frame " + std::to_string(t) + " holds a negative or non-finite value");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic series

std::vector<Hotspot> synth_hotspots(std::size_t rows, std::size_t cols, std::size_t count, std::uint64_t seed,
                                    const SynthOptions& options) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> row(0.0, double(rows) - 1.0);
    std::uniform_real_distribution<double> col(0.0, double(cols) - 1.0);
    std::uniform_real_distribution<double> sigma(options.min_sigma, options.max_sigma);
    std::uniform_real_distribution<double> amplitude(options.min_amplitude, options.max_amplitude);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<Hotspot> out(count);
    for (auto& h : out) {
        h.row = row(rng);
        h.col = col(rng);
        h.sigma = sigma(rng);
        h.amplitude = amplitude(rng);
        h.phase = phase(rng);
    }
    return out;
}

double diurnal_factor(std::size_t t, double phase, const SynthOptions& options) {
    const double angle = 2.0 * std::numbers::pi * double(t) / double(options.period) + phase;
    return (1.0 + options.diurnal_depth * std::sin(angle)) / (1.0 + options.diurnal_depth);
}

TrafficSeries synth_series(std::size_t rows, std::size_t cols, std::size_t frames, std::size_t hotspots,
                           std::uint64_t seed, const SynthOptions& options) {
    if (rows < 8 || cols < 8) {
        throw ConfigError("synth: grid must be at least 8x8, got " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    }
    if (options.period == 0) throw ConfigError("synth: diurnal period must be positive");
    if (options.diurnal_depth < 0 || options.diurnal_depth >= 1) {
        throw ConfigError("synth: diurnal depth must lie in [0, 1)");
    }
    if (options.noise_std < 0 || options.min_sigma <= 0 || options.max_sigma < options.min_sigma ||
        options.min_amplitude < 0 || options.max_amplitude < options.min_amplitude) {
        throw ConfigError("synth: invalid hotspot or noise ranges");
    }
    const std::vector<Hotspot> spots = synth_hotspots(rows, cols, hotspots, seed, options);

    // Static spatial profile of each hotspot.
    std::vector<std::vector<double>> profiles(spots.size(), std::vector<double>(rows * cols));
    for (std::size_t k = 0; k < spots.size(); ++k) {
        const Hotspot& h = spots[k];
        const double inv = 1.0 / (2.0 * h.sigma * h.sigma);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double dr = double(r) - h.row, dc = double(c) - h.col;
                profiles[k][r * cols + c] = h.amplitude * std::exp(-(dr * dr + dc * dc) * inv);
            }
    }

    // Noise uses its own stream so hotspot draws stay fixed across frame counts.
    std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> noise(0.0, 1.0);
    TrafficSeries series;
    series.rows = rows;
    series.cols = cols;
    series.frames.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        Grid g(rows, cols, options.base_level);
        for (std::size_t k = 0; k < spots.size(); ++k) {
            const double f = diurnal_factor(t, spots[k].phase, options);
            for (std::size_t i = 0; i < g.size(); ++i) g.values[i] += f * profiles[k][i];
        }
        for (double& v : g.values) {
            if (options.noise_std > 0) v += options.noise_std * noise(noise_rng);
            // Whole bytes: volumes stay on a 2^-20 MB lattice, so adding whole-MB
            // offsets and 2x2 means are exact in double.
            v = std::ldexp(std::round(std::ldexp(std::max(v, 0.0), kByteBits)), -kByteBits);
        }
        series.frames.push_back(std::move(g));
    }
    return series;
}

// ---------------------------------------------------------------------------
// Windows

std::vector<std::pair<std::size_t, std::size_t>> window_origins(std::size_t rows, std::size_t cols,
                                                                 std::size_t side, std::size_t offset) {
    if (offset == 0) throw ConfigError("windows: offset must be >= 1");
    if (side == 0 || side > rows || side > cols) {
        throw DimensionError("windows: window side " + std::to_string(side) + " does not fit a " +
                             std::to_string(rows) + "x" + std::to_string(cols) + " grid");
    }
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t r = 0; r + side <= rows; r += offset)
        for (std::size_t c = 0; c + side <= cols; c += offset) out.emplace_back(r, c);
    return out;
}

std::vector<Window> make_windows(const Grid& frame, std::size_t side, std::size_t offset) {
    std::vector<Window> out;
    for (auto [r, c] : window_origins(frame.rows, frame.cols, side, offset)) {
        out.push_back({r, c, frame.crop(r, c, side, side)});
    }
    return out;
}

Grid stitch(const std::vector<Window>& windows, std::size_t rows, std::size_t cols) {
    // Overlaps are averaged as deviations from the first window seen, so identical overlaps stay exact.
    Grid acc(rows, cols, 0.0), first(rows, cols, 0.0);
    std::vector<std::size_t> count(rows * cols, 0);
    for (const Window& w : windows) {
        if (w.row + w.values.rows > rows || w.col + w.values.cols > cols) {
            throw DimensionError("stitch: window at (" + std::to_string(w.row) + ", " + std::to_string(w.col) +
                                 ") exceeds the grid");
        }
        for (std::size_t r = 0; r < w.values.rows; ++r)
            for (std::size_t c = 0; c < w.values.cols; ++c) {
                const std::size_t i = (w.row + r) * cols + w.col + c;
                if (count[i]++ == 0) first.values[i] = w.values(r, c);
                acc.values[i] += w.values(r, c) - first.values[i];
            }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (count[i] == 0) {
            throw DimensionError("stitch: cell (" + std::to_string(i / cols) + ", " + std::to_string(i % cols) +
                                 ") is not covered by any window");
        }
        acc.values[i] = first.values[i] + acc.values[i] / double(count[i]);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Normalization

NormStats fit_norm(const TrafficSeries& series, std::size_t begin, std::size_t end) {
    if (begin >= end || end > series.frames.size()) {
        throw ConfigError("fit_norm: invalid frame range [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ")");
    }
    double n = 0, sum = 0;
    for (std::size_t t = begin; t < end; ++t) {
        for (double v : series.frames[t].values) sum += v;
        n += double(series.frames[t].size());
    }
    const double mean = sum / n;
    double sq = 0;
    for (std::size_t t = begin; t < end; ++t)
        for (double v : series.frames[t].values) sq += (v - mean) * (v - mean);
    const double std = std::sqrt(sq / n);
    if (!(std > 0)) throw NumericError("fit_norm: constant series has zero standard deviation");
    return {mean, std, begin, end};
}

double normalize(double value, const NormStats& stats) { return (value - stats.mean) / stats.std; }
double denormalize(double value, const NormStats& stats) { return value * stats.std + stats.mean; }

Grid normalize(const Grid& grid, const NormStats& stats) {
    Grid out = grid;
    for (double& v : out.values) v = normalize(v, stats);
    return out;
}

Grid denormalize(const Grid& grid, const NormStats& stats) {
    Grid out = grid;
    for (double& v : out.values) v = denormalize(v, stats);
    return out;
}

// ---------------------------------------------------------------------------
// Sample pairs

TimeSplit split_times(std::size_t frames, std::size_t temporal_length, const SplitFractions& fractions) {
    if (temporal_length < 1) throw ConfigError("split: S must be >= 1");
    if (frames < temporal_length) {
        throw ConfigError("split: series of " + std::to_string(frames) + " frames is shorter than S = " +
                          std::to_string(temporal_length));
    }
    if (fractions.train <= 0 || fractions.validation < 0 || fractions.test <= 0) {
        throw ConfigError("split: fractions must be non-negative with positive train and test shares");
    }
    const std::size_t first = temporal_length - 1;
    const std::size_t usable = frames - first;
    const double total = fractions.train + fractions.validation + fractions.test;
    const auto n_train = std::size_t(std::floor(double(usable) * fractions.train / total));
    const auto n_val = std::size_t(std::floor(double(usable) * fractions.validation / total));
    TimeSplit s;
    s.train_begin = first;
    s.train_end = first + n_train;
    s.val_begin = s.train_end;
    s.val_end = s.val_begin + n_val;
    s.test_begin = s.val_end;
    s.test_end = frames;
    if (s.train_end == s.train_begin || s.test_end == s.test_begin) {
        throw ConfigError("split: " + std::to_string(usable) + " usable frames leave an empty split");
    }
    return s;
}

std::vector<SamplePair> build_pairs(const TrafficSeries& series, const ProbeLayout& layout,
                                    std::size_t temporal_length, std::size_t window_side, std::size_t offset,
                                    std::size_t t_begin, std::size_t t_end) {
    if (temporal_length < 1) throw ConfigError("pairs: S must be >= 1");
    if (layout.fine_rows() != window_side || layout.fine_cols() != window_side) {
        throw DimensionError("pairs: layout covers " + std::to_string(layout.fine_rows()) + "x" +
                             std::to_string(layout.fine_cols()) + " cells, window is " +
                             std::to_string(window_side));
    }
    if (t_begin < temporal_length - 1 || t_end > series.frames.size() || t_begin > t_end) {
        throw ConfigError("pairs: target range [" + std::to_string(t_begin) + ", " + std::to_string(t_end) +
                          ") invalid for S = " + std::to_string(temporal_length) + " and T = " +
                          std::to_string(series.frames.size()));
    }
    const auto origins = window_origins(series.rows, series.cols, window_side, offset);
    std::vector<SamplePair> out;
    out.reserve((t_end - t_begin) * origins.size());
    for (std::size_t t = t_begin; t < t_end; ++t) {
        for (auto [r, c] : origins) {
            SamplePair pair;
            pair.row = r;
            pair.col = c;
            pair.time_index = t;
            for (std::size_t k = t + 1 - temporal_length; k <= t; ++k) {
                pair.input.push_back(aggregate(series.frames[k].crop(r, c, window_side, window_side), layout));
            }
            pair.target = series.frames[t].crop(r, c, window_side, window_side);
            out.push_back(std::move(pair));
        }
    }
    return out;
}

Dataset build_dataset(const TrafficSeries& series, const ProbeLayout& layout, const DatasetOptions& options) {
    Dataset ds;
    ds.times = split_times(series.frames.size(), options.temporal_length, options.split);
    const auto pairs = [&](std::size_t b, std::size_t e) {
        return build_pairs(series, layout, options.temporal_length, options.window_side, options.offset, b, e);
    };
    ds.train = pairs(ds.times.train_begin, ds.times.train_end);
    ds.validation = pairs(ds.times.val_begin, ds.times.val_end);
    ds.test = pairs(ds.times.test_begin, ds.times.test_end);
    return ds;
}

}  // namespace mtsr
