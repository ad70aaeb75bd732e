#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mtsr/networks.hpp"

namespace mtsr {

/// Dense row-major matrix of traffic volumes (MB per interval).
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::size_t size() const { return values.size(); }
    double sum() const;
    double max() const;

    /// Sub-grid starting at (row, col).
    Grid crop(std::size_t row, std::size_t col, std::size_t height, std::size_t width) const;

    bool operator==(const Grid&) const = default;
};

/// Frames of one city grid at a constant sampling interval; frame index is the time index.
struct TrafficSeries {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t interval_minutes = 10;
    std::vector<Grid> frames;

    std::size_t length() const { return frames.size(); }
    /// Throws ConfigError when frames disagree with the declared dims or hold
    /// negative / non-finite values.
    void validate() const;

    bool operator==(const TrafficSeries&) const = default;
};

/// Grid metadata sidecar: rows, cols, interval and (optionally) frame count.
struct GridMeta {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t interval_minutes = 10;
    std::optional<std::size_t> frames;
};

/// Sidecar path for a canonical CSV: traffic.csv -> traffic.meta.json.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

GridMeta read_meta(const std::filesystem::path& path);
void write_meta(const std::filesystem::path& path, const GridMeta& meta);

/// Reads the canonical long-form CSV `time_index,row,col,traffic_mb`. Absent
/// (time, cell) entries are zero traffic.
TrafficSeries ingest(const std::filesystem::path& csv, const GridMeta& meta);
/// As above with the metadata taken from the sidecar next to the CSV.
TrafficSeries ingest(const std::filesystem::path& csv);

/// Writes the canonical CSV (every cell, 17 significant digits) and its sidecar.
void write_series(const TrafficSeries& series, const std::filesystem::path& csv);

/// Adapter for the Telecom Italia grid export: tab-separated
/// `square_id, epoch_ms, country_code, activity columns...`, square ids
/// 1..rows*cols in row-major order; activity columns are summed per cell and
/// interval, time indices counted from the earliest timestamp.
TrafficSeries ingest_telecom_italia(const std::filesystem::path& tsv, const GridMeta& meta);

struct SynthOptions {
    double noise_std = 1.0;
    double base_level = 0.0;
    std::size_t period = 144;  // one day of 10-minute intervals
    double diurnal_depth = 0.7;
    double min_sigma = 1.0;
    double max_sigma = 3.0;
    double min_amplitude = 50.0;
    double max_amplitude = 400.0;
};

struct Hotspot {
    double row = 0;
    double col = 0;
    double sigma = 1;
    double amplitude = 0;
    double phase = 0;
};

/// Hotspots drawn by synth_series for the given seed (same draw order).
std::vector<Hotspot> synth_hotspots(std::size_t rows, std::size_t cols, std::size_t count, std::uint64_t seed,
                                    const SynthOptions& options = {});

/// Diurnal amplitude multiplier in [(1 - depth) / (1 + depth), 1].
double diurnal_factor(std::size_t t, double phase, const SynthOptions& options);

/// Sum of Gaussian hotspots with sinusoidal diurnal amplitude plus seeded
/// noise, clamped at zero and rounded to whole bytes. Deterministic per seed.
TrafficSeries synth_series(std::size_t rows, std::size_t cols, std::size_t frames, std::size_t hotspots,
                           std::uint64_t seed, const SynthOptions& options = {});

struct Probe {
    std::size_t row = 0;  // top-left fine cell
    std::size_t col = 0;
    std::size_t side = 1;  // covers side x side fine cells
    std::size_t coarse_row = 0;
    std::size_t coarse_col = 0;
};

/// Partition of a fine grid into square probe regions plus the placement of
/// each probe's reading on a square coarse grid.
class ProbeLayout {
public:
    /// Every probe covers factor x factor cells; coarse grid is rows/f x cols/f.
    static ProbeLayout uniform(std::size_t rows, std::size_t cols, std::size_t factor);

    /// Concentric mixture on a side x side grid: an outer ring of 10x10
    /// probes, a middle ring of 4x4 probes and a central square of 2x2 probes,
    /// projected onto a (side/4)^2 grid. Ring sizes are chosen so the probe
    /// shares are closest to 7% / 44% / 49%.
    static ProbeLayout mixture(std::size_t side);

    static ProbeLayout for_instance(const InstanceConfig& instance);

    LayoutKind kind() const { return kind_; }
    std::size_t fine_rows() const { return fine_rows_; }
    std::size_t fine_cols() const { return fine_cols_; }
    std::size_t coarse_rows() const { return coarse_rows_; }
    std::size_t coarse_cols() const { return coarse_cols_; }
    /// n_f for uniform layouts, the mean factor (4) for mixtures.
    std::size_t factor() const { return factor_; }
    const std::vector<Probe>& probes() const { return probes_; }
    /// Probe index covering each fine cell (row-major).
    const std::vector<std::size_t>& cell_probe() const { return cell_probe_; }
    /// Probe index placed at each coarse cell, or none for unpopulated cells.
    const std::vector<std::optional<std::size_t>>& coarse_probe() const { return coarse_probe_; }

    std::size_t outer_ring_width() const { return outer_ring_; }
    std::size_t central_side() const { return central_side_; }

private:
    ProbeLayout() = default;
    void index_cells();

    LayoutKind kind_ = LayoutKind::Uniform;
    std::size_t fine_rows_ = 0, fine_cols_ = 0;
    std::size_t coarse_rows_ = 0, coarse_cols_ = 0;
    std::size_t factor_ = 1;
    std::size_t outer_ring_ = 0, central_side_ = 0;
    std::vector<Probe> probes_;
    std::vector<std::size_t> cell_probe_;
    std::vector<std::optional<std::size_t>> coarse_probe_;
};

/// Mean traffic of each probe's region, indexed like layout.probes().
std::vector<double> probe_means(const Grid& frame, const ProbeLayout& layout);

/// Probe means placed on the coarse grid; unpopulated coarse cells are 0.
Grid aggregate(const Grid& frame, const ProbeLayout& layout);

struct Window {
    std::size_t row = 0;
    std::size_t col = 0;
    Grid values;
};

/// Origins {0, offset, ...} along each axis; no partial windows.
std::vector<std::pair<std::size_t, std::size_t>> window_origins(std::size_t rows, std::size_t cols,
                                                                 std::size_t side, std::size_t offset);
std::vector<Window> make_windows(const Grid& frame, std::size_t side = 80, std::size_t offset = 1);

/// Each cell becomes the mean of all window values covering it.
Grid stitch(const std::vector<Window>& windows, std::size_t rows, std::size_t cols);

struct NormStats {
    double mean = 0;
    double std = 1;
    std::size_t fit_begin = 0;  // frame range the statistics were fitted on
    std::size_t fit_end = 0;
};

/// Global z-score statistics over frames [begin, end).
NormStats fit_norm(const TrafficSeries& series, std::size_t begin, std::size_t end);
double normalize(double value, const NormStats& stats);
double denormalize(double value, const NormStats& stats);
Grid normalize(const Grid& grid, const NormStats& stats);
Grid denormalize(const Grid& grid, const NormStats& stats);

/// Coarse input sequence (times t-S+1..t) and fine target window at t.
struct SamplePair {
    std::vector<Grid> input;
    Grid target;
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t time_index = 0;
};

struct SplitFractions {
    double train = 40;
    double validation = 10;
    double test = 10;
};

/// Target-time ranges [begin, end) of the three contiguous temporal splits.
struct TimeSplit {
    std::size_t train_begin = 0, train_end = 0;
    std::size_t val_begin = 0, val_end = 0;
    std::size_t test_begin = 0, test_end = 0;
};

/// Splits t in [S-1, T) proportionally to the fractions.
TimeSplit split_times(std::size_t frames, std::size_t temporal_length, const SplitFractions& fractions);

struct DatasetOptions {
    std::size_t temporal_length = 6;
    std::size_t window_side = 80;
    std::size_t offset = 1;
    SplitFractions split;
};

struct Dataset {
    TimeSplit times;
    std::vector<SamplePair> train;
    std::vector<SamplePair> validation;
    std::vector<SamplePair> test;
};

/// Pairs for every target time in [t_begin, t_end) and every window origin.
/// `layout` is the window layout (window_side x window_side).
std::vector<SamplePair> build_pairs(const TrafficSeries& series, const ProbeLayout& layout,
                                    std::size_t temporal_length, std::size_t window_side, std::size_t offset,
                                    std::size_t t_begin, std::size_t t_end);

Dataset build_dataset(const TrafficSeries& series, const ProbeLayout& layout, const DatasetOptions& options);

}  // namespace mtsr
