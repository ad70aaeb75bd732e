#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtsr/datapipe.hpp"
#include "mtsr/error.hpp"

namespace mtsr {
namespace {

constexpr std::size_t kOuterProbe = 10;
constexpr std::size_t kMiddleProbe = 4;
constexpr std::size_t kCentralProbe = 2;
// Target probe-count shares for the 10x10 / 4x4 / 2x2 probes.
constexpr double kOuterShare = 0.07;
constexpr double kMiddleShare = 0.44;
constexpr double kCentralShare = 0.49;

void tile(std::vector<Probe>& probes, std::size_t r0, std::size_t c0, std::size_t extent_r, std::size_t extent_c,
          std::size_t side) {
    for (std::size_t r = r0; r < r0 + extent_r; r += side)
        for (std::size_t c = c0; c < c0 + extent_c; c += side) probes.push_back({r, c, side, 0, 0});
}

bool inside(std::size_t r, std::size_t c, std::size_t lo, std::size_t hi) {
    return r >= lo && r < hi && c >= lo && c < hi;
}

}  // namespace

void ProbeLayout::index_cells() {
    cell_probe_.assign(fine_rows_ * fine_cols_, probes_.size());
    for (std::size_t p = 0; p < probes_.size(); ++p) {
        const Probe& pr = probes_[p];
        for (std::size_t r = pr.row; r < pr.row + pr.side; ++r)
            for (std::size_t c = pr.col; c < pr.col + pr.side; ++c) {
                std::size_t& slot = cell_probe_[r * fine_cols_ + c];
                if (slot != probes_.size()) throw ConfigError("probe layout: cell covered twice");
                slot = p;
            }
    }
    for (std::size_t slot : cell_probe_) {
        if (slot == probes_.size()) throw ConfigError("probe layout: cell not covered by any probe");
    }
    coarse_probe_.assign(coarse_rows_ * coarse_cols_, std::nullopt);
    for (std::size_t p = 0; p < probes_.size(); ++p) {
        auto& slot = coarse_probe_[probes_[p].coarse_row * coarse_cols_ + probes_[p].coarse_col];
        if (slot) throw ConfigError("probe layout: two probes projected onto one coarse cell");
        slot = p;
    }
}

ProbeLayout ProbeLayout::uniform(std::size_t rows, std::size_t cols, std::size_t factor) {
    if (factor < 1 || rows == 0 || cols == 0 || rows % factor != 0 || cols % factor != 0) {
        throw ConfigError("uniform layout: grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " is not divisible by n_f = " + std::to_string(factor));
    }
    ProbeLayout layout;
    layout.kind_ = LayoutKind::Uniform;
    layout.fine_rows_ = rows;
    layout.fine_cols_ = cols;
    layout.coarse_rows_ = rows / factor;
    layout.coarse_cols_ = cols / factor;
    layout.factor_ = factor;
    for (std::size_t i = 0; i < layout.coarse_rows_; ++i)
        for (std::size_t j = 0; j < layout.coarse_cols_; ++j)
            layout.probes_.push_back({i * factor, j * factor, factor, i, j});
    layout.index_cells();
    return layout;
}

ProbeLayout ProbeLayout::mixture(std::size_t side) {
    if (side == 0 || side % kMixtureMeanFactor != 0) {
        throw ConfigError("mixture layout: side " + std::to_string(side) + " must be a positive multiple of 4");
    }
    const std::size_t q = side / kMixtureMeanFactor;
    const std::size_t capacity = q * q;

    struct Choice {
        std::size_t ring = 0, centre = 0, probes = 0;
        double distance = 1e9;
    };
    Choice best;
    bool found = false;
    for (std::size_t ring = 0; 2 * ring <= side; ring += kOuterProbe) {
        if (ring > 0 && side % kOuterProbe != 0) break;
        const std::size_t inner = side - 2 * ring;
        if (inner % kMiddleProbe != 0) continue;
        for (std::size_t centre = 0; centre <= inner; centre += kMiddleProbe) {
            // The central square must sit on the 4x4 lattice of the middle region.
            if ((inner - centre) % (2 * kMiddleProbe) != 0) continue;
            const std::size_t outer = (side * side - inner * inner) / (kOuterProbe * kOuterProbe);
            const std::size_t middle = (inner * inner - centre * centre) / (kMiddleProbe * kMiddleProbe);
            const std::size_t central = centre * centre / (kCentralProbe * kCentralProbe);
            const std::size_t total = outer + middle + central;
            if (total == 0 || total > capacity) continue;
            const double p = double(total);
            const double distance = std::abs(outer / p - kOuterShare) + std::abs(middle / p - kMiddleShare) +
                                    std::abs(central / p - kCentralShare);
            if (!found || distance < best.distance - 1e-12 ||
                (std::abs(distance - best.distance) <= 1e-12 && total > best.probes)) {
                best = {ring, centre, total, distance};
                found = true;
            }
        }
    }
    if (!found) throw ConfigError("mixture layout: no ring configuration fits a " + std::to_string(side) + " grid");

    ProbeLayout layout;
    layout.kind_ = LayoutKind::Mixture;
    layout.fine_rows_ = layout.fine_cols_ = side;
    layout.coarse_rows_ = layout.coarse_cols_ = q;
    layout.factor_ = kMixtureMeanFactor;
    layout.outer_ring_ = best.ring;
    layout.central_side_ = best.centre;

    const std::size_t inner = side - 2 * best.ring;
    const std::size_t centre_lo = best.ring + (inner - best.centre) / 2;
    const std::size_t centre_hi = centre_lo + best.centre;
    std::vector<Probe> probes;
    for (std::size_t r = 0; r < side; r += kOuterProbe)
        for (std::size_t c = 0; c < side && best.ring > 0; c += kOuterProbe)
            if (!inside(r, c, best.ring, side - best.ring)) probes.push_back({r, c, kOuterProbe, 0, 0});
    for (std::size_t r = best.ring; r < side - best.ring; r += kMiddleProbe)
        for (std::size_t c = best.ring; c < side - best.ring; c += kMiddleProbe)
            if (!inside(r, c, centre_lo, centre_hi)) probes.push_back({r, c, kMiddleProbe, 0, 0});
    tile(probes, centre_lo, centre_lo, best.centre, best.centre, kCentralProbe);

    // Projection: order probes by centroid row, cut into bands of q probes,
    // order each band by centroid column. Bijective and monotone per band.
    std::vector<std::size_t> order(probes.size());
    std::iota(order.begin(), order.end(), 0);
    auto centroid_row = [&](std::size_t i) { return 2 * probes[i].row + probes[i].side; };
    auto centroid_col = [&](std::size_t i) { return 2 * probes[i].col + probes[i].side; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (centroid_row(a) != centroid_row(b)) return centroid_row(a) < centroid_row(b);
        return centroid_col(a) < centroid_col(b);
    });
    for (std::size_t band = 0; band * q < order.size(); ++band) {
        auto first = order.begin() + std::ptrdiff_t(band * q);
        auto last = order.begin() + std::ptrdiff_t(std::min(order.size(), (band + 1) * q));
        std::stable_sort(first, last, [&](std::size_t a, std::size_t b) { return centroid_col(a) < centroid_col(b); });
        std::size_t col = 0;
        for (auto it = first; it != last; ++it, ++col) {
            probes[*it].coarse_row = band;
            probes[*it].coarse_col = col;
        }
    }
    layout.probes_ = std::move(probes);
    layout.index_cells();
    return layout;
}

ProbeLayout ProbeLayout::for_instance(const InstanceConfig& instance) {
    instance.validate();
    if (instance.layout == LayoutKind::Mixture) return mixture(instance.window_side);
    return uniform(instance.window_side, instance.window_side, instance.upscaling_factor);
}

std::vector<double> probe_means(const Grid& frame, const ProbeLayout& layout) {
    if (frame.rows != layout.fine_rows() || frame.cols != layout.fine_cols()) {
        throw DimensionError("aggregate: frame " + std::to_string(frame.rows) + "x" + std::to_string(frame.cols) +
                             " does not match layout " + std::to_string(layout.fine_rows()) + "x" +
                             std::to_string(layout.fine_cols()));
    }
    std::vector<double> means;
    means.reserve(layout.probes().size());
    for (const Probe& p : layout.probes()) {
        // Deviations from the first cell, so a constant region averages to itself exactly.
        const double first = frame(p.row, p.col);
        double acc = 0;
        for (std::size_t r = p.row; r < p.row + p.side; ++r)
            for (std::size_t c = p.col; c < p.col + p.side; ++c) acc += frame(r, c) - first;
        means.push_back(first + acc / double(p.side * p.side));
    }
    return means;
}

Grid aggregate(const Grid& frame, const ProbeLayout& layout) {
    const std::vector<double> means = probe_means(frame, layout);
    Grid coarse(layout.coarse_rows(), layout.coarse_cols(), 0.0);
    for (std::size_t p = 0; p < means.size(); ++p) {
        coarse(layout.probes()[p].coarse_row, layout.probes()[p].coarse_col) = means[p];
    }
    return coarse;
}

}  // namespace mtsr
