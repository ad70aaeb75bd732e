#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "mtsr/datapipe.hpp"
#include "mtsr/error.hpp"
#include "mtsr/io_util.hpp"

using namespace mtsr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mtsr_unit" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Grid random_grid(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 100.0);
    Grid g(r, c);
    for (auto& v : g.values) v = u(rng);
    return g;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

}  // namespace

TEST(Grid, CropAndBounds) {
    Grid g(3, 4);
    for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = double(i);
    const Grid c = g.crop(1, 2, 2, 2);
    EXPECT_EQ(c.values, (std::vector<double>{6, 7, 10, 11}));
    EXPECT_THROW(g.crop(2, 0, 2, 1), DimensionError);
    EXPECT_DOUBLE_EQ(g.sum(), 66.0);
    EXPECT_DOUBLE_EQ(g.max(), 11.0);
}

TEST(Windows, AugmentationCount) {
    EXPECT_EQ(window_origins(100, 100, 80, 1).size(), 441u);
    EXPECT_EQ(window_origins(80, 80, 80, 1).size(), 1u);
    EXPECT_EQ(window_origins(100, 100, 80, 10).size(), 9u);
    EXPECT_THROW(window_origins(100, 100, 80, 0), ConfigError);
    EXPECT_THROW(window_origins(70, 100, 80, 1), DimensionError);
}

TEST(Windows, StitchOfExactWindowsIsIdentity) {
    std::mt19937_64 rng(1);
    const Grid g = random_grid(12, 10, rng);
    const auto windows = make_windows(g, 6, 2);
    const Grid back = stitch(windows, 12, 10);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(back.values[i], g.values[i], 1e-12);
}

TEST(Windows, StitchAveragesOverlaps) {
    std::vector<Window> w{{0, 0, Grid(2, 2, 1.0)}, {0, 1, Grid(2, 2, 3.0)}};
    const Grid s = stitch(w, 2, 3);
    EXPECT_EQ(s.values, (std::vector<double>{1, 2, 3, 1, 2, 3}));
    EXPECT_THROW(stitch({{0, 0, Grid(2, 2, 1.0)}}, 2, 3), DimensionError);
}

TEST(Layout, UniformAggregateUpsampleRoundTrip) {
    std::mt19937_64 rng(2);
    const auto layout = ProbeLayout::uniform(8, 8, 2);
    const Grid coarse = random_grid(4, 4, rng);
    Grid fine(8, 8);
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 8; ++c) fine(r, c) = coarse(r / 2, c / 2);
    EXPECT_EQ(aggregate(fine, layout), coarse);
}

TEST(Layout, AggregateIsProbeMean) {
    const auto layout = ProbeLayout::uniform(4, 4, 2);
    Grid g(4, 4);
    for (std::size_t i = 0; i < 16; ++i) g.values[i] = double(i);
    const Grid a = aggregate(g, layout);
    EXPECT_DOUBLE_EQ(a(0, 0), (0 + 1 + 4 + 5) / 4.0);
    EXPECT_DOUBLE_EQ(a(1, 1), (10 + 11 + 14 + 15) / 4.0);
    EXPECT_THROW(ProbeLayout::uniform(10, 10, 3), ConfigError);
}

TEST(Layout, MixtureRingsOnWindow) {
    const auto layout = ProbeLayout::mixture(80);
    std::size_t n10 = 0, n4 = 0, n2 = 0, cells = 0;
    for (const auto& p : layout.probes()) {
        cells += p.side * p.side;
        n10 += p.side == 10;
        n4 += p.side == 4;
        n2 += p.side == 2;
    }
    EXPECT_EQ(cells, 6400u);
    EXPECT_EQ(n10, 28u);
    EXPECT_EQ(n4, 176u);
    EXPECT_EQ(n2, 196u);
    EXPECT_EQ(layout.coarse_rows(), 20u);
    EXPECT_EQ(layout.factor(), 4u);
    // Projection is a bijection onto the coarse grid.
    std::set<std::size_t> hit;
    for (const auto& slot : layout.coarse_probe()) {
        ASSERT_TRUE(slot.has_value());
        hit.insert(*slot);
    }
    EXPECT_EQ(hit.size(), layout.probes().size());
}

TEST(Layout, MixtureAggregateUpsampleRoundTrip) {
    std::mt19937_64 rng(3);
    const auto layout = ProbeLayout::mixture(80);
    Grid fine(80, 80);
    std::uniform_real_distribution<double> u(0, 50);
    std::vector<double> level(layout.probes().size());
    for (auto& v : level) v = u(rng);
    for (std::size_t i = 0; i < fine.size(); ++i) fine.values[i] = level[layout.cell_probe()[i]];
    const auto means = probe_means(fine, layout);
    for (std::size_t k = 0; k < means.size(); ++k) EXPECT_NEAR(means[k], level[k], 1e-12);
}

TEST(Normalize, InverseAndFit) {
    TrafficSeries s;
    s.rows = 2;
    s.cols = 2;
    s.frames = {Grid(2, 2, 1.0), Grid(2, 2, 3.0), Grid(2, 2, 100.0)};
    const auto stats = fit_norm(s, 0, 2);
    EXPECT_DOUBLE_EQ(stats.mean, 2.0);
    EXPECT_DOUBLE_EQ(stats.std, 1.0);
    std::mt19937_64 rng(4);
    const Grid g = random_grid(5, 5, rng);
    const Grid back = denormalize(normalize(g, stats), stats);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(back.values[i], g.values[i], 1e-12);
    s.frames = {Grid(2, 2, 4.0), Grid(2, 2, 4.0)};
    EXPECT_THROW(fit_norm(s, 0, 2), NumericError);
}

TEST(Split, DeskScaleProportions) {
    const auto s = split_times(400, 3, {});
    EXPECT_EQ(s.train_begin, 2u);
    EXPECT_EQ(s.train_end, 267u);
    EXPECT_EQ(s.val_end, 333u);
    EXPECT_EQ(s.test_begin, 333u);
    EXPECT_EQ(s.test_end, 400u);
    EXPECT_THROW(split_times(2, 3, {}), ConfigError);
}

TEST(Pairs, InputSequenceAlignment) {
    auto series = synth_series(8, 8, 10, 2, 5);
    const auto layout = ProbeLayout::uniform(8, 8, 2);
    const auto pairs = build_pairs(series, layout, 3, 8, 1, 2, 5);
    ASSERT_EQ(pairs.size(), 3u);
    const auto& p = pairs[1];
    EXPECT_EQ(p.time_index, 3u);
    ASSERT_EQ(p.input.size(), 3u);
    EXPECT_EQ(p.input[0], aggregate(series.frames[1], layout));
    EXPECT_EQ(p.input[2], aggregate(series.frames[3], layout));
    EXPECT_EQ(p.target, series.frames[3]);
    EXPECT_THROW(build_pairs(series, layout, 3, 8, 1, 1, 5), ConfigError);
    EXPECT_THROW(build_pairs(series, ProbeLayout::uniform(4, 4, 2), 3, 8, 1, 2, 5), DimensionError);
}

TEST(Synth, DeterministicAndNonNegative) {
    const auto a = synth_series(16, 12, 30, 4, 9);
    const auto b = synth_series(16, 12, 30, 4, 9);
    const auto c = synth_series(16, 12, 30, 4, 10);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(a.length(), 30u);
    for (const auto& f : a.frames)
        for (double v : f.values) {
            EXPECT_GE(v, 0.0);
            const double bytes = std::ldexp(v, 20);  // whole bytes
            EXPECT_EQ(bytes, std::round(bytes));
        }
    EXPECT_THROW(synth_series(4, 16, 10, 1, 0), ConfigError);
}

TEST(Synth, DiurnalFactorRange) {
    SynthOptions o;
    double lo = 1, hi = 0;
    for (std::size_t t = 0; t < o.period; ++t) {
        lo = std::min(lo, diurnal_factor(t, 0.0, o));
        hi = std::max(hi, diurnal_factor(t, 0.0, o));
    }
    EXPECT_NEAR(hi, 1.0, 1e-3);
    EXPECT_NEAR(lo, 0.3 / 1.7, 1e-3);
    EXPECT_NEAR(diurnal_factor(5, 0.3, o), diurnal_factor(5 + o.period, 0.3, o), 1e-12);
}

TEST(Ingest, SynthEmitIngestRoundTrip) {
    const auto dir = scratch("roundtrip");
    const auto series = synth_series(9, 11, 7, 3, 21);
    write_series(series, dir / "s.csv");
    EXPECT_TRUE(fs::exists(dir / "s.meta.json"));
    EXPECT_EQ(ingest(dir / "s.csv"), series);
}

TEST(Ingest, MissingCellsAreZero) {
    const auto dir = scratch("sparse");
    write_text(dir / "t.csv", "time_index,row,col,traffic_mb\n1,0,1,2.5\n");
    GridMeta meta;
    meta.rows = 2;
    meta.cols = 2;
    const auto s = ingest(dir / "t.csv", meta);
    ASSERT_EQ(s.length(), 2u);
    EXPECT_EQ(s.frames[0], Grid(2, 2, 0.0));
    EXPECT_EQ(s.frames[1].values, (std::vector<double>{0, 2.5, 0, 0}));
}

TEST(Ingest, MalformedRowsReportLine) {
    const auto dir = scratch("bad");
    GridMeta meta;
    meta.rows = 2;
    meta.cols = 2;
    const std::vector<std::pair<std::string, std::size_t>> cases{
        {"time_index,row,col,traffic_mb\n0,0,0,1\n0,0,1,abc\n", 3},
        {"time_index,row,col,traffic_mb\n0,0,0,-1\n", 2},
        {"time_index,row,col,traffic_mb\n0,5,0,1\n", 2},
        {"time_index,row,col,traffic_mb\n0,0,0,1\n0,0,0,2\n", 3},
        {"time_index,row,col\n", 1},
        {"time_index,row,col,traffic_mb\n0,0,1\n", 2},
    };
    for (const auto& [text, line] : cases) {
        write_text(dir / "b.csv", text);
        try {
            ingest(dir / "b.csv", meta);
            ADD_FAILURE() << text;
        } catch (const ParseError& e) {
            EXPECT_EQ(e.line(), line) << e.what();
        }
    }
}

TEST(Ingest, TelecomItaliaAdapter) {
    const auto dir = scratch("ti");
    // square 1 -> (0,0), square 4 -> (1,1); two 10-minute intervals.
    write_text(dir / "ti.txt",
               "1\t1383260400000\t39\t1.0\t2.0\n"
               "1\t1383260400000\t0\t0.5\n"
               "4\t1383261000000\t39\t3.0\t\t1.0\n");
    GridMeta meta;
    meta.rows = 2;
    meta.cols = 2;
    const auto s = ingest_telecom_italia(dir / "ti.txt", meta);
    ASSERT_EQ(s.length(), 2u);
    EXPECT_DOUBLE_EQ(s.frames[0](0, 0), 3.5);
    EXPECT_DOUBLE_EQ(s.frames[1](1, 1), 4.0);
    EXPECT_DOUBLE_EQ(s.frames[1](0, 0), 0.0);
}

TEST(Io, FormatDoubleRoundTrips) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 200; ++i) {
        const double v = u(rng);
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
}

TEST(Io, PgmLayout) {
    const auto dir = scratch("pgm");
    Grid g(2, 3);
    g.values = {0, 50, 100, 200, 25, 75};
    write_pgm(dir / "f.pgm", g, 100.0);
    std::ifstream in(dir / "f.pgm", std::ios::binary);
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    in.get();
    EXPECT_EQ(magic, "P5");
    EXPECT_EQ(w, 3u);
    EXPECT_EQ(h, 2u);
    EXPECT_EQ(maxval, 65535u);
    std::vector<unsigned char> bytes(12);
    in.read(reinterpret_cast<char*>(bytes.data()), 12);
    ASSERT_TRUE(in);
    const auto px = [&](std::size_t i) { return (unsigned(bytes[2 * i]) << 8) | bytes[2 * i + 1]; };
    EXPECT_EQ(px(0), 0u);
    EXPECT_EQ(px(1), 32768u);
    EXPECT_EQ(px(2), 65535u);
    EXPECT_EQ(px(3), 65535u);
    EXPECT_THROW(write_pgm(dir / "g.pgm", g, 0.0), ConfigError);
}
