#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mtsr/baselines.hpp"
#include "mtsr/error.hpp"

using namespace mtsr;

namespace {

Grid random_grid(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 100.0);
    Grid g(r, c);
    for (auto& v : g.values) v = u(rng);
    return g;
}

}  // namespace

TEST(Uniform, AggregateAfterUpsampleIsIdentity) {
    std::mt19937_64 rng(1);
    for (std::size_t f : {2u, 4u, 5u, 10u}) {
        const auto layout = ProbeLayout::uniform(40, 40, f);
        const Grid coarse = random_grid(layout.coarse_rows(), layout.coarse_cols(), rng);
        EXPECT_EQ(aggregate(uniform_upsample(coarse, layout), layout), coarse);
    }
}

TEST(Uniform, MixtureRoundTrip) {
    std::mt19937_64 rng(2);
    const auto layout = ProbeLayout::mixture(80);
    const Grid fine = random_grid(80, 80, rng);
    const Grid coarse = aggregate(fine, layout);
    EXPECT_EQ(aggregate(uniform_upsample(coarse, layout), layout), coarse);
}

TEST(Uniform, RejectsWrongCoarseDims) {
    const auto layout = ProbeLayout::uniform(8, 8, 2);
    EXPECT_THROW(uniform_upsample(Grid(3, 4), layout), DimensionError);
}

TEST(Keys, KernelValues) {
    EXPECT_DOUBLE_EQ(keys_kernel(0.0, -0.5), 1.0);
    EXPECT_DOUBLE_EQ(keys_kernel(1.0, -0.5), 0.0);
    EXPECT_DOUBLE_EQ(keys_kernel(2.0, -0.5), 0.0);
    EXPECT_DOUBLE_EQ(keys_kernel(2.5, -0.5), 0.0);
    // (a+2)|x|^3 - (a+3)|x|^2 + 1 at x = 0.5
    EXPECT_DOUBLE_EQ(keys_kernel(0.5, -0.5), 1.5 * 0.125 - 2.5 * 0.25 + 1);
    // a|x|^3 - 5a|x|^2 + 8a|x| - 4a at x = 1.5
    EXPECT_DOUBLE_EQ(keys_kernel(-1.5, -0.5), -0.5 * 3.375 + 2.5 * 2.25 - 4 * 1.5 + 2);
    for (double t : {0.0, 0.1, 0.37, 0.5, 0.9}) {
        const double s = keys_kernel(t + 1, -0.5) + keys_kernel(t, -0.5) + keys_kernel(1 - t, -0.5) +
                         keys_kernel(2 - t, -0.5);
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(Bicubic, ConstantIsPreserved) {
    const Grid g(5, 4, 7.25);
    for (std::size_t f : {1u, 2u, 4u, 10u}) {
        const Grid up = bicubic_upsample(g, f);
        EXPECT_EQ(up.rows, 5 * f);
        EXPECT_EQ(up.cols, 4 * f);
        for (double v : up.values) EXPECT_NEAR(v, 7.25, 1e-12);
    }
}

TEST(Bicubic, FactorOneIsIdentity) {
    std::mt19937_64 rng(3);
    const Grid g = random_grid(4, 6, rng);
    EXPECT_EQ(bicubic_upsample(g, 1), g);
}

TEST(Bicubic, LinearRampInteriorIsExact) {
    Grid g(8, 8);
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 8; ++c) g(r, c) = 3.0 * double(r) - 2.0 * double(c) + 40;
    const std::size_t f = 2;
    const Grid up = bicubic_upsample(g, f);
    // Away from the border the Keys kernel reproduces linear functions.
    for (std::size_t r = 4; r < 12; ++r)
        for (std::size_t c = 4; c < 12; ++c) {
            const double y = (double(r) + 0.5) / double(f) - 0.5, x = (double(c) + 0.5) / double(f) - 0.5;
            EXPECT_NEAR(up(r, c), 3.0 * y - 2.0 * x + 40, 1e-12);
        }
}

TEST(Bicubic, DirectTwoDimensionalOracle) {
    std::mt19937_64 rng(4);
    const Grid g = random_grid(6, 5, rng);
    const std::size_t f = 4;
    const Grid up = bicubic_upsample(g, f);
    const auto clampi = [](long v, long n) { return std::clamp(v, 0L, n - 1); };
    for (std::size_t r = 0; r < up.rows; ++r)
        for (std::size_t c = 0; c < up.cols; ++c) {
            const double y = (double(r) + 0.5) / double(f) - 0.5, x = (double(c) + 0.5) / double(f) - 0.5;
            const long y0 = long(std::floor(y)), x0 = long(std::floor(x));
            double acc = 0;
            for (long i = y0 - 1; i <= y0 + 2; ++i)
                for (long j = x0 - 1; j <= x0 + 2; ++j)
                    acc += keys_kernel(y - double(i), -0.5) * keys_kernel(x - double(j), -0.5) *
                           g(std::size_t(clampi(i, 6)), std::size_t(clampi(j, 5)));
            EXPECT_NEAR(up(r, c), acc, 1e-10);
        }
}

TEST(Bicubic, ReflectBoundaryDiffersOnlyNearEdges) {
    std::mt19937_64 rng(5);
    const Grid g = random_grid(8, 8, rng);
    BicubicConfig reflect;
    reflect.boundary = BicubicConfig::Boundary::Reflect;
    const Grid a = bicubic_upsample(g, 2), b = bicubic_upsample(g, 2, reflect);
    EXPECT_NEAR(a(8, 8), b(8, 8), 1e-12);
    EXPECT_NE(a(0, 0), b(0, 0));
}

TEST(Bicubic, RejectsPositiveKernelParameter) {
    BicubicConfig c;
    c.kernel_a = 0.5;
    EXPECT_THROW(bicubic_upsample(Grid(2, 2), 2, c), ConfigError);
}
