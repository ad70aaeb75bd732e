#pragma once

#include <cstddef>

#include "mtsr/datapipe.hpp"

namespace mtsr {

struct BicubicConfig {
    enum class Boundary { Replicate, Reflect };

    double kernel_a = -0.5;  // Keys
    Boundary boundary = Boundary::Replicate;
};

/// Every fine cell receives the reading of the probe covering it.
Grid uniform_upsample(const Grid& coarse, const ProbeLayout& layout);

/// Separable Keys bicubic interpolation, output dims = input dims * factor.
/// Sample centres are aligned (half-pixel convention).
Grid bicubic_upsample(const Grid& coarse, std::size_t factor, const BicubicConfig& config = {});

/// Keys cubic convolution kernel.
double keys_kernel(double x, double a);

}  // namespace mtsr
