#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "mtsr/tensor.hpp"

namespace mtsr {

using Extent3 = std::array<std::size_t, 3>;

/// Zero padding for the three spatial axes (depth, height, width).
///
/// `Same` keeps the extent at stride 1 (ceil(in / stride) in general); the odd
/// remainder of the total padding goes to the trailing side.
struct Padding {
    enum class Mode { Explicit, Same };

    Mode mode = Mode::Explicit;
    Extent3 before{0, 0, 0};
    Extent3 after{0, 0, 0};

    static Padding none() { return {}; }
    static Padding same() { return {Mode::Same, {0, 0, 0}, {0, 0, 0}}; }
    static Padding symmetric(std::size_t d, std::size_t h, std::size_t w) {
        return {Mode::Explicit, {d, h, w}, {d, h, w}};
    }
};

struct ConvOptions {
    Extent3 stride{1, 1, 1};
    Padding padding = Padding::none();
};

struct DeconvOptions {
    Extent3 stride{1, 1, 1};
    // With Same padding the output extent is input * stride.
    Padding padding = Padding::none();
    // Explicit output extent, resolving the floor ambiguity of the matching
    // forward convolution. Explicit padding: [base, base + stride - 1] with base
    // (in - 1) * stride - pad + kernel. Same: ((in - 1) * stride, in * stride].
    std::optional<Extent3> output_extent;
};

/// Resolved geometry of a (forward) convolution.
struct ConvGeometry {
    Extent3 in{};
    Extent3 kernel{};
    Extent3 stride{};
    Extent3 pad_before{};
    Extent3 out{};

    std::size_t in_volume() const { return in[0] * in[1] * in[2]; }
    std::size_t out_volume() const { return out[0] * out[1] * out[2]; }
    std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
};

ConvGeometry resolve_conv(const Extent3& in, const Extent3& kernel, const ConvOptions& options);

/// Geometry of the forward convolution whose adjoint is the requested deconvolution.
ConvGeometry resolve_deconv(const Extent3& in, const Extent3& kernel, const DeconvOptions& options);

// Layers. x is [N, C, D, H, W] for the 3D ops and [N, C, H, W] for the 2D ops.

/// Cross-correlation. kernel is [Cout, Cin, kD, kH, kW].
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernel, const ConvOptions& options = {});

/// kernel is [Cout, Cin, kH, kW]; stride/padding use the last two axes of the options.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const ConvOptions& options = {});

/// Transposed convolution, the adjoint of conv3d. kernel is [Cin, Cout, kD, kH, kW].
template <typename T>
Tensor<T> deconv3d(const Tensor<T>& x, const Tensor<T>& kernel, const DeconvOptions& options = {});

/// Adds bias[c] to every element of channel c (axis 1).
template <typename T>
Tensor<T> channel_bias(const Tensor<T>& x, const Tensor<T>& bias);

enum class BnMode {
    Train,             // batch statistics, running statistics updated
    TrainFrozenStats,  // batch statistics, running statistics untouched
    Infer,             // running statistics
};

template <typename T>
struct BatchNormStats {
    std::vector<T> running_mean;
    std::vector<T> running_var;

    explicit BatchNormStats(std::size_t channels = 0)
        : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Per-channel normalization over the batch and spatial axes followed by the
/// affine map gamma * xhat + beta.
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    BatchNormStats<T>& stats, BnMode mode, double eps = kBatchNormEps,
                    double momentum = kBatchNormMomentum);

inline constexpr double kLReluAlpha = 0.1;

template <typename T>
Tensor<T> lrelu(const Tensor<T>& x, double alpha = kLReluAlpha);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// log(clamp(x, lo, hi)); the gradient is zero where the clamp is active.
template <typename T>
Tensor<T> log_clamped(const Tensor<T>& x, double lo, double hi);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

/// a * x + b for scalar constants a, b.
template <typename T>
Tensor<T> affine_scalar(const Tensor<T>& x, double a, double b);

template <typename T>
Tensor<T> square(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Sum of all elements, shape [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// Mean of all elements, shape [1].
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// [N, ...] -> [N], summing each sample.
template <typename T>
Tensor<T> sum_per_sample(const Tensor<T>& x);

/// [N, C, ...] -> [N, C], mean over all trailing axes.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

/// [N, C] . weight[C] + bias[1] -> [N].
template <typename T>
Tensor<T> affine_reduce(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// [N, C, S, H, W] -> [N, C, H, W] taking temporal index `frame`.
template <typename T>
Tensor<T> select_frame(const Tensor<T>& x, std::size_t frame);

/// Fixed separable linear map on each [H, W] plane: Y = R X C^T.
/// `rows` is [H' x H] and `cols` is [W' x W], both row-major.
template <typename T>
Tensor<T> separable_map(const Tensor<T>& x, const std::vector<double>& rows, std::size_t out_h,
                        const std::vector<double>& cols, std::size_t out_w);

}  // namespace mtsr
