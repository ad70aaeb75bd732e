#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtsr/ops.hpp"
#include "mtsr/tensor.hpp"

namespace mtsr {

enum class LayoutKind { Uniform, Mixture };

std::string to_string(LayoutKind kind);
LayoutKind layout_kind_from_string(const std::string& text);

/// One MTSR instance: how coarse the probes are and how the model sees the grid.
struct InstanceConfig {
    std::size_t upscaling_factor = 2;  // n_f; ignored for mixture layouts
    std::size_t window_side = 80;      // fine window side fed to the networks
    std::size_t temporal_length = 6;   // S
    LayoutKind layout = LayoutKind::Uniform;

    /// Projected factor: n_f for uniform layouts, 4 for the mixture layout.
    std::size_t effective_factor() const;
    std::size_t coverage() const { return effective_factor() * effective_factor(); }
    std::size_t coarse_side() const { return window_side / effective_factor(); }
    std::string name() const;  // up2, up4, up10, mixture
    void validate() const;

    bool operator==(const InstanceConfig&) const = default;
};

inline constexpr std::size_t kMixtureMeanFactor = 4;

/// A named array owned by a network: trainable parameter or running statistic.
template <typename T>
struct ArrayRef {
    std::string name;
    Shape shape;
    std::span<T> data;
    bool trainable = false;
    Tensor<T> tensor;  // defined for trainable parameters
};

/// Common bookkeeping for anything holding named arrays.
template <typename T>
class Module {
public:
    virtual ~Module() = default;

    virtual std::vector<ArrayRef<T>> arrays() = 0;

    std::vector<Tensor<T>> parameters();
    std::size_t parameter_count();
    void set_trainable(bool trainable);
    void zero_grad();
};

template <typename T>
struct BatchNormLayer {
    Tensor<T> gamma;
    Tensor<T> beta;
    BatchNormStats<T> stats;
};

/// Convolution (no bias) + batch norm + LReLU: the repeated unit of every block.
template <typename T>
struct ConvBnAct {
    Tensor<T> weight;
    BatchNormLayer<T> bn;
};

/// Generator interface shared by ZipNet, SRCNN and test fixtures.
/// Input: coarse sequence [N, 1, S, h, w]; output: fine frame [N, 1, H, W].
template <typename T>
class Generator : public Module<T> {
public:
    virtual Tensor<T> forward(const Tensor<T>& coarse, BnMode mode) = 0;
    virtual std::size_t temporal_length() const = 0;
    virtual std::size_t input_side() const = 0;
    virtual std::size_t output_side() const = 0;
    virtual std::string kind() const = 0;
};

struct UpscalingStage {
    std::size_t spatial_stride = 2;
    std::size_t filters = 64;

    bool operator==(const UpscalingStage&) const = default;
};

struct ZipNetSpec {
    std::vector<UpscalingStage> upscaling;
    std::size_t zipper_modules = 24;  // K
    std::size_t zipper_filters = 64;
    std::array<std::size_t, 3> final_filters{128, 256, 1};
    bool zipper_skips = true;  // false builds the plain chain (same parameters)
    std::size_t temporal_length = 6;
    std::size_t input_side = 40;

    std::size_t upscaling_factor() const;
    std::size_t output_side() const { return input_side * upscaling_factor(); }
    void validate() const;

    bool operator==(const ZipNetSpec&) const = default;
};

/// Filter counts for the generator; the defaults are the full-size model.
struct ZipNetWidths {
    std::size_t upscaling_filters = 64;
    std::size_t zipper_modules = 24;
    std::size_t zipper_filters = 64;
    std::array<std::size_t, 3> final_filters{128, 256, 1};

    bool operator==(const ZipNetWidths&) const = default;
};

/// Spatial strides of the upscaling blocks for a given factor:
/// 2 -> {2}, 4 -> {2, 2}, 10 -> {2, 5, 1}.
std::vector<std::size_t> upscaling_strides(std::size_t factor);

ZipNetSpec make_zipnet_spec(const InstanceConfig& instance, const ZipNetWidths& widths = {});

/// ZipNet generator: 3D upscaling blocks, temporal fold, zipper block, final block.
template <typename T>
class ZipNet final : public Generator<T> {
public:
    ZipNet(ZipNetSpec spec, std::uint64_t seed);

    Tensor<T> forward(const Tensor<T>& coarse, BnMode mode) override;
    std::vector<ArrayRef<T>> arrays() override;
    std::size_t temporal_length() const override { return spec_.temporal_length; }
    std::size_t input_side() const override { return spec_.input_side; }
    std::size_t output_side() const override { return spec_.output_side(); }
    std::string kind() const override { return "zipnet"; }

    const ZipNetSpec& spec() const { return spec_; }

    /// Staggered-skip stack on [N, zipper_filters, H, W]:
    /// a_0 = a_{-1} = x, a_i = B_i(a_{i-1}) + a_{i-2}, y = a_K + x.
    Tensor<T> zipper_forward(const Tensor<T>& x, BnMode mode);

private:
    struct Stage {
        Tensor<T> deconv;  // [Cin, F, 3, k, k]
        std::array<ConvBnAct<T>, 3> convs;
        std::size_t stride = 1;
    };

    ZipNetSpec spec_;
    std::vector<Stage> stages_;
    ConvBnAct<T> fold_;  // F*S -> zipper_filters after folding time into channels
    std::vector<ConvBnAct<T>> zipper_;
    std::array<ConvBnAct<T>, 2> final_hidden_;
    Tensor<T> final_weight_;
    Tensor<T> final_bias_;
};

template <typename T>
std::unique_ptr<ZipNet<T>> build_zipnet(const InstanceConfig& instance, const ZipNetWidths& widths = {},
                                        std::uint64_t seed = 0);

struct DiscriminatorSpec {
    std::array<std::size_t, 6> filters{64, 64, 128, 128, 256, 256};
    std::array<std::size_t, 6> strides{1, 2, 1, 2, 1, 2};
    std::size_t input_side = 80;

    /// Filters (f, f, 2f, 2f, 4f, 4f).
    static DiscriminatorSpec with_base(std::size_t base_filters, std::size_t input_side);
    void validate() const;

    bool operator==(const DiscriminatorSpec&) const = default;
};

/// VGG-style classifier: 6 conv blocks, global average pool, affine, sigmoid.
template <typename T>
class Discriminator final : public Module<T> {
public:
    Discriminator(DiscriminatorSpec spec, std::uint64_t seed);

    /// frame [N, 1, H, W] -> probability of being real, shape [N].
    Tensor<T> forward(const Tensor<T>& frame, BnMode mode);
    std::vector<ArrayRef<T>> arrays() override;
    const DiscriminatorSpec& spec() const { return spec_; }

private:
    DiscriminatorSpec spec_;
    std::array<ConvBnAct<T>, 6> blocks_;
    Tensor<T> head_weight_;
    Tensor<T> head_bias_;
};

template <typename T>
std::unique_ptr<Discriminator<T>> build_discriminator(std::size_t input_side, std::size_t base_filters = 64,
                                                      std::uint64_t seed = 0);

struct SrcnnSpec {
    std::size_t upscaling_factor = 2;  // projected factor for mixture layouts
    std::size_t temporal_length = 6;   // input sequence length; only the last frame is used
    std::size_t input_side = 40;
    std::array<std::size_t, 3> kernels{9, 1, 5};
    std::array<std::size_t, 2> filters{64, 32};

    std::size_t output_side() const { return input_side * upscaling_factor; }
    std::size_t parameter_count() const;

    bool operator==(const SrcnnSpec&) const = default;
};

SrcnnSpec make_srcnn_spec(const InstanceConfig& instance);

/// Three-layer SRCNN on the bicubic-upsampled most recent coarse frame.
template <typename T>
class Srcnn final : public Generator<T> {
public:
    Srcnn(SrcnnSpec spec, std::uint64_t seed);

    Tensor<T> forward(const Tensor<T>& coarse, BnMode mode) override;
    std::vector<ArrayRef<T>> arrays() override;
    std::size_t temporal_length() const override { return spec_.temporal_length; }
    std::size_t input_side() const override { return spec_.input_side; }
    std::size_t output_side() const override { return spec_.output_side(); }
    std::string kind() const override { return "srcnn"; }

    const SrcnnSpec& spec() const { return spec_; }

private:
    SrcnnSpec spec_;
    std::array<Tensor<T>, 3> weights_;
    std::array<Tensor<T>, 3> biases_;
    std::vector<double> upsample_;  // [out_side x input_side] bicubic weights
};

template <typename T>
std::unique_ptr<Srcnn<T>> build_srcnn(const InstanceConfig& instance, std::uint64_t seed = 0);

}  // namespace mtsr
