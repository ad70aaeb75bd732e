#include "mtsr/networks.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "mtsr/baselines.hpp"
#include "mtsr/error.hpp"

namespace mtsr {

std::string to_string(LayoutKind kind) { return kind == LayoutKind::Uniform ? "uniform" : "mixture"; }

LayoutKind layout_kind_from_string(const std::string& text) {
    if (text == "uniform") return LayoutKind::Uniform;
    if (text == "mixture") return LayoutKind::Mixture;
    throw ConfigError("unknown layout kind '" + text + "' (expected uniform or mixture)");
}

std::size_t InstanceConfig::effective_factor() const {
    return layout == LayoutKind::Mixture ? kMixtureMeanFactor : upscaling_factor;
}

std::string InstanceConfig::name() const {
    return layout == LayoutKind::Mixture ? "mixture" : "up" + std::to_string(upscaling_factor);
}

void InstanceConfig::validate() const {
    if (temporal_length < 1) throw ConfigError("instance: temporal length S must be >= 1");
    if (window_side < 1) throw ConfigError("instance: window side must be positive");
    const std::size_t f = effective_factor();
    if (f < 1) throw ConfigError("instance: upscaling factor must be positive");
    if (window_side % f != 0) {
        throw ConfigError("instance: window side " + std::to_string(window_side) + " is not divisible by factor " +
                          std::to_string(f));
    }
}

std::vector<std::size_t> upscaling_strides(std::size_t factor) {
    switch (factor) {
        case 2: return {2};
        case 4: return {2, 2};
        case 10: return {2, 5, 1};
        default:
            throw ConfigError("no upscaling block factorization for n_f = " + std::to_string(factor) +
                              " (supported: 2, 4, 10)");
    }
}

std::size_t ZipNetSpec::upscaling_factor() const {
    std::size_t f = 1;
    for (const auto& s : upscaling) f *= s.spatial_stride;
    return f;
}

void ZipNetSpec::validate() const {
    if (upscaling.empty() || upscaling.size() > 3) {
        throw ConfigError("zipnet: need 1 to 3 upscaling blocks, got " + std::to_string(upscaling.size()));
    }
    for (const auto& s : upscaling) {
        if (s.spatial_stride < 1 || s.filters < 1) throw ConfigError("zipnet: invalid upscaling block");
    }
    if (zipper_modules < 2 || zipper_modules % 2 != 0) {
        throw ConfigError("zipnet: zipper module count K must be even and >= 2, got " +
                          std::to_string(zipper_modules));
    }
    if (zipper_filters < 1 || final_filters[0] < 1 || final_filters[1] < 1) {
        throw ConfigError("zipnet: filter counts must be positive");
    }
    if (final_filters[2] != 1) throw ConfigError("zipnet: the last final-block layer must have 1 filter");
    if (temporal_length < 1 || input_side < 1) throw ConfigError("zipnet: invalid input geometry");
}

ZipNetSpec make_zipnet_spec(const InstanceConfig& instance, const ZipNetWidths& widths) {
    instance.validate();
    ZipNetSpec spec;
    for (std::size_t s : upscaling_strides(instance.effective_factor())) {
        spec.upscaling.push_back({s, widths.upscaling_filters});
    }
    spec.zipper_modules = widths.zipper_modules;
    spec.zipper_filters = widths.zipper_filters;
    spec.final_filters = widths.final_filters;
    spec.temporal_length = instance.temporal_length;
    spec.input_side = instance.coarse_side();
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Module

template <typename T>
std::vector<Tensor<T>> Module<T>::parameters() {
    std::vector<Tensor<T>> out;
    for (auto& a : arrays())
        if (a.trainable) out.push_back(a.tensor);
    return out;
}

template <typename T>
std::size_t Module<T>::parameter_count() {
    std::size_t n = 0;
    for (auto& a : arrays())
        if (a.trainable) n += a.data.size();
    return n;
}

template <typename T>
void Module<T>::set_trainable(bool trainable) {
    for (auto& p : parameters()) p.set_requires_grad(trainable);
}

template <typename T>
void Module<T>::zero_grad() {
    for (auto& p : parameters()) p.zero_grad();
}

namespace {

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    // He-style fan-in scaling.
    template <typename T>
    Tensor<T> he(Shape shape, double fan_in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        std::vector<T> values(shape_size(shape));
        for (auto& v : values) v = T(dist(rng_));
        return Tensor<T>::from_values(std::move(shape), std::move(values), true);
    }

private:
    std::mt19937_64 rng_;
};

template <typename T>
BatchNormLayer<T> make_bn(std::size_t channels) {
    return {Tensor<T>::full({channels}, T(1), true), Tensor<T>::zeros({channels}, true),
            BatchNormStats<T>(channels)};
}

template <typename T>
ConvBnAct<T> make_conv_bn(Initializer& init, Shape kernel_shape) {
    double fan_in = 1;
    for (std::size_t i = 1; i < kernel_shape.size(); ++i) fan_in *= double(kernel_shape[i]);
    const std::size_t cout = kernel_shape[0];
    return {init.he<T>(std::move(kernel_shape), fan_in), make_bn<T>(cout)};
}

template <typename T>
void push_param(std::vector<ArrayRef<T>>& out, const std::string& name, Tensor<T>& t) {
    out.push_back({name, t.shape(), t.mutable_values(), true, t});
}

template <typename T>
void push_bn(std::vector<ArrayRef<T>>& out, const std::string& prefix, BatchNormLayer<T>& bn) {
    push_param(out, prefix + ".gamma", bn.gamma);
    push_param(out, prefix + ".beta", bn.beta);
    const std::size_t c = bn.stats.running_mean.size();
    out.push_back({prefix + ".running_mean", {c}, bn.stats.running_mean, false, {}});
    out.push_back({prefix + ".running_var", {c}, bn.stats.running_var, false, {}});
}

template <typename T>
void push_conv_bn(std::vector<ArrayRef<T>>& out, const std::string& prefix, ConvBnAct<T>& layer) {
    push_param(out, prefix + ".weight", layer.weight);
    push_bn(out, prefix + ".bn", layer.bn);
}

template <typename T>
Tensor<T> apply_bn(const Tensor<T>& x, BatchNormLayer<T>& bn, BnMode mode) {
    return batchnorm(x, bn.gamma, bn.beta, bn.stats, mode);
}

template <typename T>
Tensor<T> apply2d(const Tensor<T>& x, ConvBnAct<T>& layer, BnMode mode, std::size_t stride = 1) {
    ConvOptions opts;
    opts.stride = {1, stride, stride};
    opts.padding = Padding::same();
    return lrelu(apply_bn(conv2d(x, layer.weight, opts), layer.bn, mode));
}

template <typename T>
Tensor<T> apply3d(const Tensor<T>& x, ConvBnAct<T>& layer, BnMode mode) {
    ConvOptions opts;
    opts.padding = Padding::same();
    return lrelu(apply_bn(conv3d(x, layer.weight, opts), layer.bn, mode));
}

std::size_t deconv_kernel(std::size_t stride) { return stride == 1 ? 3 : 2 * stride; }

}  // namespace

// ---------------------------------------------------------------------------
// ZipNet

template <typename T>
ZipNet<T>::ZipNet(ZipNetSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    Initializer init(seed);
    std::size_t channels = 1;
    for (const auto& st : spec_.upscaling) {
        Stage stage;
        stage.stride = st.spatial_stride;
        const std::size_t k = deconv_kernel(st.spatial_stride);
        // Each output cell of a stride-s deconvolution receives ~kvol/s^2 taps per input channel.
        const double fan_in = double(channels) * 3.0 * double(k * k) / double(st.spatial_stride * st.spatial_stride);
        stage.deconv = init.he<T>({channels, st.filters, 3, k, k}, fan_in);
        for (auto& conv : stage.convs) conv = make_conv_bn<T>(init, {st.filters, st.filters, 3, 3, 3});
        channels = st.filters;
        stages_.push_back(std::move(stage));
    }
    fold_ = make_conv_bn<T>(init, {spec_.zipper_filters, channels * spec_.temporal_length, 3, 3});
    for (std::size_t i = 0; i < spec_.zipper_modules; ++i) {
        zipper_.push_back(make_conv_bn<T>(init, {spec_.zipper_filters, spec_.zipper_filters, 3, 3}));
    }
    final_hidden_[0] = make_conv_bn<T>(init, {spec_.final_filters[0], spec_.zipper_filters, 3, 3});
    final_hidden_[1] = make_conv_bn<T>(init, {spec_.final_filters[1], spec_.final_filters[0], 3, 3});
    final_weight_ = init.he<T>({1, spec_.final_filters[1], 3, 3}, double(spec_.final_filters[1] * 9));
    final_bias_ = Tensor<T>::zeros({1}, true);
}

template <typename T>
Tensor<T> ZipNet<T>::zipper_forward(const Tensor<T>& x, BnMode mode) {
    if (x.rank() != 4 || x.dim(1) != spec_.zipper_filters) {
        throw DimensionError("zipper block: expected [N, " + std::to_string(spec_.zipper_filters) +
                             ", H, W], got " + shape_string(x.shape()));
    }
    Tensor<T> prev2 = x;  // a_{i-2}
    Tensor<T> prev1 = x;  // a_{i-1}
    for (auto& module : zipper_) {
        Tensor<T> b = apply2d(prev1, module, mode);
        Tensor<T> next = spec_.zipper_skips ? add(b, prev2) : b;
        prev2 = prev1;
        prev1 = next;
    }
    return spec_.zipper_skips ? add(prev1, x) : prev1;
}

template <typename T>
Tensor<T> ZipNet<T>::forward(const Tensor<T>& coarse, BnMode mode) {
    const Shape& s = coarse.shape();
    if (s.size() != 5 || s[1] != 1 || s[2] != spec_.temporal_length || s[3] != spec_.input_side ||
        s[4] != spec_.input_side) {
        throw DimensionError("zipnet: expected input [N, 1, " + std::to_string(spec_.temporal_length) + ", " +
                             std::to_string(spec_.input_side) + ", " + std::to_string(spec_.input_side) +
                             "], got " + shape_string(s));
    }
    Tensor<T> h = coarse;
    for (auto& stage : stages_) {
        DeconvOptions up;
        up.stride = {1, stage.stride, stage.stride};
        up.padding = Padding::same();
        h = deconv3d(h, stage.deconv, up);
        for (auto& conv : stage.convs) h = apply3d(h, conv, mode);
    }
    // Fold time into channels: [N, F, S, H, W] -> [N, F*S, H, W].
    const Shape& hs = h.shape();
    h = reshape(h, {hs[0], hs[1] * hs[2], hs[3], hs[4]});
    h = apply2d(h, fold_, mode);
    h = zipper_forward(h, mode);
    for (auto& layer : final_hidden_) h = apply2d(h, layer, mode);
    ConvOptions opts;
    opts.padding = Padding::same();
    return channel_bias(conv2d(h, final_weight_, opts), final_bias_);
}

template <typename T>
std::vector<ArrayRef<T>> ZipNet<T>::arrays() {
    std::vector<ArrayRef<T>> out;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const std::string p = "up" + std::to_string(i);
        push_param(out, p + ".deconv", stages_[i].deconv);
        for (std::size_t c = 0; c < 3; ++c) push_conv_bn(out, p + ".conv" + std::to_string(c), stages_[i].convs[c]);
    }
    push_conv_bn(out, "fold", fold_);
    for (std::size_t i = 0; i < zipper_.size(); ++i) push_conv_bn(out, "zip" + std::to_string(i), zipper_[i]);
    push_conv_bn(out, "final0", final_hidden_[0]);
    push_conv_bn(out, "final1", final_hidden_[1]);
    push_param(out, "final2.weight", final_weight_);
    push_param(out, "final2.bias", final_bias_);
    return out;
}

template <typename T>
std::unique_ptr<ZipNet<T>> build_zipnet(const InstanceConfig& instance, const ZipNetWidths& widths,
                                        std::uint64_t seed) {
    return std::make_unique<ZipNet<T>>(make_zipnet_spec(instance, widths), seed);
}

// ---------------------------------------------------------------------------
// Discriminator

DiscriminatorSpec DiscriminatorSpec::with_base(std::size_t base, std::size_t input_side) {
    DiscriminatorSpec spec;
    spec.filters = {base, base, 2 * base, 2 * base, 4 * base, 4 * base};
    spec.input_side = input_side;
    spec.validate();
    return spec;
}

void DiscriminatorSpec::validate() const {
    for (std::size_t i = 0; i < 6; ++i) {
        if (filters[i] < 1 || strides[i] < 1) throw ConfigError("discriminator: filters and strides must be >= 1");
    }
    if (input_side < 1) throw ConfigError("discriminator: input side must be positive");
}

template <typename T>
Discriminator<T>::Discriminator(DiscriminatorSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Initializer init(seed);
    std::size_t channels = 1;
    for (std::size_t i = 0; i < 6; ++i) {
        blocks_[i] = make_conv_bn<T>(init, {spec_.filters[i], channels, 3, 3});
        channels = spec_.filters[i];
    }
    head_weight_ = init.he<T>({channels}, double(channels));
    head_bias_ = Tensor<T>::zeros({1}, true);
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& frame, BnMode mode) {
    const Shape& s = frame.shape();
    if (s.size() != 4 || s[1] != 1 || s[2] != spec_.input_side || s[3] != spec_.input_side) {
        throw DimensionError("discriminator: expected input [N, 1, " + std::to_string(spec_.input_side) + ", " +
                             std::to_string(spec_.input_side) + "], got " + shape_string(s));
    }
    Tensor<T> h = frame;
    for (std::size_t i = 0; i < 6; ++i) h = apply2d(h, blocks_[i], mode, spec_.strides[i]);
    return sigmoid(affine_reduce(global_avg_pool(h), head_weight_, head_bias_));
}

template <typename T>
std::vector<ArrayRef<T>> Discriminator<T>::arrays() {
    std::vector<ArrayRef<T>> out;
    for (std::size_t i = 0; i < 6; ++i) push_conv_bn(out, "block" + std::to_string(i), blocks_[i]);
    push_param(out, "head.weight", head_weight_);
    push_param(out, "head.bias", head_bias_);
    return out;
}

template <typename T>
std::unique_ptr<Discriminator<T>> build_discriminator(std::size_t input_side, std::size_t base_filters,
                                                      std::uint64_t seed) {
    return std::make_unique<Discriminator<T>>(DiscriminatorSpec::with_base(base_filters, input_side), seed);
}

// ---------------------------------------------------------------------------
// SRCNN

std::size_t SrcnnSpec::parameter_count() const {
    const std::size_t f1 = filters[0], f2 = filters[1];
    return f1 * kernels[0] * kernels[0] + f1 + f2 * f1 * kernels[1] * kernels[1] + f2 + f2 * kernels[2] * kernels[2] +
           1;
}

SrcnnSpec make_srcnn_spec(const InstanceConfig& instance) {
    instance.validate();
    SrcnnSpec spec;
    spec.upscaling_factor = instance.effective_factor();
    spec.temporal_length = instance.temporal_length;
    spec.input_side = instance.coarse_side();
    return spec;
}

template <typename T>
Srcnn<T>::Srcnn(SrcnnSpec spec, std::uint64_t seed) : spec_(spec) {
    Initializer init(seed);
    const std::array<std::size_t, 3> cin{1, spec_.filters[0], spec_.filters[1]};
    const std::array<std::size_t, 3> cout{spec_.filters[0], spec_.filters[1], 1};
    for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t k = spec_.kernels[i];
        weights_[i] = init.he<T>({cout[i], cin[i], k, k}, double(cin[i] * k * k));
        biases_[i] = Tensor<T>::zeros({cout[i]}, true);
    }
    // Bicubic is separable and linear, so one impulse per coarse row recovers the 1-D weights.
    const std::size_t side = spec_.input_side, out_side = spec_.output_side();
    upsample_.assign(out_side * side, 0.0);
    for (std::size_t j = 0; j < side; ++j) {
        Grid impulse(side, side, 0.0);
        for (std::size_t c = 0; c < side; ++c) impulse(j, c) = 1.0;
        const Grid fine = bicubic_upsample(impulse, spec_.upscaling_factor);
        for (std::size_t r = 0; r < out_side; ++r) upsample_[r * side + j] = fine(r, 0);
    }
}

template <typename T>
Tensor<T> Srcnn<T>::forward(const Tensor<T>& coarse, BnMode) {
    const Shape& s = coarse.shape();
    if (s.size() != 5 || s[1] != 1 || s[2] != spec_.temporal_length || s[3] != spec_.input_side ||
        s[4] != spec_.input_side) {
        throw DimensionError("srcnn: expected input [N, 1, " + std::to_string(spec_.temporal_length) + ", " +
                             std::to_string(spec_.input_side) + ", " + std::to_string(spec_.input_side) +
                             "], got " + shape_string(s));
    }
    const std::size_t out_side = spec_.output_side();
    Tensor<T> h = separable_map(select_frame(coarse, s[2] - 1), upsample_, out_side, upsample_, out_side);
    ConvOptions opts;
    opts.padding = Padding::same();
    for (std::size_t i = 0; i < 3; ++i) {
        h = channel_bias(conv2d(h, weights_[i], opts), biases_[i]);
        if (i < 2) h = relu(h);
    }
    return h;
}

template <typename T>
std::vector<ArrayRef<T>> Srcnn<T>::arrays() {
    std::vector<ArrayRef<T>> out;
    for (std::size_t i = 0; i < 3; ++i) {
        push_param(out, "conv" + std::to_string(i) + ".weight", weights_[i]);
        push_param(out, "conv" + std::to_string(i) + ".bias", biases_[i]);
    }
    return out;
}

template <typename T>
std::unique_ptr<Srcnn<T>> build_srcnn(const InstanceConfig& instance, std::uint64_t seed) {
    return std::make_unique<Srcnn<T>>(make_srcnn_spec(instance), seed);
}

#define MTSR_INSTANTIATE_NETWORKS(T)                                                                            \
    template class Module<T>;                                                                                  \
    template class ZipNet<T>;                                                                                  \
    template class Discriminator<T>;                                                                           \
    template class Srcnn<T>;                                                                                   \
    template std::unique_ptr<ZipNet<T>> build_zipnet(const InstanceConfig&, const ZipNetWidths&, std::uint64_t); \
    template std::unique_ptr<Discriminator<T>> build_discriminator(std::size_t, std::size_t, std::uint64_t);   \
    template std::unique_ptr<Srcnn<T>> build_srcnn(const InstanceConfig&, std::uint64_t);

MTSR_INSTANTIATE_NETWORKS(float)
MTSR_INSTANTIATE_NETWORKS(double)

#undef MTSR_INSTANTIATE_NETWORKS

}  // namespace mtsr
