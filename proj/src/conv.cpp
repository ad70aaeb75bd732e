// Convolution family: conv3d, conv2d (as conv3d with unit depth) and deconv3d,
// all lowered to im2col + GEMM.

#include <Eigen/Core>

#include <algorithm>
#include <string>

#include "mtsr/error.hpp"
#include "mtsr/ops.hpp"

namespace mtsr {
namespace {

const char* const kAxisNames[3] = {"depth", "height", "width"};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

// cols[(c, kd, kh, kw), (od, oh, ow)] = x[c, od*s - p + kd, ...] or 0 outside.
template <typename T>
void im2col(const T* x, std::size_t channels, const ConvGeometry& g, T* cols) {
    const std::size_t out_vol = g.out_volume();
    std::size_t row = 0;
    for (std::size_t c = 0; c < channels; ++c) {
        const T* xc = x + c * g.in_volume();
        for (std::size_t kd = 0; kd < g.kernel[0]; ++kd)
            for (std::size_t kh = 0; kh < g.kernel[1]; ++kh)
                for (std::size_t kw = 0; kw < g.kernel[2]; ++kw, ++row) {
                    T* dst = cols + row * out_vol;
                    for (std::size_t od = 0; od < g.out[0]; ++od) {
                        const long id = long(od * g.stride[0] + kd) - long(g.pad_before[0]);
                        for (std::size_t oh = 0; oh < g.out[1]; ++oh) {
                            const long ih = long(oh * g.stride[1] + kh) - long(g.pad_before[1]);
                            T* d = dst + (od * g.out[1] + oh) * g.out[2];
                            if (id < 0 || id >= long(g.in[0]) || ih < 0 || ih >= long(g.in[1])) {
                                std::fill(d, d + g.out[2], T(0));
                                continue;
                            }
                            const T* src = xc + (std::size_t(id) * g.in[1] + std::size_t(ih)) * g.in[2];
                            for (std::size_t ow = 0; ow < g.out[2]; ++ow) {
                                const long iw = long(ow * g.stride[2] + kw) - long(g.pad_before[2]);
                                d[ow] = (iw < 0 || iw >= long(g.in[2])) ? T(0) : src[iw];
                            }
                        }
                    }
                }
    }
}

// Adjoint of im2col: scatter-add the columns back into x.
template <typename T>
void col2im(const T* cols, std::size_t channels, const ConvGeometry& g, T* x) {
    const std::size_t out_vol = g.out_volume();
    std::size_t row = 0;
    for (std::size_t c = 0; c < channels; ++c) {
        T* xc = x + c * g.in_volume();
        for (std::size_t kd = 0; kd < g.kernel[0]; ++kd)
            for (std::size_t kh = 0; kh < g.kernel[1]; ++kh)
                for (std::size_t kw = 0; kw < g.kernel[2]; ++kw, ++row) {
                    const T* srcrow = cols + row * out_vol;
                    for (std::size_t od = 0; od < g.out[0]; ++od) {
                        const long id = long(od * g.stride[0] + kd) - long(g.pad_before[0]);
                        if (id < 0 || id >= long(g.in[0])) continue;
                        for (std::size_t oh = 0; oh < g.out[1]; ++oh) {
                            const long ih = long(oh * g.stride[1] + kh) - long(g.pad_before[1]);
                            if (ih < 0 || ih >= long(g.in[1])) continue;
                            const T* s = srcrow + (od * g.out[1] + oh) * g.out[2];
                            T* dst = xc + (std::size_t(id) * g.in[1] + std::size_t(ih)) * g.in[2];
                            for (std::size_t ow = 0; ow < g.out[2]; ++ow) {
                                const long iw = long(ow * g.stride[2] + kw) - long(g.pad_before[2]);
                                if (iw >= 0 && iw < long(g.in[2])) dst[iw] += s[ow];
                            }
                        }
                    }
                }
    }
}

void check_rank(const Shape& shape, std::size_t rank, const char* op, const char* what) {
    if (shape.size() != rank) {
        throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                             ", got " + shape_string(shape));
    }
}

Extent3 spatial3(const Shape& s) { return {s[2], s[3], s[4]}; }
Extent3 kernel3(const Shape& s) { return {s[2], s[3], s[4]}; }

}  // namespace

ConvGeometry resolve_conv(const Extent3& in, const Extent3& kernel, const ConvOptions& options) {
    ConvGeometry g;
    g.in = in;
    g.kernel = kernel;
    g.stride = options.stride;
    for (int a = 0; a < 3; ++a) {
        if (options.stride[a] == 0) {
            throw DimensionError(std::string("conv: stride along ") + kAxisNames[a] + " must be >= 1");
        }
        std::size_t before = options.padding.before[a];
        std::size_t after = options.padding.after[a];
        if (options.padding.mode == Padding::Mode::Same) {
            const std::size_t s = options.stride[a];
            const std::size_t target = (in[a] + s - 1) / s;
            const long total = long((target - 1) * s + kernel[a]) - long(in[a]);
            const std::size_t t = total > 0 ? std::size_t(total) : 0;
            before = t / 2;
            after = t - before;
        }
        const std::size_t padded = in[a] + before + after;
        if (kernel[a] == 0 || kernel[a] > padded) {
            throw DimensionError(std::string("conv: kernel extent ") + std::to_string(kernel[a]) + " along " +
                                 kAxisNames[a] + " exceeds padded input extent " + std::to_string(padded));
        }
        g.pad_before[a] = before;
        g.out[a] = (padded - kernel[a]) / options.stride[a] + 1;
    }
    return g;
}

ConvGeometry resolve_deconv(const Extent3& in, const Extent3& kernel, const DeconvOptions& options) {
    Extent3 out{};
    for (int a = 0; a < 3; ++a) {
        const std::size_t s = options.stride[a];
        if (s == 0) {
            throw DimensionError(std::string("deconv: stride along ") + kAxisNames[a] + " must be >= 1");
        }
        if (options.padding.mode == Padding::Mode::Same) {
            out[a] = in[a] * s;
        } else {
            const long base = long((in[a] - 1) * s + kernel[a]) -
                              long(options.padding.before[a] + options.padding.after[a]);
            if (base <= 0) {
                throw DimensionError(std::string("deconv: padding consumes the whole output along ") +
                                     kAxisNames[a]);
            }
            out[a] = std::size_t(base);
        }
        if (options.output_extent) {
            const std::size_t want = (*options.output_extent)[a];
            // Same mode: any extent whose strided ceil is `in`; explicit padding: the stride remainder.
            const bool same = options.padding.mode == Padding::Mode::Same;
            const bool ok = same ? (want <= out[a] && want + s > out[a]) : (want >= out[a] && want < out[a] + s);
            if (!ok) {
                throw DimensionError(std::string("deconv: requested output extent ") + std::to_string(want) +
                                     " along " + kAxisNames[a] + " is not reachable (base " +
                                     std::to_string(out[a]) + ", stride " + std::to_string(s) + ")");
            }
            out[a] = want;
        }
    }
    ConvOptions forward{options.stride, options.padding};
    ConvGeometry g = resolve_conv(out, kernel, forward);
    for (int a = 0; a < 3; ++a) {
        if (g.out[a] != in[a]) {
            throw DimensionError(std::string("deconv: inconsistent geometry along ") + kAxisNames[a]);
        }
    }
    return g;
}

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernel, const ConvOptions& options) {
    check_rank(x.shape(), 5, "conv3d", "input");
    check_rank(kernel.shape(), 5, "conv3d", "kernel");
    const std::size_t n = x.dim(0), cin = x.dim(1), cout = kernel.dim(0);
    if (kernel.dim(1) != cin) {
        throw DimensionError("conv3d: input channels (axis 1) " + std::to_string(cin) +
                             " do not match kernel input channels (axis 1) " + std::to_string(kernel.dim(1)));
    }
    const ConvGeometry g = resolve_conv(spatial3(x.shape()), kernel3(kernel.shape()), options);
    const std::size_t kcols = cin * g.kernel_volume();
    const std::size_t out_vol = g.out_volume();
    const std::size_t in_vol = g.in_volume();

    std::vector<T> out(n * cout * out_vol, T(0));
    std::vector<T> cols(kcols * out_vol);
    ConstMatMap<T> kmat(kernel.values().data(), cout, kcols);
    for (std::size_t b = 0; b < n; ++b) {
        im2col(x.values().data() + b * cin * in_vol, cin, g, cols.data());
        MatMap<T>(out.data() + b * cout * out_vol, cout, out_vol).noalias() =
            kmat * ConstMatMap<T>(cols.data(), kcols, out_vol);
    }

    return Tensor<T>::make_result(
        {n, cout, g.out[0], g.out[1], g.out[2]}, std::move(out), {x, kernel},
        [g, n, cin, cout, kcols, in_vol, out_vol](typename Tensor<T>::Node& self) {
            auto& xn = *self.parents[0];
            auto& kn = *self.parents[1];
            std::vector<T> cols(kcols * out_vol);
            ConstMatMap<T> kmat(kn.value.data(), cout, kcols);
            for (std::size_t b = 0; b < n; ++b) {
                ConstMatMap<T> dy(self.grad.data() + b * cout * out_vol, cout, out_vol);
                if (kn.requires_grad) {
                    im2col(xn.value.data() + b * cin * in_vol, cin, g, cols.data());
                    MatMap<T>(kn.ensure_grad().data(), cout, kcols).noalias() +=
                        dy * ConstMatMap<T>(cols.data(), kcols, out_vol).transpose();
                }
                if (xn.requires_grad) {
                    MatMap<T>(cols.data(), kcols, out_vol).noalias() = kmat.transpose() * dy;
                    col2im(cols.data(), cin, g, xn.ensure_grad().data() + b * cin * in_vol);
                }
            }
        });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const ConvOptions& options) {
    check_rank(x.shape(), 4, "conv2d", "input");
    check_rank(kernel.shape(), 4, "conv2d", "kernel");
    ConvOptions opts = options;
    opts.stride[0] = 1;
    opts.padding.before[0] = 0;
    opts.padding.after[0] = 0;
    const Shape& xs = x.shape();
    const Shape& ks = kernel.shape();
    Tensor<T> x5 = reshape(x, {xs[0], xs[1], 1, xs[2], xs[3]});
    Tensor<T> k5 = reshape(kernel, {ks[0], ks[1], 1, ks[2], ks[3]});
    Tensor<T> y = conv3d(x5, k5, opts);
    const Shape& ys = y.shape();
    return reshape(y, {ys[0], ys[1], ys[3], ys[4]});
}

template <typename T>
Tensor<T> deconv3d(const Tensor<T>& x, const Tensor<T>& kernel, const DeconvOptions& options) {
    check_rank(x.shape(), 5, "deconv3d", "input");
    check_rank(kernel.shape(), 5, "deconv3d", "kernel");
    const std::size_t n = x.dim(0), cin = x.dim(1), cout = kernel.dim(1);
    if (kernel.dim(0) != cin) {
        throw DimensionError("deconv3d: input channels (axis 1) " + std::to_string(cin) +
                             " do not match kernel input channels (axis 0) " + std::to_string(kernel.dim(0)));
    }
    // g describes the forward convolution from the deconv output back to its input.
    const ConvGeometry g = resolve_deconv(spatial3(x.shape()), kernel3(kernel.shape()), options);
    const std::size_t kcols = cout * g.kernel_volume();
    const std::size_t small_vol = g.out_volume();  // deconv input extent
    const std::size_t big_vol = g.in_volume();     // deconv output extent

    std::vector<T> out(n * cout * big_vol, T(0));
    std::vector<T> cols(kcols * small_vol);
    ConstMatMap<T> kmat(kernel.values().data(), cin, kcols);
    for (std::size_t b = 0; b < n; ++b) {
        MatMap<T>(cols.data(), kcols, small_vol).noalias() =
            kmat.transpose() * ConstMatMap<T>(x.values().data() + b * cin * small_vol, cin, small_vol);
        col2im(cols.data(), cout, g, out.data() + b * cout * big_vol);
    }

    return Tensor<T>::make_result(
        {n, cout, g.in[0], g.in[1], g.in[2]}, std::move(out), {x, kernel},
        [g, n, cin, cout, kcols, small_vol, big_vol](typename Tensor<T>::Node& self) {
            auto& xn = *self.parents[0];
            auto& kn = *self.parents[1];
            std::vector<T> cols(kcols * small_vol);
            ConstMatMap<T> kmat(kn.value.data(), cin, kcols);
            for (std::size_t b = 0; b < n; ++b) {
                im2col(self.grad.data() + b * cout * big_vol, cout, g, cols.data());
                ConstMatMap<T> gcols(cols.data(), kcols, small_vol);
                if (xn.requires_grad) {
                    MatMap<T>(xn.ensure_grad().data() + b * cin * small_vol, cin, small_vol).noalias() +=
                        kmat * gcols;
                }
                if (kn.requires_grad) {
                    MatMap<T>(kn.ensure_grad().data(), cin, kcols).noalias() +=
                        ConstMatMap<T>(xn.value.data() + b * cin * small_vol, cin, small_vol) *
                        gcols.transpose();
                }
            }
        });
}

template Tensor<float> conv3d(const Tensor<float>&, const Tensor<float>&, const ConvOptions&);
template Tensor<double> conv3d(const Tensor<double>&, const Tensor<double>&, const ConvOptions&);
template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const ConvOptions&);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&, const ConvOptions&);
template Tensor<float> deconv3d(const Tensor<float>&, const Tensor<float>&, const DeconvOptions&);
template Tensor<double> deconv3d(const Tensor<double>&, const Tensor<double>&, const DeconvOptions&);

}  // namespace mtsr
