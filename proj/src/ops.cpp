#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "mtsr/error.hpp"
#include "mtsr/ops.hpp"

namespace mtsr {
namespace {

template <typename T>
using Node = typename Tensor<T>::Node;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()) + " differ");
    }
}

// Applies f element-wise; df(x, y) is the local derivative given input and output.
template <typename T, typename F, typename DF>
Tensor<T> unary(const Tensor<T>& x, F f, DF df) {
    std::vector<T> out(x.size());
    auto in = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [df](Node<T>& self) {
        auto& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        auto& gx = xn.ensure_grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * df(xn.value[i], self.value[i]);
    });
}

}  // namespace

template <typename T>
Tensor<T> channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
    if (x.rank() < 2 || bias.size() != x.dim(1)) {
        throw DimensionError("channel_bias: bias of " + std::to_string(bias.size()) +
                             " entries does not match channel axis of " + shape_string(x.shape()));
    }
    const std::size_t n = x.dim(0), c = x.dim(1), inner_size = x.size() / (n * c);
    std::vector<T> out(x.values().begin(), x.values().end());
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
            T* p = out.data() + (b * c + ch) * inner_size;
            for (std::size_t i = 0; i < inner_size; ++i) p[i] += bias[ch];
        }
    return Tensor<T>::make_result(x.shape(), std::move(out), {x, bias}, [n, c, inner_size](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& bn = *self.parents[1];
        if (xn.requires_grad) {
            auto& gx = xn.ensure_grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
        }
        if (bn.requires_grad) {
            auto& gb = bn.ensure_grad();
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const T* g = self.grad.data() + (b * c + ch) * inner_size;
                    T acc = 0;
                    for (std::size_t i = 0; i < inner_size; ++i) acc += g[i];
                    gb[ch] += acc;
                }
        }
    });
}

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormStats<T>& stats,
                    BnMode mode, double eps, double momentum) {
    if (x.rank() < 2) throw DimensionError("batchnorm: input needs a channel axis, got " + shape_string(x.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1);
    if (n == 0) throw DimensionError("batchnorm: zero-size batch");
    if (gamma.size() != c || beta.size() != c) {
        throw DimensionError("batchnorm: gamma/beta length must equal channel extent " + std::to_string(c));
    }
    if (stats.running_mean.size() != c) {
        throw DimensionError("batchnorm: running statistics hold " + std::to_string(stats.running_mean.size()) +
                             " channels, input has " + std::to_string(c));
    }
    if (!(eps > 0)) throw ConfigError("batchnorm: eps must be positive");
    const std::size_t inner_size = x.size() / (n * c);
    const std::size_t count = n * inner_size;
    if (count == 0) throw DimensionError("batchnorm: zero-size batch");
    auto in = x.values();

    std::vector<T> mean(c), invstd(c);
    const bool batch_stats = mode != BnMode::Infer;
    for (std::size_t ch = 0; ch < c; ++ch) {
        if (batch_stats) {
            double m = 0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = in.data() + (b * c + ch) * inner_size;
                for (std::size_t i = 0; i < inner_size; ++i) m += p[i];
            }
            m /= double(count);
            double v = 0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = in.data() + (b * c + ch) * inner_size;
                for (std::size_t i = 0; i < inner_size; ++i) v += (p[i] - m) * (p[i] - m);
            }
            v /= double(count);
            mean[ch] = T(m);
            invstd[ch] = T(1.0 / std::sqrt(v + eps));
            if (mode == BnMode::Train) {
                const double unbiased = count > 1 ? v * double(count) / double(count - 1) : v;
                stats.running_mean[ch] = T(momentum * stats.running_mean[ch] + (1 - momentum) * m);
                stats.running_var[ch] = T(momentum * stats.running_var[ch] + (1 - momentum) * unbiased);
            }
        } else {
            mean[ch] = stats.running_mean[ch];
            invstd[ch] = T(1.0 / std::sqrt(double(stats.running_var[ch]) + eps));
        }
    }

    std::vector<T> out(x.size());
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * inner_size;
            const T g = gamma[ch], be = beta[ch], m = mean[ch], is = invstd[ch];
            for (std::size_t i = 0; i < inner_size; ++i) out[off + i] = g * ((in[off + i] - m) * is) + be;
        }

    return Tensor<T>::make_result(
        x.shape(), std::move(out), {x, gamma, beta},
        [n, c, inner_size, count, batch_stats, mean = std::move(mean), invstd = std::move(invstd)](Node<T>& self) {
            auto& xn = *self.parents[0];
            auto& gn = *self.parents[1];
            auto& bn = *self.parents[2];
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T m = mean[ch], is = invstd[ch], g = gn.value[ch];
                double sum_dy = 0, sum_dy_xhat = 0;
                for (std::size_t b = 0; b < n; ++b) {
                    const std::size_t off = (b * c + ch) * inner_size;
                    for (std::size_t i = 0; i < inner_size; ++i) {
                        const double dy = self.grad[off + i];
                        sum_dy += dy;
                        sum_dy_xhat += dy * double((xn.value[off + i] - m) * is);
                    }
                }
                if (gn.requires_grad) gn.ensure_grad()[ch] += T(sum_dy_xhat);
                if (bn.requires_grad) bn.ensure_grad()[ch] += T(sum_dy);
                if (!xn.requires_grad) continue;
                auto& gx = xn.ensure_grad();
                for (std::size_t b = 0; b < n; ++b) {
                    const std::size_t off = (b * c + ch) * inner_size;
                    for (std::size_t i = 0; i < inner_size; ++i) {
                        const double dy = self.grad[off + i];
                        if (batch_stats) {
                            const double xhat = double((xn.value[off + i] - m) * is);
                            gx[off + i] += T(double(g) * double(is) / double(count) *
                                             (double(count) * dy - sum_dy - xhat * sum_dy_xhat));
                        } else {
                            gx[off + i] += T(dy * double(g) * double(is));
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> lrelu(const Tensor<T>& x, double alpha) {
    if (!(alpha > 0)) throw ConfigError("lrelu: alpha must be positive");
    const T a = T(alpha);
    return unary(
        x, [a](T v) { return v >= T(0) ? v : a * v; }, [a](T v, T) { return v >= T(0) ? T(1) : a; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return unary(
        x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return unary(
        x,
        [](T v) {
            // Split by sign so exp never overflows.
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            const T e = std::exp(v);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> log_clamped(const Tensor<T>& x, double lo, double hi) {
    if (!(lo > 0) || !(hi >= lo)) throw ConfigError("log_clamped: need 0 < lo <= hi");
    const T l = T(lo), h = T(hi);
    return unary(
        x, [l, h](T v) { return std::log(std::clamp(v, l, h)); },
        [l, h](T v, T) { return (v < l || v > h) ? T(0) : T(1) / v; });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
        for (int k = 0; k < 2; ++k) {
            auto& p = *self.parents[k];
            if (!p.requires_grad) continue;
            auto& g = p.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "sub");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
        }
    });
}

template <typename T>
Tensor<T> affine_scalar(const Tensor<T>& x, double a, double b) {
    const T ta = T(a), tb = T(b);
    return unary(
        x, [ta, tb](T v) { return ta * v + tb; }, [ta](T, T) { return ta; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
    return unary(
        x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
    }
    std::vector<T> out(x.values().begin(), x.values().end());
    return Tensor<T>::make_result(std::move(shape), std::move(out), {x}, [](Node<T>& self) {
        auto& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        auto& g = xn.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    double acc = 0;
    for (T v : x.values()) acc += v;
    return Tensor<T>::make_result({1}, {T(acc)}, {x}, [](Node<T>& self) {
        auto& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        auto& g = xn.ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    if (x.size() == 0) throw DimensionError("mean: empty tensor");
    const double count = double(x.size());
    double acc = 0;
    for (T v : x.values()) acc += v;
    return Tensor<T>::make_result({1}, {T(acc / count)}, {x}, [count](Node<T>& self) {
        auto& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        auto& g = xn.ensure_grad();
        const T d = T(double(self.grad[0]) / count);
        for (auto& v : g) v += d;
    });
}

template <typename T>
Tensor<T> sum_per_sample(const Tensor<T>& x) {
    if (x.rank() < 1 || x.dim(0) == 0) throw DimensionError("sum_per_sample: empty batch");
    const std::size_t n = x.dim(0), per = x.size() / n;
    std::vector<T> out(n);
    for (std::size_t b = 0; b < n; ++b) {
        double acc = 0;
        for (std::size_t i = 0; i < per; ++i) acc += x[b * per + i];
        out[b] = T(acc);
    }
    return Tensor<T>::make_result({n}, std::move(out), {x}, [n, per](Node<T>& self) {
        auto& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        auto& g = xn.ensure_grad();
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < per; ++i) g[b * per + i] += self.grad[b];
    });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    if (x.rank() < 3) throw DimensionError("global_avg_pool: expected [N, C, ...], got " + shape_string(x.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1), per = x.size() / (n * c);
    std::vector<T> out(n * c);
    for (std::size_t k = 0; k < n * c; ++k) {
        double acc = 0;
        for (std::size_t i = 0; i < per; ++i) acc += x[k * per + i];
        out[k] = T(acc / double(per));
    }
    return Tensor<T>::make_result({n, c}, std::move(out), {x}, [n, c, per](Node<T>& self) {
        auto& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        auto& g = xn.ensure_grad();
        for (std::size_t k = 0; k < n * c; ++k) {
            const T d = T(double(self.grad[k]) / double(per));
            for (std::size_t i = 0; i < per; ++i) g[k * per + i] += d;
        }
    });
}

template <typename T>
Tensor<T> affine_reduce(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (x.rank() != 2 || weight.size() != x.dim(1) || bias.size() != 1) {
        throw DimensionError("affine_reduce: expected x [N, C], weight [C], bias [1]; got " +
                             shape_string(x.shape()) + ", " + shape_string(weight.shape()) + ", " +
                             shape_string(bias.shape()));
    }
    const std::size_t n = x.dim(0), c = x.dim(1);
    std::vector<T> out(n);
    for (std::size_t b = 0; b < n; ++b) {
        T acc = bias[0];
        for (std::size_t k = 0; k < c; ++k) acc += x[b * c + k] * weight[k];
        out[b] = acc;
    }
    return Tensor<T>::make_result({n}, std::move(out), {x, weight, bias}, [n, c](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        for (std::size_t b = 0; b < n; ++b) {
            const T dy = self.grad[b];
            if (xn.requires_grad) {
                auto& g = xn.ensure_grad();
                for (std::size_t k = 0; k < c; ++k) g[b * c + k] += dy * wn.value[k];
            }
            if (wn.requires_grad) {
                auto& g = wn.ensure_grad();
                for (std::size_t k = 0; k < c; ++k) g[k] += dy * xn.value[b * c + k];
            }
            if (bn.requires_grad) bn.ensure_grad()[0] += dy;
        }
    });
}

template <typename T>
Tensor<T> select_frame(const Tensor<T>& x, std::size_t frame) {
    if (x.rank() != 5 || frame >= x.dim(2)) {
        throw DimensionError("select_frame: frame " + std::to_string(frame) + " out of range for " +
                             shape_string(x.shape()));
    }
    const std::size_t n = x.dim(0), c = x.dim(1), s = x.dim(2), plane = x.dim(3) * x.dim(4);
    std::vector<T> out(n * c * plane);
    for (std::size_t k = 0; k < n * c; ++k) {
        const T* src = x.values().data() + (k * s + frame) * plane;
        std::copy(src, src + plane, out.data() + k * plane);
    }
    return Tensor<T>::make_result({n, c, x.dim(3), x.dim(4)}, std::move(out), {x},
                                  [n, c, s, plane, frame](Node<T>& self) {
                                      auto& xn = *self.parents[0];
                                      if (!xn.requires_grad) return;
                                      auto& g = xn.ensure_grad();
                                      for (std::size_t k = 0; k < n * c; ++k) {
                                          T* dst = g.data() + (k * s + frame) * plane;
                                          const T* src = self.grad.data() + k * plane;
                                          for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
                                      }
                                  });
}

template <typename T>
Tensor<T> separable_map(const Tensor<T>& x, const std::vector<double>& rows, std::size_t out_h,
                        const std::vector<double>& cols, std::size_t out_w) {
    if (x.rank() != 4 || rows.size() != out_h * x.dim(2) || cols.size() != out_w * x.dim(3)) {
        throw DimensionError("separable_map: matrices do not fit " + shape_string(x.shape()));
    }
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const std::size_t h = x.dim(2), w = x.dim(3), planes = x.dim(0) * x.dim(1);
    const Mat r = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                      rows.data(), Eigen::Index(out_h), Eigen::Index(h))
                      .cast<T>();
    const Mat c = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                      cols.data(), Eigen::Index(out_w), Eigen::Index(w))
                      .cast<T>();
    std::vector<T> out(planes * out_h * out_w);
    for (std::size_t k = 0; k < planes; ++k) {
        Eigen::Map<const Mat> xk(x.values().data() + k * h * w, Eigen::Index(h), Eigen::Index(w));
        Eigen::Map<Mat>(out.data() + k * out_h * out_w, Eigen::Index(out_h), Eigen::Index(out_w)) =
            r * xk * c.transpose();
    }
    return Tensor<T>::make_result({x.dim(0), x.dim(1), out_h, out_w}, std::move(out), {x},
                                  [r, c, planes, h, w, out_h, out_w](Node<T>& self) {
                                      auto& xn = *self.parents[0];
                                      if (!xn.requires_grad) return;
                                      auto& g = xn.ensure_grad();
                                      for (std::size_t k = 0; k < planes; ++k) {
                                          Eigen::Map<const Mat> gy(self.grad.data() + k * out_h * out_w,
                                                                   Eigen::Index(out_h), Eigen::Index(out_w));
                                          Eigen::Map<Mat>(g.data() + k * h * w, Eigen::Index(h),
                                                          Eigen::Index(w)) += r.transpose() * gy * c;
                                      }
                                  });
}

#define MTSR_INSTANTIATE_OPS(T)                                                                                 \
    template Tensor<T> channel_bias(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> batchnorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormStats<T>&,     \
                                 BnMode, double, double);                                                      \
    template Tensor<T> lrelu(const Tensor<T>&, double);                                                        \
    template Tensor<T> relu(const Tensor<T>&);                                                                 \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                              \
    template Tensor<T> log_clamped(const Tensor<T>&, double, double);                                          \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                \
    template Tensor<T> affine_scalar(const Tensor<T>&, double, double);                                        \
    template Tensor<T> square(const Tensor<T>&);                                                               \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                                       \
    template Tensor<T> sum(const Tensor<T>&);                                                                  \
    template Tensor<T> mean(const Tensor<T>&);                                                                 \
    template Tensor<T> sum_per_sample(const Tensor<T>&);                                                       \
    template Tensor<T> global_avg_pool(const Tensor<T>&);                                                      \
    template Tensor<T> affine_reduce(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                    \
    template Tensor<T> select_frame(const Tensor<T>&, std::size_t);                                            \
    template Tensor<T> separable_map(const Tensor<T>&, const std::vector<double>&, std::size_t,                \
                                     const std::vector<double>&, std::size_t);

MTSR_INSTANTIATE_OPS(float)
MTSR_INSTANTIATE_OPS(double)

#undef MTSR_INSTANTIATE_OPS

}  // namespace mtsr
