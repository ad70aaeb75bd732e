#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mtsr/ops.hpp"
#include "mtsr/tensor.hpp"

namespace mtsr::testing {

using TensorD = Tensor<double>;

inline TensorD random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0, bool requires_grad = false) {
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = dist(rng);
    return TensorD::from_values(std::move(shape), std::move(v), requires_grad);
}

inline TensorD random_uniform(Shape shape, std::mt19937_64& rng, double lo, double hi, bool requires_grad = false) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = dist(rng);
    return TensorD::from_values(std::move(shape), std::move(v), requires_grad);
}

struct GradCheckResult {
    double max_relative_error = 0;  // over all leaves, norm-wise
};

/// Compares reverse-mode gradients of `loss(leaves)` with central differences.
/// Error per leaf: ||analytic - numeric|| / max(||analytic||, ||numeric||, tiny).
inline GradCheckResult gradcheck(const std::function<TensorD(const std::vector<TensorD>&)>& loss,
                                 std::vector<TensorD> leaves, double h = 1e-5) {
    for (auto& l : leaves) l.zero_grad();
    backward(loss(leaves));
    std::vector<std::vector<double>> analytic;
    for (auto& l : leaves) {
        if (l.has_grad()) {
            analytic.emplace_back(l.grad().begin(), l.grad().end());
        } else {
            analytic.emplace_back(l.size(), 0.0);
        }
    }
    GradCheckResult result;
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        auto values = leaves[k].mutable_values();
        double diff = 0, na = 0, nn = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = loss(leaves).item();
            values[i] = saved - h;
            const double down = loss(leaves).item();
            values[i] = saved;
            const double numeric = (up - down) / (2 * h);
            diff += (numeric - analytic[k][i]) * (numeric - analytic[k][i]);
            na += analytic[k][i] * analytic[k][i];
            nn += numeric * numeric;
        }
        const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
        result.max_relative_error = std::max(result.max_relative_error, std::sqrt(diff) / denom);
    }
    return result;
}

/// Gradient check of a tensor-valued map through the scalar probe <f(x), w>
/// with fixed random weights w, so every output element contributes.
inline GradCheckResult gradcheck_map(const std::function<TensorD(const std::vector<TensorD>&)>& f,
                                     std::vector<TensorD> leaves, std::mt19937_64& rng, double h = 1e-5) {
    const TensorD w = random_tensor(f(leaves).shape(), rng);
    return gradcheck([&](const std::vector<TensorD>& x) { return sum(mul(f(x), w)); }, std::move(leaves), h);
}

}  // namespace mtsr::testing
