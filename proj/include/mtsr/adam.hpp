#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mtsr/tensor.hpp"

namespace mtsr {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    std::vector<T> first_moment;
    std::vector<T> second_moment;
    std::uint64_t step_count = 0;
};

/// One bias-corrected Adam update, params -= lr * mhat / (sqrt(vhat) + eps).
/// Ascent is obtained by the caller negating its objective.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, const AdamConfig& config,
               double lr);

/// Adam over a fixed list of parameter tensors. A parameter without a
/// gradient is treated as having a zero gradient.
template <typename T>
class Adam {
public:
    Adam(std::vector<Tensor<T>> params, AdamConfig config = {});

    void step(double lr);
    void zero_grad();

    const std::vector<AdamState<T>>& states() const { return states_; }
    const AdamConfig& config() const { return config_; }

private:
    std::vector<Tensor<T>> params_;
    std::vector<AdamState<T>> states_;
    AdamConfig config_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace mtsr
