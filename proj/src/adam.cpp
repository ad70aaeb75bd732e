#include "mtsr/adam.hpp"

#include <cmath>

#include "mtsr/error.hpp"

namespace mtsr {

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, const AdamConfig& config,
               double lr) {
    if (params.size() != grads.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                             std::to_string(grads.size()) + " gradients");
    }
    if (!(lr > 0)) throw ConfigError("adam_step: learning rate must be positive");
    if (state.first_moment.empty()) {
        state.first_moment.assign(params.size(), T(0));
        state.second_moment.assign(params.size(), T(0));
    }
    if (state.first_moment.size() != params.size()) {
        throw DimensionError("adam_step: moment arrays do not match parameter size");
    }
    ++state.step_count;
    const double t = double(state.step_count);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double m = config.beta1 * state.first_moment[i] + (1.0 - config.beta1) * g;
        const double v = config.beta2 * state.second_moment[i] + (1.0 - config.beta2) * g * g;
        state.first_moment[i] = T(m);
        state.second_moment[i] = T(v);
        const double mhat = m / correction1;
        const double vhat = v / correction2;
        params[i] = T(double(params[i]) - lr * mhat / (std::sqrt(vhat) + config.epsilon));
    }
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamConfig config)
    : params_(std::move(params)), states_(params_.size()), config_(config) {}

template <typename T>
void Adam<T>::step(double lr) {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor<T>& p = params_[k];
        if (!p.has_grad()) p.mutable_grad();  // zero-filled
        adam_step<T>(p.mutable_values(), p.grad(), states_[k], config_, lr);
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template void adam_step(std::span<float>, std::span<const float>, AdamState<float>&, const AdamConfig&, double);
template void adam_step(std::span<double>, std::span<const double>, AdamState<double>&, const AdamConfig&,
                        double);
template class Adam<float>;
template class Adam<double>;

}  // namespace mtsr
