#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtsr/adam.hpp"
#include "mtsr/datapipe.hpp"
#include "mtsr/networks.hpp"

namespace mtsr {

enum class LossVariant { Eq9, Eq8 };

std::string to_string(LossVariant variant);
LossVariant loss_variant_from_string(const std::string& text);

/// Pretraining step size per epoch: constant, or cosine from learning_rate
/// down to the adversarial rate so the GAN phase starts from a settled model.
enum class LrSchedule { Constant, Cosine };

std::string to_string(LrSchedule schedule);
LrSchedule lr_schedule_from_string(const std::string& text);

struct TrainConfig {
    std::size_t batch_size = 16;  // m
    double learning_rate = 1e-4;  // lambda
    // Adversarial phase rate; Adam restarts there, so a smaller step keeps
    // the pretrained optimum. Falls back to learning_rate.
    std::optional<double> gan_learning_rate;
    LrSchedule pretrain_schedule = LrSchedule::Constant;
    std::size_t n_d = 1;          // discriminator sub-epochs per epoch
    std::size_t n_g = 1;          // generator sub-epochs per epoch
    std::size_t pretrain_epochs = 50;
    std::size_t gan_epochs = 0;
    LossVariant loss = LossVariant::Eq9;
    std::optional<double> sigma_sq;  // required for Eq8
    double log_clip = 1e-7;
    std::uint64_t seed = 0;
    // Pretraining stops once the epoch loss improves by less than
    // convergence_tol (relative) for convergence_patience epochs in a row.
    double convergence_tol = 1e-3;
    std::size_t convergence_patience = 5;

    void validate() const;
    double gan_lr() const { return gan_learning_rate.value_or(learning_rate); }
    /// Rate for 0-based pretraining epoch `epoch`.
    double pretrain_lr(std::size_t epoch) const;
    bool operator==(const TrainConfig&) const = default;
};

/// Normalized sample pairs packed for batching.
template <typename T>
struct TrainingSet {
    std::size_t count = 0;
    std::size_t temporal_length = 0;
    std::size_t coarse_side = 0;
    std::size_t fine_side = 0;
    std::vector<T> inputs;   // [count, 1, S, h, w]
    std::vector<T> targets;  // [count, 1, H, W]

    std::size_t size() const { return count; }
    std::size_t input_stride() const { return temporal_length * coarse_side * coarse_side; }
    std::size_t target_stride() const { return fine_side * fine_side; }

    Tensor<T> input_batch(std::span<const std::size_t> indices) const;
    Tensor<T> target_batch(std::span<const std::size_t> indices) const;
};

template <typename T>
TrainingSet<T> make_training_set(const std::vector<SamplePair>& pairs, const NormStats& stats);

// Losses. Each returns a shape-[1] tensor.

/// Batch mean of the per-sample squared L2 distance.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& truth);

/// Batch mean of log D(real) + log(1 - D(fake)); maximized by the discriminator.
template <typename T>
Tensor<T> d_loss(const Tensor<T>& d_real, const Tensor<T>& d_fake, double log_clip = 1e-7);

/// Batch mean of (1 - 2 log D(fake)) * ||truth - pred||^2.
template <typename T>
Tensor<T> g_loss(const Tensor<T>& pred, const Tensor<T>& truth, const Tensor<T>& d_fake, double log_clip = 1e-7);

/// Batch mean of ||truth - pred||^2 - 2 sigma^2 log D(fake).
template <typename T>
Tensor<T> g_loss_sigma(const Tensor<T>& pred, const Tensor<T>& truth, const Tensor<T>& d_fake, double sigma_sq,
                       double log_clip = 1e-7);

struct PretrainResult {
    std::vector<double> epoch_losses;  // one per completed epoch
    bool converged = false;
    // Set when the epoch loss rose during the first 10 epochs.
    std::optional<std::string> warning;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Adam descent on the MSE loss over shuffled full passes of the data.
template <typename T>
PretrainResult pretrain_generator(Generator<T>& generator, const TrainingSet<T>& data, const TrainConfig& config,
                                  const EpochCallback& on_epoch = {});

struct HistoryRow {
    std::size_t epoch = 0;
    char phase = 'D';  // 'D' or 'G'
    double loss = 0;
};

struct GanHistory {
    std::vector<HistoryRow> rows;
    double d_min = 1;  // extreme discriminator outputs seen during training
    double d_max = 0;
};

/// Alternating adversarial training. Each epoch runs n_d discriminator steps
/// (ascent on d_loss) then n_g generator steps (descent on the configured
/// generator loss), each on a uniformly drawn minibatch.
template <typename T>
GanHistory train_gan(Generator<T>& generator, Discriminator<T>& discriminator, const TrainingSet<T>& data,
                     const TrainConfig& config, const EpochCallback& on_epoch = {});

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& rows);
void write_pretrain_csv(const std::filesystem::path& path, const std::vector<double>& losses);

/// Denormalized window predictions in Infer mode.
template <typename T>
std::vector<Grid> predict_windows(Generator<T>& generator, const std::vector<SamplePair>& pairs,
                                  const NormStats& stats, std::size_t batch_size = 32);

}  // namespace mtsr
