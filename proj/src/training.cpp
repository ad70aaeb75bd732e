#include "mtsr/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "mtsr/error.hpp"
#include "mtsr/io_util.hpp"

namespace mtsr {

std::string to_string(LossVariant variant) { return variant == LossVariant::Eq9 ? "eq9" : "eq8"; }

LossVariant loss_variant_from_string(const std::string& text) {
    if (text == "eq9") return LossVariant::Eq9;
    if (text == "eq8") return LossVariant::Eq8;
    throw ConfigError("unknown loss variant '" + text + "' (expected eq9 or eq8)");
}

std::string to_string(LrSchedule schedule) { return schedule == LrSchedule::Cosine ? "cosine" : "constant"; }

LrSchedule lr_schedule_from_string(const std::string& text) {
    if (text == "constant") return LrSchedule::Constant;
    if (text == "cosine") return LrSchedule::Cosine;
    throw ConfigError("unknown learning-rate schedule '" + text + "' (expected constant or cosine)");
}

double TrainConfig::pretrain_lr(std::size_t epoch) const {
    if (pretrain_schedule == LrSchedule::Constant || pretrain_epochs < 2) return learning_rate;
    const double floor = std::min(learning_rate, gan_lr());
    const double x = double(std::min(epoch, pretrain_epochs - 1)) / double(pretrain_epochs - 1);
    return floor + 0.5 * (learning_rate - floor) * (1 + std::cos(std::numbers::pi * x));
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train: learning rate must be positive");
    }
    if (gan_learning_rate && (!(*gan_learning_rate > 0) || !std::isfinite(*gan_learning_rate))) {
        throw ConfigError("train: GAN learning rate must be positive");
    }
    if (n_d < 1 || n_g < 1) throw ConfigError("train: n_D and n_G must be >= 1");
    if (!(log_clip > 0) || log_clip > 1e-3) throw ConfigError("train: log clip must lie in (0, 1e-3]");
    if (loss == LossVariant::Eq8) {
        if (!sigma_sq) throw ConfigError("train: the eq8 loss needs an explicit sigma_sq");
        if (!(*sigma_sq > 0)) throw ConfigError("train: sigma_sq must be positive");
    }
    if (!(convergence_tol >= 0) || convergence_patience < 1) {
        throw ConfigError("train: invalid convergence settings");
    }
}

// ---------------------------------------------------------------------------
// Training set

template <typename T>
Tensor<T> TrainingSet<T>::input_batch(std::span<const std::size_t> indices) const {
    const std::size_t stride = input_stride();
    std::vector<T> v(indices.size() * stride);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        std::copy_n(inputs.begin() + std::ptrdiff_t(indices[b] * stride), stride,
                    v.begin() + std::ptrdiff_t(b * stride));
    }
    return Tensor<T>::from_values({indices.size(), 1, temporal_length, coarse_side, coarse_side}, std::move(v));
}

template <typename T>
Tensor<T> TrainingSet<T>::target_batch(std::span<const std::size_t> indices) const {
    const std::size_t stride = target_stride();
    std::vector<T> v(indices.size() * stride);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        std::copy_n(targets.begin() + std::ptrdiff_t(indices[b] * stride), stride,
                    v.begin() + std::ptrdiff_t(b * stride));
    }
    return Tensor<T>::from_values({indices.size(), 1, fine_side, fine_side}, std::move(v));
}

namespace {

template <typename T>
void pack_input(const SamplePair& pair, const NormStats& stats, T* dst) {
    for (const Grid& g : pair.input)
        for (double v : g.values) *dst++ = T(normalize(v, stats));
}

void check_pair_geometry(const SamplePair& pair, std::size_t s, std::size_t side, std::size_t fine) {
    if (pair.input.size() != s) throw DimensionError("sample pair: inconsistent temporal length");
    for (const Grid& g : pair.input) {
        if (g.rows != side || g.cols != side) throw DimensionError("sample pair: coarse frames must be square");
    }
    if (pair.target.rows != fine || pair.target.cols != fine) {
        throw DimensionError("sample pair: target window must be square");
    }
}

}  // namespace

template <typename T>
TrainingSet<T> make_training_set(const std::vector<SamplePair>& pairs, const NormStats& stats) {
    if (pairs.empty()) throw ConfigError("training set: no sample pairs");
    TrainingSet<T> set;
    set.count = pairs.size();
    set.temporal_length = pairs[0].input.size();
    set.coarse_side = pairs[0].input.at(0).rows;
    set.fine_side = pairs[0].target.rows;
    set.inputs.resize(set.count * set.input_stride());
    set.targets.resize(set.count * set.target_stride());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        check_pair_geometry(pairs[i], set.temporal_length, set.coarse_side, set.fine_side);
        pack_input(pairs[i], stats, set.inputs.data() + i * set.input_stride());
        T* dst = set.targets.data() + i * set.target_stride();
        for (double v : pairs[i].target.values) *dst++ = T(normalize(v, stats));
    }
    return set;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

template <typename T>
Tensor<T> per_sample_sse(const Tensor<T>& pred, const Tensor<T>& truth) {
    if (pred.shape() != truth.shape()) {
        throw DimensionError("loss: prediction " + shape_string(pred.shape()) + " vs truth " +
                             shape_string(truth.shape()));
    }
    return sum_per_sample(square(sub(truth, pred)));
}

template <typename T>
void check_probabilities(const Tensor<T>& d, std::size_t batch, const char* what) {
    if (d.rank() != 1 || d.dim(0) == 0) throw DimensionError(std::string(what) + ": expected a non-empty [N] vector");
    if (batch && d.dim(0) != batch) throw DimensionError(std::string(what) + ": batch size mismatch");
}

}  // namespace

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& truth) {
    return mean(per_sample_sse(pred, truth));
}

template <typename T>
Tensor<T> d_loss(const Tensor<T>& d_real, const Tensor<T>& d_fake, double log_clip) {
    check_probabilities(d_real, 0, "d_loss");
    check_probabilities(d_fake, 0, "d_loss");
    const double hi = 1.0 - log_clip;
    const Tensor<T> real_term = log_clamped(d_real, log_clip, hi);
    const Tensor<T> fake_term = log_clamped(affine_scalar(d_fake, -1.0, 1.0), log_clip, hi);
    // Means taken separately so real and fake batches may differ in size.
    return add(mean(real_term), mean(fake_term));
}

template <typename T>
Tensor<T> g_loss(const Tensor<T>& pred, const Tensor<T>& truth, const Tensor<T>& d_fake, double log_clip) {
    const Tensor<T> sse = per_sample_sse(pred, truth);
    check_probabilities(d_fake, sse.dim(0), "g_loss");
    const Tensor<T> factor = affine_scalar(log_clamped(d_fake, log_clip, 1.0 - log_clip), -2.0, 1.0);
    return mean(mul(factor, sse));
}

template <typename T>
Tensor<T> g_loss_sigma(const Tensor<T>& pred, const Tensor<T>& truth, const Tensor<T>& d_fake, double sigma_sq,
                       double log_clip) {
    if (!(sigma_sq >= 0)) throw ConfigError("g_loss_sigma: sigma_sq must be non-negative");
    const Tensor<T> sse = per_sample_sse(pred, truth);
    check_probabilities(d_fake, sse.dim(0), "g_loss_sigma");
    const Tensor<T> adv = affine_scalar(log_clamped(d_fake, log_clip, 1.0 - log_clip), -2.0 * sigma_sq, 0.0);
    return mean(add(sse, adv));
}

// ---------------------------------------------------------------------------
// Pretraining

namespace {

double checked(double loss, const std::string& where) {
    if (!std::isfinite(loss)) throw NumericError("non-finite loss " + std::to_string(loss) + " in " + where);
    return loss;
}

}  // namespace

template <typename T>
PretrainResult pretrain_generator(Generator<T>& generator, const TrainingSet<T>& data, const TrainConfig& config,
                                  const EpochCallback& on_epoch) {
    config.validate();
    if (data.size() == 0) throw ConfigError("pretrain: empty dataset");
    if (data.temporal_length != generator.temporal_length() || data.coarse_side != generator.input_side() ||
        data.fine_side != generator.output_side()) {
        throw DimensionError("pretrain: dataset geometry does not match the generator");
    }
    PretrainResult result;
    generator.set_trainable(true);
    Adam<T> adam(generator.parameters());
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t stalled = 0;

    for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            adam.zero_grad();
            const Tensor<T> loss = mse_loss(generator.forward(data.input_batch(idx), BnMode::Train),
                                            data.target_batch(idx));
            total += checked(double(loss.item()), "pretraining epoch " + std::to_string(epoch + 1)) *
                     double(idx.size());
            backward(loss);
            adam.step(config.pretrain_lr(epoch));
        }
        adam.zero_grad();
        const double epoch_loss = total / double(data.size());
        result.epoch_losses.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch + 1, epoch_loss);

        const std::size_t n = result.epoch_losses.size();
        if (n >= 2) {
            const double prev = result.epoch_losses[n - 2];
            if (n <= 10 && epoch_loss > prev && !result.warning) {
                result.warning = "pretraining loss increased at epoch " + std::to_string(n) + " (" +
                                 std::to_string(prev) + " -> " + std::to_string(epoch_loss) + ")";
            }
            const double improvement = (prev - epoch_loss) / std::max(std::abs(prev), 1e-300);
            stalled = improvement < config.convergence_tol ? stalled + 1 : 0;
            if (stalled >= config.convergence_patience) {
                result.converged = true;
                break;
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Adversarial training

namespace {

std::vector<std::size_t> sample_batch(std::mt19937_64& rng, std::vector<std::size_t>& pool, std::size_t m) {
    // Partial Fisher-Yates: m distinct indices drawn uniformly.
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    return {pool.begin(), pool.begin() + std::ptrdiff_t(m)};
}

template <typename T>
void track_range(GanHistory& h, const Tensor<T>& d) {
    for (T v : d.values()) {
        h.d_min = std::min(h.d_min, double(v));
        h.d_max = std::max(h.d_max, double(v));
    }
}

}  // namespace

template <typename T>
GanHistory train_gan(Generator<T>& generator, Discriminator<T>& discriminator, const TrainingSet<T>& data,
                     const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (data.size() < config.batch_size) {
        throw ConfigError("train_gan: dataset of " + std::to_string(data.size()) +
                          " samples is smaller than the batch size " + std::to_string(config.batch_size));
    }
    if (discriminator.spec().input_side != generator.output_side()) {
        throw DimensionError("train_gan: discriminator input side does not match the generator output");
    }
    GanHistory history;
    generator.set_trainable(true);
    discriminator.set_trainable(true);
    Adam<T> adam_g(generator.parameters());
    Adam<T> adam_d(discriminator.parameters());
    std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
    std::vector<std::size_t> pool(data.size());
    std::iota(pool.begin(), pool.end(), 0);

    for (std::size_t epoch = 1; epoch <= config.gan_epochs; ++epoch) {
        const std::string tag = "GAN epoch " + std::to_string(epoch);

        generator.set_trainable(false);
        discriminator.set_trainable(true);
        for (std::size_t k = 0; k < config.n_d; ++k) {
            const auto idx = sample_batch(rng, pool, config.batch_size);
            const Tensor<T> fake = generator.forward(data.input_batch(idx), BnMode::TrainFrozenStats).detach();
            adam_d.zero_grad();
            const Tensor<T> d_real = discriminator.forward(data.target_batch(idx), BnMode::Train);
            const Tensor<T> d_fake = discriminator.forward(fake, BnMode::Train);
            track_range(history, d_real);
            track_range(history, d_fake);
            const Tensor<T> objective = d_loss(d_real, d_fake, config.log_clip);
            const double value = checked(double(objective.item()), tag + " (D)");
            backward(affine_scalar(objective, -1.0, 0.0));
            adam_d.step(config.gan_lr());
            history.rows.push_back({epoch, 'D', value});
        }
        adam_d.zero_grad();

        discriminator.set_trainable(false);
        generator.set_trainable(true);
        double last = 0;
        for (std::size_t k = 0; k < config.n_g; ++k) {
            const auto idx = sample_batch(rng, pool, config.batch_size);
            adam_g.zero_grad();
            const Tensor<T> pred = generator.forward(data.input_batch(idx), BnMode::Train);
            const Tensor<T> d_fake = discriminator.forward(pred, BnMode::TrainFrozenStats);
            track_range(history, d_fake);
            const Tensor<T> truth = data.target_batch(idx);
            const Tensor<T> loss = config.loss == LossVariant::Eq9
                                       ? g_loss(pred, truth, d_fake, config.log_clip)
                                       : g_loss_sigma(pred, truth, d_fake, *config.sigma_sq, config.log_clip);
            last = checked(double(loss.item()), tag + " (G)");
            backward(loss);
            adam_g.step(config.gan_lr());
            history.rows.push_back({epoch, 'G', last});
        }
        adam_g.zero_grad();
        if (on_epoch) on_epoch(epoch, last);
    }
    generator.set_trainable(true);
    discriminator.set_trainable(true);
    return history;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "epoch,phase,loss\n";
    for (const auto& r : rows) out << r.epoch << ',' << r.phase << ',' << format_double(r.loss) << '\n';
    if (!out) throw Error("write failed for " + path.string());
}

void write_pretrain_csv(const std::filesystem::path& path, const std::vector<double>& losses) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) out << i + 1 << ',' << format_double(losses[i]) << '\n';
    if (!out) throw Error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Inference

template <typename T>
std::vector<Grid> predict_windows(Generator<T>& generator, const std::vector<SamplePair>& pairs,
                                  const NormStats& stats, std::size_t batch_size) {
    if (batch_size < 1) throw ConfigError("predict: batch size must be >= 1");
    const std::size_t s = generator.temporal_length(), side = generator.input_side(),
                      fine = generator.output_side();
    std::vector<Grid> out;
    out.reserve(pairs.size());
    const std::size_t stride = s * side * side;
    for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, pairs.size() - start);
        std::vector<T> v(n * stride);
        for (std::size_t b = 0; b < n; ++b) {
            const SamplePair& p = pairs[start + b];
            if (p.input.size() != s) {
                throw DimensionError("predict: sample has S = " + std::to_string(p.input.size()) +
                                     ", model expects " + std::to_string(s));
            }
            for (const Grid& g : p.input) {
                if (g.rows != side || g.cols != side) {
                    throw DimensionError("predict: coarse frame " + std::to_string(g.rows) + "x" +
                                         std::to_string(g.cols) + " does not match model input " +
                                         std::to_string(side));
                }
            }
            pack_input(p, stats, v.data() + b * stride);
        }
        const Tensor<T> y =
            generator.forward(Tensor<T>::from_values({n, 1, s, side, side}, std::move(v)), BnMode::Infer);
        for (std::size_t b = 0; b < n; ++b) {
            Grid g(fine, fine);
            for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = denormalize(double(y[b * fine * fine + i]), stats);
            out.push_back(std::move(g));
        }
    }
    return out;
}

#define MTSR_INSTANTIATE_TRAINING(T)                                                                           \
    template struct TrainingSet<T>;                                                                            \
    template TrainingSet<T> make_training_set(const std::vector<SamplePair>&, const NormStats&);             \
    template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                                          \
    template Tensor<T> d_loss(const Tensor<T>&, const Tensor<T>&, double);                                    \
    template Tensor<T> g_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);                  \
    template Tensor<T> g_loss_sigma(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double, double);    \
    template PretrainResult pretrain_generator(Generator<T>&, const TrainingSet<T>&, const TrainConfig&,      \
                                               const EpochCallback&);                                         \
    template GanHistory train_gan(Generator<T>&, Discriminator<T>&, const TrainingSet<T>&, const TrainConfig&, \
                                  const EpochCallback&);                                                      \
    template std::vector<Grid> predict_windows(Generator<T>&, const std::vector<SamplePair>&, const NormStats&, \
                                               std::size_t);

MTSR_INSTANTIATE_TRAINING(float)
MTSR_INSTANTIATE_TRAINING(double)

#undef MTSR_INSTANTIATE_TRAINING

}  // namespace mtsr
