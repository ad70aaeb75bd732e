#include "mtsr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "mtsr/baselines.hpp"
#include "mtsr/error.hpp"
#include "mtsr/io_util.hpp"

namespace mtsr {

double MetricConfig::c1() const { return ssim_c1 ? *ssim_c1 : (0.01 * psnr_max) * (0.01 * psnr_max); }
double MetricConfig::c2() const { return ssim_c2 ? *ssim_c2 : (0.03 * psnr_max) * (0.03 * psnr_max); }

void MetricConfig::validate() const {
    if (!(psnr_max > 0) || !(psnr_cap > 0) || !(c1() > 0) || !(c2() > 0)) {
        throw ConfigError("metrics: psnr_max, psnr_cap, c1 and c2 must be positive");
    }
}

namespace {

void require_same(const Grid& a, const Grid& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols || a.values.size() != b.values.size()) {
        throw DimensionError(std::string(what) + ": prediction " + std::to_string(a.rows) + "x" +
                             std::to_string(a.cols) + " vs truth " + std::to_string(b.rows) + "x" +
                             std::to_string(b.cols));
    }
    if (a.values.empty()) throw DimensionError(std::string(what) + ": empty frames");
}

double mse(const Grid& pred, const Grid& truth) {
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.values[i] - truth.values[i];
        acc += d * d;
    }
    return acc / double(pred.size());
}

}  // namespace

double nrmse(const Grid& pred, const Grid& truth) {
    require_same(pred, truth, "nrmse");
    const double mean = truth.sum() / double(truth.size());
    if (!(mean > 0)) throw NumericError("nrmse: ground truth mean must be positive");
    return std::sqrt(mse(pred, truth)) / mean;
}

double psnr(const Grid& pred, const Grid& truth, const MetricConfig& config) {
    require_same(pred, truth, "psnr");
    config.validate();
    const double e = mse(pred, truth);
    if (e == 0) return config.psnr_cap;
    return 20.0 * std::log10(config.psnr_max) - 10.0 * std::log10(e);
}

double ssim(const Grid& pred, const Grid& truth, const MetricConfig& config) {
    require_same(pred, truth, "ssim");
    config.validate();
    const double n = double(pred.size());
    const double mx = pred.sum() / n, my = truth.sum() / n;
    double vx = 0, vy = 0, cov = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double dx = pred.values[i] - mx, dy = truth.values[i] - my;
        vx += dx * dx;
        vy += dy * dy;
        cov += dx * dy;
    }
    vx /= n;
    vy /= n;
    cov /= n;
    const double c1 = config.c1(), c2 = config.c2();
    return ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

// ---------------------------------------------------------------------------
// Saliency

namespace {

// Restores trainable flags on scope exit.
template <typename T>
class FrozenModule {
public:
    explicit FrozenModule(Module<T>* m) : module_(m) {
        if (!module_) return;
        for (auto& p : module_->parameters()) flags_.push_back(p.requires_grad());
        module_->set_trainable(false);
    }
    ~FrozenModule() {
        if (!module_) return;
        auto params = module_->parameters();
        for (std::size_t i = 0; i < params.size(); ++i) params[i].set_requires_grad(flags_[i]);
    }
    FrozenModule(const FrozenModule&) = delete;
    FrozenModule& operator=(const FrozenModule&) = delete;

private:
    Module<T>* module_;
    std::vector<bool> flags_;
};

}  // namespace

template <typename T>
Tensor<T> input_gradient(Generator<T>& generator, Discriminator<T>* discriminator, const Tensor<T>& inputs,
                         const Tensor<T>& targets, double log_clip) {
    FrozenModule<T> freeze_g(&generator);
    FrozenModule<T> freeze_d(discriminator);
    Tensor<T> x = Tensor<T>::from_values(inputs.shape(), {inputs.values().begin(), inputs.values().end()}, true);
    const Tensor<T> pred = generator.forward(x, BnMode::Infer);
    const std::size_t n = pred.dim(0);
    // Summed per-sample losses, so each sample's gradient is that of its own loss.
    Tensor<T> loss;
    if (discriminator) {
        loss = affine_scalar(g_loss(pred, targets, discriminator->forward(pred, BnMode::Infer), log_clip), double(n),
                             0.0);
    } else {
        loss = affine_scalar(mse_loss(pred, targets), double(n), 0.0);
    }
    backward(loss);
    if (x.grad().empty()) return Tensor<T>::zeros(x.shape());
    return Tensor<T>::from_values(x.shape(), {x.grad().begin(), x.grad().end()});
}

template <typename T>
SaliencyReport saliency(Generator<T>& generator, Discriminator<T>* discriminator, const TrainingSet<T>& data,
                        std::size_t temporal_length, std::size_t batch_size, double log_clip) {
    if (temporal_length != generator.temporal_length() || temporal_length != data.temporal_length) {
        throw ConfigError("saliency: S = " + std::to_string(temporal_length) + " but the model expects S = " +
                          std::to_string(generator.temporal_length()) + " and the data has S = " +
                          std::to_string(data.temporal_length));
    }
    if (data.size() == 0) throw ConfigError("saliency: empty dataset");
    if (batch_size < 1) throw ConfigError("saliency: batch size must be >= 1");
    const std::size_t cells = data.coarse_side * data.coarse_side;
    std::vector<double> acc(temporal_length, 0.0);
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        idx.clear();
        for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
        const Tensor<T> g =
            input_gradient(generator, discriminator, data.input_batch(idx), data.target_batch(idx), log_clip);
        const auto grad = g.values();
        for (std::size_t b = 0; b < idx.size(); ++b)
            for (std::size_t s = 0; s < temporal_length; ++s) {
                const T* p = grad.data() + (b * temporal_length + s) * cells;
                double sum = 0;
                for (std::size_t c = 0; c < cells; ++c) sum += std::abs(double(p[c]));
                acc[s] += sum;
            }
    }
    SaliencyReport report;
    for (double a : acc) report.per_frame.push_back(a / (double(data.size()) * double(cells)));
    report.instance = generator.kind();
    return report;
}

void write_saliency_csv(const std::filesystem::path& path, const SaliencyReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "frame_index,mean_grad_magnitude\n";
    for (std::size_t s = 0; s < report.per_frame.size(); ++s) {
        out << s << ',' << format_double(report.per_frame[s]) << '\n';
    }
    if (!out) throw Error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Anomalies

TrafficSeries inject_anomaly(const TrafficSeries& series, const Region& region, double magnitude,
                             std::size_t t_begin, std::size_t t_end) {
    if (!(magnitude >= 0) || !std::isfinite(magnitude)) throw ConfigError("anomaly: magnitude must be >= 0");
    if (region.height == 0 || region.width == 0 || region.row + region.height > series.rows ||
        region.col + region.width > series.cols) {
        throw DimensionError("anomaly: region " + std::to_string(region.height) + "x" +
                             std::to_string(region.width) + " at (" + std::to_string(region.row) + ", " +
                             std::to_string(region.col) + ") lies outside the " + std::to_string(series.rows) +
                             "x" + std::to_string(series.cols) + " grid");
    }
    if (t_begin > t_end || t_end > series.frames.size()) throw DimensionError("anomaly: time range out of bounds");
    TrafficSeries out = series;
    for (std::size_t t = t_begin; t < t_end; ++t)
        for (std::size_t r = region.row; r < region.row + region.height; ++r)
            for (std::size_t c = region.col; c < region.col + region.width; ++c) out.frames[t](r, c) += magnitude;
    return out;
}

// ---------------------------------------------------------------------------
// Suite

namespace {

std::vector<SamplePair> pairs_at(const TrafficSeries& series, const EvalLayout& layout, std::size_t t) {
    return build_pairs(series, layout.layout, layout.temporal_length, layout.window_side, layout.offset, t, t + 1);
}

Grid stitch_predictions(const TrafficSeries& series, const std::vector<SamplePair>& pairs,
                        std::vector<Grid> preds) {
    if (preds.size() != pairs.size()) throw DimensionError("predict: method returned the wrong number of windows");
    std::vector<Window> windows;
    windows.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (preds[i].rows != pairs[i].target.rows || preds[i].cols != pairs[i].target.cols) {
            throw DimensionError("predict: window prediction has the wrong size");
        }
        windows.push_back({pairs[i].row, pairs[i].col, std::move(preds[i])});
    }
    Grid frame = stitch(windows, series.rows, series.cols);
    for (double& v : frame.values) v = std::max(v, 0.0);
    return frame;
}

}  // namespace

Grid predict_frame(const TrafficSeries& series, const EvalLayout& layout, const EvalMethod& method, std::size_t t) {
    const auto pairs = pairs_at(series, layout, t);
    return stitch_predictions(series, pairs, method.predict(layout, pairs));
}

std::vector<ReportRow> evaluate_suite(const TrafficSeries& series, const std::vector<EvalMethod>& methods,
                                      const std::vector<EvalLayout>& layouts, std::size_t t_begin,
                                      std::size_t t_end, const MetricConfig& config) {
    config.validate();
    if (t_begin >= t_end) throw ConfigError("evaluate: empty time range");
    std::vector<ReportRow> rows;
    for (const EvalLayout& layout : layouts) {
        std::vector<ReportRow> block;
        for (const EvalMethod& m : methods) block.push_back({m.name, layout.name, 0, 0, 0, 0, false, {}});
        for (std::size_t t = t_begin; t < t_end; ++t) {
            const auto pairs = pairs_at(series, layout, t);
            const Grid& truth = series.frames[t];
            for (std::size_t k = 0; k < methods.size(); ++k) {
                ReportRow& row = block[k];
                if (row.missing) continue;
                try {
                    const Grid pred = stitch_predictions(series, pairs, methods[k].predict(layout, pairs));
                    row.nrmse += nrmse(pred, truth);
                    row.psnr_db += psnr(pred, truth, config);
                    row.ssim += ssim(pred, truth, config);
                    ++row.snapshots;
                } catch (const std::exception& e) {
                    row.missing = true;
                    row.note = "snapshot " + std::to_string(t) + ": " + e.what();
                }
            }
        }
        for (ReportRow& row : block) {
            if (row.missing) {
                row.nrmse = row.psnr_db = row.ssim = std::numeric_limits<double>::quiet_NaN();
            } else {
                row.nrmse /= double(row.snapshots);
                row.psnr_db /= double(row.snapshots);
                row.ssim /= double(row.snapshots);
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "method,layout,nrmse,psnr_db,ssim\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.layout << ',' << format_double(r.nrmse) << ',' << format_double(r.psnr_db) << ','
            << format_double(r.ssim) << '\n';
    }
    if (!out) throw Error("write failed for " + path.string());
}

EvalMethod uniform_method() {
    return {"uniform", [](const EvalLayout& layout, const std::vector<SamplePair>& pairs) {
                std::vector<Grid> out;
                for (const auto& p : pairs) out.push_back(uniform_upsample(p.input.back(), layout.layout));
                return out;
            }};
}

EvalMethod bicubic_method(const BicubicConfig& config) {
    return {"bicubic", [config](const EvalLayout& layout, const std::vector<SamplePair>& pairs) {
                std::vector<Grid> out;
                for (const auto& p : pairs) out.push_back(bicubic_upsample(p.input.back(), layout.layout.factor(), config));
                return out;
            }};
}

EvalMethod oracle_method() {
    return {"oracle", [](const EvalLayout&, const std::vector<SamplePair>& pairs) {
                std::vector<Grid> out;
                for (const auto& p : pairs) out.push_back(p.target);
                return out;
            }};
}

template <typename T>
EvalMethod generator_method(std::string name, Generator<T>& generator, const NormStats& stats,
                            std::size_t batch_size) {
    return {std::move(name), [&generator, stats, batch_size](const EvalLayout&, const std::vector<SamplePair>& pairs) {
                return predict_windows(generator, pairs, stats, batch_size);
            }};
}

#define MTSR_INSTANTIATE_EVALUATION(T)                                                                         \
    template Tensor<T> input_gradient(Generator<T>&, Discriminator<T>*, const Tensor<T>&, const Tensor<T>&,   \
                                      double);                                                                 \
    template SaliencyReport saliency(Generator<T>&, Discriminator<T>*, const TrainingSet<T>&, std::size_t,    \
                                     std::size_t, double);                                                    \
    template EvalMethod generator_method(std::string, Generator<T>&, const NormStats&, std::size_t);

MTSR_INSTANTIATE_EVALUATION(float)
MTSR_INSTANTIATE_EVALUATION(double)

#undef MTSR_INSTANTIATE_EVALUATION

}  // namespace mtsr
