#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mtsr/baselines.hpp"
#include "mtsr/datapipe.hpp"
#include "mtsr/networks.hpp"
#include "mtsr/training.hpp"

namespace mtsr {

struct MetricConfig {
    double psnr_max = 5496.0;  // peak single-cell traffic in MB
    double psnr_cap = 200.0;   // returned when the MSE is zero
    std::optional<double> ssim_c1;  // default (0.01 * psnr_max)^2
    std::optional<double> ssim_c2;  // default (0.03 * psnr_max)^2

    double c1() const;
    double c2() const;
    void validate() const;
};

/// RMSE over cells divided by the truth mean.
double nrmse(const Grid& pred, const Grid& truth);
/// 20 log10(psnr_max) - 10 log10(MSE), or psnr_cap when MSE is zero.
double psnr(const Grid& pred, const Grid& truth, const MetricConfig& config = {});
/// Whole-frame SSIM in the standard form.
double ssim(const Grid& pred, const Grid& truth, const MetricConfig& config = {});

struct SaliencyReport {
    std::vector<double> per_frame;  // mean |dL/dF| of each temporal frame
    std::string instance;
};

/// Gradient of the summed per-sample generator loss with respect to the input
/// batch, both networks in Infer mode. Without a discriminator the adversarial
/// factor is 1 and the loss is the squared error.
template <typename T>
Tensor<T> input_gradient(Generator<T>& generator, Discriminator<T>* discriminator, const Tensor<T>& inputs,
                         const Tensor<T>& targets, double log_clip = 1e-7);

template <typename T>
SaliencyReport saliency(Generator<T>& generator, Discriminator<T>* discriminator, const TrainingSet<T>& data,
                        std::size_t temporal_length, std::size_t batch_size = 16, double log_clip = 1e-7);

void write_saliency_csv(const std::filesystem::path& path, const SaliencyReport& report);

struct Region {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t height = 1;
    std::size_t width = 1;
};

/// Adds `magnitude` to every cell of `region` for frames [t_begin, t_end).
TrafficSeries inject_anomaly(const TrafficSeries& series, const Region& region, double magnitude,
                             std::size_t t_begin, std::size_t t_end);

/// One instance under evaluation: its window layout and windowing.
struct EvalLayout {
    std::string name;
    ProbeLayout layout;  // window-sized
    std::size_t temporal_length = 6;
    std::size_t window_side = 80;
    std::size_t offset = 1;
};

/// A reconstruction method: fine window predictions (MB) for a batch of pairs.
struct EvalMethod {
    std::string name;
    std::function<std::vector<Grid>(const EvalLayout&, const std::vector<SamplePair>&)> predict;
};

struct ReportRow {
    std::string method;
    std::string layout;
    double nrmse = 0;
    double psnr_db = 0;
    double ssim = 0;
    std::size_t snapshots = 0;
    bool missing = false;
    std::string note;
};

/// Stitched full-grid prediction at target time t, clamped at zero.
Grid predict_frame(const TrafficSeries& series, const EvalLayout& layout, const EvalMethod& method, std::size_t t);

/// Mean metrics over target times [t_begin, t_end) per (method, layout).
/// A method that throws is recorded as a missing row.
std::vector<ReportRow> evaluate_suite(const TrafficSeries& series, const std::vector<EvalMethod>& methods,
                                      const std::vector<EvalLayout>& layouts, std::size_t t_begin,
                                      std::size_t t_end, const MetricConfig& config);

void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);

// Stock methods.
EvalMethod uniform_method();
EvalMethod bicubic_method(const BicubicConfig& config = {});
EvalMethod oracle_method();
template <typename T>
EvalMethod generator_method(std::string name, Generator<T>& generator, const NormStats& stats,
                            std::size_t batch_size = 32);

}  // namespace mtsr
