#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mtsr::cli {

struct SynthArgs {
    std::size_t rows = 32;
    std::size_t cols = 32;
    std::size_t frames = 400;
    std::size_t hotspots = 6;
    double noise_std = 1.0;
    std::size_t interval = 10;
    std::uint64_t seed = 0;
    std::string out = ".";
    std::string name = "traffic";
};

// Instance and windowing shared by train / evaluate.
struct InstanceArgs {
    std::size_t factor = 2;
    std::string layout = "uniform";
    std::size_t window = 80;
    std::size_t offset = 1;
    std::size_t temporal_length = 6;
};

struct TrainArgs {
    std::string data;
    std::string out = ".";
    std::uint64_t seed = 0;
    InstanceArgs instance;
    std::string generator = "zipnet";
    std::size_t filters = 64;
    std::size_t zipper_modules = 24;
    std::size_t zipper_filters = 64;
    std::vector<std::size_t> final_filters{128, 256};
    std::size_t disc_filters = 64;
    std::size_t batch_size = 16;
    double learning_rate = 1e-4;
    std::optional<double> gan_learning_rate;
    std::string pretrain_schedule = "constant";
    std::size_t n_d = 1;
    std::size_t n_g = 1;
    std::size_t pretrain_epochs = 50;
    std::size_t gan_epochs = 50;
    bool skip_gan = false;
    std::string loss = "eq9";
    std::optional<double> sigma_sq;
    double log_clip = 1e-7;
    double convergence_tol = 1e-3;
    std::size_t convergence_patience = 5;
    std::vector<double> split{40, 10, 10};
};

struct InferArgs {
    std::string checkpoint;
    std::string data;
    std::string out = ".";
    std::uint64_t seed = 0;
    std::optional<std::size_t> begin;  // default: test split
    std::optional<std::size_t> end;
    bool pgm = false;
    std::optional<double> psnr_max;  // default: dataset maximum
    std::size_t batch_size = 32;
};

struct EvaluateArgs {
    std::string data;
    std::vector<std::string> checkpoints;
    std::vector<std::string> methods{"uniform", "bicubic", "zipnet"};
    std::vector<std::string> instances;  // layouts evaluated without a checkpoint
    InstanceArgs instance;
    std::vector<double> split{40, 10, 10};
    std::optional<double> psnr_max;
    std::string out = ".";
    std::uint64_t seed = 0;
    std::size_t batch_size = 32;
};

struct SaliencyArgs {
    std::string checkpoint;
    std::string data;
    std::string out = ".";
    std::uint64_t seed = 0;
    std::optional<std::size_t> max_samples;
    std::size_t batch_size = 16;
};

void cmd_synth(const SynthArgs& args, std::ostream& out);
void cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
void cmd_infer(const InferArgs& args, std::ostream& out);
void cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);
void cmd_saliency(const SaliencyArgs& args, std::ostream& out);

}  // namespace mtsr::cli
