#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>

#include "mtsr/checkpoint.hpp"
#include "mtsr/datapipe.hpp"
#include "mtsr/error.hpp"
#include "mtsr/evaluation.hpp"
#include "mtsr/io_util.hpp"
#include "mtsr/training.hpp"

namespace mtsr::cli {
namespace fs = std::filesystem;

namespace {

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("missing ") + what + " path");
    if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

fs::path prepare_out(const std::string& dir) {
    const fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (!fs::is_directory(p)) throw ConfigError("output directory not usable: " + dir);
    return p;
}

SplitFractions split_from(const std::vector<double>& v) {
    if (v.size() != 3) throw ConfigError("split needs three values (train, validation, test)");
    return {v[0], v[1], v[2]};
}

InstanceConfig instance_from(const InstanceArgs& a) {
    InstanceConfig c;
    c.upscaling_factor = a.factor;
    c.window_side = a.window;
    c.temporal_length = a.temporal_length;
    c.layout = layout_kind_from_string(a.layout);
    c.validate();
    return c;
}

// "up2", "up4", "up10" or "mixture".
InstanceConfig instance_from_name(const std::string& name, const InstanceArgs& base) {
    InstanceArgs a = base;
    if (name == "mixture") {
        a.layout = "mixture";
    } else if (name.rfind("up", 0) == 0 && name.size() > 2 &&
               std::all_of(name.begin() + 2, name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        a.layout = "uniform";
        a.factor = std::stoul(name.substr(2));
    } else {
        throw ConfigError("unknown instance '" + name + "' (expected up2, up4, up10 or mixture)");
    }
    return instance_from(a);
}

void check_fits(const TrafficSeries& series, const InstanceConfig& instance) {
    if (instance.window_side > series.rows || instance.window_side > series.cols) {
        throw ConfigError("window side " + std::to_string(instance.window_side) + " exceeds the " +
                          std::to_string(series.rows) + "x" + std::to_string(series.cols) + " grid");
    }
}

double series_max(const TrafficSeries& series) {
    double m = 0;
    for (const auto& f : series.frames) m = std::max(m, f.max());
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------

void cmd_synth(const SynthArgs& args, std::ostream& out) {
    if (args.rows < 8 || args.cols < 8) {
        throw ConfigError("synth: rows and cols must be >= 8, got " + std::to_string(args.rows) + "x" +
                          std::to_string(args.cols));
    }
    if (args.frames < 1) throw ConfigError("synth: frames must be >= 1");
    if (args.interval < 1) throw ConfigError("synth: interval must be >= 1");
    if (args.name.empty()) throw ConfigError("synth: empty dataset name");
    const fs::path dir = prepare_out(args.out);
    SynthOptions options;
    options.noise_std = args.noise_std;
    TrafficSeries series = synth_series(args.rows, args.cols, args.frames, args.hotspots, args.seed, options);
    series.interval_minutes = args.interval;
    const fs::path csv = dir / (args.name + ".csv");
    write_series(series, csv);
    out << "wrote " << csv.string() << " and " << sidecar_path(csv).string() << " (" << args.frames << " frames of "
        << args.rows << "x" << args.cols << ")\n";
}

// ---------------------------------------------------------------------------

void cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    require_file(args.data, "dataset");
    const InstanceConfig instance = instance_from(args.instance);

    ModelConfig model;
    model.generator = args.generator;
    if (model.generator != "zipnet" && model.generator != "srcnn") {
        throw ConfigError("unknown generator '" + model.generator + "' (expected zipnet or srcnn)");
    }
    if (args.final_filters.size() != 2) throw ConfigError("final-filters needs two values");
    model.widths.upscaling_filters = args.filters;
    model.widths.zipper_modules = args.zipper_modules;
    model.widths.zipper_filters = args.zipper_filters;
    model.widths.final_filters = {args.final_filters[0], args.final_filters[1], 1};
    model.discriminator_filters = args.disc_filters;
    if (args.disc_filters < 1) throw ConfigError("disc-filters must be >= 1");

    TrainConfig config;
    config.batch_size = args.batch_size;
    config.learning_rate = args.learning_rate;
    config.gan_learning_rate = args.gan_learning_rate;
    config.pretrain_schedule = lr_schedule_from_string(args.pretrain_schedule);
    config.n_d = args.n_d;
    config.n_g = args.n_g;
    config.pretrain_epochs = args.pretrain_epochs;
    // SRCNN is trained with the squared error only.
    config.gan_epochs = (args.skip_gan || model.generator == "srcnn") ? 0 : args.gan_epochs;
    config.loss = loss_variant_from_string(args.loss);
    config.sigma_sq = args.sigma_sq;
    config.log_clip = args.log_clip;
    config.seed = args.seed;
    config.convergence_tol = args.convergence_tol;
    config.convergence_patience = args.convergence_patience;
    config.validate();
    const SplitFractions split = split_from(args.split);
    const fs::path dir = prepare_out(args.out);

    const TrafficSeries series = ingest(args.data);
    check_fits(series, instance);
    const ProbeLayout layout = ProbeLayout::for_instance(instance);
    const TimeSplit times = split_times(series.length(), instance.temporal_length, split);
    const NormStats norm = fit_norm(series, 0, times.train_end);
    const auto pairs = build_pairs(series, layout, instance.temporal_length, instance.window_side, args.instance.offset,
                                   times.train_begin, times.train_end);
    const TrainingSet<float> data = make_training_set<float>(pairs, norm);
    out << "instance " << instance.name() << ": " << data.size() << " training pairs, window "
        << instance.window_side << ", S=" << instance.temporal_length << "\n";

    auto generator = make_generator<float>(instance, model, config.seed);
    out << "generator " << model.generator << " with " << generator->parameter_count() << " parameters\n";
    const PretrainResult pre = pretrain_generator(*generator, data, config, [&](std::size_t e, double loss) {
        out << "pretrain epoch " << e << " loss " << format_double(loss) << "\n" << std::flush;
    });
    if (pre.warning) err << "warning: " << *pre.warning << "\n";
    if (pre.converged) out << "pretraining converged after " << pre.epoch_losses.size() << " epochs\n";
    write_pretrain_csv(dir / "pretrain.csv", pre.epoch_losses);

    Checkpoint ck;
    ck.instance = instance;
    ck.train = config;
    ck.model = model;
    ck.norm = norm;
    ck.offset = args.instance.offset;
    ck.split = split;
    ck.pretrain_epochs_run = pre.epoch_losses.size();

    GanHistory history;
    if (config.gan_epochs > 0) {
        auto discriminator =
            build_discriminator<float>(instance.window_side, model.discriminator_filters, config.seed + 1);
        history = train_gan(*generator, *discriminator, data, config, [&](std::size_t e, double loss) {
            out << "gan epoch " << e << " generator loss " << format_double(loss) << "\n" << std::flush;
        });
        out << "discriminator outputs within [" << format_double(history.d_min) << ", "
            << format_double(history.d_max) << "]\n";
        ck.discriminator = capture(*discriminator);
        ck.gan_epochs_run = config.gan_epochs;
    }
    ck.generator = capture(*generator);
    write_history_csv(dir / "history.csv", history.rows);
    save_checkpoint(dir / "checkpoint.mtsr", ck);
    out << "wrote " << (dir / "checkpoint.mtsr").string() << "\n";
}

// ---------------------------------------------------------------------------

void cmd_infer(const InferArgs& args, std::ostream& out) {
    require_file(args.checkpoint, "checkpoint");
    require_file(args.data, "dataset");
    if (args.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (args.psnr_max && !(*args.psnr_max > 0)) throw ConfigError("psnr-max must be positive");
    const fs::path dir = prepare_out(args.out);
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    const TrafficSeries series = ingest(args.data);
    check_fits(series, ck.instance);
    if (ck.norm.fit_end > series.length()) {
        throw ConfigError("dataset is shorter than the range the checkpoint was fitted on");
    }
    const TimeSplit times = split_times(series.length(), ck.instance.temporal_length, ck.split);
    const std::size_t begin = args.begin.value_or(times.test_begin);
    const std::size_t end = args.end.value_or(times.test_end);
    if (begin < ck.instance.temporal_length - 1 || begin >= end || end > series.length()) {
        throw ConfigError("time range [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") is invalid for this dataset and S = " + std::to_string(ck.instance.temporal_length));
    }
    auto generator = load_generator<float>(ck);
    const EvalLayout layout{ck.instance.name(), ProbeLayout::for_instance(ck.instance), ck.instance.temporal_length,
                            ck.instance.window_side, ck.offset};
    const EvalMethod method = generator_method(ck.model.generator, *generator, ck.norm, args.batch_size);
    const double peak = args.psnr_max.value_or(series_max(series));

    std::vector<Grid> frames;
    for (std::size_t t = begin; t < end; ++t) {
        frames.push_back(predict_frame(series, layout, method, t));
        if (args.pgm) write_pgm(dir / ("frame_" + std::to_string(t) + ".pgm"), frames.back(), peak > 0 ? peak : 1.0);
    }
    write_frames_csv(dir / "predictions.csv", frames, begin);
    out << "wrote " << frames.size() << " predicted " << series.rows << "x" << series.cols << " frames to "
        << (dir / "predictions.csv").string() << "\n";
}

// ---------------------------------------------------------------------------

void cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
    require_file(args.data, "dataset");
    for (const auto& c : args.checkpoints) require_file(c, "checkpoint");
    if (args.methods.empty()) throw ConfigError("no methods given");
    for (const auto& m : args.methods) {
        if (m != "uniform" && m != "bicubic" && m != "oracle" && m != "zipnet" && m != "srcnn") {
            throw ConfigError("unknown method '" + m + "' (expected uniform, bicubic, oracle, zipnet or srcnn)");
        }
    }
    if (args.psnr_max && !(*args.psnr_max > 0)) throw ConfigError("psnr-max must be positive");
    const fs::path dir = prepare_out(args.out);
    const TrafficSeries series = ingest(args.data);

    struct LayoutEntry {
        InstanceConfig instance;
        std::size_t offset = 1;
        std::map<std::string, std::unique_ptr<Generator<float>>> models;
        std::map<std::string, NormStats> norms;
    };
    std::vector<LayoutEntry> entries;
    auto entry_for = [&](const InstanceConfig& inst, std::size_t offset) -> LayoutEntry& {
        for (auto& e : entries)
            if (e.instance == inst && e.offset == offset) return e;
        check_fits(series, inst);
        entries.push_back({inst, offset, {}, {}});
        return entries.back();
    };
    SplitFractions split = split_from(args.split);
    for (std::size_t i = 0; i < args.checkpoints.size(); ++i) {
        const Checkpoint ck = load_checkpoint(args.checkpoints[i]);
        if (i == 0) split = ck.split;
        LayoutEntry& e = entry_for(ck.instance, ck.offset);
        if (e.models.count(ck.model.generator)) {
            throw ConfigError("two " + ck.model.generator + " checkpoints for instance " + ck.instance.name());
        }
        e.models[ck.model.generator] = load_generator<float>(ck);
        e.norms[ck.model.generator] = ck.norm;
    }
    for (const auto& name : args.instances) entry_for(instance_from_name(name, args.instance), args.instance.offset);
    if (entries.empty()) entry_for(instance_from(args.instance), args.instance.offset);

    std::size_t s_max = 1;
    for (const auto& e : entries) s_max = std::max(s_max, e.instance.temporal_length);
    const TimeSplit times = split_times(series.length(), s_max, split);

    MetricConfig metrics;
    metrics.psnr_max = args.psnr_max.value_or(series_max(series));
    std::vector<ReportRow> rows;
    for (auto& e : entries) {
        const EvalLayout layout{e.instance.name(), ProbeLayout::for_instance(e.instance), e.instance.temporal_length,
                                e.instance.window_side, e.offset};
        std::vector<EvalMethod> methods;
        for (const auto& m : args.methods) {
            if (m == "uniform") {
                methods.push_back(uniform_method());
            } else if (m == "bicubic") {
                methods.push_back(bicubic_method());
            } else if (m == "oracle") {
                methods.push_back(oracle_method());
            } else if (e.models.count(m)) {
                methods.push_back(generator_method(m, *e.models[m], e.norms[m], args.batch_size));
            } else {
                methods.push_back({m, [m](const EvalLayout& l, const std::vector<SamplePair>&) -> std::vector<Grid> {
                                       throw ConfigError("no " + m + " checkpoint for instance " + l.name);
                                   }});
            }
        }
        auto block = evaluate_suite(series, methods, {layout}, times.test_begin, times.test_end, metrics);
        rows.insert(rows.end(), block.begin(), block.end());
    }
    for (const auto& r : rows) {
        if (r.missing) err << "warning: " << r.method << " on " << r.layout << " is missing (" << r.note << ")\n";
    }
    write_report_csv(dir / "report.csv", rows);
    out << "evaluated " << rows.size() << " (method, layout) pairs over test frames [" << times.test_begin << ", "
        << times.test_end << "), wrote " << (dir / "report.csv").string() << "\n";
}

// ---------------------------------------------------------------------------

void cmd_saliency(const SaliencyArgs& args, std::ostream& out) {
    require_file(args.checkpoint, "checkpoint");
    require_file(args.data, "dataset");
    if (args.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (args.max_samples && *args.max_samples < 1) throw ConfigError("max-samples must be >= 1");
    const fs::path dir = prepare_out(args.out);
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    const TrafficSeries series = ingest(args.data);
    check_fits(series, ck.instance);
    const TimeSplit times = split_times(series.length(), ck.instance.temporal_length, ck.split);
    auto pairs = build_pairs(series, ProbeLayout::for_instance(ck.instance), ck.instance.temporal_length,
                             ck.instance.window_side, ck.offset, times.test_begin, times.test_end);
    if (args.max_samples && *args.max_samples < pairs.size()) {
        std::mt19937_64 rng(args.seed);
        std::shuffle(pairs.begin(), pairs.end(), rng);
        pairs.resize(*args.max_samples);
    }
    const TrainingSet<float> data = make_training_set<float>(pairs, ck.norm);
    auto generator = load_generator<float>(ck);
    auto discriminator = load_discriminator<float>(ck);
    SaliencyReport report = saliency(*generator, discriminator.get(), data, ck.instance.temporal_length,
                                     args.batch_size, ck.train.log_clip);
    report.instance = ck.instance.name();
    write_saliency_csv(dir / "saliency.csv", report);
    out << "saliency over " << data.size() << " samples of " << report.instance << ":";
    for (double v : report.per_frame) out << " " << format_double(v);
    out << "\n";
}

}  // namespace mtsr::cli
