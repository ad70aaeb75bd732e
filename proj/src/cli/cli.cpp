#include "mtsr/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "mtsr/error.hpp"

namespace mtsr {
namespace {

void shared_flags(CLI::App* cmd, std::uint64_t& seed, std::string& out) {
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    cmd->add_option("--out", out, "Output directory")->capture_default_str();
}

void instance_flags(CLI::App* cmd, cli::InstanceArgs& a) {
    cmd->add_option("--factor", a.factor, "Upscaling factor n_f for uniform layouts")->capture_default_str();
    cmd->add_option("--layout", a.layout, "Probe layout")
        ->check(CLI::IsMember({"uniform", "mixture"}))
        ->capture_default_str();
    cmd->add_option("--window", a.window, "Fine window side")->capture_default_str();
    cmd->add_option("--offset", a.offset, "Window stride")->capture_default_str();
    cmd->add_option("--temporal-length", a.temporal_length, "Input sequence length S")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mobile traffic super-resolution toolkit", "mtsr"};
    app.set_config("--config", "", "TOML/INI file with option values (flags override it)");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.fallthrough();

    cli::SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic traffic series");
    shared_flags(s, synth.seed, synth.out);
    s->add_option("--rows", synth.rows)->capture_default_str();
    s->add_option("--cols", synth.cols)->capture_default_str();
    s->add_option("--frames", synth.frames)->capture_default_str();
    s->add_option("--hotspots", synth.hotspots)->capture_default_str();
    s->add_option("--noise", synth.noise_std, "Noise standard deviation")->capture_default_str();
    s->add_option("--interval", synth.interval, "Minutes between frames")->capture_default_str();
    s->add_option("--name", synth.name, "Output file stem")->capture_default_str();

    cli::TrainArgs train;
    auto* t = app.add_subcommand("train", "Pretrain and adversarially train a generator");
    shared_flags(t, train.seed, train.out);
    t->add_option("--data", train.data, "Canonical traffic CSV")->required();
    instance_flags(t, train.instance);
    t->add_option("--generator", train.generator)
        ->check(CLI::IsMember({"zipnet", "srcnn"}))
        ->capture_default_str();
    t->add_option("--filters", train.filters, "Upscaling block filters")->capture_default_str();
    t->add_option("--zipper-modules", train.zipper_modules)->capture_default_str();
    t->add_option("--zipper-filters", train.zipper_filters)->capture_default_str();
    t->add_option("--final-filters", train.final_filters, "Hidden final-block filters")
        ->delimiter(',')
        ->expected(2)
        ->capture_default_str();
    t->add_option("--disc-filters", train.disc_filters, "Discriminator base filters")->capture_default_str();
    t->add_option("--batch-size", train.batch_size)->capture_default_str();
    t->add_option("--lr", train.learning_rate, "Learning rate")->capture_default_str();
    t->add_option("--gan-lr", train.gan_learning_rate, "Adversarial-phase learning rate (default: --lr)");
    t->add_option("--pretrain-schedule", train.pretrain_schedule, "Pretraining rate: constant, or cosine down to --gan-lr")
        ->check(CLI::IsMember({"constant", "cosine"}))
        ->capture_default_str();
    t->add_option("--n-d", train.n_d, "Discriminator sub-epochs")->capture_default_str();
    t->add_option("--n-g", train.n_g, "Generator sub-epochs")->capture_default_str();
    t->add_option("--pretrain-epochs", train.pretrain_epochs)->capture_default_str();
    t->add_option("--gan-epochs", train.gan_epochs)->capture_default_str();
    t->add_flag("--skip-gan", train.skip_gan, "Stop after pretraining");
    t->add_option("--loss", train.loss)->check(CLI::IsMember({"eq9", "eq8"}))->capture_default_str();
    t->add_option("--sigma-sq", train.sigma_sq, "Adversarial weight for the eq8 loss");
    t->add_option("--log-clip", train.log_clip)->capture_default_str();
    t->add_option("--convergence-tol", train.convergence_tol)->capture_default_str();
    t->add_option("--convergence-patience", train.convergence_patience)->capture_default_str();
    t->add_option("--split", train.split, "Train, validation, test proportions")
        ->delimiter(',')
        ->expected(3)
        ->capture_default_str();

    cli::InferArgs infer;
    auto* i = app.add_subcommand("infer", "Predict and stitch full-grid frames");
    shared_flags(i, infer.seed, infer.out);
    i->add_option("--checkpoint", infer.checkpoint)->required();
    i->add_option("--data", infer.data, "Canonical traffic CSV")->required();
    i->add_option("--begin", infer.begin, "First target time (default: start of the test split)");
    i->add_option("--end", infer.end, "One past the last target time");
    i->add_flag("--pgm", infer.pgm, "Also write 16-bit PGM heatmaps");
    i->add_option("--psnr-max", infer.psnr_max, "Heatmap peak (default: dataset maximum)");
    i->add_option("--batch-size", infer.batch_size)->capture_default_str();

    cli::EvaluateArgs evaluate;
    auto* e = app.add_subcommand("evaluate", "Compare methods on the test split");
    shared_flags(e, evaluate.seed, evaluate.out);
    e->add_option("--data", evaluate.data, "Canonical traffic CSV")->required();
    e->add_option("--checkpoint", evaluate.checkpoints, "Trained model checkpoint (repeatable)");
    e->add_option("--methods", evaluate.methods)->delimiter(',')->capture_default_str();
    e->add_option("--instances", evaluate.instances, "Extra layouts: up2, up4, up10, mixture")->delimiter(',');
    instance_flags(e, evaluate.instance);
    e->add_option("--split", evaluate.split)->delimiter(',')->expected(3)->capture_default_str();
    e->add_option("--psnr-max", evaluate.psnr_max, "PSNR/SSIM peak (default: dataset maximum)");
    e->add_option("--batch-size", evaluate.batch_size)->capture_default_str();

    cli::SaliencyArgs sal;
    auto* g = app.add_subcommand("saliency", "Per-frame input-gradient magnitudes");
    shared_flags(g, sal.seed, sal.out);
    g->add_option("--checkpoint", sal.checkpoint)->required();
    g->add_option("--data", sal.data, "Canonical traffic CSV")->required();
    g->add_option("--max-samples", sal.max_samples, "Random subset of test pairs");
    g->add_option("--batch-size", sal.batch_size)->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        err << "error: " << ex.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*s) cli::cmd_synth(synth, out);
        if (*t) cli::cmd_train(train, out, err);
        if (*i) cli::cmd_infer(infer, out);
        if (*e) cli::cmd_evaluate(evaluate, out, err);
        if (*g) cli::cmd_saliency(sal, out);
    } catch (const ConfigError& ex) {
        err << "error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace mtsr
