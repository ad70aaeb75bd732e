#include "mtsr/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "mtsr/error.hpp"

namespace mtsr {
namespace {

using nlohmann::json;

constexpr std::array<char, 8> kMagic{'M', 'T', 'S', 'R', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderBytes = 8 + 4 + 8;

template <typename U>
void put_le(std::string& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const unsigned char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(p[i]) << (8 * i);
    return v;
}

json instance_json(const InstanceConfig& c) {
    return {{"upscaling_factor", c.upscaling_factor},
            {"window_side", c.window_side},
            {"temporal_length", c.temporal_length},
            {"layout", to_string(c.layout)}};
}

InstanceConfig instance_from(const json& j) {
    InstanceConfig c;
    c.upscaling_factor = j.at("upscaling_factor").get<std::size_t>();
    c.window_side = j.at("window_side").get<std::size_t>();
    c.temporal_length = j.at("temporal_length").get<std::size_t>();
    c.layout = layout_kind_from_string(j.at("layout").get<std::string>());
    return c;
}

json train_json(const TrainConfig& c) {
    json j{{"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"n_d", c.n_d},
           {"n_g", c.n_g},
           {"pretrain_epochs", c.pretrain_epochs},
           {"gan_epochs", c.gan_epochs},
           {"loss", to_string(c.loss)},
           {"log_clip", c.log_clip},
           {"seed", c.seed},
           {"convergence_tol", c.convergence_tol},
           {"convergence_patience", c.convergence_patience}};
    j["sigma_sq"] = c.sigma_sq ? json(*c.sigma_sq) : json(nullptr);
    j["gan_learning_rate"] = c.gan_learning_rate ? json(*c.gan_learning_rate) : json(nullptr);
    j["pretrain_schedule"] = to_string(c.pretrain_schedule);
    return j;
}

TrainConfig train_from(const json& j) {
    TrainConfig c;
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.n_d = j.at("n_d").get<std::size_t>();
    c.n_g = j.at("n_g").get<std::size_t>();
    c.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
    c.gan_epochs = j.at("gan_epochs").get<std::size_t>();
    c.loss = loss_variant_from_string(j.at("loss").get<std::string>());
    c.log_clip = j.at("log_clip").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.convergence_tol = j.at("convergence_tol").get<double>();
    c.convergence_patience = j.at("convergence_patience").get<std::size_t>();
    if (!j.at("sigma_sq").is_null()) c.sigma_sq = j.at("sigma_sq").get<double>();
    if (j.contains("gan_learning_rate") && !j.at("gan_learning_rate").is_null()) {
        c.gan_learning_rate = j.at("gan_learning_rate").get<double>();
    }
    if (j.contains("pretrain_schedule")) {
        c.pretrain_schedule = lr_schedule_from_string(j.at("pretrain_schedule").get<std::string>());
    }
    return c;
}

json model_json(const ModelConfig& m) {
    return {{"generator", m.generator},
            {"upscaling_filters", m.widths.upscaling_filters},
            {"zipper_modules", m.widths.zipper_modules},
            {"zipper_filters", m.widths.zipper_filters},
            {"final_filters", m.widths.final_filters},
            {"discriminator_filters", m.discriminator_filters}};
}

ModelConfig model_from(const json& j) {
    ModelConfig m;
    m.generator = j.at("generator").get<std::string>();
    m.widths.upscaling_filters = j.at("upscaling_filters").get<std::size_t>();
    m.widths.zipper_modules = j.at("zipper_modules").get<std::size_t>();
    m.widths.zipper_filters = j.at("zipper_filters").get<std::size_t>();
    m.widths.final_filters = j.at("final_filters").get<std::array<std::size_t, 3>>();
    m.discriminator_filters = j.at("discriminator_filters").get<std::size_t>();
    return m;
}

void append_arrays(json& manifest, std::string& blob, const std::string& group,
                   const std::vector<NamedArray>& arrays) {
    for (const auto& a : arrays) {
        if (shape_size(a.shape) != a.data.size()) {
            throw ManifestError("checkpoint: array " + a.name + " has " + std::to_string(a.data.size()) +
                                " values for shape " + shape_string(a.shape));
        }
        manifest["arrays"].push_back(
            {{"group", group}, {"name", a.name}, {"shape", a.shape}, {"offset", blob.size()}, {"count", a.data.size()}});
        for (float v : a.data) put_le(blob, std::bit_cast<std::uint32_t>(v));
    }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    json manifest;
    manifest["instance"] = instance_json(ck.instance);
    manifest["train"] = train_json(ck.train);
    manifest["model"] = model_json(ck.model);
    manifest["norm"] = {{"mean", ck.norm.mean},
                        {"std", ck.norm.std},
                        {"fit_begin", ck.norm.fit_begin},
                        {"fit_end", ck.norm.fit_end}};
    manifest["data"] = {{"offset", ck.offset},
                        {"split", {ck.split.train, ck.split.validation, ck.split.test}}};
    manifest["pretrain_epochs_run"] = ck.pretrain_epochs_run;
    manifest["gan_epochs_run"] = ck.gan_epochs_run;
    manifest["arrays"] = json::array();
    std::string blob;
    append_arrays(manifest, blob, "generator", ck.generator);
    append_arrays(manifest, blob, "discriminator", ck.discriminator);
    const std::string text = manifest.dump();

    std::string bytes(kMagic.begin(), kMagic.end());
    put_le<std::uint32_t>(bytes, kCheckpointVersion);
    put_le<std::uint64_t>(bytes, text.size());
    bytes += text;
    bytes += blob;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw FormatError(path.string() + ": not a checkpoint (bad magic)");
    }
    if (bytes.size() < kHeaderBytes) throw TruncatedError(path.string() + ": truncated header");
    const auto version = get_le<std::uint32_t>(p + 8);
    if (version != kCheckpointVersion) {
        throw VersionError(path.string() + ": unsupported checkpoint version " + std::to_string(version) +
                           " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const auto manifest_len = get_le<std::uint64_t>(p + 12);
    if (manifest_len > bytes.size() - kHeaderBytes) throw TruncatedError(path.string() + ": truncated manifest");
    const std::size_t data_start = kHeaderBytes + std::size_t(manifest_len);

    Checkpoint ck;
    try {
        const json m = json::parse(bytes.begin() + std::ptrdiff_t(kHeaderBytes),
                                   bytes.begin() + std::ptrdiff_t(data_start));
        ck.instance = instance_from(m.at("instance"));
        ck.train = train_from(m.at("train"));
        ck.model = model_from(m.at("model"));
        const json& n = m.at("norm");
        ck.norm = {n.at("mean").get<double>(), n.at("std").get<double>(), n.at("fit_begin").get<std::size_t>(),
                   n.at("fit_end").get<std::size_t>()};
        const json& d = m.at("data");
        ck.offset = d.at("offset").get<std::size_t>();
        const auto split = d.at("split").get<std::array<double, 3>>();
        ck.split = {split[0], split[1], split[2]};
        ck.pretrain_epochs_run = m.at("pretrain_epochs_run").get<std::size_t>();
        ck.gan_epochs_run = m.at("gan_epochs_run").get<std::size_t>();
        for (const json& a : m.at("arrays")) {
            NamedArray arr;
            arr.name = a.at("name").get<std::string>();
            arr.shape = a.at("shape").get<Shape>();
            const auto offset = a.at("offset").get<std::size_t>();
            const auto count = a.at("count").get<std::size_t>();
            if (shape_size(arr.shape) != count) {
                throw ManifestError(path.string() + ": array " + arr.name + " count disagrees with its shape");
            }
            if (offset % 4 != 0 || offset > bytes.size() - data_start || count > (bytes.size() - data_start - offset) / 4) {
                throw TruncatedError(path.string() + ": data for array " + arr.name + " is truncated");
            }
            arr.data.resize(count);
            const unsigned char* src = p + data_start + offset;
            for (std::size_t i = 0; i < count; ++i) arr.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(src + 4 * i));
            const std::string group = a.at("group").get<std::string>();
            if (group == "generator") {
                ck.generator.push_back(std::move(arr));
            } else if (group == "discriminator") {
                ck.discriminator.push_back(std::move(arr));
            } else {
                throw ManifestError(path.string() + ": unknown array group '" + group + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ManifestError(path.string() + ": invalid manifest: " + e.what());
    } catch (const ConfigError& e) {
        throw ManifestError(path.string() + ": invalid manifest: " + e.what());
    }
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const InstanceConfig& expected) {
    Checkpoint ck = load_checkpoint(path);
    if (!(ck.instance == expected)) {
        throw ConfigError("checkpoint " + path.string() + " was trained for instance " + ck.instance.name() +
                          " (window " + std::to_string(ck.instance.window_side) + ", S=" +
                          std::to_string(ck.instance.temporal_length) + "), requested " + expected.name() +
                          " (window " + std::to_string(expected.window_side) + ", S=" +
                          std::to_string(expected.temporal_length) + ")");
    }
    return ck;
}

template <typename T>
std::vector<NamedArray> capture(Module<T>& module) {
    std::vector<NamedArray> out;
    for (const auto& a : module.arrays()) {
        NamedArray n{a.name, a.shape, {}};
        n.data.reserve(a.data.size());
        for (T v : a.data) n.data.push_back(float(v));
        out.push_back(std::move(n));
    }
    return out;
}

template <typename T>
void restore(Module<T>& module, const std::vector<NamedArray>& arrays) {
    auto targets = module.arrays();
    if (targets.size() != arrays.size()) {
        throw ManifestError("restore: model has " + std::to_string(targets.size()) + " arrays, checkpoint has " +
                            std::to_string(arrays.size()));
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i].name != arrays[i].name || targets[i].shape != arrays[i].shape) {
            throw ManifestError("restore: expected " + targets[i].name + " " + shape_string(targets[i].shape) +
                                ", found " + arrays[i].name + " " + shape_string(arrays[i].shape));
        }
        for (std::size_t k = 0; k < arrays[i].data.size(); ++k) targets[i].data[k] = T(arrays[i].data[k]);
    }
}

template <typename T>
std::unique_ptr<Generator<T>> make_generator(const InstanceConfig& instance, const ModelConfig& model,
                                             std::uint64_t seed) {
    if (model.generator == "zipnet") return build_zipnet<T>(instance, model.widths, seed);
    if (model.generator == "srcnn") return build_srcnn<T>(instance, seed);
    throw ConfigError("unknown generator kind '" + model.generator + "' (expected zipnet or srcnn)");
}

template <typename T>
std::unique_ptr<Generator<T>> load_generator(const Checkpoint& ck) {
    auto g = make_generator<T>(ck.instance, ck.model, 0);
    restore(*g, ck.generator);
    return g;
}

template <typename T>
std::unique_ptr<Discriminator<T>> load_discriminator(const Checkpoint& ck) {
    if (!ck.has_discriminator()) return nullptr;
    auto d = build_discriminator<T>(ck.instance.window_side, ck.model.discriminator_filters, 0);
    restore(*d, ck.discriminator);
    return d;
}

#define MTSR_INSTANTIATE_CHECKPOINT(T)                                                                         \
    template std::vector<NamedArray> capture(Module<T>&);                                                     \
    template void restore(Module<T>&, const std::vector<NamedArray>&);                                        \
    template std::unique_ptr<Generator<T>> make_generator(const InstanceConfig&, const ModelConfig&, std::uint64_t); \
    template std::unique_ptr<Generator<T>> load_generator(const Checkpoint&);                                 \
    template std::unique_ptr<Discriminator<T>> load_discriminator(const Checkpoint&);

MTSR_INSTANTIATE_CHECKPOINT(float)
MTSR_INSTANTIATE_CHECKPOINT(double)

#undef MTSR_INSTANTIATE_CHECKPOINT

}  // namespace mtsr
