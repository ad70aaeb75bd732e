#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mtsr/datapipe.hpp"
#include "mtsr/networks.hpp"
#include "mtsr/training.hpp"

namespace mtsr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<float> data;

    bool operator==(const NamedArray&) const = default;
};

/// Architecture knobs needed to rebuild the networks.
struct ModelConfig {
    std::string generator = "zipnet";  // zipnet | srcnn
    ZipNetWidths widths;
    std::size_t discriminator_filters = 64;

    bool operator==(const ModelConfig&) const = default;
};

struct Checkpoint {
    InstanceConfig instance;
    TrainConfig train;
    ModelConfig model;
    NormStats norm;
    std::size_t offset = 1;  // window stride used for the training pairs
    SplitFractions split;
    std::size_t pretrain_epochs_run = 0;
    std::size_t gan_epochs_run = 0;
    std::vector<NamedArray> generator;
    std::vector<NamedArray> discriminator;  // empty when no discriminator was trained

    bool has_discriminator() const { return !discriminator.empty(); }
};

/// Layout: 8-byte magic "MTSRCKPT", uint32 LE version, uint64 LE manifest
/// length, JSON manifest, then the arrays as raw little-endian float32.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws FormatError (bad magic), VersionError, TruncatedError or ManifestError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above; throws ConfigError when the stored instance differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const InstanceConfig& expected);

template <typename T>
std::vector<NamedArray> capture(Module<T>& module);

/// Copies arrays into the module. Names and shapes must match exactly.
template <typename T>
void restore(Module<T>& module, const std::vector<NamedArray>& arrays);

template <typename T>
std::unique_ptr<Generator<T>> make_generator(const InstanceConfig& instance, const ModelConfig& model,
                                             std::uint64_t seed);

/// Rebuilt networks with the stored arrays.
template <typename T>
std::unique_ptr<Generator<T>> load_generator(const Checkpoint& checkpoint);

/// Null when the checkpoint holds no discriminator.
template <typename T>
std::unique_ptr<Discriminator<T>> load_discriminator(const Checkpoint& checkpoint);

}  // namespace mtsr
