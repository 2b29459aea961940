#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "mfgrow/dataset.hpp"
#include "mfgrow/network.hpp"

namespace mfgrow {

inline constexpr std::size_t kCifarPixels = 3072;
inline constexpr std::size_t kCifarRecord = kCifarPixels + 1;
inline constexpr std::size_t kCifarClasses = 10;

// One binary batch: records of a label byte followed by 3072 channel-major
// pixel bytes, scaled to [0, 1].
Dataset load_cifar10_batch(const std::filesystem::path& file);

// data_batch_*.bin (sorted by name) and test_batch.bin from `dir` or its
// cifar-10-batches-bin subdirectory. Throws DataUnavailableError when absent.
std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir);

// Locates the dataset from an explicit path, else MFGROW_CIFAR10_DIR. Empty
// when neither points at a readable copy.
std::filesystem::path find_cifar10(const std::string& explicit_dir = "");

inline constexpr const char* kCifarHelp =
    "CIFAR-10 (binary version) is required: download cifar-10-binary.tar.gz from "
    "https://www.cs.toronto.edu/~kriz/cifar.html, extract it, and pass the directory via "
    "--dataset-dir or MFGROW_CIFAR10_DIR.";

enum class SynthKind { Sine, Cubic };

SynthKind parse_synth_kind(const std::string& s);
double synth_function(SynthKind kind, double x);

// x ~ uniform(-pi, pi), y = g(x) + gaussian(0, noise_std).
Dataset synth_regression(SynthKind kind, std::size_t n, double noise_std, const Rng& rng);

// Gaussian class clusters in `dim` dimensions with one-hot targets; a small
// stand-in for image classification in smoke runs.
Dataset synth_classification(std::size_t n, std::size_t dim, std::size_t classes, double separation, const Rng& rng);

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Network& net, const std::filesystem::path& path, std::uint64_t seed = 0,
                     Dtype dtype = Dtype::F64);
std::string checkpoint_bytes(const Network& net, std::uint64_t seed = 0, Dtype dtype = Dtype::F64);

Network load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed = nullptr);
Network parse_checkpoint(const std::string& bytes, std::uint64_t* seed = nullptr);

// Architecture JSON with the topology needed to rebuild the network.
nlohmann::json network_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mfgrow
