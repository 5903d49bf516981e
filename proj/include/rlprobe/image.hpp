#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rlprobe/env.hpp"

namespace rlprobe {

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { kMissingFile, kBadMagic, kTruncated, kCountMismatch, kBadRecord };
  DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Byte images (channels x height x width each) with integer labels.
struct ImageDataset {
  std::string name;   // "mnist" | "cifar10"
  std::string split;  // "train" | "test"
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 10;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t image_size() const noexcept { return channels * height * width; }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * image_size(), image_size()};
  }
  /// First `n` records as a new dataset.
  ImageDataset head(std::size_t n) const;
};

struct DatasetPair {
  ImageDataset train;
  ImageDataset test;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

ImageDataset load_mnist_split(const std::filesystem::path& images, const std::filesystem::path& labels,
                              std::string split);
/// Looks for the four standard IDX files in `dir/mnist` and then `dir`.
DatasetPair load_mnist(const std::filesystem::path& dir);
ImageDataset load_cifar10_batches(const std::vector<std::filesystem::path>& files, std::string split);
/// Looks for data_batch_{1..5}.bin and test_batch.bin in
/// `dir/cifar-10-batches-bin` and then `dir`.
DatasetPair load_cifar10(const std::filesystem::path& dir);

/// The standard file names a loader expects, relative to its directory.
std::vector<std::string> mnist_file_names();
std::vector<std::string> cifar10_file_names();

void write_idx_images(const std::filesystem::path& path, const ImageDataset& ds);
void write_idx_labels(const std::filesystem::path& path, const ImageDataset& ds);

struct LabelNoiseConfig {
  double p = 0.0;
};

/// With probability p per image, redraws its label uniformly over the
/// classes. Deterministic in (run_seed, image index).
ImageDataset apply_label_noise(const ImageDataset& ds, LabelNoiseConfig config, Seed run_seed);

// ---------------------------------------------------------------- explore MDP

struct ExploreConfig {
  std::size_t window = 5;
  std::size_t max_steps = 100;
  std::size_t move_step = 0;  // 0 means "same as window"
  void validate(const ImageDataset& ds) const;
  std::size_t stride() const noexcept { return move_step == 0 ? window : move_step; }
};

enum class Move : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

/// Masked-image exploration: each action is a (move, class guess) pair,
/// encoded as move * classes + guess. Train seed i shows train image i;
/// test seed 1e6 + j shows test image j.
class ImageExploreEnv final : public Env {
 public:
  ImageExploreEnv(std::shared_ptr<const ImageDataset> train, std::shared_ptr<const ImageDataset> test,
                  ExploreConfig config);

  std::string name() const override { return train_->name + "-explore"; }
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(Seed seed) override;
  StepResult step(const Action& action) override;
  Observation observe() const override;
  std::size_t steps_taken() const override { return clock_.steps(); }
  bool done() const override { return clock_.done(); }

  static Action encode(Move move, std::size_t guess, std::size_t classes) {
    return Action::discrete(static_cast<std::size_t>(move) * classes + guess);
  }

  std::size_t image_index() const noexcept { return index_; }
  bool showing_test_image() const noexcept { return from_test_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }
  const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }
  std::uint8_t label() const;

 private:
  void reveal();
  const ImageDataset& current() const { return from_test_ ? *test_ : *train_; }

  std::shared_ptr<const ImageDataset> train_;
  std::shared_ptr<const ImageDataset> test_;
  ExploreConfig config_;
  EnvSpec spec_;
  std::size_t index_ = 0;
  bool from_test_ = false;
  std::size_t row_ = 0;
  std::size_t col_ = 0;
  std::vector<std::uint8_t> mask_;
  EpisodeClock clock_;
};

// ---------------------------------------------------------------- baseline

struct BaselineResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct BaselineConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t hidden = 128;
  std::uint64_t seed = 0;
};

/// Supervised full-image classifier (2 conv + MLP) trained on the first
/// `train_count` train images; accuracy on those and on the whole test split.
BaselineResult train_baseline_classifier(const DatasetPair& data, std::size_t train_count,
                                         const BaselineConfig& config);

}  // namespace rlprobe
