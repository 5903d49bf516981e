#include "rlprobe/image.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>

namespace rlprobe {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetError::Kind::kMissingFile, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const fs::path& path) {
  if (bytes.size() < offset + 4)
    throw DatasetError(DatasetError::Kind::kTruncated, path.string() + ": truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

fs::path first_existing_dir(const fs::path& dir, const std::string& sub, const std::string& probe) {
  if (fs::exists(dir / sub / probe)) return dir / sub;
  return dir;
}

}  // namespace

ImageDataset ImageDataset::head(std::size_t n) const {
  n = std::min(n, size());
  ImageDataset out = *this;
  out.pixels.resize(n * image_size());
  out.labels.resize(n);
  return out;
}

ImageDataset load_mnist_split(const fs::path& images, const fs::path& labels, std::string split) {
  const auto ib = read_file(images);
  const auto lb = read_file(labels);
  if (read_be32(ib, 0, images) != kIdxImagesMagic)
    throw DatasetError(DatasetError::Kind::kBadMagic, images.string() + ": bad IDX image magic");
  if (read_be32(lb, 0, labels) != kIdxLabelsMagic)
    throw DatasetError(DatasetError::Kind::kBadMagic, labels.string() + ": bad IDX label magic");
  const std::size_t n = read_be32(ib, 4, images);
  const std::size_t rows = read_be32(ib, 8, images);
  const std::size_t cols = read_be32(ib, 12, images);
  const std::size_t nl = read_be32(lb, 4, labels);
  if (ib.size() < 16 + n * rows * cols)
    throw DatasetError(DatasetError::Kind::kTruncated, images.string() + ": truncated pixel data");
  if (lb.size() < 8 + nl)
    throw DatasetError(DatasetError::Kind::kTruncated, labels.string() + ": truncated label data");
  if (n != nl)
    throw DatasetError(DatasetError::Kind::kCountMismatch,
                       "image count " + std::to_string(n) + " != label count " + std::to_string(nl));
  ImageDataset ds;
  ds.name = "mnist";
  ds.split = std::move(split);
  ds.channels = 1;
  ds.height = rows;
  ds.width = cols;
  ds.classes = 10;
  ds.pixels.assign(ib.begin() + 16, ib.begin() + 16 + static_cast<std::ptrdiff_t>(n * rows * cols));
  ds.labels.assign(lb.begin() + 8, lb.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  for (auto l : ds.labels)
    if (l >= ds.classes) throw DatasetError(DatasetError::Kind::kBadRecord, labels.string() + ": label out of range");
  return ds;
}

std::vector<std::string> mnist_file_names() {
  return {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
          "t10k-labels-idx1-ubyte"};
}

std::vector<std::string> cifar10_file_names() {
  return {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
          "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};
}

DatasetPair load_mnist(const fs::path& dir) {
  const auto names = mnist_file_names();
  const fs::path base = first_existing_dir(dir, "mnist", names[0]);
  return {load_mnist_split(base / names[0], base / names[1], "train"),
          load_mnist_split(base / names[2], base / names[3], "test")};
}

ImageDataset load_cifar10_batches(const std::vector<fs::path>& files, std::string split) {
  ImageDataset ds;
  ds.name = "cifar10";
  ds.split = std::move(split);
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.classes = 10;
  for (const auto& f : files) {
    const auto bytes = read_file(f);
    if (bytes.size() % kCifarRecordBytes != 0)
      throw DatasetError(DatasetError::Kind::kTruncated,
                         f.string() + ": size is not a multiple of " + std::to_string(kCifarRecordBytes));
    for (std::size_t off = 0; off < bytes.size(); off += kCifarRecordBytes) {
      if (bytes[off] >= ds.classes)
        throw DatasetError(DatasetError::Kind::kBadRecord, f.string() + ": label byte out of range");
      ds.labels.push_back(bytes[off]);
      ds.pixels.insert(ds.pixels.end(), bytes.begin() + static_cast<std::ptrdiff_t>(off + 1),
                       bytes.begin() + static_cast<std::ptrdiff_t>(off + kCifarRecordBytes));
    }
  }
  return ds;
}

DatasetPair load_cifar10(const fs::path& dir) {
  const auto names = cifar10_file_names();
  const fs::path base = first_existing_dir(dir, "cifar-10-batches-bin", names[0]);
  std::vector<fs::path> train;
  for (std::size_t i = 0; i < 5; ++i) train.push_back(base / names[i]);
  return {load_cifar10_batches(train, "train"), load_cifar10_batches({base / names[5]}, "test")};
}

void write_idx_images(const fs::path& path, const ImageDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(ds.size()));
  put_be32(out, static_cast<std::uint32_t>(ds.height));
  put_be32(out, static_cast<std::uint32_t>(ds.width));
  out.write(reinterpret_cast<const char*>(ds.pixels.data()), static_cast<std::streamsize>(ds.pixels.size()));
}

void write_idx_labels(const fs::path& path, const ImageDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(ds.size()));
  out.write(reinterpret_cast<const char*>(ds.labels.data()), static_cast<std::streamsize>(ds.labels.size()));
}

ImageDataset apply_label_noise(const ImageDataset& ds, LabelNoiseConfig config, Seed run_seed) {
  if (!(config.p >= 0.0 && config.p <= 1.0)) throw std::invalid_argument("label noise p must lie in [0, 1]");
  ImageDataset out = ds;
  if (config.p == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    // One stream per image so the assignment does not depend on dataset size.
    RandomStream rng(Seed{mix64(run_seed.value) ^ mix64(i + 0x5bd1e995ULL)}, StreamPurpose::kLabelNoise);
    if (rng.next_unit() < config.p) out.labels[i] = static_cast<std::uint8_t>(rng.below(out.classes));
  }
  return out;
}

// ---------------------------------------------------------------- explore MDP

void ExploreConfig::validate(const ImageDataset& ds) const {
  if (window < 1 || window > std::min(ds.height, ds.width))
    throw std::invalid_argument("ExploreConfig: window must lie in [1, image side]");
  if (max_steps == 0) throw std::invalid_argument("ExploreConfig: max_steps must be positive");
}

ImageExploreEnv::ImageExploreEnv(std::shared_ptr<const ImageDataset> train,
                                 std::shared_ptr<const ImageDataset> test, ExploreConfig config)
    : train_(std::move(train)), test_(std::move(test)), config_(config) {
  if (!train_ || !test_ || train_->size() == 0) throw std::invalid_argument("ImageExploreEnv: empty dataset");
  if (train_->image_size() != test_->image_size())
    throw std::invalid_argument("ImageExploreEnv: train/test image shapes differ");
  config_.validate(*train_);
  const auto& d = *train_;
  spec_.obs_layout = ObsLayout::flat(2 + d.image_size() + d.height * d.width);
  spec_.action_spec = ActionSpec::discrete(4 * d.classes);
  spec_.max_steps = config_.max_steps;
  spec_.discount = 0.99;
  mask_.assign(d.height * d.width, 0);
}

std::uint8_t ImageExploreEnv::label() const { return current().labels[index_]; }

Observation ImageExploreEnv::reset(Seed seed) {
  from_test_ = is_test_seed(seed);
  index_ = static_cast<std::size_t>(from_test_ ? seed.value - kTestSeedOffset : seed.value);
  if (index_ >= current().size())
    throw std::out_of_range("ImageExploreEnv: seed " + std::to_string(seed.value) + " beyond " +
                            current().split + " split size " + std::to_string(current().size()));
  const auto& d = current();
  row_ = (d.height - config_.window) / 2;
  col_ = (d.width - config_.window) / 2;
  std::fill(mask_.begin(), mask_.end(), 0);
  reveal();
  clock_.restart();
  return observe();
}

void ImageExploreEnv::reveal() {
  const auto w = current().width;
  for (std::size_t r = row_; r < row_ + config_.window; ++r)
    for (std::size_t c = col_; c < col_ + config_.window; ++c) mask_[r * w + c] = 1;
}

StepResult ImageExploreEnv::step(const Action& action) {
  clock_.begin_step(name());
  const auto& d = current();
  if (action.index >= spec_.action_spec.count) throw std::invalid_argument(name() + ": action out of range");
  const auto move = static_cast<Move>(action.index / d.classes);
  const std::size_t guess = action.index % d.classes;
  const std::size_t stride = config_.stride();
  const std::size_t max_row = d.height - config_.window;
  const std::size_t max_col = d.width - config_.window;
  switch (move) {
    case Move::kUp: row_ = row_ >= stride ? row_ - stride : 0; break;
    case Move::kDown: row_ = std::min(max_row, row_ + stride); break;
    case Move::kLeft: col_ = col_ >= stride ? col_ - stride : 0; break;
    case Move::kRight: col_ = std::min(max_col, col_ + stride); break;
  }
  reveal();
  StepResult r;
  r.terminal = guess == label();
  r.reward = r.terminal ? 1.0 : 0.0;
  r.truncated = clock_.tick(spec_.max_steps) && !r.terminal;
  if (r.done()) clock_.finish();
  r.observation = observe();
  return r;
}

Observation ImageExploreEnv::observe() const {
  const auto& d = current();
  const std::size_t plane = d.height * d.width;
  std::vector<double> v;
  v.reserve(spec_.obs_layout.size());
  const double max_row = static_cast<double>(d.height - config_.window);
  const double max_col = static_cast<double>(d.width - config_.window);
  v.push_back(max_row > 0 ? static_cast<double>(row_) / max_row : 0.5);
  v.push_back(max_col > 0 ? static_cast<double>(col_) / max_col : 0.5);
  const auto img = d.image(index_);
  for (std::size_t c = 0; c < d.channels; ++c)
    for (std::size_t i = 0; i < plane; ++i)
      v.push_back(mask_[i] ? static_cast<double>(img[c * plane + i]) / 255.0 : 0.0);
  for (std::size_t i = 0; i < plane; ++i) v.push_back(mask_[i] ? 1.0 : 0.0);
  return Observation::flat(std::move(v));
}

}  // namespace rlprobe
