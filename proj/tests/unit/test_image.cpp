#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <memory>

#include "rlprobe/image.hpp"

using namespace rlprobe;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = RLPROBE_TEST_DATA;

const DatasetPair& fixture() {
  static const DatasetPair data = load_mnist(kFixture);
  return data;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("rlprobe-image-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ImageDataset synthetic(std::size_t n, std::size_t side) {
  ImageDataset ds;
  ds.name = "mnist";
  ds.split = "train";
  ds.height = ds.width = side;
  RandomStream r(Seed{n}, 1u);
  for (std::size_t i = 0; i < n * side * side; ++i) ds.pixels.push_back(static_cast<std::uint8_t>(r.below(256)));
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<std::uint8_t>(r.below(10)));
  return ds;
}

ImageExploreEnv explore_env(std::size_t window = 5, std::size_t max_steps = 100) {
  auto train = std::make_shared<const ImageDataset>(fixture().train);
  auto test = std::make_shared<const ImageDataset>(fixture().test);
  return ImageExploreEnv(train, test, {window, max_steps, 0});
}

}  // namespace

TEST_SUITE("envs-image") {

TEST_CASE("fixture loads with IDX header counts") {
  const auto& d = fixture();
  CHECK(d.train.size() == 2000);
  CHECK(d.test.size() == 500);
  CHECK(d.train.height == 28);
  CHECK(d.train.image_size() == 784);
  for (auto l : d.train.labels) REQUIRE(l < 10);
}

TEST_CASE("IDX round trip is bit exact") {
  const auto dir = scratch("idx");
  const auto ds = synthetic(7, 28);
  write_idx_images(dir / "img", ds);
  write_idx_labels(dir / "lbl", ds);
  const auto back = load_mnist_split(dir / "img", dir / "lbl", "train");
  CHECK(back.pixels == ds.pixels);
  CHECK(back.labels == ds.labels);
}

TEST_CASE("bad magic and truncation are loader errors") {
  const auto dir = scratch("bad");
  const auto ds = synthetic(3, 28);
  write_idx_images(dir / "img", ds);
  write_idx_labels(dir / "lbl", ds);
  {
    std::fstream f(dir / "img", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put(0x01);
  }
  CHECK_THROWS_AS(load_mnist_split(dir / "img", dir / "lbl", "train"), DatasetError);
  write_idx_images(dir / "img", ds);
  fs::resize_file(dir / "img", fs::file_size(dir / "img") - 10);
  CHECK_THROWS_AS(load_mnist_split(dir / "img", dir / "lbl", "train"), DatasetError);
  CHECK_THROWS_AS(load_mnist(dir / "missing"), DatasetError);
}

TEST_CASE("CIFAR record arithmetic") {
  const auto dir = scratch("cifar");
  std::vector<std::uint8_t> bytes;
  for (std::size_t rec = 0; rec < 5; ++rec) {
    bytes.push_back(static_cast<std::uint8_t>(rec * 2));
    for (std::size_t i = 0; i < 3 * 32 * 32; ++i) bytes.push_back(static_cast<std::uint8_t>(rec + i));
  }
  REQUIRE(bytes.size() == 5 * kCifarRecordBytes);
  std::ofstream(dir / "batch.bin", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                           static_cast<std::streamsize>(bytes.size()));
  const auto ds = load_cifar10_batches({dir / "batch.bin"}, "train");
  CHECK(ds.size() == 5);
  CHECK(ds.labels[3] == 6);
  CHECK(ds.image(2)[0] == 2);
  CHECK(ds.image(4)[1] == 5);
  fs::resize_file(dir / "batch.bin", 4 * kCifarRecordBytes + 100);
  CHECK_THROWS_AS(load_cifar10_batches({dir / "batch.bin"}, "train"), DatasetError);
}

TEST_CASE("explore reset is deterministic and reveals one window") {
  auto env = explore_env();
  const auto a = env.reset(Seed{0});
  const auto b = env.reset(Seed{0});
  CHECK(a == b);
  std::size_t revealed = 0;
  for (auto m : env.mask()) revealed += m;
  CHECK(revealed == 25);
  CHECK(a.data.size() == 2 + 784 + 784);
  CHECK(env.spec().action_spec.count == 40);
}

TEST_CASE("window as large as the image reveals everything") {
  auto env = explore_env(28);
  env.reset(Seed{1});
  for (auto m : env.mask()) REQUIRE(m == 1);
}

TEST_CASE("correct guess ends the episode with reward 1") {
  auto env = explore_env();
  env.reset(Seed{4});
  const auto r = env.step(ImageExploreEnv::encode(Move::kUp, env.label(), 10));
  CHECK(r.reward == 1.0);
  CHECK(r.terminal);
}

TEST_CASE("wrong guesses until the cap give return 0") {
  auto env = explore_env();
  env.reset(Seed{4});
  const std::size_t wrong = (env.label() + 1) % 10;
  double ret = 0.0;
  std::size_t steps = 0;
  while (!env.done()) {
    const auto r = env.step(ImageExploreEnv::encode(static_cast<Move>(steps % 4), wrong, 10));
    ret += r.reward;
    ++steps;
  }
  CHECK(ret == 0.0);
  CHECK(steps == 100);
}

TEST_CASE("moving into the border clamps the window") {
  auto env = explore_env();
  env.reset(Seed{2});
  const std::size_t wrong = (env.label() + 1) % 10;
  for (int i = 0; i < 10; ++i) env.step(ImageExploreEnv::encode(Move::kLeft, wrong, 10));
  CHECK(env.col() == 0);
  const auto mask = env.mask();
  env.step(ImageExploreEnv::encode(Move::kLeft, wrong, 10));
  CHECK(env.col() == 0);
  CHECK(env.mask() == mask);
}

TEST_CASE("mask is monotone and observation matches the image on revealed pixels") {
  auto env = explore_env();
  RandomStream r(Seed{3}, 8u);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Seed seed = s % 2 ? Seed{kTestSeedOffset + s} : Seed{s};
    auto obs = env.reset(seed);
    auto prev = env.mask();
    const auto& ds = env.showing_test_image() ? fixture().test : fixture().train;
    REQUIRE(env.image_index() == s);
    const auto img = ds.image(env.image_index());
    double ret = 0.0;
    while (true) {
      for (std::size_t i = 0; i < 784; ++i) {
        const double expect = env.mask()[i] ? img[i] / 255.0 : 0.0;
        REQUIRE(obs.data[2 + i] == expect);
        REQUIRE(obs.data[2 + 784 + i] == static_cast<double>(env.mask()[i]));
      }
      if (env.done()) break;
      const auto step = env.step(Action::discrete(r.below(40)));
      ret += step.reward;
      obs = step.observation;
      for (std::size_t i = 0; i < 784; ++i) REQUIRE(env.mask()[i] >= prev[i]);
      prev = env.mask();
    }
    REQUIRE((ret == 0.0 || ret == 1.0));
  }
}

TEST_CASE("label noise") {
  const auto ds = synthetic(10000, 2);
  CHECK(apply_label_noise(ds, {0.0}, Seed{1}).labels == ds.labels);
  const auto noisy = apply_label_noise(ds, {1.0}, Seed{1});
  std::size_t changed = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) changed += noisy.labels[i] != ds.labels[i];
  CHECK(std::abs(changed / 10000.0 - 0.9) < 0.01);
  CHECK(apply_label_noise(ds, {1.0}, Seed{1}).labels == noisy.labels);
  CHECK(apply_label_noise(ds, {1.0}, Seed{2}).labels != noisy.labels);
}

TEST_CASE("baseline classifier memorizes one image") {
  BaselineConfig cfg;
  cfg.epochs = 30;
  cfg.hidden = 32;
  const auto r = train_baseline_classifier(fixture(), 1, cfg);
  CHECK(r.train_accuracy == 1.0);
}

TEST_CASE("baseline classifier: train accuracy above test on a small set") {
  BaselineConfig cfg;
  cfg.epochs = 30;
  cfg.hidden = 64;
  const auto r = train_baseline_classifier(fixture(), 50, cfg);
  CHECK(r.train_accuracy >= r.test_accuracy);
  CHECK(r.train_accuracy > 0.9);
}

TEST_CASE("baseline classifier under full label noise is near chance") {
  DatasetPair noisy{apply_label_noise(fixture().train, {1.0}, Seed{0}), fixture().test};
  BaselineConfig cfg;
  cfg.epochs = 5;
  cfg.hidden = 64;
  const auto r = train_baseline_classifier(noisy, 1000, cfg);
  CHECK(std::abs(r.test_accuracy - 0.1) <= 0.05);
}

}
