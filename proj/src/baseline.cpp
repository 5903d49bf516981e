#include <algorithm>
#include <numeric>

#include "rlprobe/image.hpp"
#include "rlprobe/nn.hpp"

namespace rlprobe {

namespace {

nn::Matrix<float> batch_pixels(const ImageDataset& ds, std::span<const std::size_t> idx) {
  nn::Matrix<float> x(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(ds.image_size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto img = ds.image(idx[i]);
    for (std::size_t j = 0; j < img.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<float>(img[j]) / 255.0f;
  }
  return x;
}

double accuracy(const nn::Network<float>& net, const ImageDataset& ds, std::size_t count) {
  if (count == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < count; start += 256) {
    idx.resize(std::min<std::size_t>(256, count - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto out = net.forward(batch_pixels(ds, idx));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      Eigen::Index best;
      out.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      if (static_cast<std::size_t>(best) == ds.labels[idx[i]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(count);
}

}  // namespace

BaselineResult train_baseline_classifier(const DatasetPair& data, std::size_t train_count,
                                         const BaselineConfig& config) {
  const auto& train = data.train;
  if (train_count == 0 || train_count > train.size())
    throw std::invalid_argument("baseline: train_count must lie in [1, train split size]");
  if (config.batch_size == 0 || config.epochs == 0) throw std::invalid_argument("baseline: empty schedule");

  RandomStream init(Seed{config.seed}, StreamPurpose::kAgentInit);
  RandomStream order_rng(Seed{config.seed}, StreamPurpose::kMinibatch);
  nn::Network<float> net(nn::small_conv(train.channels, train.height, train.width, train.classes, config.hidden), init);
  nn::Adam<float> adam(net.params(), nn::AdamConfig{config.lr});

  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < train_count; start += config.batch_size) {
      const auto end = std::min(train_count, start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<std::size_t> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train.labels[idx[i]];
      nn::Network<float>::Cache cache;
      const auto logits = net.forward(batch_pixels(train, idx), &cache);
      const auto ce = nn::softmax_cross_entropy(logits.cast<double>(), labels);
      const nn::Matrix<float> grad = ce.grad.cast<float>();
      auto tape = net.backward(cache, grad);
      adam.step(net.params(), tape);
    }
  }
  return {accuracy(net, train, train_count), accuracy(net, data.test, data.test.size())};
}

}  // namespace rlprobe
