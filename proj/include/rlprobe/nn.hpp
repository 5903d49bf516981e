#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "rlprobe/rng.hpp"

namespace rlprobe::nn {

template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  // Aligned so vectorized kernels take the same path on every allocation.
  std::vector<T, Eigen::aligned_allocator<T>> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(count(shape), T(0)) {}

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }
  std::size_t size() const noexcept { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Per-parameter gradients, shapes mirroring Network::params().
template <typename T>
using GradientTape = std::vector<Tensor<T>>;

enum class LayerKind : std::uint32_t { kDense = 0, kConv2d = 1, kRelu = 2 };

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::size_t in = 0;  // dense input width, or relu width
  std::size_t out = 0;
  // conv2d
  std::size_t in_channels = 0, out_channels = 0, kernel = 0, stride = 1, in_h = 0, in_w = 0;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                        std::size_t out_channels, std::size_t kernel, std::size_t stride);
  static LayerSpec relu(std::size_t width);

  std::size_t out_h() const noexcept { return (in_h - kernel) / stride + 1; }
  std::size_t out_w() const noexcept { return (in_w - kernel) / stride + 1; }
  std::size_t input_size() const noexcept;
  std::size_t output_size() const noexcept;
  bool has_params() const noexcept { return kind != LayerKind::kRelu; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Architecture {
  std::vector<LayerSpec> layers;
  std::size_t input_size() const { return layers.front().input_size(); }
  std::size_t output_size() const { return layers.back().output_size(); }
  /// Throws on incompatible adjacent shapes.
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// in -> hidden -> ... -> out with ReLU between dense layers.
/// hidden_layers = 2 gives the 3-layer MLP.
Architecture mlp(std::size_t in, std::size_t hidden, std::size_t out, std::size_t hidden_layers = 2);
/// Pixel head: conv 8x8/4 (32), 4x4/2 (64), 3x3/1 (64), dense `dense_width`, out.
Architecture conv_head(std::size_t channels, std::size_t h, std::size_t w, std::size_t out,
                       std::size_t dense_width = 512);
/// Small classifier: conv 5x5/2 (16), conv 3x3/2 (32), dense hidden, out.
Architecture small_conv(std::size_t channels, std::size_t h, std::size_t w, std::size_t out,
                        std::size_t hidden);

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Feed-forward network over row-major batches (one sample per row).
/// Dense weights are [out, in]; conv weights are [out_c, in_c, k, k].
template <typename T>
class Network {
 public:
  struct Cache {
    std::vector<Matrix<T>> inputs;  // input of every layer
  };

  Network() = default;
  /// He-normal weights, zero biases; the last layer's weights are scaled by
  /// `final_gain`. Weights are drawn layer by layer, output unit by output unit.
  Network(Architecture arch, RandomStream& init, double final_gain = 1.0);
  Network(Architecture arch, std::vector<Tensor<T>> params);

  Matrix<T> forward(const Matrix<T>& input, Cache* cache = nullptr) const;
  /// Reverse-mode gradients of <output_grad, forward(input)> for the cached input.
  GradientTape<T> backward(const Cache& cache, const Matrix<T>& output_grad,
                           Matrix<T>* input_grad = nullptr) const;

  const Architecture& architecture() const noexcept { return arch_; }
  const std::vector<Tensor<T>>& params() const noexcept { return params_; }
  std::vector<Tensor<T>>& params() noexcept { return params_; }
  GradientTape<T> zero_tape() const;
  std::size_t parameter_count() const;

  template <typename U>
  Network<U> cast() const {
    std::vector<Tensor<U>> out;
    for (const auto& p : params_) {
      Tensor<U> q(p.shape);
      for (std::size_t i = 0; i < p.size(); ++i) q.data[i] = static_cast<U>(p.data[i]);
      out.push_back(std::move(q));
    }
    return Network<U>(arch_, std::move(out));
  }

 private:
  Architecture arch_;
  std::vector<Tensor<T>> params_;
  std::vector<std::size_t> param_offset_;  // index of first param per layer
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over an ordered parameter list.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<Tensor<T>>& params, AdamConfig config);
  /// Throws NonFiniteGradient (naming the parameter) before touching anything.
  void step(std::vector<Tensor<T>>& params, const GradientTape<T>& grads);
  std::size_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) noexcept { config_.lr = lr; }

 private:
  AdamConfig config_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::size_t t_ = 0;
};

/// Rescales the tape in place so its global L2 norm is at most max_norm;
/// returns the norm before clipping.
template <typename T>
double clip_grad_norm(GradientTape<T>& grads, double max_norm);

template <typename T>
void accumulate(GradientTape<T>& into, const GradientTape<T>& from, double scale = 1.0);

// ---------------------------------------------------------------- losses

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d pred
};

/// Mean Huber loss: 0.5 e^2 for |e| <= delta, else delta (|e| - delta / 2).
LossGrad huber_loss(std::span<const double> pred, std::span<const double> target, double delta = 1.0);
/// Mean squared error over all elements.
LossGrad mse_loss(std::span<const double> pred, std::span<const double> target);

struct PpoLossInput {
  std::span<const double> logp_new;
  std::span<const double> logp_old;
  std::span<const double> advantages;
  std::span<const double> values;
  std::span<const double> returns;
  double entropy = 0.0;  // mean policy entropy
  double clip = 0.2;
  double entropy_coef = 0.0;
};

struct PpoLoss {
  double total = 0.0;
  double policy_term = 0.0;  // mean of min(r A, clip(r) A)
  double value_term = 0.0;   // 0.5 * mean((v - R)^2)
  double entropy = 0.0;
  std::vector<double> d_logp_new;
  std::vector<double> d_values;
  double d_entropy = 0.0;
  double clip_fraction = 0.0;
};

/// total = -policy_term + 0.5 * value_term - entropy_coef * entropy.
PpoLoss ppo_loss(const PpoLossInput& in);

// ---------------------------------------------------------------- distributions

/// Diagonal Gaussian log density.
double gaussian_logprob(std::span<const double> mean, std::span<const double> log_std,
                        std::span<const double> action);
/// Gradients of gaussian_logprob with respect to mean and log_std.
void gaussian_logprob_grad(std::span<const double> mean, std::span<const double> log_std,
                           std::span<const double> action, std::span<double> d_mean,
                           std::span<double> d_log_std);
double gaussian_entropy(std::span<const double> log_std);

std::vector<double> log_softmax(std::span<const double> logits);
double categorical_logprob(std::span<const double> logits, std::size_t action);
std::size_t categorical_sample(std::span<const double> logits, RandomStream& rng);
double categorical_entropy(std::span<const double> logits);
/// d logp(action) / d logits = onehot(action) - softmax.
std::vector<double> categorical_logprob_grad(std::span<const double> logits, std::size_t action);
/// d entropy / d logits_j = -p_j (log p_j + H).
std::vector<double> categorical_entropy_grad(std::span<const double> logits);

struct CrossEntropy {
  double loss = 0.0;
  Matrix<double> grad;
  std::size_t correct = 0;
};
/// Mean softmax cross-entropy over rows of `logits`.
CrossEntropy softmax_cross_entropy(const Matrix<double>& logits, std::span<const std::size_t> labels);

// ---------------------------------------------------------------- checkpoints

inline constexpr char kCheckpointMagic[4] = {'R', 'L', 'P', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian: magic "RLPN", u32 version, u32 layer count, per layer nine
/// u32 fields (kind, in, out, in_c, out_c, kernel, stride, in_h, in_w), then
/// u32 param count and per param: u32 rank, u32 dims, raw f32 data.
void save_network(std::ostream& out, const Network<float>& net);
Network<float> load_network(std::istream& in);

}  // namespace rlprobe::nn
