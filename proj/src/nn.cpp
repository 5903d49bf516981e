#include "rlprobe/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

namespace rlprobe::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

// ---------------------------------------------------------------- architecture

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in = in;
  s.out = out;
  return s;
}

LayerSpec LayerSpec::conv(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                          std::size_t out_channels, std::size_t kernel, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.in_channels = in_channels;
  s.in_h = in_h;
  s.in_w = in_w;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  if (kernel == 0 || stride == 0 || kernel > in_h || kernel > in_w)
    throw ShapeError("conv layer: kernel does not fit the input");
  s.in = s.input_size();
  s.out = s.output_size();
  return s;
}

LayerSpec LayerSpec::relu(std::size_t width) {
  LayerSpec s;
  s.kind = LayerKind::kRelu;
  s.in = width;
  s.out = width;
  return s;
}

std::size_t LayerSpec::input_size() const noexcept {
  return kind == LayerKind::kConv2d ? in_channels * in_h * in_w : in;
}

std::size_t LayerSpec::output_size() const noexcept {
  return kind == LayerKind::kConv2d ? out_channels * out_h() * out_w() : out;
}

void Architecture::validate() const {
  if (layers.empty()) throw ShapeError("architecture: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].input_size() == 0 || layers[i].output_size() == 0)
      throw ShapeError("architecture: empty layer " + std::to_string(i));
    if (i > 0 && layers[i - 1].output_size() != layers[i].input_size())
      throw ShapeError("architecture: layer " + std::to_string(i) + " input size " +
                       std::to_string(layers[i].input_size()) + " != previous output " +
                       std::to_string(layers[i - 1].output_size()));
  }
}

Architecture mlp(std::size_t in, std::size_t hidden, std::size_t out, std::size_t hidden_layers) {
  Architecture a;
  std::size_t width = in;
  for (std::size_t i = 0; i < hidden_layers; ++i) {
    a.layers.push_back(LayerSpec::dense(width, hidden));
    a.layers.push_back(LayerSpec::relu(hidden));
    width = hidden;
  }
  a.layers.push_back(LayerSpec::dense(width, out));
  a.validate();
  return a;
}

Architecture conv_head(std::size_t channels, std::size_t h, std::size_t w, std::size_t out,
                       std::size_t dense_width) {
  Architecture a;
  const auto c1 = LayerSpec::conv(channels, h, w, 32, 8, 4);
  const auto c2 = LayerSpec::conv(32, c1.out_h(), c1.out_w(), 64, 4, 2);
  const auto c3 = LayerSpec::conv(64, c2.out_h(), c2.out_w(), 64, 3, 1);
  a.layers = {c1, LayerSpec::relu(c1.output_size()), c2, LayerSpec::relu(c2.output_size()),
              c3, LayerSpec::relu(c3.output_size()), LayerSpec::dense(c3.output_size(), dense_width),
              LayerSpec::relu(dense_width), LayerSpec::dense(dense_width, out)};
  a.validate();
  return a;
}

Architecture small_conv(std::size_t channels, std::size_t h, std::size_t w, std::size_t out,
                        std::size_t hidden) {
  Architecture a;
  const auto c1 = LayerSpec::conv(channels, h, w, 16, 5, 2);
  const auto c2 = LayerSpec::conv(16, c1.out_h(), c1.out_w(), 32, 3, 2);
  a.layers = {c1, LayerSpec::relu(c1.output_size()), c2, LayerSpec::relu(c2.output_size()),
              LayerSpec::dense(c2.output_size(), hidden), LayerSpec::relu(hidden),
              LayerSpec::dense(hidden, out)};
  a.validate();
  return a;
}

// ---------------------------------------------------------------- network

namespace {

// Dense layers at most this wide are evaluated with fixed-order loops, so an
// output column does not depend on how many columns sit beside it.
constexpr std::size_t kNarrowHead = 32;

template <typename T>
using Map = Eigen::Map<Matrix<T>>;
template <typename T>
using ConstMap = Eigen::Map<const Matrix<T>>;

std::vector<std::vector<std::size_t>> param_shapes(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kDense: return {{l.out, l.in}, {l.out}};
    case LayerKind::kConv2d: return {{l.out_channels, l.in_channels, l.kernel, l.kernel}, {l.out_channels}};
    case LayerKind::kRelu: return {};
  }
  return {};
}

template <typename T>
void im2col(const T* x, const LayerSpec& l, Matrix<T>& cols) {
  const std::size_t k = l.kernel, oh = l.out_h(), ow = l.out_w();
  cols.resize(static_cast<Eigen::Index>(l.in_channels * k * k), static_cast<Eigen::Index>(oh * ow));
  for (std::size_t c = 0; c < l.in_channels; ++c)
    for (std::size_t ki = 0; ki < k; ++ki)
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* row = cols.data() + ((c * k + ki) * k + kj) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const T* src = x + (c * l.in_h + y * l.stride + ki) * l.in_w + kj;
          for (std::size_t xo = 0; xo < ow; ++xo) row[y * ow + xo] = src[xo * l.stride];
        }
      }
}

template <typename T>
void col2im_add(const Matrix<T>& cols, const LayerSpec& l, T* dx) {
  const std::size_t k = l.kernel, oh = l.out_h(), ow = l.out_w();
  for (std::size_t c = 0; c < l.in_channels; ++c)
    for (std::size_t ki = 0; ki < k; ++ki)
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* row = cols.data() + ((c * k + ki) * k + kj) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          T* dst = dx + (c * l.in_h + y * l.stride + ki) * l.in_w + kj;
          for (std::size_t xo = 0; xo < ow; ++xo) dst[xo * l.stride] += row[y * ow + xo];
        }
      }
}

}  // namespace

template <typename T>
Network<T>::Network(Architecture arch, RandomStream& init, double final_gain) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t last_param_layer = 0;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i)
    if (arch_.layers[i].has_params()) last_param_layer = i;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const auto& l = arch_.layers[i];
    param_offset_.push_back(params_.size());
    if (!l.has_params()) continue;
    const auto shapes = param_shapes(l);
    Tensor<T> w(shapes[0]);
    const double fan_in = static_cast<double>(w.size() / shapes[0][0]);
    const double gain = i == last_param_layer ? final_gain : 1.0;
    const double var = 2.0 / fan_in;
    for (auto& v : w.data) v = static_cast<T>(gain * init.gaussian(0.0, var));
    params_.push_back(std::move(w));
    params_.emplace_back(shapes[1]);
  }
}

template <typename T>
Network<T>::Network(Architecture arch, std::vector<Tensor<T>> params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  arch_.validate();
  std::size_t p = 0;
  for (const auto& l : arch_.layers) {
    param_offset_.push_back(p);
    for (const auto& shape : param_shapes(l)) {
      if (p >= params_.size() || params_[p].shape != shape ||
          params_[p].data.size() != Tensor<T>::count(shape))
        throw ShapeError("network: parameter " + std::to_string(p) + " does not match the architecture");
      ++p;
    }
  }
  if (p != params_.size()) throw ShapeError("network: too many parameter tensors");
}

template <typename T>
GradientTape<T> Network<T>::zero_tape() const {
  GradientTape<T> tape;
  for (const auto& p : params_) tape.emplace_back(p.shape);
  return tape;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

template <typename T>
Matrix<T> Network<T>::forward(const Matrix<T>& input, Cache* cache) const {
  if (static_cast<std::size_t>(input.cols()) != arch_.input_size())
    throw ShapeError("forward: input width " + std::to_string(input.cols()) + " != " +
                     std::to_string(arch_.input_size()));
  if (cache) cache->inputs.clear();
  Matrix<T> x = input;
  Matrix<T> cols;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const auto& l = arch_.layers[i];
    if (cache) cache->inputs.push_back(x);
    switch (l.kind) {
      case LayerKind::kDense: {
        const auto& w = params_[param_offset_[i]];
        const auto& b = params_[param_offset_[i] + 1];
        ConstMap<T> wm(w.data.data(), static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(b.data.data(), static_cast<Eigen::Index>(l.out));
        Matrix<T> y;
        if (l.out <= kNarrowHead) {
          y.resize(x.rows(), wm.rows());
          for (Eigen::Index n = 0; n < x.rows(); ++n)
            for (Eigen::Index o = 0; o < wm.rows(); ++o) {
              T acc = 0;
              for (Eigen::Index k = 0; k < wm.cols(); ++k) acc += x(n, k) * wm(o, k);
              y(n, o) = acc;
            }
        } else {
          y = x * wm.transpose();
        }
        y.rowwise() += bv;
        x = std::move(y);
        break;
      }
      case LayerKind::kConv2d: {
        const auto& w = params_[param_offset_[i]];
        const auto& b = params_[param_offset_[i] + 1];
        const auto ckk = static_cast<Eigen::Index>(l.in_channels * l.kernel * l.kernel);
        const auto oc = static_cast<Eigen::Index>(l.out_channels);
        const auto p = static_cast<Eigen::Index>(l.out_h() * l.out_w());
        ConstMap<T> wm(w.data.data(), oc, ckk);
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(b.data.data(), oc);
        Matrix<T> y(x.rows(), oc * p);
        for (Eigen::Index n = 0; n < x.rows(); ++n) {
          im2col(x.row(n).data(), l, cols);
          Map<T> yn(y.row(n).data(), oc, p);
          yn.noalias() = wm * cols;
          yn.colwise() += bv;
        }
        x = std::move(y);
        break;
      }
      case LayerKind::kRelu:
        x = x.cwiseMax(T(0));
        break;
    }
  }
  return x;
}

template <typename T>
GradientTape<T> Network<T>::backward(const Cache& cache, const Matrix<T>& output_grad,
                                     Matrix<T>* input_grad) const {
  if (cache.inputs.size() != arch_.layers.size())
    throw std::logic_error("backward: missing forward cache");
  const auto batch = cache.inputs.front().rows();
  if (output_grad.rows() != batch || static_cast<std::size_t>(output_grad.cols()) != arch_.output_size())
    throw ShapeError("backward: output gradient shape mismatch");
  GradientTape<T> tape = zero_tape();
  Matrix<T> g = output_grad;
  Matrix<T> cols, dcols;
  for (std::size_t ii = arch_.layers.size(); ii-- > 0;) {
    const auto& l = arch_.layers[ii];
    const Matrix<T>& x = cache.inputs[ii];
    const bool need_dx = ii > 0 || input_grad != nullptr;
    switch (l.kind) {
      case LayerKind::kDense: {
        const auto& w = params_[param_offset_[ii]];
        auto& dw = tape[param_offset_[ii]];
        auto& db = tape[param_offset_[ii] + 1];
        ConstMap<T> wm(w.data.data(), static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
        Map<T> dwm(dw.data.data(), static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dbv(db.data.data(), static_cast<Eigen::Index>(l.out));
        if (l.out <= kNarrowHead) {
          dwm.setZero();
          dbv.setZero();
          for (Eigen::Index n = 0; n < g.rows(); ++n)
            for (Eigen::Index o = 0; o < g.cols(); ++o) {
              dwm.row(o) += g(n, o) * x.row(n);
              dbv(o) += g(n, o);
            }
          if (need_dx) {
            Matrix<T> dx = Matrix<T>::Zero(g.rows(), wm.cols());
            for (Eigen::Index n = 0; n < g.rows(); ++n)
              for (Eigen::Index o = 0; o < g.cols(); ++o) dx.row(n) += g(n, o) * wm.row(o);
            g = std::move(dx);
          }
        } else {
          dwm.noalias() = g.transpose() * x;
          dbv = g.colwise().sum();
          if (need_dx) {
            Matrix<T> dx = g * wm;
            g = std::move(dx);
          }
        }
        break;
      }
      case LayerKind::kConv2d: {
        const auto& w = params_[param_offset_[ii]];
        auto& dw = tape[param_offset_[ii]];
        auto& db = tape[param_offset_[ii] + 1];
        const auto ckk = static_cast<Eigen::Index>(l.in_channels * l.kernel * l.kernel);
        const auto oc = static_cast<Eigen::Index>(l.out_channels);
        const auto p = static_cast<Eigen::Index>(l.out_h() * l.out_w());
        ConstMap<T> wm(w.data.data(), oc, ckk);
        Map<T> dwm(dw.data.data(), oc, ckk);
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbv(db.data.data(), oc);
        Matrix<T> dx;
        if (need_dx) dx = Matrix<T>::Zero(x.rows(), x.cols());
        for (Eigen::Index n = 0; n < x.rows(); ++n) {
          im2col(x.row(n).data(), l, cols);
          ConstMap<T> gn(g.row(n).data(), oc, p);
          dwm.noalias() += gn * cols.transpose();
          dbv += gn.rowwise().sum();
          if (need_dx) {
            dcols.noalias() = wm.transpose() * gn;
            col2im_add(dcols, l, dx.row(n).data());
          }
        }
        if (need_dx) g = std::move(dx);
        break;
      }
      case LayerKind::kRelu:
        g = (x.array() > T(0)).select(g, T(0));
        break;
    }
  }
  if (input_grad) *input_grad = std::move(g);
  return tape;
}

template class Network<float>;
template class Network<double>;

// ---------------------------------------------------------------- adam

template <typename T>
Adam<T>::Adam(const std::vector<Tensor<T>>& params, AdamConfig config) : config_(config) {
  for (const auto& p : params) {
    m_.emplace_back(p.shape);
    v_.emplace_back(p.shape);
  }
}

template <typename T>
void Adam<T>::step(std::vector<Tensor<T>>& params, const GradientTape<T>& grads) {
  if (params.size() != grads.size() || params.size() != m_.size())
    throw ShapeError("adam: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape != params[i].shape) throw ShapeError("adam: gradient shape mismatch at " + std::to_string(i));
    for (std::size_t j = 0; j < grads[i].size(); ++j)
      if (!std::isfinite(grads[i].data[j]))
        throw NonFiniteGradient("adam: non-finite gradient in parameter " + std::to_string(i) + " element " +
                                std::to_string(j) + " at step " + std::to_string(t_ + 1));
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step_size = config_.lr / c1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    auto& m = m_[i].data;
    auto& v = v_[i].data;
    const auto& g = grads[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      p[j] = static_cast<T>(static_cast<double>(p[j]) - step_size * mj / (std::sqrt(vj / c2) + config_.eps));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

template <typename T>
double clip_grad_norm(GradientTape<T>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (auto v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto scale = static_cast<T>(max_norm / norm);
    for (auto& g : grads)
      for (auto& v : g.data) v *= scale;
  }
  return norm;
}

template double clip_grad_norm<float>(GradientTape<float>&, double);
template double clip_grad_norm<double>(GradientTape<double>&, double);

template <typename T>
void accumulate(GradientTape<T>& into, const GradientTape<T>& from, double scale) {
  if (into.size() != from.size()) throw ShapeError("accumulate: tape size mismatch");
  for (std::size_t i = 0; i < into.size(); ++i)
    for (std::size_t j = 0; j < into[i].size(); ++j) into[i].data[j] += static_cast<T>(scale * from[i].data[j]);
}

template void accumulate<float>(GradientTape<float>&, const GradientTape<float>&, double);
template void accumulate<double>(GradientTape<double>&, const GradientTape<double>&, double);

// ---------------------------------------------------------------- losses

LossGrad huber_loss(std::span<const double> pred, std::span<const double> target, double delta) {
  if (pred.size() != target.size()) throw ShapeError("huber_loss: size mismatch");
  LossGrad out;
  out.grad.resize(pred.size());
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    if (std::abs(e) <= delta) {
      out.loss += 0.5 * e * e;
      out.grad[i] = e / n;
    } else {
      out.loss += delta * (std::abs(e) - 0.5 * delta);
      out.grad[i] = delta * (e > 0 ? 1.0 : -1.0) / n;
    }
  }
  out.loss /= n;
  return out;
}

LossGrad mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("mse_loss: size mismatch");
  LossGrad out;
  out.grad.resize(pred.size());
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    out.loss += e * e;
    out.grad[i] = 2.0 * e / n;
  }
  out.loss /= n;
  return out;
}

PpoLoss ppo_loss(const PpoLossInput& in) {
  const std::size_t n = in.logp_new.size();
  if (in.logp_old.size() != n || in.advantages.size() != n || in.values.size() != n || in.returns.size() != n)
    throw ShapeError("ppo_loss: input lengths differ");
  PpoLoss out;
  out.d_logp_new.assign(n, 0.0);
  out.d_values.assign(n, 0.0);
  out.entropy = in.entropy;
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ratio = std::exp(in.logp_new[i] - in.logp_old[i]);
    const double adv = in.advantages[i];
    const double clipped_ratio = std::clamp(ratio, 1.0 - in.clip, 1.0 + in.clip);
    const double unclipped_obj = ratio * adv;
    const double clipped_obj = clipped_ratio * adv;
    double d_obj;
    if (unclipped_obj <= clipped_obj) {
      out.policy_term += unclipped_obj;
      d_obj = ratio * adv;
    } else {
      out.policy_term += clipped_obj;
      const bool inside = ratio >= 1.0 - in.clip && ratio <= 1.0 + in.clip;
      d_obj = inside ? ratio * adv : 0.0;
    }
    if (ratio < 1.0 - in.clip || ratio > 1.0 + in.clip) ++clipped;
    out.d_logp_new[i] = -d_obj * inv_n;
    const double e = in.values[i] - in.returns[i];
    out.value_term += 0.5 * e * e;
    out.d_values[i] = 0.5 * e * inv_n;
  }
  out.policy_term *= inv_n;
  out.value_term *= inv_n;
  out.clip_fraction = static_cast<double>(clipped) * inv_n;
  out.d_entropy = -in.entropy_coef;
  out.total = -out.policy_term + 0.5 * out.value_term - in.entropy_coef * in.entropy;
  return out;
}

// ---------------------------------------------------------------- distributions

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)
}

double gaussian_logprob(std::span<const double> mean, std::span<const double> log_std,
                        std::span<const double> action) {
  if (mean.size() != log_std.size() || mean.size() != action.size())
    throw ShapeError("gaussian_logprob: size mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
  }
  return lp;
}

void gaussian_logprob_grad(std::span<const double> mean, std::span<const double> log_std,
                           std::span<const double> action, std::span<double> d_mean,
                           std::span<double> d_log_std) {
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double inv_std = std::exp(-log_std[i]);
    const double z = (action[i] - mean[i]) * inv_std;
    d_mean[i] = z * inv_std;
    d_log_std[i] = z * z - 1.0;
  }
}

double gaussian_entropy(std::span<const double> log_std) {
  double h = 0.0;
  for (double s : log_std) h += s + 0.5 * (kLog2Pi + 1.0);
  return h;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("log_softmax: empty logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double categorical_logprob(std::span<const double> logits, std::size_t action) {
  if (action >= logits.size()) throw ShapeError("categorical_logprob: action out of range");
  return log_softmax(logits)[action];
}

std::size_t categorical_sample(std::span<const double> logits, RandomStream& rng) {
  const auto lp = log_softmax(logits);
  const double u = rng.next_unit();
  double acc = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    acc += std::exp(lp[i]);
    if (u < acc) return i;
  }
  return lp.size() - 1;
}

double categorical_entropy(std::span<const double> logits) {
  const auto lp = log_softmax(logits);
  double h = 0.0;
  for (double l : lp) h -= std::exp(l) * l;
  return h;
}

std::vector<double> categorical_logprob_grad(std::span<const double> logits, std::size_t action) {
  const auto lp = log_softmax(logits);
  std::vector<double> g(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) g[i] = (i == action ? 1.0 : 0.0) - std::exp(lp[i]);
  return g;
}

std::vector<double> categorical_entropy_grad(std::span<const double> logits) {
  const auto lp = log_softmax(logits);
  double h = 0.0;
  for (double l : lp) h -= std::exp(l) * l;
  std::vector<double> g(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) g[i] = -std::exp(lp[i]) * (lp[i] + h);
  return g;
}

CrossEntropy softmax_cross_entropy(const Matrix<double>& logits, std::span<const std::size_t> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw ShapeError("cross entropy: label count");
  CrossEntropy out;
  out.grad = Matrix<double>::Zero(logits.rows(), logits.cols());
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    std::span<const double> row(logits.row(r).data(), static_cast<std::size_t>(logits.cols()));
    const auto lp = log_softmax(row);
    const auto label = labels[static_cast<std::size_t>(r)];
    out.loss -= lp[label] * inv_n;
    const auto best = static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (best == label) ++out.correct;
    for (std::size_t c = 0; c < lp.size(); ++c)
      out.grad(r, static_cast<Eigen::Index>(c)) = (std::exp(lp[c]) - (c == label ? 1.0 : 0.0)) * inv_n;
  }
  return out;
}

// ---------------------------------------------------------------- checkpoints

namespace {

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated");
  return v;
}

}  // namespace

void save_network(std::ostream& out, const Network<float>& net) {
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  const auto& layers = net.architecture().layers;
  put_u32(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    for (std::size_t v : {static_cast<std::size_t>(l.kind), l.in, l.out, l.in_channels, l.out_channels,
                          l.kernel, l.stride, l.in_h, l.in_w})
      put_u32(out, static_cast<std::uint32_t>(v));
  }
  put_u32(out, static_cast<std::uint32_t>(net.params().size()));
  for (const auto& p : net.params()) {
    put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) put_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(p.data.data()), static_cast<std::streamsize>(p.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

Network<float> load_network(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kCheckpointMagic)) throw std::runtime_error("checkpoint: bad magic");
  if (get_u32(in) != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version");
  Architecture arch;
  const auto n_layers = get_u32(in);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    const auto kind = get_u32(in);
    if (kind > 2) throw std::runtime_error("checkpoint: unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.in = get_u32(in);
    l.out = get_u32(in);
    l.in_channels = get_u32(in);
    l.out_channels = get_u32(in);
    l.kernel = get_u32(in);
    l.stride = get_u32(in);
    l.in_h = get_u32(in);
    l.in_w = get_u32(in);
    arch.layers.push_back(l);
  }
  const auto n_params = get_u32(in);
  std::vector<Tensor<float>> params;
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const auto rank = get_u32(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = get_u32(in);
    Tensor<float> t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!in) throw std::runtime_error("checkpoint: truncated parameter data");
    params.push_back(std::move(t));
  }
  return Network<float>(std::move(arch), std::move(params));
}

}  // namespace rlprobe::nn
