#include "rlprobe/agents.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

namespace rlprobe {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::vector<float> to_float(const Observation& obs) {
  std::vector<float> out(obs.data.size());
  std::transform(obs.data.begin(), obs.data.end(), out.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("ReplayBuffer::at");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, RandomStream& rng) const {
  if (items_.empty()) throw ContractViolation("ReplayBuffer::sample on an empty buffer");
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &items_[static_cast<std::size_t>(rng.below(items_.size()))];
  return out;
}

// ---------------------------------------------------------------- policy

Policy::Policy(PolicyKind kind, nn::Network<float> net, ActionSpec action_spec, ObsLayout obs_layout,
               std::vector<double> log_std)
    : kind_(kind),
      net_(std::move(net)),
      action_spec_(std::move(action_spec)),
      obs_layout_(obs_layout),
      log_std_(std::move(log_std)) {
  if (net_.architecture().input_size() != obs_layout_.size())
    throw std::invalid_argument("Policy: network input does not match the observation size");
  if (net_.architecture().output_size() < action_outputs())
    throw std::invalid_argument("Policy: network has too few outputs");
  if (kind_ == PolicyKind::kGaussian && log_std_.size() != action_spec_.dim())
    throw std::invalid_argument("Policy: log_std size does not match the action dimension");
  if ((kind_ == PolicyKind::kGaussian) == action_spec_.is_discrete())
    throw std::invalid_argument("Policy: action rule does not match the action spec");
}

std::size_t Policy::action_outputs() const noexcept {
  return action_spec_.is_discrete() ? action_spec_.count : action_spec_.dim();
}

std::vector<Action> Policy::act_batch(const nn::Matrix<float>& obs) const {
  const auto out = net_.forward(obs);
  std::vector<Action> actions;
  actions.reserve(static_cast<std::size_t>(out.rows()));
  const auto k = static_cast<Eigen::Index>(action_outputs());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    if (kind_ == PolicyKind::kGaussian) {
      std::vector<double> v(static_cast<std::size_t>(k));
      for (Eigen::Index j = 0; j < k; ++j)
        v[j] = std::clamp(static_cast<double>(out(r, j)), action_spec_.low[j], action_spec_.high[j]);
      actions.push_back(Action::continuous(std::move(v)));
    } else {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < k; ++j)
        if (out(r, j) > out(r, best)) best = j;
      actions.push_back(Action::discrete(static_cast<std::size_t>(best)));
    }
  }
  return actions;
}

Action Policy::act(const Observation& obs) const {
  if (obs.data.size() != obs_layout_.size()) throw ContractViolation("Policy::act: observation size mismatch");
  nn::Matrix<float> x(1, static_cast<Eigen::Index>(obs.data.size()));
  for (std::size_t i = 0; i < obs.data.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = static_cast<float>(obs.data[i]);
  return act_batch(x).front();
}

void Policy::check_compatible(const EnvSpec& spec) const {
  if (!(spec.obs_layout == obs_layout_)) throw Unsupported("policy observation layout does not match the env");
  if (spec.action_spec.is_discrete() != action_spec_.is_discrete())
    throw Unsupported("policy action kind does not match the env");
  if (spec.action_spec.is_discrete() ? spec.action_spec.count != action_spec_.count
                                     : spec.action_spec.dim() != action_spec_.dim())
    throw Unsupported("policy action size does not match the env");
}

namespace {

constexpr char kPolicyMagic[4] = {'R', 'L', 'P', 'P'};
constexpr std::uint32_t kPolicyVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("policy checkpoint truncated");
  return v;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
  for (double d : v) put(out, d);
}

std::vector<double> get_doubles(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > 1'000'000) throw std::runtime_error("policy checkpoint: implausible vector length");
  std::vector<double> v(n);
  for (auto& d : v) d = get<double>(in);
  return v;
}

}  // namespace

void save_policy(const Policy& policy, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(kPolicyMagic, 4);
  put(out, kPolicyVersion);
  put(out, static_cast<std::uint32_t>(policy.kind()));
  const auto& a = policy.action_spec();
  put<std::uint32_t>(out, a.is_discrete() ? 0 : 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.count));
  put_doubles(out, a.low);
  put_doubles(out, a.high);
  const auto& o = policy.obs_layout();
  put<std::uint32_t>(out, o.is_image() ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(o.channels));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(o.height));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(o.width));
  put_doubles(out, policy.log_std());
  nn::save_network(out, policy.network());
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Policy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  try {
    char magic[4];
    in.read(magic, 4);
    if (!in || !std::equal(magic, magic + 4, kPolicyMagic)) throw std::runtime_error("not a policy checkpoint");
    if (get<std::uint32_t>(in) != kPolicyVersion) throw std::runtime_error("unsupported policy checkpoint version");
    const auto kind = get<std::uint32_t>(in);
    if (kind > 2) throw std::runtime_error("unknown policy kind");
    const bool continuous = get<std::uint32_t>(in) == 1;
    const auto count = get<std::uint32_t>(in);
    auto low = get_doubles(in);
    auto high = get_doubles(in);
    ActionSpec a = continuous ? ActionSpec::continuous(std::move(low), std::move(high)) : ActionSpec::discrete(count);
    const bool image = get<std::uint32_t>(in) == 1;
    const auto c = get<std::uint32_t>(in);
    const auto h = get<std::uint32_t>(in);
    const auto w = get<std::uint32_t>(in);
    const ObsLayout layout = image ? ObsLayout::image(c, h, w) : ObsLayout::flat(w);
    auto log_std = get_doubles(in);
    auto net = nn::load_network(in);
    return Policy(static_cast<PolicyKind>(kind), std::move(net), std::move(a), layout, std::move(log_std));
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- evaluation

std::vector<double> evaluate(const Policy& policy, const EnvFactory& factory, std::span<const Seed> seeds,
                             const EvalRequest& request) {
  auto env = wrap_env(factory(), request.wrappers);
  policy.check_compatible(env->spec());
  std::vector<double> returns;
  returns.reserve(seeds.size());
  for (const Seed seed : seeds) {
    auto obs = env->reset(seed);
    double total = 0.0;
    std::uint64_t t = 0;
    while (true) {
      auto result = env->step(policy.act(obs));
      total += result.reward;
      if (request.trajectories)
        request.trajectories->append({request.run_id, request.role, seed.value, t, result.reward});
      ++t;
      if (result.done()) break;
      obs = std::move(result.observation);
    }
    returns.push_back(total);
  }
  return returns;
}

std::vector<double> evaluate_random(const EnvFactory& factory, std::span<const Seed> seeds, Seed master,
                                    const WrapperSettings& wrappers) {
  auto env = wrap_env(factory(), wrappers);
  const auto& spec = env->spec().action_spec;
  RandomStream rng(master, StreamPurpose::kActionSample);
  std::vector<double> returns;
  for (const Seed seed : seeds) {
    env->reset(seed);
    double total = 0.0;
    while (true) {
      Action a;
      if (spec.is_discrete()) {
        a = Action::discrete(static_cast<std::size_t>(rng.below(spec.count)));
      } else {
        std::vector<double> v(spec.dim());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(spec.low[i], spec.high[i]);
        a = Action::continuous(std::move(v));
      }
      const auto r = env->step(a);
      total += r.reward;
      if (r.done()) break;
    }
    returns.push_back(total);
  }
  return returns;
}

void log_policy_evaluation(const Policy& policy, const EnvFactory& factory, const SeedProtocol& protocol,
                    const TrainContext& ctx, const std::string& snapshot, std::uint64_t steps,
                    std::uint64_t episodes, bool final, MetricsLog& log) {
  auto emit = [&](const char* role, const std::vector<Seed>& seeds, const WrapperSettings& w) {
    EvalRequest req{w, final ? ctx.trajectories : nullptr, ctx.run_id, role};
    const auto returns = evaluate(policy, factory, seeds, req);
    for (std::size_t i = 0; i < seeds.size(); ++i)
      log.append({ctx.run_id, steps, episodes, seeds[i].value, role, returns[i], snapshot});
  };
  emit(role::kTrain, protocol.train_seeds(), {});
  emit(role::kTest, protocol.test_seeds(), {});
  if (ctx.train_wrappers.p_rand > 0.0) {
    WrapperSettings seen;
    seen.k_bins = ctx.train_wrappers.k_bins;
    seen.p_rand = ctx.train_wrappers.p_rand;
    seen.reward_as_seen = true;
    emit(role::kTrainSeen, protocol.train_seeds(), seen);
  }
}

nn::Architecture q_architecture(const EnvSpec& spec, std::size_t outputs, std::size_t hidden,
                                std::size_t hidden_layers) {
  const auto& l = spec.obs_layout;
  if (l.is_image()) return nn::conv_head(l.channels, l.height, l.width, outputs, hidden);
  return nn::mlp(l.size(), hidden, outputs, hidden_layers);
}

}  // namespace rlprobe
