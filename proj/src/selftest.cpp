#include "rlprobe/selftest.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <map>
#include <sstream>

#include "rlprobe/agents.hpp"
#include "rlprobe/arm.hpp"
#include "rlprobe/classic.hpp"
#include "rlprobe/harness.hpp"
#include "rlprobe/nn.hpp"
#include "rlprobe/wrappers.hpp"

namespace rlprobe {

namespace {

constexpr double kH = 1e-6;

double rel_err(const std::vector<double>& a, const std::vector<double>& n) {
  double d = 0.0, na = 0.0, nn_ = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn_ += n[i] * n[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nn_);
  return denom < 1e-300 ? 0.0 : std::sqrt(d) / denom;
}

/// Central differences of a scalar function over the entries of `x`.
std::vector<double> numeric_grad(std::span<double> x, const std::function<double()>& f) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + kH;
    const double up = f();
    x[i] = keep - kH;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * kH);
  }
  return g;
}

std::vector<double> random_vec(RandomStream& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.gaussian(0.0, scale * scale);
  return v;
}

double network_instance(const nn::Architecture& arch, RandomStream& rng, std::size_t batch) {
  nn::Network<double> net(arch, rng);
  for (auto& p : net.params())
    for (auto& v : p.data) v = rng.gaussian(0.0, 0.25);
  const auto in = static_cast<Eigen::Index>(arch.input_size());
  const auto out = static_cast<Eigen::Index>(arch.output_size());
  const auto b = static_cast<Eigen::Index>(batch);
  nn::Matrix<double> x(b, in), g(b, out);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian(0.0, 1.0);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.gaussian(0.0, 1.0);

  nn::Network<double>::Cache cache;
  net.forward(x, &cache);
  nn::Matrix<double> dx;
  const auto tape = net.backward(cache, g, &dx);

  auto objective = [&] { return (net.forward(x).array() * g.array()).sum(); };
  std::vector<double> analytic, numeric;
  for (std::size_t p = 0; p < net.params().size(); ++p) {
    auto& data = net.params()[p].data;
    const auto num = numeric_grad(data, objective);
    analytic.insert(analytic.end(), tape[p].data.begin(), tape[p].data.end());
    numeric.insert(numeric.end(), num.begin(), num.end());
  }
  std::vector<double> xs(x.data(), x.data() + x.size());
  const auto num_x = numeric_grad(xs, [&] {
    nn::Matrix<double> xm = Eigen::Map<nn::Matrix<double>>(xs.data(), b, in);
    return (net.forward(xm).array() * g.array()).sum();
  });
  analytic.insert(analytic.end(), dx.data(), dx.data() + dx.size());
  numeric.insert(numeric.end(), num_x.begin(), num_x.end());
  return rel_err(analytic, numeric);
}

CheckResult run_check(const std::string& name, std::size_t instances, double tol, RandomStream& rng,
                      const std::function<double(RandomStream&)>& instance) {
  CheckResult r{name, true, 0.0, ""};
  for (std::size_t i = 0; i < instances; ++i) {
    const double e = instance(rng);
    r.worst = std::max(r.worst, std::isfinite(e) ? e : INFINITY);
  }
  r.ok = r.worst < tol;
  std::ostringstream s;
  s << instances << " instances, worst relative error " << r.worst;
  r.detail = s.str();
  return r;
}

}  // namespace

std::vector<CheckResult> gradient_checks(std::size_t instances, std::uint64_t seed, double tolerance) {
  RandomStream rng(Seed{seed}, 0x6763u);
  std::vector<CheckResult> out;
  auto net_check = [&](const std::string& name, nn::Architecture arch, std::size_t batch) {
    out.push_back(run_check(name, instances, tolerance, rng,
                            [&](RandomStream& r) { return network_instance(arch, r, batch); }));
  };
  net_check("dense", {{nn::LayerSpec::dense(5, 4)}}, 3);
  net_check("conv2d", {{nn::LayerSpec::conv(2, 7, 7, 3, 3, 2)}}, 2);
  net_check("relu", {{nn::LayerSpec::dense(4, 6), nn::LayerSpec::relu(6), nn::LayerSpec::dense(6, 3)}}, 3);
  net_check("mlp", nn::mlp(5, 8, 3), 3);
  net_check("small_conv", nn::small_conv(1, 9, 9, 3, 6), 2);

  out.push_back(run_check("huber_loss", instances, tolerance, rng, [](RandomStream& r) {
    auto pred = random_vec(r, 7, 2.0);
    const auto target = random_vec(r, 7, 2.0);
    const auto lg = nn::huber_loss(pred, target, 1.0);
    return rel_err(lg.grad, numeric_grad(pred, [&] { return nn::huber_loss(pred, target, 1.0).loss; }));
  }));
  out.push_back(run_check("mse_loss", instances, tolerance, rng, [](RandomStream& r) {
    auto pred = random_vec(r, 7);
    const auto target = random_vec(r, 7);
    const auto lg = nn::mse_loss(pred, target);
    return rel_err(lg.grad, numeric_grad(pred, [&] { return nn::mse_loss(pred, target).loss; }));
  }));
  out.push_back(run_check("ppo_loss", instances, tolerance, rng, [](RandomStream& r) {
    auto logp_new = random_vec(r, 6, 0.3);
    const auto logp_old = random_vec(r, 6, 0.3);
    const auto adv = random_vec(r, 6);
    auto values = random_vec(r, 6);
    const auto returns = random_vec(r, 6);
    auto total = [&] { return nn::ppo_loss({logp_new, logp_old, adv, values, returns, 0.5, 0.2, 0.01}).total; };
    const auto l = nn::ppo_loss({logp_new, logp_old, adv, values, returns, 0.5, 0.2, 0.01});
    auto a = l.d_logp_new;
    a.insert(a.end(), l.d_values.begin(), l.d_values.end());
    auto n = numeric_grad(logp_new, total);
    const auto nv = numeric_grad(values, total);
    n.insert(n.end(), nv.begin(), nv.end());
    return rel_err(a, n);
  }));
  out.push_back(run_check("gaussian_logprob", instances, tolerance, rng, [](RandomStream& r) {
    auto mean = random_vec(r, 3);
    auto log_std = random_vec(r, 3, 0.5);
    const auto action = random_vec(r, 3);
    std::vector<double> dm(3), ds(3);
    nn::gaussian_logprob_grad(mean, log_std, action, dm, ds);
    auto f = [&] { return nn::gaussian_logprob(mean, log_std, action); };
    auto n = numeric_grad(mean, f);
    const auto ns = numeric_grad(log_std, f);
    n.insert(n.end(), ns.begin(), ns.end());
    for (double d : ds) dm.push_back(d);
    return rel_err(dm, n);
  }));
  out.push_back(run_check("categorical_logprob", instances, tolerance, rng, [](RandomStream& r) {
    auto logits = random_vec(r, 5);
    const auto a = static_cast<std::size_t>(r.below(5));
    return rel_err(nn::categorical_logprob_grad(logits, a),
                   numeric_grad(logits, [&] { return nn::categorical_logprob(logits, a); }));
  }));
  out.push_back(run_check("categorical_entropy", instances, tolerance, rng, [](RandomStream& r) {
    auto logits = random_vec(r, 5);
    return rel_err(nn::categorical_entropy_grad(logits),
                   numeric_grad(logits, [&] { return nn::categorical_entropy(logits); }));
  }));
  out.push_back(run_check("softmax_cross_entropy", instances, tolerance, rng, [](RandomStream& r) {
    auto flat = random_vec(r, 4 * 5);
    std::vector<std::size_t> labels(4);
    for (auto& l : labels) l = static_cast<std::size_t>(r.below(5));
    auto loss = [&] {
      const nn::Matrix<double> m = Eigen::Map<nn::Matrix<double>>(flat.data(), 4, 5);
      return nn::softmax_cross_entropy(m, labels).loss;
    };
    const nn::Matrix<double> m = Eigen::Map<nn::Matrix<double>>(flat.data(), 4, 5);
    const auto ce = nn::softmax_cross_entropy(m, labels);
    const std::vector<double> a(ce.grad.data(), ce.grad.data() + ce.grad.size());
    return rel_err(a, numeric_grad(flat, loss));
  }));
  return out;
}

CheckResult wrapper_transparency_check(std::size_t sequences) {
  const std::vector<std::function<EnvPtr()>> makers = {
      [] { return EnvPtr(std::make_unique<CartpoleEnv>()); },
      [] { return EnvPtr(std::make_unique<AcrobotEnv>()); },
      [] { return EnvPtr(std::make_unique<ReacherEnv>()); },
      [] { return EnvPtr(std::make_unique<ThrowerEnv>(false)); },
  };
  CheckResult r{"wrapper_transparency", true, 0.0, ""};
  std::size_t steps = 0;
  for (std::size_t i = 0; i < sequences && r.ok; ++i) {
    auto bare = makers[i % makers.size()]();
    EnvPtr wrapped = makers[i % makers.size()]();
    wrapped = std::make_unique<RandomizedRewardEnv>(std::move(wrapped), RandomizedRewardConfig{3, 0.0, {}});
    wrapped = std::make_unique<ObservationNoiseEnv>(std::move(wrapped), NoiseConfig{0.0});
    wrapped = std::make_unique<InitialStateMultiplierEnv>(std::move(wrapped), MultiplierConfig{1.0});
    const Seed seed{i};
    if (!(bare->reset(seed) == wrapped->reset(seed))) {
      r.ok = false;
      r.detail = "reset differs for sequence " + std::to_string(i);
      break;
    }
    RandomStream actions(seed, 0x7472u);
    const auto& spec = bare->spec().action_spec;
    while (true) {
      Action a;
      if (spec.is_discrete()) {
        a = Action::discrete(static_cast<std::size_t>(actions.below(spec.count)));
      } else {
        std::vector<double> v(spec.dim());
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = actions.uniform(spec.low[j], spec.high[j]);
        a = Action::continuous(std::move(v));
      }
      const auto x = bare->step(a);
      const auto y = wrapped->step(a);
      ++steps;
      if (!(x.observation == y.observation) || x.reward != y.reward || x.terminal != y.terminal ||
          x.truncated != y.truncated) {
        r.ok = false;
        r.detail = bare->name() + ": step differs in sequence " + std::to_string(i);
        break;
      }
      if (x.done()) break;
    }
  }
  if (r.ok) r.detail = std::to_string(sequences) + " sequences, " + std::to_string(steps) + " steps bitwise equal";
  return r;
}

CheckResult gap_oracle_check() {
  CheckResult r{"gap_oracle", false, 0.0, ""};
  const EnvFactory factory = [] { return EnvPtr(std::make_unique<CartpoleEnv>()); };
  DQNConfig cfg;
  cfg.hidden = 16;
  cfg.batch_size = 8;
  cfg.learning_starts = 50;
  cfg.replay_capacity = 1000;
  TrajectoryLog traj;
  TrainContext ctx;
  ctx.run_id = "selftest-r0";
  ctx.trajectories = &traj;
  const auto result = dqn_train(factory, make_protocol(3, 7), cfg, 4, ctx);
  const auto runs = summarize_runs(result.log);
  if (runs.size() != 1) {
    r.detail = "expected one run in the log";
    return r;
  }
  std::map<std::string, std::map<std::uint64_t, double>> sums;
  for (const auto& s : traj.steps()) sums[s.role][s.seed] += s.reward;
  auto mean = [](const std::map<std::uint64_t, double>& m) {
    double t = 0.0;
    for (const auto& [k, v] : m) t += v;
    return t / static_cast<double>(m.size());
  };
  if (sums["train"].size() != 3 || sums["test"].size() != 7) {
    r.detail = "trajectory log does not cover every seed";
    return r;
  }
  const double brute = mean(sums["train"]) - mean(sums["test"]);
  r.worst = std::abs(brute - runs.front().gap.gap);
  r.ok = r.worst < 1e-9;
  r.detail = "|gap - brute force| = " + format_double(r.worst);
  return r;
}

CheckResult gae_oracle_check() {
  const std::vector<double> rewards = {1.0, 1.0}, values = {0.5, 0.5}, next_values = {0.5, 0.0};
  const std::vector<std::uint8_t> terminal = {0, 1}, ends = {0, 1};
  const double gamma = 0.99, lambda = 0.95;
  const auto adv = gae_advantages(rewards, values, next_values, terminal, ends, gamma, lambda);
  // A_t = sum_l (gamma lambda)^l delta_{t+l}
  const std::vector<double> v_ext = {0.5, 0.5, 0.0};
  CheckResult r{"gae_oracle", true, 0.0, ""};
  for (std::size_t t = 0; t < 2; ++t) {
    double a = 0.0, w = 1.0;
    for (std::size_t l = t; l < 2; ++l) {
      a += w * (rewards[l] + gamma * v_ext[l + 1] - v_ext[l]);
      w *= gamma * lambda;
    }
    r.worst = std::max(r.worst, std::abs(a - adv[t]));
  }
  r.ok = r.worst < 1e-10;
  r.detail = "max |gae - direct sum| = " + format_double(r.worst);
  return r;
}

std::vector<CheckResult> run_selftest() {
  auto out = gradient_checks();
  out.push_back(wrapper_transparency_check());
  out.push_back(gap_oracle_check());
  out.push_back(gae_oracle_check());
  return out;
}

}  // namespace rlprobe
