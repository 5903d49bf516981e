#include "rlprobe/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace rlprobe {

// ---------------------------------------------------------------- TOML subset

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_bare_key(std::string_view k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, const std::string& source, std::size_t line)
      : text_(text), source_(source), line_(line) {}

  ConfigValue parse_all() {
    auto v = parse_value();
    skip_ws();
    if (pos_ != text_.size()) fail(source_, line_, "unexpected trailing characters '" + std::string(text_.substr(pos_)) + "'");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  ConfigValue parse_value() {
    skip_ws();
    if (pos_ >= text_.size()) fail(source_, line_, "missing value");
    ConfigValue v;
    v.line = line_;
    const char c = text_[pos_];
    if (c == '"') {
      v.kind = ConfigValue::Kind::kString;
      v.s = parse_string();
    } else if (c == '[') {
      v.kind = ConfigValue::Kind::kArray;
      ++pos_;
      while (true) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          break;
        }
        v.items.push_back(parse_value());
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
        } else if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          break;
        } else {
          fail(source_, line_, "expected ',' or ']' in array");
        }
      }
    } else {
      std::size_t end = pos_;
      while (end < text_.size() && text_[end] != ',' && text_[end] != ']' &&
             !std::isspace(static_cast<unsigned char>(text_[end])))
        ++end;
      const auto tok = text_.substr(pos_, end - pos_);
      pos_ = end;
      parse_scalar(tok, v);
    }
    return v;
  }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size()) {
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos_ >= text_.size()) break;
      switch (text_[pos_++]) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        default: fail(source_, line_, "unsupported escape in string");
      }
    }
    fail(source_, line_, "unterminated string");
  }

  void parse_scalar(std::string_view tok, ConfigValue& v) {
    if (tok == "true" || tok == "false") {
      v.kind = ConfigValue::Kind::kBool;
      v.b = tok == "true";
      return;
    }
    std::string clean;
    for (char c : tok)
      if (c != '_') clean.push_back(c);
    if (!clean.empty() && clean.front() == '+') clean.erase(0, 1);
    const char* b = clean.data();
    const char* e = clean.data() + clean.size();
    const bool looks_int = !clean.empty() && clean.find_first_of(".eEn") == std::string::npos;
    if (looks_int) {
      std::int64_t i = 0;
      const auto [ptr, ec] = std::from_chars(b, e, i);
      if (ec == std::errc() && ptr == e) {
        v.kind = ConfigValue::Kind::kInt;
        v.i = i;
        return;
      }
    }
    double f = 0.0;
    const auto [ptr, ec] = std::from_chars(b, e, f);
    if (clean.empty() || ec != std::errc() || ptr != e || !std::isfinite(f))
      fail(source_, line_, "cannot parse value '" + std::string(tok) + "'");
    v.kind = ConfigValue::Kind::kFloat;
    v.f = f;
  }

  std::string_view text_;
  const std::string& source_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace

ConfigTable parse_toml(std::string_view text, const std::string& source) {
  ConfigTable table;
  std::string section;
  std::vector<std::string> seen_sections;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = trim(strip_comment(text.substr(start, end - start)));
    start = end + 1;
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(source, line_no, "malformed section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (!is_bare_key(name)) fail(source, line_no, "bad section name '" + std::string(name) + "'");
      section = std::string(name);
      if (std::find(seen_sections.begin(), seen_sections.end(), section) != seen_sections.end())
        fail(source, line_no, "duplicate section [" + section + "]");
      seen_sections.push_back(section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(source, line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (!is_bare_key(key)) fail(source, line_no, "bad key '" + std::string(key) + "'");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (table.count(full)) fail(source, line_no, "duplicate key '" + full + "'");
    table[full] = ValueParser(line.substr(eq + 1), source, line_no).parse_all();
  }
  return table;
}

ConfigTable parse_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str(), path.string());
}

// ---------------------------------------------------------------- run config

AgentKind parse_agent(const std::string& name) {
  if (name == "dqn") return AgentKind::kDqn;
  if (name == "dqn-mb") return AgentKind::kDqnMb;
  if (name == "ppo") return AgentKind::kPpo;
  if (name == "ppo-mb") return AgentKind::kPpoMb;
  throw ConfigError("unknown agent '" + name + "' (expected dqn, dqn-mb, ppo, ppo-mb)");
}

std::string agent_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::kDqn: return "dqn";
    case AgentKind::kDqnMb: return "dqn-mb";
    case AgentKind::kPpo: return "ppo";
    case AgentKind::kPpoMb: return "ppo-mb";
  }
  return "?";
}

void SweepPlan::validate() const {
  if (train_seed_counts.empty() || p_rand.empty() || sigma2.empty() || init_mult.empty())
    throw ConfigError("sweep: every grid must be non-empty");
  for (auto n : train_seed_counts)
    if (n == 0) throw ConfigError("sweep.train_seeds: counts must be positive");
  for (double p : p_rand)
    if (p < 0.0 || p > 1.0) throw ConfigError("sweep.p_rand: values must lie in [0, 1]");
  for (double s : sigma2)
    if (s < 0.0) throw ConfigError("sweep.sigma2: values must be non-negative");
}

void RunConfig::check_compatible() const {
  if (is_dqn(agent) && !env_has_discrete_actions(env))
    throw IncompatibleConfig("env '" + env + "' has continuous actions; agent '" + agent_name(agent) +
                             "' needs discrete actions");
  if (wrappers.init_mult != 1.0 && is_image_env(env))
    throw IncompatibleConfig("initial-state multiplier is undefined for image env '" + env + "'");
}

namespace {

enum class FieldType { kString, kSize, kU64, kFloat, kBool, kSizeList, kFloatList };

struct Field {
  std::string key;
  FieldType type;
  std::function<void(RunConfig&, const ConfigValue&)> set;
  std::function<std::string(const RunConfig&)> emit;
};

std::string fmt(double v) {
  auto s = format_double(v);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

[[noreturn]] void type_error(const std::string& key, const ConfigValue& v, const char* want) {
  throw ConfigError((v.line ? "line " + std::to_string(v.line) + ": " : std::string()) + "key '" + key +
                    "' expects " + want);
}

std::size_t as_size(const std::string& key, const ConfigValue& v) {
  if (v.kind != ConfigValue::Kind::kInt || v.i < 0) type_error(key, v, "a non-negative integer");
  return static_cast<std::size_t>(v.i);
}

double as_double(const std::string& key, const ConfigValue& v) {
  if (v.kind == ConfigValue::Kind::kInt) return static_cast<double>(v.i);
  if (v.kind != ConfigValue::Kind::kFloat) type_error(key, v, "a number");
  return v.f;
}

const std::string& as_string(const std::string& key, const ConfigValue& v) {
  if (v.kind != ConfigValue::Kind::kString) type_error(key, v, "a string");
  return v.s;
}

template <typename T, typename F>
std::vector<T> as_list(const std::string& key, const ConfigValue& v, F elem) {
  if (v.kind != ConfigValue::Kind::kArray) type_error(key, v, "an array");
  std::vector<T> out;
  for (const auto& item : v.items) out.push_back(elem(key, item));
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + f(xs[i]);
  return s + "]";
}

#define RL_SIZE(KEY, MEMBER)                                                           \
  Field { KEY, FieldType::kSize, [](RunConfig& c, const ConfigValue& v) { c.MEMBER = as_size(KEY, v); }, \
          [](const RunConfig& c) { return std::to_string(c.MEMBER); } }
#define RL_FLOAT(KEY, MEMBER)                                                             \
  Field { KEY, FieldType::kFloat, [](RunConfig& c, const ConfigValue& v) { c.MEMBER = as_double(KEY, v); }, \
          [](const RunConfig& c) { return fmt(c.MEMBER); } }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"env", FieldType::kString, [](RunConfig& c, const ConfigValue& v) { c.env = as_string("env", v); },
       [](const RunConfig& c) { return quote(c.env); }},
      {"agent", FieldType::kString,
       [](RunConfig& c, const ConfigValue& v) { c.agent = parse_agent(as_string("agent", v)); },
       [](const RunConfig& c) { return quote(agent_name(c.agent)); }},
      RL_SIZE("train_seeds", train_seeds),
      RL_SIZE("test_seeds", test_seeds),
      RL_SIZE("episodes", episodes),
      RL_SIZE("steps", steps),
      RL_SIZE("eval_every", eval_every),
      {"seed", FieldType::kU64,
       [](RunConfig& c, const ConfigValue& v) { c.seed = static_cast<std::uint64_t>(as_size("seed", v)); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      RL_SIZE("runs", runs),
      RL_SIZE("jobs", jobs),
      {"out", FieldType::kString, [](RunConfig& c, const ConfigValue& v) { c.out = as_string("out", v); },
       [](const RunConfig& c) { return quote(c.out); }},
      {"gamma", FieldType::kFloat,
       [](RunConfig& c, const ConfigValue& v) { c.dqn.gamma = c.ppo.gamma = as_double("gamma", v); },
       [](const RunConfig& c) { return fmt(is_dqn(c.agent) ? c.dqn.gamma : c.ppo.gamma); }},
      {"lr", FieldType::kFloat,
       [](RunConfig& c, const ConfigValue& v) { c.dqn.lr = c.ppo.lr = as_double("lr", v); },
       [](const RunConfig& c) { return fmt(is_dqn(c.agent) ? c.dqn.lr : c.ppo.lr); }},
      {"hidden", FieldType::kSize,
       [](RunConfig& c, const ConfigValue& v) { c.hidden = c.dqn.hidden = c.ppo.hidden = as_size("hidden", v); },
       [](const RunConfig& c) { return std::to_string(c.hidden); }},

      RL_SIZE("wrappers.k_bins", wrappers.k_bins),
      RL_FLOAT("wrappers.p_rand", wrappers.p_rand),
      RL_FLOAT("wrappers.sigma2", wrappers.sigma2),
      RL_FLOAT("wrappers.init_mult", wrappers.init_mult),

      {"data.dir", FieldType::kString,
       [](RunConfig& c, const ConfigValue& v) { c.data.data_dir = as_string("data.dir", v); },
       [](const RunConfig& c) { return quote(c.data.data_dir.string()); }},
      RL_SIZE("data.window", data.window),
      RL_SIZE("data.max_steps", data.max_steps),
      RL_FLOAT("data.label_noise", data.label_noise),
      {"data.label_noise_seed", FieldType::kU64,
       [](RunConfig& c, const ConfigValue& v) {
         c.data.label_noise_seed = static_cast<std::uint64_t>(as_size("data.label_noise_seed", v));
       },
       [](const RunConfig& c) { return std::to_string(c.data.label_noise_seed); }},

      RL_SIZE("dqn.batch_size", dqn.batch_size),
      RL_SIZE("dqn.replay_capacity", dqn.replay_capacity),
      RL_SIZE("dqn.target_update_interval", dqn.target_update_interval),
      RL_SIZE("dqn.learning_starts", dqn.learning_starts),
      RL_SIZE("dqn.train_freq", dqn.train_freq),
      RL_FLOAT("dqn.eps_start", dqn.eps_start),
      RL_FLOAT("dqn.eps_end", dqn.eps_end),
      RL_FLOAT("dqn.eps_fraction", dqn.eps_fraction),
      RL_SIZE("dqn.hidden_layers", dqn.hidden_layers),
      RL_FLOAT("dqn.huber_delta", dqn.huber_delta),
      RL_FLOAT("dqn.max_grad_norm", dqn.max_grad_norm),
      RL_FLOAT("dqn.lambda_s", dqn.lambda_s),
      RL_FLOAT("dqn.lambda_r", dqn.lambda_r),

      RL_SIZE("ppo.rollout_length", ppo.rollout_length),
      RL_SIZE("ppo.epochs", ppo.epochs),
      RL_SIZE("ppo.minibatch", ppo.minibatch),
      RL_FLOAT("ppo.gae_lambda", ppo.gae_lambda),
      RL_FLOAT("ppo.clip", ppo.clip),
      RL_FLOAT("ppo.entropy_coef", ppo.entropy_coef),
      RL_FLOAT("ppo.max_grad_norm", ppo.max_grad_norm),
      RL_FLOAT("ppo.init_log_std", ppo.init_log_std),
      RL_SIZE("ppo.hidden_layers", ppo.hidden_layers),
      RL_FLOAT("ppo.lambda_s", ppo.lambda_s),
      RL_FLOAT("ppo.lambda_r", ppo.lambda_r),

      {"sweep.train_seeds", FieldType::kSizeList,
       [](RunConfig& c, const ConfigValue& v) { c.sweep.train_seed_counts = as_list<std::size_t>("sweep.train_seeds", v, as_size); },
       [](const RunConfig& c) { return join(c.sweep.train_seed_counts, [](std::size_t n) { return std::to_string(n); }); }},
      {"sweep.p_rand", FieldType::kFloatList,
       [](RunConfig& c, const ConfigValue& v) { c.sweep.p_rand = as_list<double>("sweep.p_rand", v, as_double); },
       [](const RunConfig& c) { return join(c.sweep.p_rand, fmt); }},
      {"sweep.sigma2", FieldType::kFloatList,
       [](RunConfig& c, const ConfigValue& v) { c.sweep.sigma2 = as_list<double>("sweep.sigma2", v, as_double); },
       [](const RunConfig& c) { return join(c.sweep.sigma2, fmt); }},
      {"sweep.init_mult", FieldType::kFloatList,
       [](RunConfig& c, const ConfigValue& v) { c.sweep.init_mult = as_list<double>("sweep.init_mult", v, as_double); },
       [](const RunConfig& c) { return join(c.sweep.init_mult, fmt); }},
  };
  return f;
}

#undef RL_SIZE
#undef RL_FLOAT

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

ConfigValue flag_value(const Field& field, const std::string& raw) {
  if (field.type == FieldType::kString) {
    ConfigValue v;
    v.kind = ConfigValue::Kind::kString;
    v.s = raw;
    return v;
  }
  std::string text = raw;
  if ((field.type == FieldType::kSizeList || field.type == FieldType::kFloatList) && !text.starts_with("["))
    text = "[" + text + "]";
  const auto t = parse_toml("v = " + text, "--" + field.key);
  auto v = t.at("v");
  v.line = 0;
  return v;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

RunConfig resolve_config(const ConfigTable& file, const std::map<std::string, std::string>& flags) {
  ConfigTable merged = file;
  for (const auto& [key, v] : file)
    if (!find_field(key))
      throw ConfigError("line " + std::to_string(v.line) + ": unknown key '" + key + "'");
  for (const auto& [key, raw] : flags) {
    const auto* f = find_field(key);
    if (!f) throw ConfigError("unknown key '" + key + "'");
    merged[key] = flag_value(*f, raw);
  }

  RunConfig c;
  if (!merged.count("env")) throw ConfigError("missing required key 'env'");
  if (!merged.count("agent")) throw ConfigError("missing required key 'agent'");
  find_field("env")->set(c, merged.at("env"));
  find_field("agent")->set(c, merged.at("agent"));
  if (!is_known_env(c.env)) throw ConfigError("unknown env '" + c.env + "'");

  // env- and agent-dependent defaults
  const bool pixel = is_pixel_env(c.env);
  c.dqn.gamma = default_gamma(c.env);
  c.dqn.lr = pixel ? 3e-4 : 3e-3;
  c.dqn.replay_capacity = pixel ? 100'000 : 1'000'000;
  c.dqn.model_based = c.agent == AgentKind::kDqnMb;
  c.ppo.model_based = c.agent == AgentKind::kPpoMb;
  c.eval_every = is_dqn(c.agent) ? 50 : 1;
  c.dqn.hidden = c.ppo.hidden = c.hidden;

  for (const auto& f : fields()) {
    if (f.key == "env" || f.key == "agent") continue;
    if (auto it = merged.find(f.key); it != merged.end()) f.set(c, it->second);
  }

  if (c.train_seeds == 0 || c.train_seeds >= kTestSeedOffset) throw ConfigError("train_seeds must lie in [1, 1e6)");
  if (c.test_seeds == 0) throw ConfigError("test_seeds must be positive");
  if (c.runs == 0 || c.jobs == 0) throw ConfigError("runs and jobs must be positive");
  if (c.wrappers.k_bins == 0) throw ConfigError("wrappers.k_bins must be positive");
  if (c.wrappers.p_rand < 0.0 || c.wrappers.p_rand > 1.0) throw ConfigError("wrappers.p_rand must lie in [0, 1]");
  if (c.wrappers.sigma2 < 0.0) throw ConfigError("wrappers.sigma2 must be non-negative");
  if (c.data.label_noise < 0.0 || c.data.label_noise > 1.0) throw ConfigError("data.label_noise must lie in [0, 1]");
  try {
    if (is_dqn(c.agent))
      c.dqn.validate();
    else
      c.ppo.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.sweep.validate();
  return c;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::map<std::string, std::string>& flags) {
  return resolve_config(path ? parse_toml_file(*path) : ConfigTable{}, flags);
}

std::string to_toml(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : f.key.substr(0, dot);
    const std::string key = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    out << key << " = " << f.emit(config) << '\n';
  }
  return out.str();
}

}  // namespace rlprobe
