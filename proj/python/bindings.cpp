#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rlprobe/harness.hpp"
#include "rlprobe/selftest.hpp"
#include "rlprobe/wrappers.hpp"

namespace py = pybind11;
using namespace rlprobe;

namespace {

py::array_t<double> to_array(const Observation& o) {
  py::array_t<double> a(static_cast<py::ssize_t>(o.data.size()));
  std::copy(o.data.begin(), o.data.end(), a.mutable_data());
  return a;
}

/// Owning handle over a (possibly wrapped) env built from the registry.
class PyEnv {
 public:
  PyEnv(const std::string& name, std::size_t k_bins, double p_rand, double sigma2, double init_mult,
        const std::string& data_dir) {
    EnvOptions opts;
    opts.data_dir = data_dir;
    WrapperSettings w;
    w.k_bins = k_bins;
    w.p_rand = p_rand;
    w.sigma2 = sigma2;
    w.init_mult = init_mult;
    env_ = wrap_env(env_factory(name, opts)(), w);
  }

  py::array_t<double> reset(std::uint64_t seed) { return to_array(env_->reset(Seed{seed})); }

  py::tuple step(const py::object& action) {
    Action a;
    if (env_->spec().action_spec.is_discrete())
      a = Action::discrete(action.cast<std::size_t>());
    else
      a = Action::continuous(action.cast<std::vector<double>>());
    const auto r = env_->step(a);
    return py::make_tuple(to_array(r.observation), r.reward, r.terminal, r.truncated);
  }

  std::string name() const { return env_->name(); }
  std::size_t obs_size() const { return env_->spec().obs_layout.size(); }
  bool discrete() const { return env_->spec().action_spec.is_discrete(); }
  std::size_t action_size() const {
    const auto& a = env_->spec().action_spec;
    return a.is_discrete() ? a.count : a.dim();
  }
  std::size_t max_steps() const { return env_->spec().max_steps; }
  double discount() const { return env_->spec().discount; }
  bool done() const { return env_->done(); }

 private:
  EnvPtr env_;
};

py::dict cell_dict(const CellSummary& c) {
  auto ms = [](const MeanStderr& m) { return py::make_tuple(m.mean, m.stderr); };
  py::dict d;
  d["cell"] = c.cell_id;
  d["runs"] = c.runs;
  d["train"] = ms(c.train);
  d["test"] = ms(c.test);
  d["gap"] = ms(c.gap);
  if (c.train_seen.n) d["train_seen"] = ms(c.train_seen);
  return d;
}

}  // namespace

PYBIND11_MODULE(_rlprobe, m) {
  m.doc() = "Seeded RL environments, agents and generalization-gap harness";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IncompatibleConfig>(m, "IncompatibleConfig", PyExc_ValueError);

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&, std::size_t, double, double, double, const std::string&>(), py::arg("name"),
           py::arg("k_bins") = 3, py::arg("p_rand") = 0.0, py::arg("sigma2") = 0.0, py::arg("init_mult") = 1.0,
           py::arg("data_dir") = "")
      .def("reset", &PyEnv::reset, py::arg("seed"))
      .def("step", &PyEnv::step, py::arg("action"), "Returns (obs, reward, terminal, truncated).")
      .def_property_readonly("name", &PyEnv::name)
      .def_property_readonly("obs_size", &PyEnv::obs_size)
      .def_property_readonly("discrete", &PyEnv::discrete)
      .def_property_readonly("action_size", &PyEnv::action_size)
      .def_property_readonly("max_steps", &PyEnv::max_steps)
      .def_property_readonly("discount", &PyEnv::discount)
      .def_property_readonly("done", &PyEnv::done);

  m.def("env_names", &env_names);

  m.def(
      "protocol",
      [](std::size_t n, std::size_t m_test) {
        const auto p = make_protocol(n, m_test);
        std::vector<std::uint64_t> tr, te;
        for (auto s : p.train_seeds()) tr.push_back(s.value);
        for (auto s : p.test_seeds()) te.push_back(s.value);
        return py::make_tuple(tr, te);
      },
      py::arg("n_train"), py::arg("m_test") = kDefaultTestSeeds);

  m.def(
      "generalization_gap",
      [](const std::vector<double>& train, const std::vector<double>& test) {
        return generalization_gap(train, test).gap;
      },
      py::arg("train_returns"), py::arg("test_returns"));

  m.def(
      "resolve_config",
      [](const std::map<std::string, std::string>& settings) { return to_toml(resolve_config({}, settings)); },
      py::arg("settings"), "Fully expanded TOML for a flat key -> value mapping.");

  m.def(
      "train",
      [](const std::map<std::string, std::string>& settings) {
        const auto cfg = resolve_config({}, settings);
        SweepOutput out;
        {
          py::gil_scoped_release release;
          out = run_cell(cfg);
        }
        py::list cells;
        for (const auto& c : summarize_cells(out.log)) cells.append(cell_dict(c));
        return cells;
      },
      py::arg("settings"), "Trains one cell and returns its summary rows.");

  m.def("selftest", [] {
    py::list rows;
    for (const auto& r : run_selftest()) rows.append(py::make_tuple(r.name, r.ok, r.detail));
    return rows;
  });
}
