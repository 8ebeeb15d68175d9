#include "scbf/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace scbf {

RunConfig::RunConfig() {
  gp.kernels.assign(robot.dof(), KernelParams{});
  gp.rkhs_bound = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(robot.dof()));
  dataset.excitation.duration = 20.0;
  dataset.excitation.joints = {{0.9, 0.3, 0.0, 0.0}, {0.55, 0.55, 0.0, 0.45}};
}

TrajectorySpec RunConfig::reference() const {
  if (simulation.singularity_seeking) {
    return singularity_seeking_reference(robot, geom, simulation.reference_frequency,
                                         simulation.duration);
  }
  TrajectorySpec r = simulation.reference;
  r.duration = simulation.duration;
  return r;
}

EpisodeConfig RunConfig::episode(const GPModel* model) const {
  EpisodeConfig e;
  e.robot = robot;
  e.geom = geom;
  e.barrier = barrier;
  e.pid = pid;
  e.reference = reference();
  e.dt = simulation.dt;
  e.mode = simulation.mode;
  e.gp = model;
  e.seed = seed;
  return e;
}

namespace {

std::string join(const std::vector<std::string>& lines) {
  std::string s = "configuration has " + std::to_string(lines.size()) + " problem(s):";
  for (const auto& l : lines) s += "\n  " + l;
  return s;
}

class Reader {
 public:
  explicit Reader(std::string file) : file_(std::move(file)) {}

  void error(const YAML::Node& at, const std::string& msg) {
    std::ostringstream os;
    os << file_;
    if (at.IsDefined() && at.Mark().line >= 0) os << ':' << at.Mark().line + 1;
    os << ": " << msg;
    errors_.push_back(os.str());
  }

  void error(const std::string& msg) { errors_.push_back(file_ + ": " + msg); }

  // Reports keys of `map` outside `allowed`. Returns false if `map` is not a map.
  bool keys(const YAML::Node& map, const std::string& where,
            const std::set<std::string>& allowed) {
    if (!map.IsMap()) {
      error(map, where + " must be a mapping");
      return false;
    }
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        error(kv.first, "unknown key '" + where + "." + key + "' (allowed: " + list + ")");
      }
    }
    return true;
  }

  template <class T>
  bool get(const YAML::Node& map, const std::string& key, const std::string& where, T& out) {
    const YAML::Node n = map[key];
    if (!n.IsDefined() || n.IsNull()) return false;
    try {
      out = n.as<T>();
      return true;
    } catch (const YAML::Exception&) {
      error(n, where + "." + key + ": cannot read '" + scalar(n) + "' as " + type_name<T>());
      return false;
    }
  }

  void number(const YAML::Node& map, const std::string& key, const std::string& where,
              double& out, const std::function<bool(double)>& ok, const char* rule) {
    double v = out;
    if (!get(map, key, where, v)) return;
    if (!std::isfinite(v) || !ok(v)) {
      error(map[key], where + "." + key + " = " + scalar(map[key]) + " must be " + rule);
      return;
    }
    out = v;
  }

  void positive(const YAML::Node& map, const std::string& key, const std::string& where,
                double& out) {
    number(map, key, where, out, [](double v) { return v > 0.0; }, "> 0");
  }

  void nonneg(const YAML::Node& map, const std::string& key, const std::string& where,
              double& out) {
    number(map, key, where, out, [](double v) { return v >= 0.0; }, ">= 0");
  }

  void any(const YAML::Node& map, const std::string& key, const std::string& where,
           double& out) {
    number(map, key, where, out, [](double) { return true; }, "finite");
  }

  void count(const YAML::Node& map, const std::string& key, const std::string& where,
             std::size_t& out, std::size_t min) {
    long long v = static_cast<long long>(out);
    if (!get(map, key, where, v)) return;
    if (v < static_cast<long long>(min)) {
      error(map[key], where + "." + key + " must be an integer >= " + std::to_string(min));
      return;
    }
    out = static_cast<std::size_t>(v);
  }

  void list(const YAML::Node& map, const std::string& key, const std::string& where,
            std::vector<double>& out, bool positive_only) {
    const YAML::Node n = map[key];
    if (!n.IsDefined() || n.IsNull()) return;
    if (!n.IsSequence() || n.size() == 0) {
      error(n, where + "." + key + " must be a non-empty list of numbers");
      return;
    }
    std::vector<double> vals;
    for (const auto& e : n) {
      try {
        const double v = e.as<double>();
        if (!std::isfinite(v) || (positive_only && !(v > 0.0))) {
          error(e, where + "." + key + " entries must be finite" +
                       (positive_only ? " and > 0" : ""));
        }
        vals.push_back(v);
      } catch (const YAML::Exception&) {
        error(e, where + "." + key + ": '" + scalar(e) + "' is not a number");
      }
    }
    out = vals;
  }

  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string scalar(const YAML::Node& n) {
    if (n.IsScalar()) return n.Scalar();
    return n.IsSequence() ? "<list>" : n.IsMap() ? "<mapping>" : "<null>";
  }
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, double>) return "a number";
    if constexpr (std::is_same_v<T, bool>) return "true/false";
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    return "an integer";
  }

  std::string file_;
  std::vector<std::string> errors_;
};

void read_joints(Reader& rd, const YAML::Node& n, const std::string& where,
                 std::vector<JointReference>& out) {
  if (!n.IsSequence() || n.size() == 0) {
    rd.error(n, where + " must be a non-empty list of joint references");
    return;
  }
  out.clear();
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    JointReference j;
    if (rd.keys(n[i], w, {"amplitude", "frequency", "phase", "offset"})) {
      rd.any(n[i], "amplitude", w, j.amplitude);
      rd.nonneg(n[i], "frequency", w, j.frequency);
      rd.any(n[i], "phase", w, j.phase);
      rd.any(n[i], "offset", w, j.offset);
    }
    out.push_back(j);
  }
}

RunConfig parse(const YAML::Node& root, Reader& rd) {
  RunConfig c;
  if (root.IsNull()) return c;
  if (!rd.keys(root, "config",
               {"robot", "geometry", "barrier", "pid", "dataset", "gp", "tuning",
                "simulation", "sweep", "seed", "output"})) {
    return c;
  }

  if (const auto r = root["robot"]; r.IsDefined() &&
      rd.keys(r, "robot", {"links", "q_ini", "q_max", "v_max", "u_max", "tip_mass",
                           "planar", "gravity"})) {
    if (const auto links = r["links"]; links.IsDefined()) {
      if (!links.IsSequence() || links.size() < 2) {
        rd.error(links, "robot.links must list at least 2 links");
      } else {
        c.robot.links.clear();
        for (std::size_t i = 0; i < links.size(); ++i) {
          const std::string w = "robot.links[" + std::to_string(i) + "]";
          LinkParams l;
          if (rd.keys(links[i], w, {"length", "radius", "density"})) {
            rd.positive(links[i], "length", w, l.length);
            rd.positive(links[i], "radius", w, l.radius);
            rd.positive(links[i], "density", w, l.density);
          }
          c.robot.links.push_back(l);
        }
      }
    }
    rd.any(r, "q_ini", "robot", c.robot.q_ini);
    rd.positive(r, "q_max", "robot", c.robot.q_max);
    rd.positive(r, "v_max", "robot", c.robot.v_max);
    rd.positive(r, "u_max", "robot", c.robot.u_max);
    rd.nonneg(r, "tip_mass", "robot", c.robot.tip_mass);
    rd.get(r, "planar", "robot", c.robot.planar);
    rd.nonneg(r, "gravity", "robot", c.robot.gravity);
  }
  c.geom.q_ini = c.robot.q_ini;
  if (c.robot.dof() != 2) rd.error(root["robot"], "the singularity measure needs exactly 2 links");

  if (const auto g = root["geometry"]; g.IsDefined() && rd.keys(g, "geometry", {"epsilon"})) {
    rd.number(g, "epsilon", "geometry", c.geom.epsilon,
              [](double v) { return v > 0.0 && v < 1.0; }, "in (0, 1)");
  }

  if (const auto b = root["barrier"]; b.IsDefined() &&
      rd.keys(b, "barrier", {"gamma", "delta", "k", "beta1", "beta2", "beta3"})) {
    rd.positive(b, "gamma", "barrier", c.barrier.gamma);
    rd.positive(b, "delta", "barrier", c.barrier.delta);
    rd.positive(b, "k", "barrier", c.barrier.k);
    for (auto [key, fn] : {std::pair{"beta1", &c.barrier.beta1},
                           std::pair{"beta2", &c.barrier.beta2},
                           std::pair{"beta3", &c.barrier.beta3}}) {
      std::string name;
      if (rd.get(b, key, "barrier", name)) {
        try {
          *fn = ClassKFunction::parse(name);
        } catch (const std::invalid_argument& e) {
          rd.error(b[key], std::string("barrier.") + key + ": " + e.what());
        }
      }
    }
  }

  if (const auto p = root["pid"]; p.IsDefined() && rd.keys(p, "pid", {"kp", "ki", "kv"})) {
    rd.nonneg(p, "kp", "pid", c.pid.kp);
    rd.nonneg(p, "ki", "pid", c.pid.ki);
    rd.nonneg(p, "kv", "pid", c.pid.kv);
  }

  if (const auto d = root["dataset"]; d.IsDefined() &&
      rd.keys(d, "dataset", {"excitation", "duration", "discard", "path"})) {
    if (d["excitation"].IsDefined()) {
      read_joints(rd, d["excitation"], "dataset.excitation", c.dataset.excitation.joints);
    }
    rd.positive(d, "duration", "dataset", c.dataset.excitation.duration);
    rd.nonneg(d, "discard", "dataset", c.dataset.discard);
    rd.get(d, "path", "dataset", c.dataset.path);
    if (c.dataset.discard >= c.dataset.excitation.duration) {
      rd.error(d, "dataset.discard must be shorter than dataset.duration");
    }
  }

  c.gp.kernels.assign(c.robot.dof(), KernelParams{});
  c.gp.rkhs_bound = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.robot.dof()));
  if (const auto g = root["gp"]; g.IsDefined() &&
      rd.keys(g, "gp", {"kernels", "sigma_v2", "points", "rkhs_bound", "safety_factor",
                        "model"})) {
    if (const auto k = g["kernels"]; k.IsDefined()) {
      if (!k.IsSequence() || k.size() != c.robot.dof()) {
        rd.error(k, "gp.kernels must list one kernel per joint");
      } else {
        for (std::size_t i = 0; i < k.size(); ++i) {
          const std::string w = "gp.kernels[" + std::to_string(i) + "]";
          if (rd.keys(k[i], w, {"sf", "el"})) {
            rd.positive(k[i], "sf", w, c.gp.kernels[i].sf);
            rd.positive(k[i], "el", w, c.gp.kernels[i].el);
          }
        }
      }
    }
    rd.positive(g, "sigma_v2", "gp", c.gp.sigma_v2);
    rd.count(g, "points", "gp", c.gp.points, 1);
    if (const auto b = g["rkhs_bound"]; b.IsDefined()) {
      if (b.IsScalar() && b.Scalar() == "auto") {
        c.gp.auto_bound = true;
      } else {
        std::vector<double> vals;
        rd.list(g, "rkhs_bound", "gp", vals, true);
        if (!vals.empty() && vals.size() != c.robot.dof()) {
          rd.error(b, "gp.rkhs_bound must be 'auto' or one value per joint");
        } else if (!vals.empty()) {
          c.gp.auto_bound = false;
          c.gp.rkhs_bound = Eigen::Map<Eigen::VectorXd>(vals.data(),
                                                        static_cast<Eigen::Index>(vals.size()));
        }
      }
    }
    rd.number(g, "safety_factor", "gp", c.gp.safety_factor,
              [](double v) { return v >= 1.0; }, ">= 1");
    rd.get(g, "model", "gp", c.gp.model_path);
  }

  if (const auto t = root["tuning"]; t.IsDefined() &&
      rd.keys(t, "tuning", {"norm_factor", "h_floor", "grid_resolution", "coarse_grid",
                            "starts", "max_evaluations", "derivative_samples"})) {
    std::string nf;
    if (rd.get(t, "norm_factor", "tuning", nf)) {
      try {
        c.tuning.search.norm_factor = parse_norm_factor(nf);
      } catch (const std::invalid_argument& e) {
        rd.error(t["norm_factor"], std::string("tuning.") + e.what());
      }
    }
    rd.positive(t, "h_floor", "tuning", c.tuning.search.h_floor);
    rd.count(t, "grid_resolution", "tuning", c.tuning.grid_resolution, 100);
    rd.count(t, "coarse_grid", "tuning", c.tuning.search.coarse_grid, 2);
    rd.count(t, "starts", "tuning", c.tuning.search.starts, 1);
    rd.count(t, "max_evaluations", "tuning", c.tuning.search.max_evaluations, 10);
    rd.count(t, "derivative_samples", "tuning", c.tuning.derivative_samples, 1);
  }

  if (const auto s = root["simulation"]; s.IsDefined() &&
      rd.keys(s, "simulation", {"dt", "duration", "mode", "reference", "reference_frequency"})) {
    rd.positive(s, "dt", "simulation", c.simulation.dt);
    rd.positive(s, "duration", "simulation", c.simulation.duration);
    std::string mode;
    if (rd.get(s, "mode", "simulation", mode)) {
      try {
        c.simulation.mode = parse_filter_mode(mode);
      } catch (const std::invalid_argument& e) {
        rd.error(s["mode"], std::string("simulation.") + e.what());
      }
    }
    rd.positive(s, "reference_frequency", "simulation", c.simulation.reference_frequency);
    if (const auto r = s["reference"]; r.IsDefined()) {
      if (r.IsScalar() && r.Scalar() == "singularity_seeking") {
        c.simulation.singularity_seeking = true;
      } else {
        c.simulation.singularity_seeking = false;
        read_joints(rd, r, "simulation.reference", c.simulation.reference.joints);
      }
    }
  }

  if (const auto s = root["sweep"]; s.IsDefined() &&
      rd.keys(s, "sweep", {"gamma_fractions", "delta_multiples", "gammas", "deltas",
                           "threads"})) {
    rd.list(s, "gamma_fractions", "sweep", c.sweep.gamma_fractions, true);
    rd.list(s, "delta_multiples", "sweep", c.sweep.delta_multiples, true);
    rd.list(s, "gammas", "sweep", c.sweep.gammas, true);
    rd.list(s, "deltas", "sweep", c.sweep.deltas, true);
    if (c.sweep.gammas.empty() != c.sweep.deltas.empty()) {
      rd.error(s, "sweep.gammas and sweep.deltas must be given together");
    }
    c.sweep.tuned = c.sweep.gammas.empty();
    rd.count(s, "threads", "sweep", c.sweep.threads, 0);
  }

  long long seed = 0;
  if (rd.get(root, "seed", "config", seed)) {
    if (seed < 0) rd.error(root["seed"], "seed must be >= 0");
    c.seed = static_cast<std::uint64_t>(std::max(0LL, seed));
  }
  rd.get(root, "output", "config", c.output);

  // Cross-field checks, reported against the section they belong to.
  auto check = [&](const YAML::Node& at, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      rd.error(at, e.what());
    }
  };
  check(root["robot"], [&] { c.robot.validate(); });
  check(root["dataset"], [&] { c.dataset.excitation.validate(c.robot); });
  if (c.robot.dof() == 2) {
    check(root["simulation"], [&] { c.reference().validate(c.robot); });
  }
  return c;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> messages)
    : std::runtime_error(join(messages)), messages_(std::move(messages)) {}

RunConfig load_config_string(const std::string& text, const std::string& name) {
  Reader rd(name);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError({name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg});
  }
  RunConfig c = parse(root, rd);
  if (!rd.errors().empty()) throw ConfigError(rd.errors());
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open configuration file"});
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_string(ss.str(), path);
}

}  // namespace scbf
