#include "scbf/sim_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace scbf {

Eigen::VectorXd TrajectorySpec::position(double t) const {
  Eigen::VectorXd q(static_cast<Eigen::Index>(joints.size()));
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const auto& j = joints[i];
    q(static_cast<Eigen::Index>(i)) =
        j.offset + j.amplitude * std::sin(2.0 * M_PI * j.frequency * t + j.phase);
  }
  return q;
}

Eigen::VectorXd TrajectorySpec::velocity(double t) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(joints.size()));
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const auto& j = joints[i];
    const double w = 2.0 * M_PI * j.frequency;
    v(static_cast<Eigen::Index>(i)) = j.amplitude * w * std::cos(w * t + j.phase);
  }
  return v;
}

void TrajectorySpec::validate(const RobotParams& robot) const {
  if (joints.size() != robot.dof()) {
    throw std::invalid_argument("reference has " + std::to_string(joints.size()) +
                                " joints, robot has " + std::to_string(robot.dof()));
  }
  if (!(duration > 0.0)) throw std::invalid_argument("reference duration must be > 0");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const auto& j = joints[i];
    const std::string name = "reference joint " + std::to_string(i + 1);
    if (!(j.frequency >= 0.0)) throw std::invalid_argument(name + ": frequency must be >= 0");
    const double a = std::abs(j.amplitude);
    if (std::abs(j.offset) + a > robot.q_max) {
      throw std::invalid_argument(name + ": offset +- amplitude leaves [-q_max, q_max]");
    }
    if (a * 2.0 * M_PI * j.frequency > robot.v_max) {
      throw std::invalid_argument(name + ": peak velocity exceeds v_max");
    }
  }
}

TrajectorySpec singularity_seeking_reference(const RobotParams& robot,
                                             const SingularityGeometry& geom,
                                             double frequency, double duration) {
  const double cone = singular_cone_half_angle(geom);
  const double top = 0.95 * robot.q_max;
  const double bottom = std::max(cone - geom.q_ini - 1.2 * cone, -0.95 * robot.q_max);
  TrajectorySpec spec;
  spec.duration = duration;
  spec.joints.resize(robot.dof());
  spec.joints[1].offset = 0.5 * (top + bottom);
  spec.joints[1].amplitude = 0.5 * (top - bottom);
  spec.joints[1].frequency = frequency;
  spec.joints[1].phase = M_PI / 2.0;
  return spec;
}

void PIDGains::validate() const {
  if (!(kp >= 0.0) || !(ki >= 0.0) || !(kv >= 0.0)) {
    throw std::invalid_argument("PID gains must be non-negative");
  }
}

PIDOutput pid_nominal(const PIDGains& gains, const JointState& x,
                      const Eigen::VectorXd& ref_q, const Eigen::VectorXd& ref_v,
                      const Eigen::VectorXd& integral, double dt, double u_max) {
  const Eigen::VectorXd e = ref_q - x.q;
  PIDOutput out;
  out.integral = integral + e * dt;
  if (gains.ki > 0.0) {
    const double cap = u_max / gains.ki;
    out.integral = out.integral.cwiseMax(-cap).cwiseMin(cap);
  }
  out.u = gains.kp * e + gains.ki * out.integral + gains.kv * (ref_v - x.v);
  return out;
}

std::string to_string(FilterMode m) {
  switch (m) {
    case FilterMode::filtered_gp: return "filtered+gp";
    case FilterMode::filtered_nogp: return "filtered-gp";
    case FilterMode::unfiltered: return "unfiltered";
  }
  return "?";
}

FilterMode parse_filter_mode(const std::string& s) {
  if (s == "filtered+gp") return FilterMode::filtered_gp;
  if (s == "filtered-gp") return FilterMode::filtered_nogp;
  if (s == "unfiltered") return FilterMode::unfiltered;
  throw std::invalid_argument("mode must be filtered+gp, filtered-gp or unfiltered, got '" +
                              s + "'");
}

double EpisodeLog::z_min() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) m = std::min(m, r.z);
  return m;
}

double EpisodeLog::h_min() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) m = std::min(m, r.h);
  return m;
}

double EpisodeLog::v_abs_max() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.v.cwiseAbs().maxCoeff());
  return m;
}

double EpisodeLog::u_abs_max() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.u.cwiseAbs().maxCoeff());
  return m;
}

std::size_t EpisodeLog::count(QPStatus s) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [s](const auto& r) { return r.status == s; }));
}

TrajectorySamples EpisodeLog::samples(double discard_before) const {
  std::vector<const EpisodeRow*> kept;
  for (const auto& r : rows) {
    if (r.t >= discard_before) kept.push_back(&r);
  }
  const auto m = static_cast<Eigen::Index>(kept.size());
  const Eigen::Index n = rows.empty() ? 0 : rows.front().q.size();
  TrajectorySamples s;
  s.t.resize(m);
  s.q.resize(m, n);
  s.v.resize(m, n);
  s.qdd.resize(m, n);
  s.u.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& r = *kept[static_cast<std::size_t>(i)];
    s.t(i) = r.t;
    s.q.row(i) = r.q.transpose();
    s.v.row(i) = r.v.transpose();
    s.qdd.row(i) = r.qdd.transpose();
    s.u.row(i) = r.u.transpose();
  }
  return s;
}

void write_episode_csv(const EpisodeLog& log, std::ostream& os) {
  const Eigen::Index n = log.rows.empty() ? 0 : log.rows.front().q.size();
  os << "t";
  for (const char* prefix : {"q", "v", "qdd", "unom", "u"}) {
    for (Eigen::Index i = 1; i <= n; ++i) os << ',' << prefix << i;
  }
  os << ",z,h,lambda_x,qp_status,active_mask,slack_total\n";
  os << std::setprecision(17);
  for (const auto& r : log.rows) {
    os << r.t;
    for (const Eigen::VectorXd* vec : {&r.q, &r.v, &r.qdd, &r.u_nom, &r.u}) {
      for (Eigen::Index i = 0; i < n; ++i) os << ',' << (*vec)(i);
    }
    os << ',' << r.z << ',' << r.h << ',' << r.lambda_x << ',' << to_string(r.status)
       << ',' << r.active_mask << ',' << r.slack_total << '\n';
  }
}

EpisodeLog run_episode(const EpisodeConfig& config) {
  const RobotParams& robot = config.robot;
  robot.validate();
  config.geom.validate();
  config.barrier.validate();
  config.pid.validate();
  config.reference.validate(robot);
  if (!(config.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (config.mode == FilterMode::filtered_gp && config.gp == nullptr) {
    throw std::invalid_argument("mode filtered+gp needs a fitted GP");
  }
  const GPModel* gp = config.mode == FilterMode::filtered_gp ? config.gp : nullptr;

  JointState x{config.reference.position(0.0), config.reference.velocity(0.0)};
  if (config.seed != 0) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> uq(-0.05, 0.05);
    std::uniform_real_distribution<double> uv(-0.1, 0.1);
    for (Eigen::Index i = 0; i < x.q.size(); ++i) x.q(i) += uq(rng);
    for (Eigen::Index i = 0; i < x.v.size(); ++i) x.v(i) += uv(rng);
  }
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(x.q.size());

  EpisodeLog log;
  const auto steps = static_cast<std::size_t>(std::llround(config.reference.duration / config.dt));
  log.rows.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * config.dt;
    if (!x.finite()) {
      log.aborted = true;
      log.abort_reason = "state became non-finite at t = " + std::to_string(t);
      break;
    }
    if (x.q.cwiseAbs().maxCoeff() > robot.q_max) {
      log.aborted = true;
      log.abort_reason = "q left the joint box at t = " + std::to_string(t);
      break;
    }
    const PIDOutput pid = pid_nominal(config.pid, x, config.reference.position(t),
                                      config.reference.velocity(t), integral, config.dt,
                                      robot.u_max);
    integral = pid.integral;

    EpisodeRow row;
    row.t = t;
    row.q = x.q;
    row.v = x.v;
    row.u_nom = pid.u;
    if (config.mode == FilterMode::unfiltered) {
      row.u = pid.u.cwiseMax(-robot.u_max).cwiseMin(robot.u_max);
    } else {
      double lambda_x = 0.0;
      MismatchEstimate est = gp_estimate(gp, x, robot.dof(), &lambda_x);
      if (gp && config.lambda_bar_override) est.lambda_bar = *config.lambda_bar_override;
      FilterResult f = filter(x, pid.u, config.geom, robot, est, config.barrier,
                              config.hessian, config.solver);
      f.lambda_x = lambda_x;
      row.u = f.u_star;
      row.lambda_x = f.lambda_x;
      row.status = f.status;
      row.active_mask = f.active_mask;
      row.slack_total = f.slack.sum();
    }
    row.z = z_value(config.geom, x.q.head<2>());
    row.h = h_value(config.geom, config.barrier, x);
    row.qdd = forward_dynamics(robot, x, row.u, ModelVariant::truth);
    log.rows.push_back(std::move(row));
    if (k == steps) break;
    x = step_rk4(robot, x, log.rows.back().u, config.dt, ModelVariant::truth);
  }
  return log;
}

SweepResult sweep_gamma_delta(const EpisodeConfig& base, const std::vector<double>& gammas,
                              const std::vector<double>& deltas, double gamma_star,
                              double delta_star, std::size_t threads) {
  SweepResult res;
  res.gammas = gammas;
  res.deltas = deltas;
  const auto ng = static_cast<Eigen::Index>(gammas.size());
  const auto nd = static_cast<Eigen::Index>(deltas.size());
  res.z_min = Eigen::MatrixXd::Constant(ng, nd, std::numeric_limits<double>::quiet_NaN());
  res.in_criterion = Eigen::MatrixXi::Zero(ng, nd);
  res.failures.assign(gammas.size() * deltas.size(), "");
  for (Eigen::Index i = 0; i < ng; ++i) {
    for (Eigen::Index j = 0; j < nd; ++j) {
      res.in_criterion(i, j) = gammas[static_cast<std::size_t>(i)] <= gamma_star &&
                               deltas[static_cast<std::size_t>(j)] >= delta_star;
    }
  }
  const std::size_t cells = res.failures.size();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(cells, 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      const auto i = static_cast<Eigen::Index>(c / deltas.size());
      const auto j = static_cast<Eigen::Index>(c % deltas.size());
      EpisodeConfig cfg = base;
      cfg.barrier.gamma = gammas[static_cast<std::size_t>(i)];
      cfg.barrier.delta = deltas[static_cast<std::size_t>(j)];
      try {
        const EpisodeLog log = run_episode(cfg);
        res.z_min(i, j) = log.z_min();
        if (log.aborted) res.failures[c] = log.abort_reason;
      } catch (const std::exception& e) {
        res.failures[c] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return res;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("spearman needs two equally long samples of size >= 2");
  }
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const Eigen::Map<const Eigen::VectorXd> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Eigen::VectorXd> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Eigen::VectorXd dx = x.array() - x.mean();
  const Eigen::VectorXd dy = y.array() - y.mean();
  const double den = dx.norm() * dy.norm();
  return den > 0.0 ? dx.dot(dy) / den : std::numeric_limits<double>::quiet_NaN();
}

SweepTrend sweep_trend(const SweepResult& r) {
  SweepTrend t;
  const auto ng = r.z_min.rows();
  const auto nd = r.z_min.cols();
  auto mean_finite = [](const Eigen::VectorXd& v) {
    double s = 0.0;
    int n = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::isfinite(v(i))) {
        s += v(i);
        ++n;
      }
    }
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<double> zg, zd;
  for (Eigen::Index i = 0; i < ng; ++i) zg.push_back(mean_finite(r.z_min.row(i).transpose()));
  for (Eigen::Index j = 0; j < nd; ++j) zd.push_back(mean_finite(r.z_min.col(j)));
  t.rho_gamma = ng >= 2 ? spearman(r.gammas, zg) : std::numeric_limits<double>::quiet_NaN();
  t.rho_delta = nd >= 2 ? spearman(r.deltas, zd) : std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = 0; i < ng; ++i) {
    for (Eigen::Index j = 0; j < nd; ++j) {
      if (!r.in_criterion(i, j)) continue;
      const bool failed = !r.failures[static_cast<std::size_t>(i * nd + j)].empty();
      if (failed || !(r.z_min(i, j) >= 0.0)) ++t.unsafe_cells;
    }
  }
  return t;
}

void write_sweep_csv(const SweepResult& r, std::ostream& os) {
  os << "gamma,delta,z_min,in_criterion,failure\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.gammas.size(); ++i) {
    for (std::size_t j = 0; j < r.deltas.size(); ++j) {
      std::string why = r.failures[i * r.deltas.size() + j];
      std::replace(why.begin(), why.end(), ',', ';');
      os << r.gammas[i] << ',' << r.deltas[j] << ','
         << r.z_min(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << ','
         << r.in_criterion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
         << ',' << why << '\n';
    }
  }
}

EpisodeLog generate_dataset(const RobotParams& robot, const PIDGains& pid,
                            const TrajectorySpec& excitation, double dt) {
  EpisodeConfig cfg;
  cfg.robot = robot;
  cfg.pid = pid;
  cfg.reference = excitation;
  cfg.dt = dt;
  cfg.mode = FilterMode::unfiltered;
  cfg.geom.q_ini = robot.q_ini;
  return run_episode(cfg);
}

}  // namespace scbf
