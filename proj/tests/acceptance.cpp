// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
// below. Criteria listed with --expect-fail are reported but do not fail the
// run; an expected failure that passes does.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iterator>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qp_oracle.hpp"
#include "scbf/pipeline.hpp"
#include "scbf/safety_filter.hpp"

using namespace scbf;

namespace {

// Published reference values and the tolerances they are checked at.
constexpr double kMMax = 49.246, kMMaxTol = 0.05, kMMaxSeconds = 10;
constexpr double kCMax = 0.243, kCMaxTol = 0.05, kCMaxSeconds = 30;
constexpr double kGammaStar = 29.987, kDeltaStar = 5.924, kStarTol = 0.15;
constexpr double kLambdaBar = 3.52;
constexpr std::size_t kProbeStates = 10000;
constexpr double kEpisodeSeconds = 60;
constexpr double kRhoMax = -0.8, kSweepSeconds = 1800;
constexpr double kVelSlack = 1e-6, kHSlackSteps = 10;
constexpr double kGradTol = 1e-7, kHessTol = 1e-5, kMinOrder = 3.5, kEnergyTol = 1e-6;
constexpr double kQpTol = 1e-6, kSkewTol = 1e-6;
constexpr std::size_t kQpInstances = 1000, kDerivSamples = 100000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_dev(double value, double target) { return std::abs(value - target) / target; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared state built once: the shipped config, its GP and the tuning report.
struct Context {
  RunConfig config;
  GPBuild gp;
  TuneReport tune;
  double bounds_seconds = 0;
  // filtered+gp episodes: 3 references x seeds 1..3
  std::vector<EpisodeLog> matrix;
};

std::vector<EpisodeLog> run_matrix(const RunConfig& config, const GPModel& gp) {
  const RobotParams& robot = config.robot;
  std::vector<TrajectorySpec> refs{singularity_seeking_reference(robot, config.geom, 0.2),
                                   singularity_seeking_reference(robot, config.geom, 0.35)};
  TrajectorySpec mixed = singularity_seeking_reference(robot, config.geom, 0.25);
  mixed.joints[0] = {0.6, 0.15, 0.0, 0.0};
  refs.push_back(mixed);
  EpisodeConfig e = config.episode(&gp);
  e.mode = FilterMode::filtered_gp;
  std::vector<EpisodeLog> logs;
  for (const auto& ref : refs) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      e.reference = ref;
      e.seed = seed;
      logs.push_back(run_episode(e));
    }
  }
  return logs;
}

Outcome c1(const Context& ctx) {
  const double m = ctx.tune.bounds.m_max;
  const bool ok = rel_dev(m, kMMax) <= kMMaxTol && ctx.bounds_seconds < kMMaxSeconds;
  return {ok, fmt("m_max = %.4f vs %.3f (dev %.2f%%, tol %.0f%%), bounds in %.2f s (limit %.0f s)", m,
                  kMMax, 100 * rel_dev(m, kMMax), 100 * kMMaxTol, ctx.bounds_seconds, kMMaxSeconds)};
}

Outcome c2(const Context& ctx) {
  const double c = ctx.tune.bounds.c_max;
  const bool ok = rel_dev(c, kCMax) <= kCMaxTol && ctx.bounds_seconds < kCMaxSeconds;
  return {ok, fmt("c_max = %.5f vs %.3f (dev %.2f%%, tol %.0f%%), bounds in %.2f s (limit %.0f s)", c,
                  kCMax, 100 * rel_dev(c, kCMax), 100 * kCMaxTol, ctx.bounds_seconds, kCMaxSeconds)};
}

Outcome c3(const Context& ctx) {
  const FactorReport& p = ctx.tune.paper;
  const FactorReport& t = ctx.tune.tight;
  const bool ok = p.gamma_ok && rel_dev(p.gamma_star, kGammaStar) <= kStarTol &&
                  rel_dev(p.delta_star, kDeltaStar) <= kStarTol;
  return {ok, fmt("paper: gamma* = %.3f vs %.3f (dev %.1f%%), delta* = %.4g vs %.3f (dev %.3g%%), "
                  "tol %.0f%%; tight: gamma* = %.3f, delta* = %.4g; max|mu| = %.3f",
                  p.gamma_star, kGammaStar, 100 * rel_dev(p.gamma_star, kGammaStar), p.delta_star,
                  kDeltaStar, 100 * rel_dev(p.delta_star, kDeltaStar), 100 * kStarTol,
                  t.gamma_star, t.delta_star, ctx.tune.mu_max)};
}

// Counts |mu(x) - d(x, u)| > lambda(x) over (state, torque) probes.
struct BoundCheck {
  std::size_t probes = 0;
  std::size_t violations = 0;
  std::size_t uniform_violations = 0;  // against lambda_bar instead
  double worst = 0;

  void add(const GPModel& gp, const RobotParams& robot, const JointState& x,
           const Eigen::VectorXd& u) {
    Eigen::VectorXd in(4);
    in << x.q, x.v;
    const Prediction p = gp.predict(in);
    const double err = (p.mean - mismatch_truth(robot, x, u)).norm();
    const double lam = gp.error_bound(p);
    worst = std::max(worst, err / lam);
    violations += !(err <= lam);
    uniform_violations += !(err <= gp.uniform_bound());
    ++probes;
  }
};

Outcome c4(const Context& ctx) {
  const GPModel& gp = ctx.gp.model;
  const double lb = gp.uniform_bound();
  const bool anchor = std::isfinite(lb) && lb > 0 && lb >= kLambdaBar / 10 && lb <= kLambdaBar * 10;
  // Probes are closed-loop states with the torque actually applied there:
  // the mismatch of an inertial error depends on u, so d is only a function
  // of the state along a given controller.
  std::vector<const EpisodeRow*> rows;
  for (const auto& log : ctx.matrix) {
    for (const auto& r : log.rows) rows.push_back(&r);
  }
  std::mt19937_64 rng(ctx.config.seed + 4);
  std::vector<const EpisodeRow*> picked;
  std::sample(rows.begin(), rows.end(), std::back_inserter(picked), kProbeStates, rng);
  BoundCheck check;
  for (const EpisodeRow* r : picked) check.add(gp, ctx.config.robot, {r->q, r->v}, r->u);
  return {anchor && check.violations == 0 && check.probes == kProbeStates,
          fmt("lambda_bar = %.4f (anchor %.2f, accepted [%.3f, %.1f]); |mu - d| <= lambda(x) at "
              "%zu closed-loop probes: %zu violations, worst ratio %.3f (%zu above lambda_bar)",
              lb, kLambdaBar, kLambdaBar / 10, kLambdaBar * 10, check.probes, check.violations,
              check.worst, check.uniform_violations)};
}

// Diagnostic only: uniform states with uniform torques, off the data manifold.
std::string bound_note(const Context& ctx) {
  const RobotParams& robot = ctx.config.robot;
  std::mt19937_64 rng(ctx.config.seed + 40);
  std::uniform_real_distribution<double> uq(-robot.q_max, robot.q_max);
  std::uniform_real_distribution<double> uv(-robot.v_max, robot.v_max);
  std::uniform_real_distribution<double> uu(-robot.u_max, robot.u_max);
  BoundCheck check;
  for (std::size_t k = 0; k < kProbeStates; ++k) {
    const JointState x{Eigen::Vector2d(uq(rng), uq(rng)), Eigen::Vector2d(uv(rng), uv(rng))};
    check.add(ctx.gp.model, robot, x, Eigen::Vector2d(uu(rng), uu(rng)));
  }
  return fmt("uniform state box with uniform torques: %zu of %zu probes violate, worst ratio %.3f "
             "(%zu above lambda_bar)",
             check.violations, check.probes, check.worst, check.uniform_violations);
}

Outcome c5(const Context& ctx) {
  EpisodeConfig e = ctx.config.episode(&ctx.gp.model);
  auto t0 = std::chrono::steady_clock::now();
  e.mode = FilterMode::filtered_gp;
  const EpisodeLog with = run_episode(e);
  const double s1 = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  e.mode = FilterMode::filtered_nogp;
  const EpisodeLog without = run_episode(e);
  const double s2 = seconds_since(t0);
  const double dur = e.reference.duration;
  const bool ok = !with.aborted && !without.aborted && with.z_min() >= 0 &&
                  without.z_min() < 0 && s1 < kEpisodeSeconds && s2 < kEpisodeSeconds;
  return {ok, fmt("%.0f s episodes: filtered+gp z_min = %+.5f (%.2f s), filtered-gp z_min = %+.5f "
                  "(%.2f s), limit %.0f s each",
                  dur, with.z_min(), s1, without.z_min(), s2, kEpisodeSeconds)};
}

Outcome c6(const Context& ctx) {
  std::vector<double> gammas, deltas;
  sweep_grids(ctx.config, ctx.tune, gammas, deltas);
  const auto t0 = std::chrono::steady_clock::now();
  const SweepResult r =
      sweep_gamma_delta(ctx.config.episode(&ctx.gp.model), gammas, deltas,
                        ctx.tune.paper.gamma_star, ctx.tune.paper.delta_star,
                        ctx.config.sweep.threads);
  const double secs = seconds_since(t0);
  const SweepTrend t = sweep_trend(r);
  std::size_t negative = 0, failed = 0;
  for (Eigen::Index i = 0; i < r.z_min.size(); ++i) {
    if (!(r.z_min(i) >= 0)) ++negative;
  }
  for (const auto& f : r.failures) failed += !f.empty();
  const bool ok = t.rho_gamma <= kRhoMax && t.rho_delta <= kRhoMax && negative == 0 &&
                  failed == 0 && secs < kSweepSeconds;
  return {ok, fmt("%zux%zu grid gamma [%.3g, %.3g] delta [%.3g, %.3g]: rho_gamma = %.2f, "
                  "rho_delta = %.2f (need <= %.1f), %zu cells z_min < 0, %zu aborted, %.1f s",
                  gammas.size(), deltas.size(), gammas.front(), gammas.back(), deltas.front(),
                  deltas.back(), t.rho_gamma, t.rho_delta, kRhoMax, negative, failed, secs)};
}

// Diagnostic only: the same trend on a small-delta grid where the discrete
// loop stays well resolved.
std::string sweep_note(const Context& ctx) {
  const std::vector<double> gammas{5, 10, 15, 20, 29}, deltas{1, 10, 100, 1e3, 1e4};
  const SweepResult r = sweep_gamma_delta(ctx.config.episode(&ctx.gp.model), gammas, deltas,
                                          ctx.tune.paper.gamma_star, ctx.tune.paper.delta_star,
                                          ctx.config.sweep.threads);
  const SweepTrend t = sweep_trend(r);
  std::size_t negative = 0, failed = 0;
  for (Eigen::Index i = 0; i < r.z_min.size(); ++i) negative += !(r.z_min(i) >= 0);
  for (const auto& f : r.failures) failed += !f.empty();
  return fmt("gamma {5..29} x delta {1..1e4}: rho_gamma = %.2f, rho_delta = %.2f, "
             "%zu cells z_min < 0, %zu aborted",
             t.rho_gamma, t.rho_delta, negative, failed);
}

Outcome c7(const Context& ctx) {
  const RobotParams& robot = ctx.config.robot;
  const double dt = ctx.config.simulation.dt;
  double vmax = 0, umax = 0, hmin = INFINITY;
  std::size_t bad = 0, relaxed = 0;
  for (const EpisodeLog& log : ctx.matrix) {
    vmax = std::max(vmax, log.v_abs_max());
    umax = std::max(umax, log.u_abs_max());
    relaxed += log.count(QPStatus::relaxed);
    const bool h_start = log.rows.front().h >= 0;
    if (h_start) hmin = std::min(hmin, log.h_min());
    if (log.aborted || log.v_abs_max() > robot.v_max + kVelSlack ||
        log.u_abs_max() > robot.u_max || (h_start && log.h_min() < -kHSlackSteps * dt)) {
      ++bad;
    }
  }
  return {bad == 0 && ctx.matrix.size() == 9,
          fmt("3 references x 3 seeds: max|v| = %.6f (<= %.6f), max|u| = %.6f (<= %.1f), "
              "min h = %+.5f (>= %.3f), %zu relaxed solves, %zu failing episodes",
              vmax, robot.v_max + kVelSlack, umax, robot.u_max, hmin, -kHSlackSteps * dt, relaxed,
              bad)};
}

Outcome c8(const Context& ctx) {
  const RobotParams& robot = ctx.config.robot;
  const SingularityGeometry& g = ctx.config.geom;
  std::mt19937_64 rng(ctx.config.seed + 8);
  std::uniform_real_distribution<double> uq(-robot.q_max, robot.q_max);
  std::uniform_real_distribution<double> uv(-robot.v_max, robot.v_max);

  // Gradient and Hessian of eta against central differences.
  double grad_err = 0, hess_err = 0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector2d q(uq(rng), uq(rng));
    const Eigen::Vector2d G = grad_eta(g, q);
    const Eigen::Matrix2d H = hess_eta(g, q);
    for (int i = 0; i < 2; ++i) {
      const Eigen::Vector2d e = 1e-5 * Eigen::Vector2d::Unit(i);
      const double fd = (eta(g, q + e) - eta(g, q - e)) / 2e-5;
      grad_err = std::max(grad_err, std::abs(G(i) - fd) / std::max(1.0, std::abs(G(i))));
      const Eigen::Vector2d e2 = 1e-4 * Eigen::Vector2d::Unit(i);
      const Eigen::Vector2d col = (grad_eta(g, q + e2) - grad_eta(g, q - e2)) / 2e-4;
      hess_err = std::max(hess_err, (H.col(i) - col).cwiseAbs().maxCoeff() /
                                        std::max(1.0, H.col(i).cwiseAbs().maxCoeff()));
    }
  }

  // RK4 order from step halving against a fine reference, under constant torque.
  const JointState x0{Eigen::Vector2d(0.2, -0.4), Eigen::Vector2d(1.0, -0.5)};
  const Eigen::Vector2d u(0.8, -0.3);
  auto integrate = [&](double dt, double T, const Eigen::VectorXd& torque) {
    JointState x = x0;
    const auto n = static_cast<int>(std::llround(T / dt));
    for (int k = 0; k < n; ++k) x = step_rk4(robot, x, torque, dt);
    return x;
  };
  const JointState ref = integrate(1e-4, 1.0, u);
  const double e1 = (integrate(0.02, 1.0, u).q - ref.q).norm();
  const double e2 = (integrate(0.01, 1.0, u).q - ref.q).norm();
  const double order = std::log2(e1 / e2);

  // Energy with zero torque on the planar arm.
  const double E0 = kinetic_energy(robot, x0, ModelVariant::truth);
  const JointState xe = integrate(1e-3, 2.0, Eigen::Vector2d::Zero());
  const double drift = std::abs(kinetic_energy(robot, xe, ModelVariant::truth) - E0) / E0;

  // Skew symmetry of dM/dt - 2C.
  double skew = 0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector2d q(uq(rng), uq(rng)), v(uv(rng), uv(rng));
    const double h = 1e-6;
    const Eigen::MatrixXd Mdot = (mass_matrix(robot, q + h * v, ModelVariant::truth) -
                                  mass_matrix(robot, q - h * v, ModelVariant::truth)) /
                                 (2 * h);
    const Eigen::MatrixXd S = Mdot - 2 * coriolis_matrix(robot, q, v, ModelVariant::truth);
    skew = std::max(skew, (S + S.transpose()).cwiseAbs().maxCoeff() / std::max(1.0, S.norm()));
  }

  // QP against exhaustive enumeration.
  std::uniform_real_distribution<double> ua(-1, 1), ub(-3, 3), un(-8, 8);
  std::uniform_int_distribution<int> nrows(1, 5);
  double qp_err = 0;
  std::size_t status_mismatch = 0;
  for (std::size_t t = 0; t < kQpInstances; ++t) {
    QPProblem p;
    p.u_nom = Eigen::Vector2d(un(rng), un(rng));
    const int r = nrows(rng);
    for (int j = 0; j < r; ++j) {
      ConstraintRow row;
      row.a = Eigen::Vector2d(ua(rng), ua(rng));
      row.b = ub(rng);
      p.rows.push_back(row);
    }
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(r + 4, 2);
    Eigen::VectorXd b(r + 4);
    for (int j = 0; j < r; ++j) {
      N.row(j) = p.rows[static_cast<std::size_t>(j)].a.transpose();
      b(j) = p.rows[static_cast<std::size_t>(j)].b;
    }
    N.bottomRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
    b.tail(4).setConstant(p.u_max);
    const FilterResult res = solve_qp(p);
    const qp_oracle::Result o = qp_oracle::enumerate(
        Eigen::Vector2d::Ones(), p.u_nom.cwiseMax(-p.u_max).cwiseMin(p.u_max), N, b);
    if (o.feasible != (res.status == QPStatus::optimal)) {
      ++status_mismatch;
    } else if (o.feasible) {
      qp_err = std::max(qp_err, (res.u_star - o.x).norm());
    }
  }

  const bool ok = grad_err <= kGradTol && hess_err <= kHessTol && order >= kMinOrder &&
                  drift <= kEnergyTol && status_mismatch == 0 && qp_err <= kQpTol &&
                  skew <= kSkewTol;
  return {ok, fmt("grad %.1e (<= %.0e), hess %.1e (<= %.0e), RK4 order %.2f (>= %.1f), "
                  "energy %.1e (<= %.0e), QP %zu instances max err %.1e (<= %.0e) with %zu "
                  "feasibility mismatches, skew %.1e (<= %.0e)",
                  grad_err, kGradTol, hess_err, kHessTol, order, kMinOrder, drift, kEnergyTol,
                  kQpInstances, qp_err, kQpTol, status_mismatch, skew, kSkewTol)};
}

Outcome c9(const Context& ctx) {
  const DerivativeBoundReport r =
      verify_derivative_bounds(ctx.config.geom, ctx.tune.bounds, ctx.config.robot.q_max,
                               kDerivSamples, ctx.config.seed + 9);
  return {r.pass() && r.samples == kDerivSamples,
          fmt("%zu samples: %zu gradient and %zu Hessian violations, worst ratios %.3f and %.3f",
              r.samples, r.grad_violations, r.hess_violations, r.worst_grad_ratio,
              r.worst_hess_ratio)};
}

// Steps at which filtered+gp with lambda_bar forced to 0 departs from
// filtered-gp, and the largest torque difference.
std::pair<std::size_t, double> margin_free_diff(EpisodeConfig e) {
  e.mode = FilterMode::filtered_gp;
  e.lambda_bar_override = 0.0;
  const EpisodeLog robust = run_episode(e);
  e.mode = FilterMode::filtered_nogp;
  const EpisodeLog plain = run_episode(e);
  if (robust.rows.size() != plain.rows.size()) return {robust.rows.size() + plain.rows.size(), INFINITY};
  std::size_t differ = 0;
  double max_diff = 0;
  for (std::size_t k = 0; k < plain.rows.size(); ++k) {
    differ += robust.rows[k].u != plain.rows[k].u;
    max_diff = std::max(max_diff, (robust.rows[k].u - plain.rows[k].u).cwiseAbs().maxCoeff());
  }
  return {differ, max_diff};
}

Outcome c10(const Context& ctx) {
  RunConfig c = ctx.config;
  c.robot.tip_mass = 0;
  const GPBuild b = build_gp(c);
  const auto [differ, max_diff] = margin_free_diff(c.episode(&b.model));
  // Same inputs with the round-off residuals replaced by exact zeros.
  Dataset zero = b.train;
  zero.Y.setZero();
  const GPModel flat = GPModel::fit(zero, c.gp.kernels, b.model.rkhs_bound());
  const auto [differ0, max_diff0] = margin_free_diff(c.episode(&flat));
  return {differ == 0,
          fmt("tip_mass 0, lambda_bar forced to 0: %zu steps differ from the mismatch-free filter "
              "(max |du| = %.3g; training |Y| <= %.2g from round-off); with exactly zero targets "
              "%zu steps differ (max |du| = %.3g)",
              differ, max_diff, b.train.Y.cwiseAbs().maxCoeff(), differ0, max_diff0)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string config_path = SCBF_SOURCE_DIR "/configs/paper_2dof.yaml";
  std::vector<int> expected;
  std::vector<int> only;
  app.add_option("--config", config_path, "run configuration");
  app.add_option("--expect-fail", expected, "criteria known to fail")->delimiter(',');
  app.add_option("--only", only, "run just these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const std::set<int> xfail(expected.begin(), expected.end());
  const std::set<int> selected(only.begin(), only.end());

  Context ctx;
  ctx.config = load_config(config_path);
  ctx.config.output.clear();
  ctx.gp = build_gp(ctx.config);
  {
    const auto t0 = std::chrono::steady_clock::now();
    compute_model_bounds(ctx.config.robot, ctx.config.geom, ctx.config.tuning.grid_resolution);
    ctx.bounds_seconds = seconds_since(t0);
  }
  ctx.tune = run_tuning(ctx.config, ctx.gp.model);
  ctx.matrix = run_matrix(ctx.config, ctx.gp.model);

  const std::vector<std::pair<int, std::function<Outcome(const Context&)>>> criteria{
      {1, c1}, {2, c2}, {3, c3}, {4, c4}, {5, c5}, {6, c6}, {7, c7}, {8, c8}, {9, c9}, {10, c10}};
  int unexpected = 0;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const bool xf = xfail.count(id) > 0;
    const char* tag = o.pass ? (xf ? "XPASS" : "PASS") : (xf ? "XFAIL" : "FAIL");
    if (o.pass == xf) ++unexpected;
    std::printf("criterion %2d  %-5s  %s  [%.1f s]\n", id, tag, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (id == 4) std::printf("  note: %s\n", bound_note(ctx).c_str());
    if (id == 6) std::printf("  note: diagnostic small-delta grid, %s\n", sweep_note(ctx).c_str());
  }
  std::printf("%s: %d unexpected result(s)\n", unexpected ? "FAILED" : "OK", unexpected);
  return unexpected ? 1 : 0;
}
