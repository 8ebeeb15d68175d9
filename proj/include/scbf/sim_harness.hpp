#pragma once
// Closed-loop episodes on the true plant: PID nominal control, optional
// safety filter, RK4 integration at a fixed step. Also the dataset
// episodes for the GP and the gamma-delta sweep.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scbf/barriers.hpp"
#include "scbf/gp_regression.hpp"
#include "scbf/robot_model.hpp"
#include "scbf/safety_filter.hpp"
#include "scbf/singularity_geometry.hpp"

namespace scbf {

struct JointReference {
  double amplitude = 0.0;  // rad
  double frequency = 0.0;  // Hz
  double phase = 0.0;      // rad
  double offset = 0.0;     // rad
};

// q_ref,i(t) = offset + amplitude sin(2 pi frequency t + phase)
struct TrajectorySpec {
  std::vector<JointReference> joints;
  double duration = 10.0;

  Eigen::VectorXd position(double t) const;
  Eigen::VectorXd velocity(double t) const;
  /// Throws std::invalid_argument if the reference leaves the q box or
  /// its velocity leaves the velocity box.
  void validate(const RobotParams& robot) const;
};

/// q1 held at 0; q2 swings from 0.95 q_max down to 1.2 cone half-angles
/// past the near edge of the singular cone, starting at rest at the top.
TrajectorySpec singularity_seeking_reference(const RobotParams& robot,
                                             const SingularityGeometry& geom,
                                             double frequency = 0.2,
                                             double duration = 10.0);

struct PIDGains {
  double kp = 200.0;
  double ki = 200.0;
  double kv = 10.0;

  void validate() const;
};

struct PIDOutput {
  Eigen::VectorXd u;
  Eigen::VectorXd integral;
};

/// u = kp e + ki I + kv (v_ref - v) with I advanced by e dt and clamped to
/// +-u_max / ki.
PIDOutput pid_nominal(const PIDGains& gains, const JointState& x,
                      const Eigen::VectorXd& ref_q, const Eigen::VectorXd& ref_v,
                      const Eigen::VectorXd& integral, double dt, double u_max);

enum class FilterMode { filtered_gp, filtered_nogp, unfiltered };
std::string to_string(FilterMode m);
FilterMode parse_filter_mode(const std::string& s);

struct EpisodeConfig {
  RobotParams robot;  // nominal model for the filter, truth for the plant
  SingularityGeometry geom;
  BarrierParams barrier;
  PIDGains pid;
  TrajectorySpec reference;
  double dt = 1e-3;
  FilterMode mode = FilterMode::filtered_gp;
  const GPModel* gp = nullptr;  // required for filtered_gp
  HessianFn hessian = hess_eta;
  SolverOptions solver;
  // Replaces the GP's lambda_bar in the rows when set (filtered+gp only).
  std::optional<double> lambda_bar_override;
  // Seed 0 starts at rest on the reference; other seeds perturb the
  // initial state by up to 0.05 rad and 0.1 rad/s.
  std::uint64_t seed = 0;
};

struct EpisodeRow {
  double t = 0.0;
  Eigen::VectorXd q, v, qdd, u_nom, u;
  double z = 0.0;
  double h = 0.0;
  double lambda_x = 0.0;
  QPStatus status = QPStatus::optimal;
  std::uint64_t active_mask = 0;
  double slack_total = 0.0;
};

struct EpisodeLog {
  std::vector<EpisodeRow> rows;
  bool aborted = false;
  std::string abort_reason;

  double z_min() const;
  double h_min() const;
  double v_abs_max() const;
  double u_abs_max() const;
  std::size_t count(QPStatus s) const;
  TrajectorySamples samples(double discard_before = 0.0) const;
};

// Columns: t, q1..qn, v1..vn, qdd1..qddn, unom1..unomn, u1..un, z, h,
// lambda_x, qp_status, active_mask, slack_total
void write_episode_csv(const EpisodeLog& log, std::ostream& os);

/// Integrates the true plant from the reference start. The episode stops
/// early (aborted = true) if q leaves the box or the state goes non-finite.
EpisodeLog run_episode(const EpisodeConfig& config);

struct SweepResult {
  std::vector<double> gammas;
  std::vector<double> deltas;
  Eigen::MatrixXd z_min;        // gamma index x delta index
  std::vector<std::string> failures;  // one per cell, empty when it ran through
  Eigen::MatrixXi in_criterion;  // gamma <= gamma* and delta >= delta*
};

/// Runs every (gamma, delta) cell on `threads` workers; cells are
/// independent and merged by index.
SweepResult sweep_gamma_delta(const EpisodeConfig& base,
                              const std::vector<double>& gammas,
                              const std::vector<double>& deltas,
                              double gamma_star, double delta_star,
                              std::size_t threads = 0);

/// Spearman rank correlation with average ranks for ties; NaN if either
/// side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct SweepTrend {
  double rho_gamma = 0.0;  // axis values vs z_min averaged over delta
  double rho_delta = 0.0;  // axis values vs z_min averaged over gamma
  std::size_t unsafe_cells = 0;  // in-criterion cells with z_min < 0 or a failure
};

SweepTrend sweep_trend(const SweepResult& r);

void write_sweep_csv(const SweepResult& r, std::ostream& os);

/// Unfiltered PID episode on the true plant; accelerations are the plant's
/// forward dynamics at the logged (x, u).
EpisodeLog generate_dataset(const RobotParams& robot, const PIDGains& pid,
                            const TrajectorySpec& excitation, double dt);

}  // namespace scbf
