#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "scbf/sim_harness.hpp"

using namespace scbf;

namespace {

RobotParams reference_robot() {
  RobotParams r;
  r.q_ini = std::numbers::pi / 12;
  r.tip_mass = 0.2;
  return r;
}

EpisodeConfig short_episode(FilterMode mode) {
  EpisodeConfig c;
  c.robot = reference_robot();
  c.geom = {c.robot.q_ini, 0.05};
  c.reference = singularity_seeking_reference(c.robot, c.geom, 0.2, 1.5);
  c.mode = mode;
  return c;
}

}  // namespace

TEST(Reference, VelocityIsPositionDerivative) {
  TrajectorySpec s{{{0.4, 0.3, 0.2, 0.1}, {0.2, 0.7, -1.0, -0.3}}, 5.0};
  for (double t = 0.1; t < 5; t += 0.37) {
    const Eigen::VectorXd fd = (s.position(t + 1e-6) - s.position(t - 1e-6)) / 2e-6;
    EXPECT_LT((s.velocity(t) - fd).norm(), 1e-7);
  }
  EXPECT_NO_THROW(s.validate(reference_robot()));
}

TEST(Reference, ValidationRejectsOutOfBox) {
  const RobotParams r = reference_robot();
  TrajectorySpec s{{{1.2, 0.1, 0, 0}, {0, 0, 0, 0}}, 5.0};
  EXPECT_THROW(s.validate(r), std::invalid_argument);
  s.joints[0] = {0.5, 1.0, 0, 0};  // peak velocity pi > v_max
  EXPECT_THROW(s.validate(r), std::invalid_argument);
  s.joints.pop_back();
  s.joints[0] = {};
  EXPECT_THROW(s.validate(r), std::invalid_argument);
}

TEST(Reference, SingularitySeekingEntersTheCone) {
  const RobotParams r = reference_robot();
  const SingularityGeometry g{r.q_ini, 0.05};
  const TrajectorySpec s = singularity_seeking_reference(r, g);
  EXPECT_NO_THROW(s.validate(r));
  EXPECT_LT(s.velocity(0).norm(), 1e-12);
  EXPECT_NEAR(s.position(0)(1), 0.95 * r.q_max, 1e-12);
  double zmin = 1;
  for (double t = 0; t < s.duration; t += 0.01) zmin = std::min(zmin, z_value(g, s.position(t)));
  EXPECT_LT(zmin, 0.0);
}

TEST(PID, ZeroErrorGivesZeroTorque) {
  const JointState x{Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.3, 0.4)};
  const PIDOutput o = pid_nominal(PIDGains{}, x, x.q, x.v, Eigen::Vector2d::Zero(), 1e-3, 5);
  EXPECT_LT(o.u.norm(), 1e-15);
  EXPECT_LT(o.integral.norm(), 1e-15);
}

TEST(PID, IntegralIsClampedAndTermsAdd) {
  const PIDGains k{2.0, 4.0, 3.0};
  const JointState x{Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0)};
  const PIDOutput o = pid_nominal(k, x, Eigen::Vector2d(1, -1), Eigen::Vector2d(0.5, 0),
                                  Eigen::Vector2d(1.2, 0), 0.1, 5);
  EXPECT_NEAR(o.integral(0), 1.25, 1e-15);  // 1.3 clamped to 5 / 4
  EXPECT_NEAR(o.integral(1), -0.1, 1e-15);
  EXPECT_NEAR(o.u(0), 2 * 1 + 4 * 1.25 + 3 * 0.5, 1e-12);
  EXPECT_NEAR(o.u(1), -2 - 0.4, 1e-12);
  EXPECT_THROW((PIDGains{-1, 0, 0}.validate()), std::invalid_argument);
}

TEST(PID, StepResponseSettles) {
  RobotParams r = reference_robot();
  r.tip_mass = 0;
  const PIDGains k;
  JointState x{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  const Eigen::Vector2d target(0.3, -0.2);
  Eigen::VectorXd integral = Eigen::Vector2d::Zero();
  const double dt = 1e-3;
  for (int step = 0; step < 2000; ++step) {
    const PIDOutput o = pid_nominal(k, x, target, Eigen::Vector2d::Zero(), integral, dt, r.u_max);
    integral = o.integral;
    const Eigen::VectorXd u = o.u.cwiseMax(-r.u_max).cwiseMin(r.u_max);
    x = step_rk4(r, x, u, dt, ModelVariant::truth);
  }
  EXPECT_LT((x.q - target).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Mode, ParseRoundTrip) {
  for (FilterMode m : {FilterMode::filtered_gp, FilterMode::filtered_nogp, FilterMode::unfiltered}) {
    EXPECT_EQ(parse_filter_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_filter_mode("filtered"), std::invalid_argument);
}

TEST(Episode, DeterministicAndSeedSensitive) {
  EpisodeConfig c = short_episode(FilterMode::filtered_nogp);
  c.seed = 3;
  const EpisodeLog a = run_episode(c), b = run_episode(c);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    ASSERT_EQ(a.rows[i].q, b.rows[i].q);
    ASSERT_EQ(a.rows[i].u, b.rows[i].u);
  }
  c.seed = 4;
  const EpisodeLog d = run_episode(c);
  EXPECT_NE(a.rows.front().q, d.rows.front().q);
}

TEST(Episode, NeedsGpForLearnedMode) {
  EXPECT_THROW(run_episode(short_episode(FilterMode::filtered_gp)), std::invalid_argument);
}

TEST(Episode, TorquesStayInBox) {
  for (FilterMode m : {FilterMode::filtered_nogp, FilterMode::unfiltered}) {
    const EpisodeLog log = run_episode(short_episode(m));
    EXPECT_FALSE(log.aborted) << log.abort_reason;
    EXPECT_LE(log.u_abs_max(), 5.0 + 1e-12);
    EXPECT_NEAR(log.rows.back().t, 1.5, 1e-9);
  }
}

TEST(Episode, CsvHeader) {
  const EpisodeLog log = run_episode(short_episode(FilterMode::unfiltered));
  std::stringstream ss;
  write_episode_csv(log, ss);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header,
            "t,q1,q2,v1,v2,qdd1,qdd2,unom1,unom2,u1,u2,z,h,lambda_x,qp_status,"
            "active_mask,slack_total");
  std::size_t lines = 0;
  for (std::string l; std::getline(ss, l);) ++lines;
  EXPECT_EQ(lines, log.rows.size());
}

TEST(Dataset, ResidualsVanishWithoutTipMass) {
  RobotParams r = reference_robot();
  r.tip_mass = 0;
  const TrajectorySpec ex{{{0.5, 0.3, 0, 0}, {0.4, 0.5, 0, 0.2}}, 2.0};
  const EpisodeLog log = generate_dataset(r, PIDGains{}, ex, 1e-3);
  const Dataset d = collect_residuals(log.samples(0.0), r, 1e-3);
  EXPECT_GT(d.size(), 1000u);
  EXPECT_LT(d.Y.cwiseAbs().maxCoeff(), 1e-9);
  r.tip_mass = 0.2;
  const Dataset d2 = collect_residuals(generate_dataset(r, PIDGains{}, ex, 1e-3).samples(0.5), r, 1e-3);
  EXPECT_GT(d2.Y.cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_GE(d2.t.minCoeff(), 0.5);
}

TEST(Spearman, KnownValues) {
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-15);
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-15);
  // Average ranks for ties: x ranks 1, 2.5, 2.5, 4; y ranks 1..4.
  const double r = spearman({1, 2, 2, 3}, {1, 2, 3, 4});
  const double mx = 2.5, my = 2.5;
  const double rx[] = {1, 2.5, 2.5, 4}, ry[] = {1, 2, 3, 4};
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  EXPECT_NEAR(r, sxy / std::sqrt(sxx * syy), 1e-15);
  EXPECT_TRUE(std::isnan(spearman({1, 1, 1}, {1, 2, 3})));
  EXPECT_THROW(spearman({1}, {1}), std::invalid_argument);
}

TEST(Sweep, SingleCellMatchesEpisode) {
  EpisodeConfig c = short_episode(FilterMode::filtered_nogp);
  const SweepResult s = sweep_gamma_delta(c, {12.0}, {40.0}, 20.0, 10.0, 2);
  c.barrier.gamma = 12.0;
  c.barrier.delta = 40.0;
  const EpisodeLog log = run_episode(c);
  EXPECT_EQ(s.z_min(0, 0), log.z_min());
  EXPECT_EQ(s.in_criterion(0, 0), 1);
  EXPECT_TRUE(s.failures[0].empty());
  std::stringstream ss;
  write_sweep_csv(s, ss);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "gamma,delta,z_min,in_criterion,failure");
}

TEST(Sweep, TrendOnSyntheticGrid) {
  SweepResult r;
  r.gammas = {1, 2, 3};
  r.deltas = {10, 20};
  r.z_min.resize(3, 2);
  r.z_min << 0.3, 0.2, 0.2, 0.1, 0.1, -0.1;
  r.in_criterion = Eigen::MatrixXi::Ones(3, 2);
  r.failures.assign(6, "");
  const SweepTrend t = sweep_trend(r);
  EXPECT_NEAR(t.rho_gamma, -1.0, 1e-12);
  EXPECT_NEAR(t.rho_delta, -1.0, 1e-12);
  EXPECT_EQ(t.unsafe_cells, 1u);
}
