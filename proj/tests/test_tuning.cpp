#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "scbf/tuning.hpp"

using namespace scbf;

namespace {

RobotParams reference_robot() {
  RobotParams r;
  r.q_ini = std::numbers::pi / 12;
  return r;
}

SingularityGeometry reference_geom() { return {std::numbers::pi / 12, 0.05}; }

const ModelBounds& reference_bounds() {
  static const ModelBounds b = compute_model_bounds(reference_robot(), reference_geom(), 100);
  return b;
}

SearchOptions quick() {
  SearchOptions o;
  o.coarse_grid = 8;
  o.starts = 3;
  o.max_evaluations = 400;
  return o;
}

}  // namespace

TEST(Tuning, NormFactorParsing) {
  EXPECT_EQ(parse_norm_factor("paper"), NormFactor::paper);
  EXPECT_EQ(parse_norm_factor(to_string(NormFactor::tight)), NormFactor::tight);
  EXPECT_THROW(parse_norm_factor("loose"), std::invalid_argument);
  EXPECT_DOUBLE_EQ(reference_bounds().norm_scale(NormFactor::paper), std::sqrt(3.0));
  EXPECT_DOUBLE_EQ(reference_bounds().norm_scale(NormFactor::tight), std::sqrt(2.0));
}

TEST(Tuning, DirectionDerivativeConstants) {
  const ModelBounds& b = reference_bounds();
  EXPECT_DOUBLE_EQ(b.eta_qmax, 3 * (1 + std::sqrt(2.0)));
  EXPECT_DOUBLE_EQ(b.eta_max2, 3 * (1 + 2 * std::sqrt(2.0) + 2));
  EXPECT_EQ(b.g_max, 0.0);
}

TEST(Tuning, InverseInertiaBoundsCoverRandomStates) {
  const RobotParams r = reference_robot();
  const ModelBounds& b = reference_bounds();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uq(-r.q_max, r.q_max);
  double seen_max = 0, seen_min = 1e300;
  for (int t = 0; t < 2000; ++t) {
    const Eigen::Vector2d q(uq(rng), uq(rng));
    const Eigen::Vector2d ev =
        mass_matrix(r, q, ModelVariant::nominal).inverse().eigenvalues().real();
    seen_max = std::max(seen_max, ev.maxCoeff());
    seen_min = std::min(seen_min, ev.minCoeff());
  }
  // Never below what random samples find, and not loose either.
  EXPECT_GE(b.m_max * (1 + 1e-9), seen_max);
  EXPECT_LE(b.m_min, seen_min * (1 + 1e-9));
  EXPECT_LT(b.m_max / seen_max, 1.001);
}

TEST(Tuning, CoriolisBoundCoversRandomStates) {
  const RobotParams r = reference_robot();
  const ModelBounds& b = reference_bounds();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uq(-r.q_max, r.q_max), uv(-2, 2);
  for (int t = 0; t < 2000; ++t) {
    const Eigen::Vector2d q(uq(rng), uq(rng)), v(uv(rng), uv(rng));
    const Eigen::MatrixXd C = coriolis_matrix(r, q, v, ModelVariant::nominal);
    const double c = Eigen::JacobiSVD<Eigen::MatrixXd>(C).singularValues()(0);
    EXPECT_LE(c, b.c_max * v.norm() * (1 + 1e-9));
  }
}

TEST(Tuning, RejectsCoarseGrid) {
  EXPECT_THROW(compute_model_bounds(reference_robot(), reference_geom(), 50), std::invalid_argument);
}

TEST(Tuning, DerivativeBoundsHoldAndCorruptionIsCaught) {
  const auto rep = verify_derivative_bounds(reference_geom(), reference_bounds(), std::numbers::pi / 3,
                                            10000, 7);
  EXPECT_TRUE(rep.pass());
  EXPECT_EQ(rep.samples, 10000u);
  EXPECT_LE(rep.worst_grad_ratio, 1.0);
  const HessianFn bad = [](const SingularityGeometry& g, const Eigen::Vector2d& q) {
    return Eigen::Matrix2d(hess_eta(g, q) + 20.0 * Eigen::Matrix2d::Identity());
  };
  const auto corrupt =
      verify_derivative_bounds(reference_geom(), reference_bounds(), std::numbers::pi / 3, 1000, 7, bad);
  EXPECT_FALSE(corrupt.pass());
  EXPECT_GT(corrupt.hess_violations, 0u);
}

TEST(Tuning, PsiAndXiIncreaseWithTheirInputs) {
  ModelBounds b = reference_bounds();
  const BarrierParams p;
  for (NormFactor f : {NormFactor::paper, NormFactor::tight}) {
    double prev = -1;
    for (double mu = 0; mu < 3; mu += 0.25) {
      const double x = xi(b, mu, f);
      EXPECT_GT(x, prev);
      prev = x;
      EXPECT_GT(psi(b, mu + 0.1, 10, p, 0.5, f), psi(b, mu, 10, p, 0.5, f));
      EXPECT_GT(psi(b, mu, 11, p, 0.5, f), psi(b, mu, 10, p, 0.5, f));
    }
    const double base = psi(b, 0.5, 10, p, 0.5, f);
    b.u_max += 1;
    EXPECT_GT(psi(b, 0.5, 10, p, 0.5, f), base);
    b.u_max -= 1;
  }
  EXPECT_GT(xi(b, 0.5, NormFactor::paper), xi(b, 0.5, NormFactor::tight));
}

TEST(Tuning, DeltaStarMonotoneInTorqueLimitAndFloor) {
  const RobotParams r = reference_robot();
  const BarrierParams p;
  ModelBounds b = reference_bounds();
  double prev = 0;
  for (double umax : {1.0, 3.0, 5.0, 8.0}) {
    b.u_max = umax;
    const double d = delta_star(b, nullptr, r, reference_geom(), p, quick()).value;
    EXPECT_GE(d, prev * (1 - 1e-9)) << "u_max " << umax;
    prev = d;
  }
  b = reference_bounds();
  prev = std::numeric_limits<double>::infinity();
  for (double floor : {1e-3, 1e-2, 1e-1, 1.0}) {
    SearchOptions o = quick();
    o.h_floor = floor;
    const SearchResult d = delta_star(b, nullptr, r, reference_geom(), p, o);
    EXPECT_LE(d.value, prev * (1 + 1e-9)) << "h_floor " << floor;
    EXPECT_GT(d.feasible_points, 0u);
    EXPECT_GE(h_value(reference_geom(), p, {d.x.head(2), d.x.tail(2)}), floor * (1 - 1e-9));
    prev = d.value;
  }
  SearchOptions o = quick();
  o.h_floor = 0;
  EXPECT_THROW(delta_star(b, nullptr, r, reference_geom(), p, o), std::invalid_argument);
}

TEST(Tuning, ActuationFailsWithoutTorque) {
  ModelBounds b = reference_bounds();
  b.u_max = 1e-3;
  const ActuationCheck c = check_actuation(b, 0.0, NormFactor::paper);
  EXPECT_FALSE(c.pass);
  EXPECT_LT(c.margin, 0.0);
  EXPECT_THROW(gamma_star(b, nullptr, reference_robot(), reference_geom(), BarrierParams{}, quick()),
               std::runtime_error);
}

TEST(Tuning, GammaStarWithoutGpIsPositiveAndConsistent) {
  const ModelBounds& b = reference_bounds();
  const SearchResult g =
      gamma_star(b, nullptr, reference_robot(), reference_geom(), BarrierParams{}, quick());
  const double s = std::sqrt(3.0);
  // Linear beta1 makes the ratio state independent without a GP.
  const double expect = (s * b.eta_qmax * b.m_max * b.u_max - xi(b, 0, NormFactor::paper)) /
                        (s * b.eta_qmax * b.v_max);
  EXPECT_NEAR(g.value, expect, 1e-9 * expect);
  EXPECT_GT(g.value, 0.0);
}

TEST(Tuning, NelderMeadFindsBoxedMaximum) {
  const auto f = [](const Eigen::VectorXd& x) {
    return -(x - Eigen::Vector3d(0.3, 2.0, -0.5)).squaredNorm();
  };
  const Eigen::VectorXd lo = Eigen::Vector3d::Constant(-1), hi = Eigen::Vector3d::Constant(1);
  const Eigen::VectorXd x = nelder_mead_max(f, Eigen::Vector3d::Zero(), lo, hi, 0.2, 5000);
  EXPECT_LT((x - Eigen::Vector3d(0.3, 1.0, -0.5)).norm(), 1e-5);
}
