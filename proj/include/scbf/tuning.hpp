#pragma once
// Model bound constants and the feasibility calculus for the barrier
// parameters: the lower limit delta* for delta and the upper limit gamma*
// for gamma under the actuator limit.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "scbf/barriers.hpp"
#include "scbf/gp_regression.hpp"
#include "scbf/robot_model.hpp"
#include "scbf/singularity_geometry.hpp"

namespace scbf {

// `paper` bounds |u| by sqrt(3) u_max and |v| by sqrt(3) v_max; `tight` uses
// sqrt(n).
enum class NormFactor { paper, tight };
std::string to_string(NormFactor f);
NormFactor parse_norm_factor(const std::string& s);

struct ModelBounds {
  std::size_t dof = 2;
  double m_min = 0.0;  // eigenvalue bounds of M^-1
  double m_max = 0.0;
  double c_max = 0.0;  // sup |C(q, v)| / |v|, spectral norm
  double g_max = 0.0;
  double f_q = 0.0;
  double g_q = 0.0;
  double f_q2 = 0.0;
  double g_q2 = 0.0;
  double eta_qmax = 0.0;  // 3 (f_q + g_q)
  double eta_max2 = 0.0;  // 3 (f_q2 + 2 f_q g_q + g_q2)
  double v_max = 0.0;
  double u_max = 0.0;
  double lambda_bar = 0.0;

  double norm_scale(NormFactor f) const;
};

/// Grid sweep over the q box (resolution >= 100 per axis; unit velocity
/// directions at the same resolution for c_max). The direction-vector
/// derivative bounds are the closed-form suprema of the trigonometric
/// direction vectors.
ModelBounds compute_model_bounds(const RobotParams& nominal,
                                 const SingularityGeometry& geom,
                                 std::size_t grid_resolution = 100);

double xi(const ModelBounds& b, double mu_norm, NormFactor f);

double psi(const ModelBounds& b, double mu_norm, double gamma,
           const BarrierParams& params, double z, NormFactor f);

struct SearchOptions {
  NormFactor norm_factor = NormFactor::paper;
  double h_floor = 1e-3;
  std::size_t coarse_grid = 20;  // points per state axis
  std::size_t starts = 8;        // local searches from the best grid points
  std::size_t max_evaluations = 2000;  // per local search
};

struct SearchResult {
  double value = 0.0;
  Eigen::VectorXd x;  // arg extremum [q, v]
  std::size_t feasible_points = 0;
};

/// max |mu(x)| over z >= 0 and the velocity box; zero without a GP.
SearchResult max_mu_norm(const GPModel* gp, const RobotParams& nominal,
                         const SingularityGeometry& geom,
                         const SearchOptions& opts);

/// max Psi / beta2(h) over z >= 0, |v_i| <= v_max, h >= h_floor.
/// Throws std::runtime_error if no grid point is feasible.
SearchResult delta_star(const ModelBounds& b, const GPModel* gp,
                        const RobotParams& nominal,
                        const SingularityGeometry& geom,
                        const BarrierParams& params, const SearchOptions& opts);

/// min over z >= 0, |v_i| <= v_max of
/// (s eta_qmax m_max u_max - xi(x)) / (s beta1'(z) eta_qmax v_max).
/// Throws std::runtime_error if the actuation check fails.
SearchResult gamma_star(const ModelBounds& b, const GPModel* gp,
                        const RobotParams& nominal,
                        const SingularityGeometry& geom,
                        const BarrierParams& params, const SearchOptions& opts);

struct ActuationCheck {
  bool pass = false;
  double margin = 0.0;  // u_max - xi_max / (s eta_qmax m_max)
  double xi_max = 0.0;
};

ActuationCheck check_actuation(const ModelBounds& b, double mu_norm_max,
                               NormFactor f);

struct DerivativeBoundReport {
  std::size_t samples = 0;
  std::size_t grad_violations = 0;
  std::size_t hess_violations = 0;
  double worst_grad_ratio = 0.0;  // max |Gamma| / eta_qmax
  double worst_hess_ratio = 0.0;  // max |H|_2 / eta_max2
  bool pass() const { return grad_violations == 0 && hess_violations == 0; }
};

/// Uniform samples over the q box; the Hessian comes from `hessian` so a
/// corrupted implementation can be injected.
DerivativeBoundReport verify_derivative_bounds(const SingularityGeometry& geom,
                                               const ModelBounds& b,
                                               double q_max, std::size_t samples,
                                               std::uint64_t seed,
                                               const HessianFn& hessian = hess_eta);

/// Box-projected Nelder-Mead maximization of f from x0.
Eigen::VectorXd nelder_mead_max(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                                const Eigen::VectorXd& hi, double step,
                                std::size_t max_evaluations);

}  // namespace scbf
