#pragma once
// Minimum-deviation safety filter
//
//   min 1/2 |u - u_nom|^2  s.t.  a_j^T u <= b_j,  |u_i| <= u_max,
//
// solved by a dual active-set method (Goldfarb-Idnani) that needs no
// feasible starting point and certifies infeasibility. Infeasible problems
// are re-solved with quadratically penalized slacks on the CBF rows; the
// box is never relaxed.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scbf/barriers.hpp"
#include "scbf/gp_regression.hpp"

namespace scbf {

struct QPProblem {
  Eigen::VectorXd u_nom;
  std::vector<ConstraintRow> rows;
  double u_max = 5.0;
};

enum class QPStatus { optimal, relaxed, infeasible };
std::string to_string(QPStatus s);

struct FilterResult {
  Eigen::VectorXd u_star;
  QPStatus status = QPStatus::optimal;
  // Constraints holding with equality at u_star, as indices into the row
  // list; box constraints follow the rows as
  // rows.size() + 2 i (upper) and rows.size() + 2 i + 1 (lower).
  std::vector<std::size_t> active_set;
  std::uint64_t active_mask = 0;
  Eigen::VectorXd slack;  // per row, zero unless relaxed
  std::size_t solve_iterations = 0;
  std::vector<std::string> active_labels;

  // Diagnostics filled by filter().
  double h = 0.0;
  double z = 0.0;
  double lambda_x = 0.0;
  double lambda_bar = 0.0;
  bool degenerate_row = false;
};

struct SolverOptions {
  double slack_weight = 1e6;
  double feasibility_tol = 1e-9;
  std::size_t max_iterations = 500;
};

FilterResult solve_qp(const QPProblem& problem, const SolverOptions& opts = {});

/// Assembles the singularity and velocity rows at x with the nominal model
/// and the GP estimate (gp == nullptr means no learned correction), clamps
/// u_nom into the box and solves.
FilterResult filter(const JointState& x, const Eigen::VectorXd& u_nom,
                    const SingularityGeometry& geom, const RobotParams& nominal,
                    const GPModel* gp, const BarrierParams& params,
                    const HessianFn& hessian = hess_eta,
                    const SolverOptions& opts = {});

/// Same with an explicit mismatch estimate; lambda_x is left at zero.
FilterResult filter(const JointState& x, const Eigen::VectorXd& u_nom,
                    const SingularityGeometry& geom, const RobotParams& nominal,
                    const MismatchEstimate& est, const BarrierParams& params,
                    const HessianFn& hessian = hess_eta,
                    const SolverOptions& opts = {});

/// GP mean and uniform margin at x (zero estimate without a GP); the
/// pointwise bound lambda(x) goes to `lambda_x` when given.
MismatchEstimate gp_estimate(const GPModel* gp, const JointState& x, std::size_t dof,
                             double* lambda_x = nullptr);

/// Rows used by filter(); degenerate singularity rows with b >= 0 are
/// dropped and flagged through `degenerate`.
std::vector<ConstraintRow> assemble_rows(const JointState& x,
                                         const SingularityGeometry& geom,
                                         const RobotParams& nominal,
                                         const MismatchEstimate& est,
                                         const BarrierParams& params,
                                         const HessianFn& hessian,
                                         bool* degenerate = nullptr);

}  // namespace scbf
