#include "scbf/safety_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scbf {

std::string to_string(QPStatus s) {
  switch (s) {
    case QPStatus::optimal: return "optimal";
    case QPStatus::relaxed: return "relaxed";
    case QPStatus::infeasible: return "infeasible";
  }
  return "?";
}

namespace {

struct DualResult {
  Eigen::VectorXd x;
  bool feasible = false;
  std::size_t iterations = 0;
};

// min 1/2 x^T diag(G) x + g^T x  s.t.  N x <= b  (one constraint per row of N).
// Goldfarb-Idnani dual active set; ties go to the lowest index.
DualResult dual_active_set(const Eigen::VectorXd& G, const Eigen::VectorXd& g,
                           const Eigen::MatrixXd& N, const Eigen::VectorXd& b,
                           double tol, std::size_t max_iterations) {
  const Eigen::Index nv = G.size();
  const Eigen::Index m = N.rows();
  const Eigen::VectorXd Ginv = G.cwiseInverse();
  const double inf = std::numeric_limits<double>::infinity();

  DualResult res;
  res.x = -Ginv.cwiseProduct(g);
  std::vector<std::size_t> A;
  std::vector<double> u;  // multipliers of A

  auto slack = [&](Eigen::Index j) { return b(j) - N.row(j).dot(res.x); };

  while (true) {
    Eigen::Index p = -1;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (std::find(A.begin(), A.end(), static_cast<std::size_t>(j)) != A.end()) continue;
      if (slack(j) < -tol * std::max(1.0, N.row(j).norm())) {
        p = j;
        break;
      }
    }
    if (p < 0) {
      // The working set is assumed tight; confirm it before certifying.
      res.feasible = true;
      for (std::size_t j : A) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (slack(jj) < -1e-7 * std::max(1.0, N.row(jj).norm()) * std::max(1.0, std::abs(b(jj)))) {
          res.feasible = false;
        }
      }
      return res;
    }
    // Work in the >= form c^T x >= d with c = -n.
    const Eigen::VectorXd cp = -N.row(p).transpose();
    double up = 0.0;
    while (true) {
      if (++res.iterations > max_iterations) {
        throw std::runtime_error("QP solver exceeded its iteration limit");
      }
      const auto k = static_cast<Eigen::Index>(A.size());
      // Orthogonal split of D c_p (D = G^-1/2) against the scaled working
      // set: r from the triangular factor, z from the complement, so z is
      // exactly zero once the working set spans the space.
      const Eigen::VectorXd D = Ginv.cwiseSqrt();
      Eigen::MatrixXd B(nv, k);
      for (Eigen::Index i = 0; i < k; ++i) {
        B.col(i) = -D.cwiseProduct(
            N.row(static_cast<Eigen::Index>(A[static_cast<std::size_t>(i)])).transpose());
      }
      const Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
      const Eigen::MatrixXd Q = qr.householderQ();
      const Eigen::VectorXd w = Q.transpose() * D.cwiseProduct(cp);
      const Eigen::VectorXd r =
          qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(w.head(k));
      const Eigen::VectorXd z = D.cwiseProduct(Q.rightCols(nv - k) * w.tail(nv - k));

      double t1 = inf;
      std::size_t drop = 0;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (r(i) > 1e-12) {
          const double ti = u[static_cast<std::size_t>(i)] / r(i);
          if (ti < t1) {
            t1 = ti;
            drop = static_cast<std::size_t>(i);
          }
        }
      }
      const double zc = z.dot(cp);
      const bool full_step =
          z.norm() > 1e-12 * Ginv.cwiseProduct(cp).norm() && zc > 0.0;
      // In the >= form the residual c_p^T x - d_p equals slack(p) < 0.
      const double t2 = full_step ? -slack(p) / zc : inf;
      const double t = std::min(t1, t2);
      if (t == inf) {
        return res;  // primal infeasible
      }
      if (full_step) res.x += t * z;
      for (Eigen::Index i = 0; i < k; ++i) u[static_cast<std::size_t>(i)] -= t * r(i);
      up += t;
      if (full_step && t2 <= t1) {
        A.push_back(static_cast<std::size_t>(p));
        u.push_back(up);
        break;
      }
      A.erase(A.begin() + static_cast<std::ptrdiff_t>(drop));
      u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }
}

Eigen::VectorXd clamp_box(const Eigen::VectorXd& u, double u_max) {
  return u.cwiseMax(-u_max).cwiseMin(u_max);
}

std::string box_label(std::size_t idx) {
  return (idx % 2 == 0 ? "u_upper_" : "u_lower_") + std::to_string(idx / 2 + 1);
}

}  // namespace

FilterResult solve_qp(const QPProblem& problem, const SolverOptions& opts) {
  const Eigen::Index n = problem.u_nom.size();
  const auto r = static_cast<Eigen::Index>(problem.rows.size());
  FilterResult out;
  out.slack = Eigen::VectorXd::Zero(r);

  bool finite = problem.u_nom.allFinite() && std::isfinite(problem.u_max) &&
                problem.u_max > 0.0;
  for (const auto& row : problem.rows) {
    if (row.a.size() != n) throw std::invalid_argument("QP row width does not match u");
    finite = finite && row.a.allFinite() && std::isfinite(row.b);
  }
  if (!finite) {
    out.status = QPStatus::infeasible;
    out.u_star = problem.u_nom.allFinite() ? clamp_box(problem.u_nom, problem.u_max)
                                           : Eigen::VectorXd::Zero(n);
    return out;
  }
  const Eigen::VectorXd u0 = clamp_box(problem.u_nom, problem.u_max);

  // Exact problem: rows, then the box.
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(r + 2 * n, n);
  Eigen::VectorXd b(r + 2 * n);
  for (Eigen::Index j = 0; j < r; ++j) {
    N.row(j) = problem.rows[static_cast<std::size_t>(j)].a.transpose();
    b(j) = problem.rows[static_cast<std::size_t>(j)].b;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    N(r + 2 * i, i) = 1.0;
    N(r + 2 * i + 1, i) = -1.0;
    b(r + 2 * i) = problem.u_max;
    b(r + 2 * i + 1) = problem.u_max;
  }
  DualResult exact = dual_active_set(Eigen::VectorXd::Ones(n), -u0, N, b,
                                     opts.feasibility_tol, opts.max_iterations);
  out.solve_iterations = exact.iterations;
  Eigen::VectorXd row_slack = Eigen::VectorXd::Zero(r);
  if (exact.feasible) {
    out.status = QPStatus::optimal;
    out.u_star = clamp_box(exact.x, problem.u_max);
  } else {
    // Relaxed problem over (u, s): a_j^T u - s_j <= b_j, box, -s_j <= 0.
    const Eigen::Index nv = n + r;
    Eigen::MatrixXd Nr = Eigen::MatrixXd::Zero(2 * r + 2 * n, nv);
    Eigen::VectorXd br = Eigen::VectorXd::Zero(2 * r + 2 * n);
    Nr.topLeftCorner(r + 2 * n, n) = N;
    br.head(r + 2 * n) = b;
    for (Eigen::Index j = 0; j < r; ++j) {
      Nr(j, n + j) = -1.0;
      Nr(r + 2 * n + j, n + j) = -1.0;
    }
    Eigen::VectorXd G(nv);
    G.head(n).setOnes();
    G.tail(r).setConstant(opts.slack_weight);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nv);
    g.head(n) = -u0;
    DualResult relaxed = dual_active_set(G, g, Nr, br, opts.feasibility_tol,
                                         opts.max_iterations);
    out.solve_iterations += relaxed.iterations;
    if (!relaxed.feasible) {
      out.status = QPStatus::infeasible;
      out.u_star = u0;
      return out;
    }
    out.status = QPStatus::relaxed;
    out.u_star = clamp_box(relaxed.x.head(n), problem.u_max);
    out.slack = relaxed.x.tail(r).cwiseMax(0.0);
    row_slack = out.slack;
  }
  // Active means holding with equality at the returned input, whether or
  // not the solver needed the constraint in its working set.
  const Eigen::VectorXd resid = N * out.u_star - b;
  for (Eigen::Index j = 0; j < r + 2 * n; ++j) {
    const double shift = j < r ? row_slack(j) : 0.0;
    const double tol = 1e-8 * std::max(1.0, N.row(j).norm()) * std::max(1.0, std::abs(b(j)));
    if (std::abs(resid(j) - shift) <= tol) out.active_set.push_back(static_cast<std::size_t>(j));
  }
  std::sort(out.active_set.begin(), out.active_set.end());
  for (std::size_t j : out.active_set) {
    if (j < 64) out.active_mask |= std::uint64_t{1} << j;
    out.active_labels.push_back(j < static_cast<std::size_t>(r)
                                    ? problem.rows[j].label()
                                    : box_label(j - static_cast<std::size_t>(r)));
  }
  return out;
}

std::vector<ConstraintRow> assemble_rows(const JointState& x,
                                         const SingularityGeometry& geom,
                                         const RobotParams& nominal,
                                         const MismatchEstimate& est,
                                         const BarrierParams& params,
                                         const HessianFn& hessian,
                                         bool* degenerate) {
  std::vector<ConstraintRow> rows;
  ConstraintRow sing = singularity_row(geom, params, nominal, x, est, hessian);
  const bool flat = sing.a.norm() < 1e-12;
  if (degenerate) *degenerate = flat;
  if (!flat || sing.b < 0.0) rows.push_back(std::move(sing));
  for (auto& row : velocity_rows(params, nominal, x, est)) rows.push_back(std::move(row));
  return rows;
}

MismatchEstimate gp_estimate(const GPModel* gp, const JointState& x, std::size_t dof,
                             double* lambda_x) {
  MismatchEstimate est = MismatchEstimate::none(dof);
  if (lambda_x) *lambda_x = 0.0;
  if (gp == nullptr) return est;
  Eigen::VectorXd input(2 * x.q.size());
  input << x.q, x.v;
  const Prediction p = gp->predict(input);
  est.mu = p.mean;
  est.lambda_bar = gp->uniform_bound();
  if (lambda_x) *lambda_x = gp->error_bound(p);
  return est;
}

FilterResult filter(const JointState& x, const Eigen::VectorXd& u_nom,
                    const SingularityGeometry& geom, const RobotParams& nominal,
                    const MismatchEstimate& est, const BarrierParams& params,
                    const HessianFn& hessian, const SolverOptions& opts) {
  bool degenerate = false;
  QPProblem problem{u_nom, assemble_rows(x, geom, nominal, est, params, hessian, &degenerate),
                    nominal.u_max};
  FilterResult res = solve_qp(problem, opts);
  res.h = h_value(geom, params, x);
  res.z = z_value(geom, x.q.head<2>());
  res.lambda_bar = est.lambda_bar;
  res.degenerate_row = degenerate;
  return res;
}

FilterResult filter(const JointState& x, const Eigen::VectorXd& u_nom,
                    const SingularityGeometry& geom, const RobotParams& nominal,
                    const GPModel* gp, const BarrierParams& params,
                    const HessianFn& hessian, const SolverOptions& opts) {
  double lambda_x = 0.0;
  const MismatchEstimate est = gp_estimate(gp, x, nominal.dof(), &lambda_x);
  FilterResult res = filter(x, u_nom, geom, nominal, est, params, hessian, opts);
  res.lambda_x = lambda_x;
  return res;
}

}  // namespace scbf
