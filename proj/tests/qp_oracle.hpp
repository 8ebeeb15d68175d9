#pragma once
// Exhaustive active-set enumeration, shared by the unit and acceptance tests.

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <vector>

namespace qp_oracle {

// Brute-force oracle for min 1/2 (x - c)^T diag(w) (x - c) s.t. N x <= b:
// try every active set of size <= dim, solve the KKT system, keep the best
// feasible candidate.
struct Result {
  bool feasible = false;
  Eigen::VectorXd x;
};

inline Result enumerate(const Eigen::VectorXd& w, const Eigen::VectorXd& c,
                       const Eigen::MatrixXd& N, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(w.size());
  const int m = static_cast<int>(N.rows());
  Result best;
  double best_f = std::numeric_limits<double>::infinity();
  std::vector<int> idx;
  auto consider = [&]() {
    const int k = static_cast<int>(idx.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = w.asDiagonal();
    rhs.head(n) = w.cwiseProduct(c);
    for (int j = 0; j < k; ++j) {
      K.block(0, n + j, n, 1) = N.row(idx[j]).transpose();
      K.block(n + j, 0, 1, n) = N.row(idx[j]);
      rhs(n + j) = b(idx[j]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) return;
    const Eigen::VectorXd x = lu.solve(rhs).head(n);
    if (((N * x - b).array() > 1e-9).any()) return;
    const double f = 0.5 * (x - c).dot(w.cwiseProduct(x - c));
    if (f < best_f) {
      best_f = f;
      best.feasible = true;
      best.x = x;
    }
  };
  // Recursive subset walk over sizes 0..n.
  std::function<void(int)> walk = [&](int start) {
    consider();
    if (static_cast<int>(idx.size()) == n) return;
    for (int j = start; j < m; ++j) {
      idx.push_back(j);
      walk(j + 1);
      idx.pop_back();
    }
  };
  walk(0);
  return best;
}

}  // namespace qp_oracle
