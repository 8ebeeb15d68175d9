#pragma once
// Per-output Gaussian-process regression of the torque mismatch with the
// deterministic RKHS error bound
//
//   |mu(x) - d(x)| <= lambda(x) = sqrt(sum_i (B_i^2 - omega_i + M) sigma_i^2(x)),
//   omega_i = y_i^T (K_i + sigma_v^2 I)^-1 y_i,
//
// and its state-independent cap lambda_bar (sigma_i^2(x) <= k_i(x, x)).
// Kernel rows and the dot products of inference go through scbf::simd.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "scbf/robot_model.hpp"

namespace scbf {

// Squared-exponential kernel sf^2 exp(-|x1 - x2|^2 / (2 el^2)).
struct KernelParams {
  double sf = 0.01;
  double el = 1.0;

  double operator()(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) const;
  // max_x k(x, x); the kernel is stationary so this is sf^2 everywhere.
  double prior_variance() const { return sf * sf; }
  void validate() const;
};

// Time-aligned rows of a simulation log. One row per sample.
struct TrajectorySamples {
  Eigen::VectorXd t;
  Eigen::MatrixXd q;
  Eigen::MatrixXd v;
  Eigen::MatrixXd qdd;
  Eigen::MatrixXd u;
};

struct Dataset {
  Eigen::VectorXd t;
  Eigen::MatrixXd q;
  Eigen::MatrixXd v;
  Eigen::MatrixXd qdd;
  Eigen::MatrixXd u;
  Eigen::MatrixXd Y;  // residual torques against the nominal model
  double sigma_v2 = 1e-3;

  std::size_t size() const { return static_cast<std::size_t>(Y.rows()); }
  std::size_t dof() const { return static_cast<std::size_t>(Y.cols()); }
  // GP inputs x = [q, v], one row per sample.
  Eigen::MatrixXd inputs() const;
  void validate() const;
};

/// Residuals Y = u - M_nom qdd - C_nom v - G_nom for every logged row.
/// Throws std::invalid_argument on misaligned or non-finite rows.
Dataset collect_residuals(const TrajectorySamples& log,
                          const RobotParams& robot, double sigma_v2);

/// `count` rows drawn uniformly without replacement, kept in time order.
Dataset subsample(const Dataset& data, std::size_t count, std::uint64_t seed);

/// Rows of `data` that were not selected by subsample(data, count, seed).
Dataset complement(const Dataset& data, const Dataset& subset);

// CSV columns: t, q1..qn, v1..vn, qdd1..qddn, u1..un, Y1..Yn
void write_dataset_csv(const Dataset& data, std::ostream& os);
Dataset read_dataset_csv(std::istream& is, double sigma_v2);

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  // Largest negative posterior variance clamped to zero (round-off).
  double variance_clamp = 0.0;
};

class GPModel {
 public:
  /// Factorizes K_i + sigma_v^2 I per output with jitter escalation
  /// (1e-10, x10, up to 1e-6). Throws std::runtime_error if the Gram
  /// matrix stays indefinite.
  static GPModel fit(const Dataset& data,
                     const std::vector<KernelParams>& kernels,
                     const Eigen::VectorXd& rkhs_bound);

  GPModel with_rkhs_bounds(const Eigen::VectorXd& rkhs_bound) const;

  Prediction predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd mean(const Eigen::VectorXd& x) const;

  /// lambda(x). Throws std::domain_error when some B_i^2 - omega_i + M <= 0.
  double error_bound(const Eigen::VectorXd& x) const;
  double error_bound(const Prediction& p) const;
  /// lambda_bar, using max_x k_i(x, x) = sf_i^2 of the stationary kernel.
  double uniform_bound() const;
  /// B_i^2 - omega_i + M, checked to be positive.
  double bound_radicand(std::size_t i) const;

  std::size_t input_dim() const { return static_cast<std::size_t>(X_.cols()); }
  std::size_t output_dim() const { return outputs_.size(); }
  std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }
  double sigma_v2() const { return sigma_v2_; }
  const Eigen::MatrixXd& inputs() const { return X_; }
  const Eigen::MatrixXd& targets() const { return Y_; }
  const Eigen::VectorXd& rkhs_bound() const { return B_; }
  const KernelParams& kernel(std::size_t i) const { return outputs_[i].kernel; }
  const Eigen::VectorXd& alpha(std::size_t i) const { return outputs_[i].alpha; }
  double omega(std::size_t i) const { return outputs_[i].omega; }
  double jitter(std::size_t i) const { return outputs_[i].jitter; }

  // Text format, see docs/file_formats.md.
  void save(std::ostream& os) const;
  static GPModel load(std::istream& is);

 private:
  struct Output {
    KernelParams kernel;
    // Lower Cholesky factor of K + (sigma_v^2 + jitter) I, row-major so the
    // forward substitution runs over contiguous rows.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> chol;
    Eigen::VectorXd alpha;
    double omega = 0.0;
    double jitter = 0.0;
  };

  void kernel_row(const Output& out, const Eigen::VectorXd& x,
                  Eigen::VectorXd& k) const;

  Eigen::MatrixXd X_;  // M x input_dim, column-major (one array per input)
  Eigen::MatrixXd Y_;  // M x output_dim
  double sigma_v2_ = 0.0;
  std::vector<Output> outputs_;
  Eigen::VectorXd B_;
};

/// sqrt(y^T (K + jitter I)^-1 y): RKHS norm of the kernel interpolant of
/// (X, y). A lower bound on the norm of any RKHS function through the data.
double interpolant_rkhs_norm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const KernelParams& kernel, double jitter);

/// Validation-calibrated RKHS bounds: the smallest B_i for which the bound
/// holds on the held-out rows (r_i = max_j |mu_i - y_ij| / sigma_i), with
/// the excess scaled by `safety_factor`:
///   B_i^2 = omega_i - M + (safety_factor * r_i)^2.
Eigen::VectorXd calibrate_rkhs_bounds(const GPModel& model,
                                      const Eigen::MatrixXd& X_validation,
                                      const Eigen::MatrixXd& Y_validation,
                                      double safety_factor);

}  // namespace scbf
