#pragma once
// Barrier values and the robust CBF rows a^T u <= b for the singularity
// barrier h = z' + gamma beta1(z) and the per-joint velocity barriers.
// Rows always use the nominal model; the mismatch enters through the GP
// mean mu(x) and the uniform margin lambda_bar.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "scbf/robot_model.hpp"
#include "scbf/singularity_geometry.hpp"

namespace scbf {

struct ClassKFunction {
  enum class Kind { linear, cubic, arctan };
  Kind kind = Kind::linear;

  double operator()(double s) const;
  double derivative(double s) const;
  std::string name() const;
  static ClassKFunction parse(const std::string& name);
};

struct BarrierParams {
  double gamma = 29.0;
  double delta = 1e5;
  double k = 500.0;  // velocity barrier gain
  ClassKFunction beta1{ClassKFunction::Kind::linear};
  ClassKFunction beta2{ClassKFunction::Kind::cubic};
  ClassKFunction beta3{ClassKFunction::Kind::arctan};

  void validate() const;
};

enum class RowTag { singularity, vel_upper, vel_lower };

struct ConstraintRow {
  Eigen::VectorXd a;
  double b = 0.0;
  RowTag tag = RowTag::singularity;
  std::size_t joint = 0;  // velocity rows only

  std::string label() const;  // "singularity", "vel_upper_1", ...
};

// Estimate of the mismatch used by the rows. Zero mean and zero margin
// gives the nominal (mismatch-free) conditions.
struct MismatchEstimate {
  Eigen::VectorXd mu;
  double lambda_bar = 0.0;

  static MismatchEstimate none(std::size_t dof);
};

double h_value(const SingularityGeometry& geom, const BarrierParams& params,
               const JointState& x);

/// dh/dt along qdd: -v^T H v - Gamma^T qdd - gamma beta1'(z) Gamma^T v.
double h_dot(const SingularityGeometry& geom, const BarrierParams& params,
             const JointState& x, const Eigen::VectorXd& qdd,
             const HessianFn& hessian = hess_eta);

/// (v_max - v_i, v_i + v_max) interleaved per joint.
Eigen::VectorXd velocity_barriers(const RobotParams& robot,
                                  const Eigen::VectorXd& v);

ConstraintRow singularity_row(const SingularityGeometry& geom,
                              const BarrierParams& params,
                              const RobotParams& nominal, const JointState& x,
                              const MismatchEstimate& est,
                              const HessianFn& hessian = hess_eta);

/// Upper then lower row for each joint.
std::vector<ConstraintRow> velocity_rows(const BarrierParams& params,
                                         const RobotParams& nominal,
                                         const JointState& x,
                                         const MismatchEstimate& est);

}  // namespace scbf
