#pragma once
// Planar serial manipulator: inertia, Christoffel-form Coriolis matrix,
// gravity, forward dynamics and a fixed-step RK4 integrator.
//
// Link k (0-based) points along the absolute angle
//   theta_0 = q_0,  theta_k = q_0 + ... + q_k + q_ini   (k >= 1),
// so q_ini rotates the second link (and everything distal to it) relative
// to the first. Links are uniform solid cylinders; the optional tip mass is
// a point mass at the distal end of the last link.

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace scbf {

struct LinkParams {
  double length = 0.5;     // m
  double radius = 0.01;    // m
  double density = 7.8e3;  // kg/m^3

  double mass() const;
  // Centre-of-mass inertia of a solid cylinder about a transverse axis.
  double com_inertia() const;
  void validate() const;
};

// Selects which dynamic model is evaluated. The safety filter only ever
// sees `nominal`; the simulated plant is `truth` (nominal + tip mass).
enum class ModelVariant { nominal, truth };

struct RobotParams {
  std::vector<LinkParams> links{LinkParams{}, LinkParams{}};
  double q_ini = 0.0;     // rad
  double q_max = 1.0471975511965976;  // rad, q_min = -q_max
  double v_max = 2.0;     // rad/s, v_min = -v_max
  double u_max = 5.0;     // N*m, u_min = -u_max
  double tip_mass = 0.0;  // kg, hidden from the filter
  bool planar = true;     // horizontal plane: G(q) = 0
  double gravity = 9.81;  // m/s^2, used only when !planar

  std::size_t dof() const { return links.size(); }
  void validate() const;
};

struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd v;

  bool finite() const { return q.allFinite() && v.allFinite(); }
};

Eigen::MatrixXd mass_matrix(const RobotParams& robot, const Eigen::VectorXd& q,
                            ModelVariant variant);

// C(q, v) built from Christoffel symbols of M, so that dM/dt - 2C is
// skew-symmetric.
Eigen::MatrixXd coriolis_matrix(const RobotParams& robot,
                                const Eigen::VectorXd& q,
                                const Eigen::VectorXd& v, ModelVariant variant);

Eigen::VectorXd gravity_vector(const RobotParams& robot,
                               const Eigen::VectorXd& q, ModelVariant variant);

/// Joint accelerations M^-1 (u - C v - G) for the selected model, solved by
/// Cholesky. Throws std::runtime_error if M is not numerically positive
/// definite.
Eigen::VectorXd forward_dynamics(const RobotParams& robot, const JointState& x,
                                 const Eigen::VectorXd& u,
                                 ModelVariant variant);

/// Ground-truth torque mismatch d of the uncertain model
///   v' = M_nom^-1 (u - C_nom v - G_nom - d),
/// evaluated as (M_true - M_nom) a + (C_true - C_nom) v + (G_true - G_nom)
/// with a the true-plant acceleration under input u. Because the hidden
/// mass is inertial, d depends on u through a.
Eigen::VectorXd mismatch_truth(const RobotParams& robot, const JointState& x,
                               const Eigen::VectorXd& u);

/// One classical RK4 step of the selected plant with zero-order-hold u.
JointState step_rk4(const RobotParams& robot, const JointState& x,
                    const Eigen::VectorXd& u, double dt,
                    ModelVariant variant = ModelVariant::truth);

double kinetic_energy(const RobotParams& robot, const JointState& x,
                      ModelVariant variant);

/// End-effector position Jacobian of a two-link arm. Throws
/// std::invalid_argument for other link counts.
Eigen::Matrix2d jacobian(const RobotParams& robot, const Eigen::VectorXd& q);

}  // namespace scbf
