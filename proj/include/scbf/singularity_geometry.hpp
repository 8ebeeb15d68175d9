#pragma once
// Parallel-link singularity measure for a two-link arm.
//
//   f(q) = [cos q1, sin q1, 0],  g(q) = [cos q12, sin q12, 0],
//   q12 = q1 + q2 + q_ini,
//   eta(q) = f(q)^T g(q),  z(q) = 1 - eps - eta(q).
//
// Sign convention: z' = -grad_eta(q)^T v.

#include <Eigen/Dense>

#include <array>
#include <functional>

namespace scbf {

struct SingularityGeometry {
  double q_ini = 0.0;
  double epsilon = 0.05;

  void validate() const;
};

struct DirectionVectors {
  Eigen::Vector3d f;
  Eigen::Vector3d g;
};

// First and second partials of the direction vectors: row i of df is
// d f_i / dq, d2f[i] is the Hessian of component f_i.
struct DirectionDerivatives {
  Eigen::Matrix<double, 3, 2> df;
  Eigen::Matrix<double, 3, 2> dg;
  std::array<Eigen::Matrix2d, 3> d2f;
  std::array<Eigen::Matrix2d, 3> d2g;
};

DirectionVectors direction_vectors(const SingularityGeometry& geom,
                                   const Eigen::Vector2d& q);
DirectionDerivatives direction_derivatives(const SingularityGeometry& geom,
                                           const Eigen::Vector2d& q);

double eta(const SingularityGeometry& geom, const Eigen::Vector2d& q);
double z_value(const SingularityGeometry& geom, const Eigen::Vector2d& q);

// Product rule over the three components, sum_i df_i g_i + f_i dg_i.
Eigen::Vector2d grad_eta(const SingularityGeometry& geom,
                         const Eigen::Vector2d& q);
Eigen::Matrix2d hess_eta(const SingularityGeometry& geom,
                         const Eigen::Vector2d& q);

using HessianFn =
    std::function<Eigen::Matrix2d(const SingularityGeometry&, const Eigen::Vector2d&)>;

// Smallest |q2| offset from the singular configuration that satisfies
// z >= 0, i.e. arccos(1 - eps).
double singular_cone_half_angle(const SingularityGeometry& geom);

}  // namespace scbf
