#include "scbf/singularity_geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace scbf {

void SingularityGeometry::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("epsilon must lie in (0, 1)");
  }
  if (!std::isfinite(q_ini)) throw std::invalid_argument("q_ini not finite");
}

DirectionVectors direction_vectors(const SingularityGeometry& geom,
                                   const Eigen::Vector2d& q) {
  const double q12 = q(0) + q(1) + geom.q_ini;
  return {Eigen::Vector3d(std::cos(q(0)), std::sin(q(0)), 0.0),
          Eigen::Vector3d(std::cos(q12), std::sin(q12), 0.0)};
}

DirectionDerivatives direction_derivatives(const SingularityGeometry& geom,
                                           const Eigen::Vector2d& q) {
  const double c1 = std::cos(q(0));
  const double s1 = std::sin(q(0));
  const double q12 = q(0) + q(1) + geom.q_ini;
  const double c12 = std::cos(q12);
  const double s12 = std::sin(q12);

  DirectionDerivatives d;
  d.df << -s1, 0.0,
          c1, 0.0,
          0.0, 0.0;
  d.dg << -s12, -s12,
          c12, c12,
          0.0, 0.0;

  d.d2f[0] << -c1, 0.0, 0.0, 0.0;
  d.d2f[1] << -s1, 0.0, 0.0, 0.0;
  d.d2f[2].setZero();
  d.d2g[0] = -c12 * Eigen::Matrix2d::Ones();
  d.d2g[1] = -s12 * Eigen::Matrix2d::Ones();
  d.d2g[2].setZero();
  return d;
}

double eta(const SingularityGeometry& geom, const Eigen::Vector2d& q) {
  const auto dv = direction_vectors(geom, q);
  return dv.f.dot(dv.g);
}

double z_value(const SingularityGeometry& geom, const Eigen::Vector2d& q) {
  return 1.0 - geom.epsilon - eta(geom, q);
}

Eigen::Vector2d grad_eta(const SingularityGeometry& geom,
                         const Eigen::Vector2d& q) {
  const auto dv = direction_vectors(geom, q);
  const auto dd = direction_derivatives(geom, q);
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  for (int i = 0; i < 3; ++i) {
    grad += dd.df.row(i).transpose() * dv.g(i) + dv.f(i) * dd.dg.row(i).transpose();
  }
  return grad;
}

Eigen::Matrix2d hess_eta(const SingularityGeometry& geom,
                         const Eigen::Vector2d& q) {
  const auto dv = direction_vectors(geom, q);
  const auto dd = direction_derivatives(geom, q);
  Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2d dfi = dd.df.row(i).transpose();
    const Eigen::Vector2d dgi = dd.dg.row(i).transpose();
    H += dd.d2f[i] * dv.g(i) + dfi * dgi.transpose() + dgi * dfi.transpose() +
         dv.f(i) * dd.d2g[i];
  }
  return H;
}

double singular_cone_half_angle(const SingularityGeometry& geom) {
  return std::acos(1.0 - geom.epsilon);
}

}  // namespace scbf
