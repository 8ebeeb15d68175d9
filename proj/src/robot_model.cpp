#include "scbf/robot_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace scbf {

double LinkParams::mass() const {
  return std::numbers::pi * radius * radius * length * density;
}

double LinkParams::com_inertia() const {
  return mass() * (3.0 * radius * radius + length * length) / 12.0;
}

void LinkParams::validate() const {
  if (!(length > 0.0) || !(radius > 0.0) || !(density > 0.0)) {
    throw std::invalid_argument(
        "link length, radius and density must be strictly positive");
  }
}

void RobotParams::validate() const {
  if (links.empty()) throw std::invalid_argument("robot has no links");
  for (const auto& l : links) l.validate();
  if (!(q_max > 0.0)) throw std::invalid_argument("q_max must be positive");
  if (!(v_max > 0.0)) throw std::invalid_argument("v_max must be positive");
  if (!(u_max > 0.0)) throw std::invalid_argument("u_max must be positive");
  if (!(tip_mass >= 0.0)) throw std::invalid_argument("tip_mass must be >= 0");
  if (!std::isfinite(q_ini)) throw std::invalid_argument("q_ini not finite");
}

namespace {

// A rigid body riding on link `last`: its position is the sum of the full
// lengths of links 0..last-1 plus `reach` along link `last`.
struct Body {
  double mass;
  double inertia;
  std::size_t last;
  double reach;
};

std::vector<Body> bodies(const RobotParams& robot, ModelVariant variant) {
  std::vector<Body> out;
  const std::size_t n = robot.dof();
  out.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = robot.links[i];
    out.push_back({l.mass(), l.com_inertia(), i, 0.5 * l.length});
  }
  if (variant == ModelVariant::truth && robot.tip_mass > 0.0) {
    out.push_back({robot.tip_mass, 0.0, n - 1, robot.links[n - 1].length});
  }
  return out;
}

Eigen::VectorXd absolute_angles(const RobotParams& robot,
                                const Eigen::VectorXd& q) {
  const auto n = static_cast<Eigen::Index>(robot.dof());
  Eigen::VectorXd theta(n);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    acc += q(k);
    theta(k) = (k == 0) ? acc : acc + robot.q_ini;
  }
  return theta;
}

double segment_length(const RobotParams& robot, const Body& b, std::size_t s) {
  return s == b.last ? b.reach : robot.links[s].length;
}

void check_size(const RobotParams& robot, const Eigen::VectorXd& q) {
  if (static_cast<std::size_t>(q.size()) != robot.dof()) {
    throw std::invalid_argument("joint vector size " + std::to_string(q.size()) +
                                " does not match dof " +
                                std::to_string(robot.dof()));
  }
}

// dM_ab/dq_c for all a, b, c; returned as n matrices indexed by c.
std::vector<Eigen::MatrixXd> mass_matrix_partials(const RobotParams& robot,
                                                  const Eigen::VectorXd& q,
                                                  ModelVariant variant) {
  const std::size_t n = robot.dof();
  const Eigen::VectorXd theta = absolute_angles(robot, q);
  std::vector<Eigen::MatrixXd> dM(n, Eigen::MatrixXd::Zero(n, n));
  for (const Body& b : bodies(robot, variant)) {
    for (std::size_t s = 0; s <= b.last; ++s) {
      for (std::size_t t = 0; t <= b.last; ++t) {
        if (s == t) continue;
        const double w = b.mass * segment_length(robot, b, s) *
                         segment_length(robot, b, t) *
                         -std::sin(theta(s) - theta(t));
        // theta_s depends on q_c iff c <= s.
        for (std::size_t c = 0; c < n; ++c) {
          const double dc = (c <= s ? 1.0 : 0.0) - (c <= t ? 1.0 : 0.0);
          if (dc == 0.0) continue;
          // Segment s contributes to rows a <= s, segment t to columns b <= t.
          for (std::size_t a = 0; a <= s; ++a) {
            for (std::size_t bb = 0; bb <= t; ++bb) {
              dM[c](a, bb) += w * dc;
            }
          }
        }
      }
    }
  }
  return dM;
}

}  // namespace

Eigen::MatrixXd mass_matrix(const RobotParams& robot, const Eigen::VectorXd& q,
                            ModelVariant variant) {
  check_size(robot, q);
  const auto n = static_cast<Eigen::Index>(robot.dof());
  const Eigen::VectorXd theta = absolute_angles(robot, q);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (const Body& b : bodies(robot, variant)) {
    const auto last = static_cast<Eigen::Index>(b.last);
    // Translational part: sum over segment pairs (s, t) of
    // len_s len_t cos(theta_s - theta_t), added to every (a <= s, b <= t).
    for (Eigen::Index s = 0; s <= last; ++s) {
      for (Eigen::Index t = 0; t <= last; ++t) {
        const double w = b.mass * segment_length(robot, b, s) *
                         segment_length(robot, b, t) *
                         std::cos(theta(s) - theta(t));
        M.topLeftCorner(s + 1, t + 1).array() += w;
      }
    }
    M.topLeftCorner(last + 1, last + 1).array() += b.inertia;
  }
  return M;
}

Eigen::MatrixXd coriolis_matrix(const RobotParams& robot,
                                const Eigen::VectorXd& q,
                                const Eigen::VectorXd& v,
                                ModelVariant variant) {
  check_size(robot, q);
  check_size(robot, v);
  const std::size_t n = robot.dof();
  const auto dM = mass_matrix_partials(robot, q, variant);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double sum = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        sum += 0.5 * (dM[c](a, b) + dM[b](a, c) - dM[a](b, c)) * v(c);
      }
      C(a, b) = sum;
    }
  }
  return C;
}

Eigen::VectorXd gravity_vector(const RobotParams& robot,
                               const Eigen::VectorXd& q,
                               ModelVariant variant) {
  check_size(robot, q);
  const auto n = static_cast<Eigen::Index>(robot.dof());
  Eigen::VectorXd G = Eigen::VectorXd::Zero(n);
  if (robot.planar) return G;
  const Eigen::VectorXd theta = absolute_angles(robot, q);
  // V = sum_b m_b g y_b with y_b = sum_s len_s sin(theta_s).
  for (const Body& b : bodies(robot, variant)) {
    for (std::size_t s = 0; s <= b.last; ++s) {
      const double w = b.mass * robot.gravity * segment_length(robot, b, s) *
                       std::cos(theta(static_cast<Eigen::Index>(s)));
      G.head(static_cast<Eigen::Index>(s) + 1).array() += w;
    }
  }
  return G;
}

Eigen::VectorXd forward_dynamics(const RobotParams& robot, const JointState& x,
                                 const Eigen::VectorXd& u,
                                 ModelVariant variant) {
  const Eigen::MatrixXd M = mass_matrix(robot, x.q, variant);
  const Eigen::VectorXd rhs = u - coriolis_matrix(robot, x.q, x.v, variant) * x.v -
                              gravity_vector(robot, x.q, variant);
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(
        "mass matrix is not positive definite; check the link parameters");
  }
  return llt.solve(rhs);
}

Eigen::VectorXd mismatch_truth(const RobotParams& robot, const JointState& x,
                               const Eigen::VectorXd& u) {
  const Eigen::VectorXd a = forward_dynamics(robot, x, u, ModelVariant::truth);
  const auto T = ModelVariant::truth;
  const auto N = ModelVariant::nominal;
  return (mass_matrix(robot, x.q, T) - mass_matrix(robot, x.q, N)) * a +
         (coriolis_matrix(robot, x.q, x.v, T) -
          coriolis_matrix(robot, x.q, x.v, N)) *
             x.v +
         (gravity_vector(robot, x.q, T) - gravity_vector(robot, x.q, N));
}

JointState step_rk4(const RobotParams& robot, const JointState& x,
                    const Eigen::VectorXd& u, double dt,
                    ModelVariant variant) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  auto deriv = [&](const JointState& s) {
    return JointState{s.v, forward_dynamics(robot, s, u, variant)};
  };
  auto offset = [](const JointState& s, const JointState& k, double h) {
    return JointState{s.q + h * k.q, s.v + h * k.v};
  };
  const JointState k1 = deriv(x);
  const JointState k2 = deriv(offset(x, k1, 0.5 * dt));
  const JointState k3 = deriv(offset(x, k2, 0.5 * dt));
  const JointState k4 = deriv(offset(x, k3, dt));
  return JointState{
      x.q + dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q),
      x.v + dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v)};
}

double kinetic_energy(const RobotParams& robot, const JointState& x,
                      ModelVariant variant) {
  return 0.5 * x.v.dot(mass_matrix(robot, x.q, variant) * x.v);
}

Eigen::Matrix2d jacobian(const RobotParams& robot, const Eigen::VectorXd& q) {
  if (robot.dof() != 2 || q.size() != 2) {
    throw std::invalid_argument("jacobian is defined for two-link arms only");
  }
  const double l1 = robot.links[0].length;
  const double l2 = robot.links[1].length;
  const double q12 = q(0) + q(1) + robot.q_ini;
  Eigen::Matrix2d J;
  J << -l1 * std::sin(q(0)) - l2 * std::sin(q12), -l2 * std::sin(q12),
      l1 * std::cos(q(0)) + l2 * std::cos(q12), l2 * std::cos(q12);
  return J;
}

}  // namespace scbf
