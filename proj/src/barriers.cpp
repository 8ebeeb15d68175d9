#include "scbf/barriers.hpp"

#include <cmath>
#include <stdexcept>

namespace scbf {

double ClassKFunction::operator()(double s) const {
  switch (kind) {
    case Kind::linear: return s;
    case Kind::cubic: return s * s * s;
    case Kind::arctan: return std::atan(s);
  }
  return s;
}

double ClassKFunction::derivative(double s) const {
  switch (kind) {
    case Kind::linear: return 1.0;
    case Kind::cubic: return 3.0 * s * s;
    case Kind::arctan: return 1.0 / (1.0 + s * s);
  }
  return 1.0;
}

std::string ClassKFunction::name() const {
  switch (kind) {
    case Kind::linear: return "linear";
    case Kind::cubic: return "cubic";
    case Kind::arctan: return "arctan";
  }
  return "linear";
}

ClassKFunction ClassKFunction::parse(const std::string& name) {
  if (name == "linear") return {Kind::linear};
  if (name == "cubic") return {Kind::cubic};
  if (name == "arctan") return {Kind::arctan};
  throw std::invalid_argument("unknown class-K function '" + name +
                              "' (expected linear, cubic or arctan)");
}

void BarrierParams::validate() const {
  if (!(gamma > 0.0) || !(delta > 0.0) || !(k > 0.0)) {
    throw std::invalid_argument("barrier gamma, delta and k must be > 0");
  }
}

std::string ConstraintRow::label() const {
  switch (tag) {
    case RowTag::singularity: return "singularity";
    case RowTag::vel_upper: return "vel_upper_" + std::to_string(joint + 1);
    case RowTag::vel_lower: return "vel_lower_" + std::to_string(joint + 1);
  }
  return "?";
}

MismatchEstimate MismatchEstimate::none(std::size_t dof) {
  return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof)), 0.0};
}

namespace {

Eigen::Vector2d head2(const Eigen::VectorXd& q) {
  if (q.size() != 2) {
    throw std::invalid_argument("singularity barrier is defined for 2 joints");
  }
  return q.head<2>();
}

}  // namespace

double h_value(const SingularityGeometry& geom, const BarrierParams& params,
               const JointState& x) {
  const Eigen::Vector2d q = head2(x.q);
  const Eigen::Vector2d v = head2(x.v);
  return -grad_eta(geom, q).dot(v) + params.gamma * params.beta1(z_value(geom, q));
}

double h_dot(const SingularityGeometry& geom, const BarrierParams& params,
             const JointState& x, const Eigen::VectorXd& qdd,
             const HessianFn& hessian) {
  const Eigen::Vector2d q = head2(x.q);
  const Eigen::Vector2d v = head2(x.v);
  const Eigen::Vector2d G = grad_eta(geom, q);
  const double z = z_value(geom, q);
  return -v.dot(hessian(geom, q) * v) - G.dot(head2(qdd)) -
         params.gamma * params.beta1.derivative(z) * G.dot(v);
}

Eigen::VectorXd velocity_barriers(const RobotParams& robot,
                                  const Eigen::VectorXd& v) {
  Eigen::VectorXd b(2 * v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    b(2 * i) = robot.v_max - v(i);
    b(2 * i + 1) = v(i) + robot.v_max;
  }
  return b;
}

ConstraintRow singularity_row(const SingularityGeometry& geom,
                              const BarrierParams& params,
                              const RobotParams& nominal, const JointState& x,
                              const MismatchEstimate& est,
                              const HessianFn& hessian) {
  const auto N = ModelVariant::nominal;
  const Eigen::Vector2d q = head2(x.q);
  const Eigen::Vector2d v = head2(x.v);
  const Eigen::Vector2d G = grad_eta(geom, q);
  const double z = z_value(geom, q);
  const double h = -G.dot(v) + params.gamma * params.beta1(z);

  const Eigen::MatrixXd M = mass_matrix(nominal, x.q, N);
  const Eigen::VectorXd drift =
      coriolis_matrix(nominal, x.q, x.v, N) * x.v + gravity_vector(nominal, x.q, N) + est.mu;
  // w = M^-T Gamma = M^-1 Gamma (M symmetric)
  const Eigen::VectorXd w = M.llt().solve(Eigen::VectorXd(G));

  ConstraintRow row;
  row.tag = RowTag::singularity;
  row.a = w;
  row.b = w.dot(drift) - v.dot(hessian(geom, q) * v) -
          params.gamma * params.beta1.derivative(z) * G.dot(v) +
          params.delta * params.beta2(h) - w.norm() * est.lambda_bar;
  return row;
}

std::vector<ConstraintRow> velocity_rows(const BarrierParams& params,
                                         const RobotParams& nominal,
                                         const JointState& x,
                                         const MismatchEstimate& est) {
  const auto N = ModelVariant::nominal;
  const Eigen::MatrixXd M = mass_matrix(nominal, x.q, N);
  const Eigen::MatrixXd Minv = M.llt().solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
  const Eigen::VectorXd drift =
      coriolis_matrix(nominal, x.q, x.v, N) * x.v + gravity_vector(nominal, x.q, N) + est.mu;

  std::vector<ConstraintRow> rows;
  rows.reserve(static_cast<std::size_t>(2 * M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    const Eigen::VectorXd r = Minv.row(i).transpose();
    const double margin = r.norm() * est.lambda_bar;
    const double vi = x.v(i);
    ConstraintRow up;
    up.tag = RowTag::vel_upper;
    up.joint = static_cast<std::size_t>(i);
    up.a = r;
    up.b = params.k * params.beta3(nominal.v_max - vi) - margin + r.dot(drift);
    ConstraintRow lo;
    lo.tag = RowTag::vel_lower;
    lo.joint = static_cast<std::size_t>(i);
    lo.a = -r;
    lo.b = params.k * params.beta3(vi + nominal.v_max) - margin - r.dot(drift);
    rows.push_back(std::move(up));
    rows.push_back(std::move(lo));
  }
  return rows;
}

}  // namespace scbf
