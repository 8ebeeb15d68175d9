#include "scbf/gp_regression.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "scbf/simd/kernels.hpp"

namespace scbf {

double KernelParams::operator()(const Eigen::VectorXd& x1,
                                const Eigen::VectorXd& x2) const {
  return sf * sf * std::exp(-(x1 - x2).squaredNorm() / (2.0 * el * el));
}

void KernelParams::validate() const {
  if (!(sf > 0.0) || !(el > 0.0)) {
    throw std::invalid_argument("kernel sf and el must be strictly positive");
  }
}

Eigen::MatrixXd Dataset::inputs() const {
  Eigen::MatrixXd X(q.rows(), q.cols() + v.cols());
  X << q, v;
  return X;
}

void Dataset::validate() const {
  const auto m = Y.rows();
  if (m < 1) throw std::invalid_argument("dataset is empty");
  if (t.size() != m || q.rows() != m || v.rows() != m || qdd.rows() != m ||
      u.rows() != m) {
    throw std::invalid_argument("dataset columns are not aligned");
  }
  const auto n = Y.cols();
  if (q.cols() != n || v.cols() != n || qdd.cols() != n || u.cols() != n) {
    throw std::invalid_argument("dataset column widths disagree");
  }
  if (!(t.allFinite() && q.allFinite() && v.allFinite() && qdd.allFinite() &&
        u.allFinite() && Y.allFinite())) {
    throw std::invalid_argument("dataset contains non-finite entries");
  }
  if (!(sigma_v2 > 0.0)) throw std::invalid_argument("sigma_v2 must be > 0");
}

Dataset collect_residuals(const TrajectorySamples& log,
                          const RobotParams& robot, double sigma_v2) {
  const auto m = log.t.size();
  const auto n = static_cast<Eigen::Index>(robot.dof());
  if (log.q.rows() != m || log.v.rows() != m || log.qdd.rows() != m ||
      log.u.rows() != m) {
    throw std::invalid_argument("trajectory log columns are misaligned");
  }
  if (log.q.cols() != n || log.v.cols() != n || log.qdd.cols() != n ||
      log.u.cols() != n) {
    throw std::invalid_argument("trajectory log width does not match robot");
  }
  Dataset d;
  d.t = log.t;
  d.q = log.q;
  d.v = log.v;
  d.qdd = log.qdd;
  d.u = log.u;
  d.sigma_v2 = sigma_v2;
  d.Y.resize(m, n);
  for (Eigen::Index r = 0; r < m; ++r) {
    if (!(log.q.row(r).allFinite() && log.v.row(r).allFinite() &&
          log.qdd.row(r).allFinite() && log.u.row(r).allFinite() &&
          std::isfinite(log.t(r)))) {
      throw std::invalid_argument("trajectory log row " + std::to_string(r) +
                                  " is not finite");
    }
    const Eigen::VectorXd q = log.q.row(r).transpose();
    const Eigen::VectorXd v = log.v.row(r).transpose();
    const Eigen::VectorXd a = log.qdd.row(r).transpose();
    const Eigen::VectorXd u = log.u.row(r).transpose();
    const auto N = ModelVariant::nominal;
    d.Y.row(r) = (u - mass_matrix(robot, q, N) * a -
                  coriolis_matrix(robot, q, v, N) * v - gravity_vector(robot, q, N))
                     .transpose();
  }
  d.validate();
  return d;
}

namespace {

Dataset select_rows(const Dataset& data, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto n = static_cast<Eigen::Index>(data.dof());
  out.sigma_v2 = data.sigma_v2;
  out.t.resize(m);
  out.q.resize(m, n);
  out.v.resize(m, n);
  out.qdd.resize(m, n);
  out.u.resize(m, n);
  out.Y.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)];
    out.t(i) = data.t(r);
    out.q.row(i) = data.q.row(r);
    out.v.row(i) = data.v.row(r);
    out.qdd.row(i) = data.qdd.row(r);
    out.u.row(i) = data.u.row(r);
    out.Y.row(i) = data.Y.row(r);
  }
  return out;
}

}  // namespace

Dataset subsample(const Dataset& data, std::size_t count, std::uint64_t seed) {
  if (count == 0 || count > data.size()) {
    throw std::invalid_argument("subsample size must be in [1, " +
                                std::to_string(data.size()) + "]");
  }
  std::vector<Eigen::Index> all(data.size());
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  std::vector<Eigen::Index> picked;
  picked.reserve(count);
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(picked),
              static_cast<std::ptrdiff_t>(count), rng);
  return select_rows(data, picked);
}

Dataset complement(const Dataset& data, const Dataset& subset) {
  // Time stamps identify rows of a single log.
  std::vector<double> taken(subset.t.data(), subset.t.data() + subset.t.size());
  std::sort(taken.begin(), taken.end());
  std::vector<Eigen::Index> rest;
  for (Eigen::Index r = 0; r < data.t.size(); ++r) {
    if (!std::binary_search(taken.begin(), taken.end(), data.t(r))) {
      rest.push_back(r);
    }
  }
  return select_rows(data, rest);
}

void write_dataset_csv(const Dataset& data, std::ostream& os) {
  const auto n = static_cast<Eigen::Index>(data.dof());
  os << "t";
  for (const char* prefix : {"q", "v", "qdd", "u", "Y"}) {
    for (Eigen::Index i = 1; i <= n; ++i) os << ',' << prefix << i;
  }
  os << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < data.Y.rows(); ++r) {
    os << data.t(r);
    for (const Eigen::MatrixXd* block :
         {&data.q, &data.v, &data.qdd, &data.u, &data.Y}) {
      for (Eigen::Index i = 0; i < n; ++i) os << ',' << (*block)(r, i);
    }
    os << '\n';
  }
}

Dataset read_dataset_csv(std::istream& is, double sigma_v2) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("dataset CSV is empty");
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  if (columns < 6 || (columns - 1) % 5 != 0) {
    throw std::runtime_error("dataset CSV header has " +
                             std::to_string(columns) + " columns");
  }
  const Eigen::Index n = (columns - 1) / 5;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("dataset CSV line " + std::to_string(line_no) +
                                 ": bad number '" + cell + "'");
      }
    }
    if (static_cast<long>(vals.size()) != columns) {
      throw std::runtime_error("dataset CSV line " + std::to_string(line_no) +
                               ": expected " + std::to_string(columns) +
                               " values");
    }
    rows.push_back(std::move(vals));
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  Dataset d;
  d.sigma_v2 = sigma_v2;
  d.t.resize(m);
  d.q.resize(m, n);
  d.v.resize(m, n);
  d.qdd.resize(m, n);
  d.u.resize(m, n);
  d.Y.resize(m, n);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    d.t(r) = row[0];
    Eigen::Index c = 1;
    for (Eigen::MatrixXd* block : {&d.q, &d.v, &d.qdd, &d.u, &d.Y}) {
      for (Eigen::Index i = 0; i < n; ++i) (*block)(r, i) = row[static_cast<std::size_t>(c++)];
    }
  }
  d.validate();
  return d;
}

GPModel GPModel::fit(const Dataset& data,
                     const std::vector<KernelParams>& kernels,
                     const Eigen::VectorXd& rkhs_bound) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.dof());
  if (static_cast<Eigen::Index>(kernels.size()) != n ||
      rkhs_bound.size() != n) {
    throw std::invalid_argument("need one kernel and one RKHS bound per output");
  }
  GPModel model;
  model.X_ = data.inputs();
  model.Y_ = data.Y;
  model.sigma_v2_ = data.sigma_v2;
  model.B_ = rkhs_bound;
  const Eigen::Index m = model.X_.rows();

  for (Eigen::Index i = 0; i < n; ++i) {
    const KernelParams& kern = kernels[static_cast<std::size_t>(i)];
    kern.validate();
    Eigen::MatrixXd K(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b <= a; ++b) {
        K(a, b) = K(b, a) =
            kern(model.X_.row(a).transpose(), model.X_.row(b).transpose());
      }
    }
    K.diagonal().array() += data.sigma_v2;

    Output out;
    out.kernel = kern;
    double jitter = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    while (llt.info() != Eigen::Success) {
      jitter = (jitter == 0.0) ? 1e-10 : jitter * 10.0;
      if (jitter > 1e-6 * (1.0 + 1e-9)) {
        throw std::runtime_error(
            "GP Gram matrix is not positive definite even with 1e-6 jitter; "
            "look for duplicate states with inconsistent targets");
      }
      Eigen::MatrixXd Kj = K;
      Kj.diagonal().array() += jitter;
      llt.compute(Kj);
    }
    out.jitter = jitter;
    out.chol = llt.matrixL();
    const Eigen::VectorXd y = data.Y.col(i);
    out.alpha = llt.solve(y);
    out.omega = y.dot(out.alpha);
    model.outputs_.push_back(std::move(out));
  }
  return model;
}

GPModel GPModel::with_rkhs_bounds(const Eigen::VectorXd& rkhs_bound) const {
  if (rkhs_bound.size() != static_cast<Eigen::Index>(output_dim())) {
    throw std::invalid_argument("need one RKHS bound per output");
  }
  GPModel copy = *this;
  copy.B_ = rkhs_bound;
  return copy;
}

void GPModel::kernel_row(const Output& out, const Eigen::VectorXd& x,
                         Eigen::VectorXd& k) const {
  const auto m = static_cast<std::size_t>(X_.rows());
  k.resize(X_.rows());
  simd::se_kernel_row({x.data(), static_cast<std::size_t>(x.size())},
                      {X_.data(), static_cast<std::size_t>(X_.size())}, m,
                      out.kernel.sf * out.kernel.sf,
                      1.0 / (2.0 * out.kernel.el * out.kernel.el),
                      {k.data(), m});
}

Eigen::VectorXd GPModel::mean(const Eigen::VectorXd& x) const {
  if (x.size() != X_.cols()) throw std::invalid_argument("GP input size mismatch");
  const auto m = static_cast<std::size_t>(X_.rows());
  Eigen::VectorXd mu(static_cast<Eigen::Index>(output_dim()));
  Eigen::VectorXd k;
  for (std::size_t i = 0; i < outputs_.size(); ++i) {
    kernel_row(outputs_[i], x, k);
    mu(static_cast<Eigen::Index>(i)) =
        simd::dot({k.data(), m}, {outputs_[i].alpha.data(), m});
  }
  return mu;
}

Prediction GPModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != X_.cols()) throw std::invalid_argument("GP input size mismatch");
  const auto m = static_cast<std::size_t>(X_.rows());
  const auto n = static_cast<Eigen::Index>(output_dim());
  Prediction p;
  p.mean.resize(n);
  p.variance.resize(n);
  Eigen::VectorXd k;
  Eigen::VectorXd w(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Output& out = outputs_[static_cast<std::size_t>(i)];
    kernel_row(out, x, k);
    p.mean(i) = simd::dot({k.data(), m}, {out.alpha.data(), m});
    // Forward substitution L w = k; then sigma^2 = k(x,x) - |w|^2.
    for (std::size_t r = 0; r < m; ++r) {
      const double* row = out.chol.data() + r * m;
      const double s = simd::dot({row, r}, {w.data(), r});
      w(static_cast<Eigen::Index>(r)) = (k(static_cast<Eigen::Index>(r)) - s) / row[r];
    }
    double var = out.kernel.prior_variance() - simd::dot({w.data(), m}, {w.data(), m});
    if (var < 0.0) {
      p.variance_clamp = std::max(p.variance_clamp, -var);
      var = 0.0;
    }
    p.variance(i) = var;
  }
  return p;
}

double GPModel::bound_radicand(std::size_t i) const {
  const double r = B_(static_cast<Eigen::Index>(i)) * B_(static_cast<Eigen::Index>(i)) -
                   outputs_[i].omega + static_cast<double>(size());
  if (!(r > 0.0)) {
    std::ostringstream msg;
    msg << "RKHS bound B_" << (i + 1) << " = " << B_(static_cast<Eigen::Index>(i))
        << " is too small: B^2 - omega + M = " << r
        << " <= 0 (omega = " << outputs_[i].omega
        << "); raise B_" << (i + 1) << " above "
        << std::sqrt(std::max(0.0, outputs_[i].omega - static_cast<double>(size())));
    throw std::domain_error(msg.str());
  }
  return r;
}

double GPModel::error_bound(const Prediction& p) const {
  double s = 0.0;
  for (std::size_t i = 0; i < output_dim(); ++i) {
    s += bound_radicand(i) * p.variance(static_cast<Eigen::Index>(i));
  }
  return std::sqrt(s);
}

double GPModel::error_bound(const Eigen::VectorXd& x) const {
  return error_bound(predict(x));
}

double GPModel::uniform_bound() const {
  double s = 0.0;
  for (std::size_t i = 0; i < output_dim(); ++i) {
    s += bound_radicand(i) * outputs_[i].kernel.prior_variance();
  }
  return std::sqrt(s);
}

void GPModel::save(std::ostream& os) const {
  os << std::setprecision(17);
  os << "scbf-gp-model 1\n";
  os << "inputs " << input_dim() << " outputs " << output_dim() << " points "
     << size() << '\n';
  os << "sigma_v2 " << sigma_v2_ << '\n';
  for (std::size_t i = 0; i < output_dim(); ++i) {
    const auto& o = outputs_[i];
    os << "output " << (i + 1) << " sf " << o.kernel.sf << " el " << o.kernel.el
       << " B " << B_(static_cast<Eigen::Index>(i)) << " jitter " << o.jitter
       << " omega " << o.omega << '\n';
  }
  auto dump = [&](const char* tag, const Eigen::MatrixXd& mat) {
    os << tag << '\n';
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      for (Eigen::Index c = 0; c < mat.cols(); ++c) {
        os << (c ? " " : "") << mat(r, c);
      }
      os << '\n';
    }
  };
  dump("X", X_);
  dump("Y", Y_);
  Eigen::MatrixXd alphas(X_.rows(), static_cast<Eigen::Index>(output_dim()));
  for (std::size_t i = 0; i < output_dim(); ++i) {
    alphas.col(static_cast<Eigen::Index>(i)) = outputs_[i].alpha;
  }
  dump("alpha", alphas);
}

GPModel GPModel::load(std::istream& is) {
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(is >> got) || got != word) {
      throw std::runtime_error("GP model file: expected '" + word + "', got '" +
                               got + "'");
    }
  };
  expect("scbf-gp-model");
  int version = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("GP model file: unsupported version");
  std::size_t d = 0, n = 0, m = 0;
  expect("inputs");
  is >> d;
  expect("outputs");
  is >> n;
  expect("points");
  is >> m;
  double sigma_v2 = 0.0;
  expect("sigma_v2");
  is >> sigma_v2;
  std::vector<KernelParams> kernels(n);
  Eigen::VectorXd B(static_cast<Eigen::Index>(n));
  Eigen::VectorXd omega(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = 0;
    double jitter = 0.0;
    expect("output");
    is >> idx;
    expect("sf");
    is >> kernels[i].sf;
    expect("el");
    is >> kernels[i].el;
    expect("B");
    is >> B(static_cast<Eigen::Index>(i));
    expect("jitter");
    is >> jitter;
    expect("omega");
    is >> omega(static_cast<Eigen::Index>(i));
  }
  auto read_block = [&](const char* tag, Eigen::Index rows, Eigen::Index cols) {
    expect(tag);
    Eigen::MatrixXd mat(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(is >> mat(r, c))) {
          throw std::runtime_error(std::string("GP model file: truncated ") + tag);
        }
      }
    }
    return mat;
  };
  const auto M = static_cast<Eigen::Index>(m);
  const Eigen::MatrixXd X = read_block("X", M, static_cast<Eigen::Index>(d));
  const Eigen::MatrixXd Y = read_block("Y", M, static_cast<Eigen::Index>(n));
  const Eigen::MatrixXd alphas = read_block("alpha", M, static_cast<Eigen::Index>(n));
  if (d != 2 * n) throw std::runtime_error("GP model file: inputs must be 2 x outputs");

  Dataset data;
  data.sigma_v2 = sigma_v2;
  data.t = Eigen::VectorXd::LinSpaced(M, 0.0, static_cast<double>(M - 1));
  data.q = X.leftCols(static_cast<Eigen::Index>(n));
  data.v = X.rightCols(static_cast<Eigen::Index>(n));
  data.qdd = Eigen::MatrixXd::Zero(M, static_cast<Eigen::Index>(n));
  data.u = Eigen::MatrixXd::Zero(M, static_cast<Eigen::Index>(n));
  data.Y = Y;
  GPModel model = fit(data, kernels, B);
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = 1.0 + alphas.col(static_cast<Eigen::Index>(i)).norm();
    if ((model.outputs_[i].alpha - alphas.col(static_cast<Eigen::Index>(i))).norm() >
            1e-8 * scale ||
        std::abs(model.outputs_[i].omega - omega(static_cast<Eigen::Index>(i))) >
            1e-8 * (1.0 + std::abs(omega(static_cast<Eigen::Index>(i))))) {
      throw std::runtime_error(
          "GP model file: stored weights do not match the refitted model");
    }
  }
  return model;
}

double interpolant_rkhs_norm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const KernelParams& kernel, double jitter) {
  const Eigen::Index m = X.rows();
  Eigen::MatrixXd K(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      K(a, b) = K(b, a) = kernel(X.row(a).transpose(), X.row(b).transpose());
    }
  }
  K.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("interpolant Gram matrix is not positive definite");
  }
  return std::sqrt(y.dot(llt.solve(y)));
}

Eigen::VectorXd calibrate_rkhs_bounds(const GPModel& model,
                                      const Eigen::MatrixXd& X_validation,
                                      const Eigen::MatrixXd& Y_validation,
                                      double safety_factor) {
  if (!(safety_factor >= 1.0)) {
    throw std::invalid_argument("safety factor must be >= 1");
  }
  const auto n = static_cast<Eigen::Index>(model.output_dim());
  if (X_validation.rows() == 0 || X_validation.rows() != Y_validation.rows() ||
      Y_validation.cols() != n) {
    throw std::invalid_argument("validation set is empty or misaligned");
  }
  Eigen::VectorXd ratio = Eigen::VectorXd::Zero(n);
  for (Eigen::Index r = 0; r < X_validation.rows(); ++r) {
    const Prediction p = model.predict(X_validation.row(r).transpose());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sigma = std::sqrt(p.variance(i));
      const double err = std::abs(p.mean(i) - Y_validation(r, i));
      if (sigma > 0.0) ratio(i) = std::max(ratio(i), err / sigma);
    }
  }
  Eigen::VectorXd B(n);
  const double m = static_cast<double>(model.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double excess = safety_factor * ratio(i);
    B(i) = std::sqrt(std::max(0.0, model.omega(static_cast<std::size_t>(i)) - m) +
                     excess * excess);
  }
  return B;
}

}  // namespace scbf
