#include "scbf/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace scbf {

std::string to_string(NormFactor f) { return f == NormFactor::paper ? "paper" : "tight"; }

NormFactor parse_norm_factor(const std::string& s) {
  if (s == "paper") return NormFactor::paper;
  if (s == "tight") return NormFactor::tight;
  throw std::invalid_argument("norm_factor must be 'paper' or 'tight', got '" + s + "'");
}

double ModelBounds::norm_scale(NormFactor f) const {
  return f == NormFactor::paper ? std::sqrt(3.0) : std::sqrt(static_cast<double>(dof));
}

namespace {

// Calls fn(point) for every node of a cartesian grid over [lo, hi].
template <class Fn>
void for_each_grid_point(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                         std::size_t per_axis, Fn&& fn) {
  const Eigen::Index d = lo.size();
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  Eigen::VectorXd x(d);
  const double denom = per_axis > 1 ? static_cast<double>(per_axis - 1) : 1.0;
  while (true) {
    for (Eigen::Index k = 0; k < d; ++k) {
      x(k) = lo(k) + (hi(k) - lo(k)) * static_cast<double>(idx[static_cast<std::size_t>(k)]) / denom;
    }
    fn(x);
    Eigen::Index k = 0;
    for (; k < d; ++k) {
      if (++idx[static_cast<std::size_t>(k)] < per_axis) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
    if (k == d) return;
  }
}

double spectral_norm(const Eigen::MatrixXd& A) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
}

struct StateBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

StateBox state_box(const RobotParams& robot) {
  const auto n = static_cast<Eigen::Index>(robot.dof());
  StateBox box;
  box.lo.resize(2 * n);
  box.hi.resize(2 * n);
  box.lo << Eigen::VectorXd::Constant(n, -robot.q_max), Eigen::VectorXd::Constant(n, -robot.v_max);
  box.hi << Eigen::VectorXd::Constant(n, robot.q_max), Eigen::VectorXd::Constant(n, robot.v_max);
  return box;
}

JointState split(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size() / 2;
  return {x.head(n), x.tail(n)};
}

double mu_norm_at(const GPModel* gp, const Eigen::VectorXd& x) {
  return gp ? gp->mean(x).norm() : 0.0;
}

constexpr double kInfeasible = -std::numeric_limits<double>::infinity();

// Coarse grid then multi-start Nelder-Mead from the best grid points.
SearchResult search_max(const std::function<double(const Eigen::VectorXd&)>& f,
                        const StateBox& box, const SearchOptions& opts) {
  std::vector<std::pair<double, Eigen::VectorXd>> seeds;
  SearchResult res;
  res.value = kInfeasible;
  for_each_grid_point(box.lo, box.hi, opts.coarse_grid, [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    if (v == kInfeasible) return;
    ++res.feasible_points;
    seeds.emplace_back(v, x);
  });
  if (seeds.empty()) {
    throw std::runtime_error("search region is empty on the coarse grid");
  }
  const std::size_t k = std::min(opts.starts, seeds.size());
  std::partial_sort(seeds.begin(), seeds.begin() + static_cast<std::ptrdiff_t>(k), seeds.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  res.value = seeds.front().first;
  res.x = seeds.front().second;
  const double step = (box.hi - box.lo).maxCoeff() / static_cast<double>(opts.coarse_grid);
  for (std::size_t s = 0; s < k; ++s) {
    const Eigen::VectorXd x = nelder_mead_max(f, seeds[s].second, box.lo, box.hi, step,
                                              opts.max_evaluations);
    const double v = f(x);
    if (v > res.value) {
      res.value = v;
      res.x = x;
    }
  }
  return res;
}

}  // namespace

ModelBounds compute_model_bounds(const RobotParams& nominal,
                                 const SingularityGeometry& geom,
                                 std::size_t grid_resolution) {
  nominal.validate();
  geom.validate();
  if (grid_resolution < 100) {
    throw std::invalid_argument("grid resolution must be at least 100 per axis");
  }
  const auto n = static_cast<Eigen::Index>(nominal.dof());
  const auto N = ModelVariant::nominal;
  ModelBounds b;
  b.dof = nominal.dof();
  b.v_max = nominal.v_max;
  b.u_max = nominal.u_max;
  b.m_min = std::numeric_limits<double>::infinity();

  // Unit velocity directions; C is linear in v so |C v| / |v| only needs them.
  std::vector<Eigen::VectorXd> dirs;
  if (n == 2) {
    for (std::size_t k = 0; k < grid_resolution; ++k) {
      const double a = M_PI * static_cast<double>(k) / static_cast<double>(grid_resolution);
      dirs.push_back(Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  } else {
    std::mt19937_64 rng(0);
    std::normal_distribution<double> gauss;
    for (std::size_t k = 0; k < grid_resolution; ++k) {
      Eigen::VectorXd d(n);
      for (Eigen::Index i = 0; i < n; ++i) d(i) = gauss(rng);
      dirs.push_back(d.normalized());
    }
  }

  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -nominal.q_max);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, nominal.q_max);
  Eigen::VectorXd arg_m_max = lo, arg_m_min = lo, arg_c_max = lo;
  std::size_t arg_c_dir = 0;
  for_each_grid_point(lo, hi, grid_resolution, [&](const Eigen::VectorXd& q) {
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(mass_matrix(nominal, q, N),
                                                       Eigen::EigenvaluesOnly)
            .eigenvalues();
    if (1.0 / ev.minCoeff() > b.m_max) {
      b.m_max = 1.0 / ev.minCoeff();
      arg_m_max = q;
    }
    if (1.0 / ev.maxCoeff() < b.m_min) {
      b.m_min = 1.0 / ev.maxCoeff();
      arg_m_min = q;
    }
    b.g_max = std::max(b.g_max, gravity_vector(nominal, q, N).norm());
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      const double c = spectral_norm(coriolis_matrix(nominal, q, dirs[k], N));
      if (c > b.c_max) {
        b.c_max = c;
        arg_c_max = q;
        arg_c_dir = k;
      }
    }
  });

  // Polish the grid extrema; the grid alone can sit a spacing away from them.
  const double step = 2.0 * nominal.q_max / static_cast<double>(grid_resolution - 1);
  auto inv_eig = [&](const Eigen::VectorXd& q) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(mass_matrix(nominal, q, N),
                                                          Eigen::EigenvaluesOnly)
        .eigenvalues();
  };
  b.m_max = std::max(b.m_max, 1.0 / inv_eig(nelder_mead_max(
                                        [&](const Eigen::VectorXd& q) {
                                          return 1.0 / inv_eig(q).minCoeff();
                                        },
                                        arg_m_max, lo, hi, step, 2000))
                                        .minCoeff());
  b.m_min = std::min(b.m_min, 1.0 / inv_eig(nelder_mead_max(
                                        [&](const Eigen::VectorXd& q) {
                                          return -1.0 / inv_eig(q).maxCoeff();
                                        },
                                        arg_m_min, lo, hi, step, 2000))
                                        .maxCoeff());
  if (n == 2) {
    // Same for c_max over (q, direction angle).
    const auto c_at = [&](const Eigen::VectorXd& y) {
      return spectral_norm(coriolis_matrix(nominal, y.head(2),
                                           Eigen::Vector2d(std::cos(y(2)), std::sin(y(2))), N));
    };
    Eigen::Vector3d y0, ylo, yhi;
    y0 << arg_c_max, M_PI * static_cast<double>(arg_c_dir) / static_cast<double>(grid_resolution);
    ylo << lo, 0.0;
    yhi << hi, M_PI;
    b.c_max = std::max(b.c_max, c_at(nelder_mead_max(c_at, y0, ylo, yhi, step, 2000)));
  }

  // Componentwise suprema of the trigonometric direction vectors:
  // |d cos q1| <= 1, |d cos q12| <= |[1, 1]|, Hessians diag(1, 0) and ones(2, 2).
  b.f_q = 1.0;
  b.g_q = std::sqrt(2.0);
  b.f_q2 = 1.0;
  b.g_q2 = 2.0;
  b.eta_qmax = 3.0 * (b.f_q + b.g_q);
  b.eta_max2 = 3.0 * (b.f_q2 + 2.0 * b.f_q * b.g_q + b.g_q2);
  return b;
}

double xi(const ModelBounds& b, double mu_norm, NormFactor f) {
  const double s = b.norm_scale(f);
  return s * s * b.eta_max2 * b.v_max * b.v_max +
         b.eta_qmax * b.m_max *
             (b.c_max * b.v_max * b.v_max + b.g_max + mu_norm + b.lambda_bar);
}

double psi(const ModelBounds& b, double mu_norm, double gamma,
           const BarrierParams& params, double z, NormFactor f) {
  const double s = b.norm_scale(f);
  return b.eta_qmax * b.m_max *
             (s * b.u_max + s * s * b.c_max * b.v_max * b.v_max + b.g_max + mu_norm +
              b.lambda_bar) +
         s * s * b.eta_max2 * b.v_max * b.v_max +
         s * gamma * params.beta1.derivative(z) * b.eta_qmax * b.v_max;
}

SearchResult max_mu_norm(const GPModel* gp, const RobotParams& nominal,
                         const SingularityGeometry& geom, const SearchOptions& opts) {
  const StateBox box = state_box(nominal);
  if (!gp) {
    SearchResult r;
    r.x = (box.lo + box.hi) / 2.0;
    return r;
  }
  return search_max(
      [&](const Eigen::VectorXd& x) {
        if (z_value(geom, x.head<2>()) < 0.0) return kInfeasible;
        return gp->mean(x).norm();
      },
      box, opts);
}

SearchResult delta_star(const ModelBounds& b, const GPModel* gp,
                        const RobotParams& nominal, const SingularityGeometry& geom,
                        const BarrierParams& params, const SearchOptions& opts) {
  if (!(opts.h_floor > 0.0)) throw std::invalid_argument("h_floor must be > 0");
  return search_max(
      [&](const Eigen::VectorXd& x) {
        const double z = z_value(geom, x.head<2>());
        if (z < 0.0) return kInfeasible;
        const double h = h_value(geom, params, split(x));
        if (h < opts.h_floor) return kInfeasible;
        return psi(b, mu_norm_at(gp, x), params.gamma, params, z, opts.norm_factor) /
               params.beta2(h);
      },
      state_box(nominal), opts);
}

SearchResult gamma_star(const ModelBounds& b, const GPModel* gp,
                        const RobotParams& nominal, const SingularityGeometry& geom,
                        const BarrierParams& params, const SearchOptions& opts) {
  const double s = b.norm_scale(opts.norm_factor);
  const SearchResult mu = max_mu_norm(gp, nominal, geom, opts);
  const ActuationCheck act = check_actuation(b, mu.value, opts.norm_factor);
  if (!act.pass) {
    throw std::runtime_error(
        "actuation check failed: u_max - xi_max / (s eta_qmax m_max) = " +
        std::to_string(act.margin) + " < 0; gamma* does not exist");
  }
  // Maximize the negated ratio.
  SearchResult r = search_max(
      [&](const Eigen::VectorXd& x) {
        const double z = z_value(geom, x.head<2>());
        if (z < 0.0) return kInfeasible;
        const double num = s * b.eta_qmax * b.m_max * b.u_max -
                           xi(b, mu_norm_at(gp, x), opts.norm_factor);
        const double den = s * params.beta1.derivative(z) * b.eta_qmax * b.v_max;
        return -num / den;
      },
      state_box(nominal), opts);
  r.value = -r.value;
  return r;
}

ActuationCheck check_actuation(const ModelBounds& b, double mu_norm_max, NormFactor f) {
  ActuationCheck c;
  c.xi_max = xi(b, mu_norm_max, f);
  c.margin = b.u_max - c.xi_max / (b.norm_scale(f) * b.eta_qmax * b.m_max);
  c.pass = c.margin > 0.0;
  return c;
}

DerivativeBoundReport verify_derivative_bounds(const SingularityGeometry& geom,
                                               const ModelBounds& b, double q_max,
                                               std::size_t samples, std::uint64_t seed,
                                               const HessianFn& hessian) {
  DerivativeBoundReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uq(-q_max, q_max);
  for (std::size_t k = 0; k < samples; ++k) {
    const Eigen::Vector2d q(uq(rng), uq(rng));
    const double gn = grad_eta(geom, q).norm();
    const Eigen::Matrix2d H = hessian(geom, q);
    const double hn = Eigen::JacobiSVD<Eigen::Matrix2d>(H).singularValues()(0);
    rep.worst_grad_ratio = std::max(rep.worst_grad_ratio, gn / b.eta_qmax);
    rep.worst_hess_ratio = std::max(rep.worst_hess_ratio, hn / b.eta_max2);
    if (!(gn <= b.eta_qmax)) ++rep.grad_violations;
    if (!(hn <= b.eta_max2)) ++rep.hess_violations;
    ++rep.samples;
  }
  return rep;
}

Eigen::VectorXd nelder_mead_max(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                                const Eigen::VectorXd& hi, double step,
                                std::size_t max_evaluations) {
  const Eigen::Index d = x0.size();
  auto project = [&](Eigen::VectorXd x) { return Eigen::VectorXd(x.cwiseMax(lo).cwiseMin(hi)); };
  std::vector<Eigen::VectorXd> pts;
  std::vector<double> val;
  std::size_t evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };
  pts.push_back(project(x0));
  val.push_back(eval(pts.back()));
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::VectorXd x = x0;
    x(k) += (x(k) + step <= hi(k)) ? step : -step;
    pts.push_back(project(x));
    val.push_back(eval(pts.back()));
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(d + 1));
  while (evals < max_evaluations) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return val[a] > val[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    if (std::isfinite(val[best]) && std::isfinite(val[worst]) &&
        std::abs(val[best] - val[worst]) <= 1e-12 * (1.0 + std::abs(val[best]))) {
      double spread = 0.0;
      for (const auto& p : pts) spread = std::max(spread, (p - pts[best]).lpNorm<Eigen::Infinity>());
      if (spread < 1e-9) break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd xr = project(centroid + (centroid - pts[worst]));
    const double fr = eval(xr);
    if (fr > val[best]) {
      const Eigen::VectorXd xe = project(centroid + 2.0 * (centroid - pts[worst]));
      const double fe = eval(xe);
      if (fe > fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr > val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const Eigen::VectorXd xc = project(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc > val[worst]) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = project(pts[best] + 0.5 * (pts[i] - pts[best]));
      val[i] = eval(pts[i]);
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (val[i] > val[best]) best = i;
  }
  return pts[best];
}

}  // namespace scbf
