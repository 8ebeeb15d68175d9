#include "scbf/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace scbf {

GPBuild build_gp(const RunConfig& config) {
  GPBuild b;
  if (!config.dataset.path.empty()) {
    std::ifstream in(config.dataset.path);
    if (!in) throw std::runtime_error("cannot open dataset " + config.dataset.path);
    b.full = read_dataset_csv(in, config.gp.sigma_v2);
  } else {
    const EpisodeLog log = generate_dataset(config.robot, config.pid,
                                            config.dataset.excitation, config.simulation.dt);
    if (log.aborted) throw std::runtime_error("excitation episode failed: " + log.abort_reason);
    b.full = collect_residuals(log.samples(config.dataset.discard), config.robot,
                               config.gp.sigma_v2);
  }
  b.train = subsample(b.full, std::min(config.gp.points, b.full.size()), config.seed);
  b.validation = complement(b.full, b.train);

  Eigen::VectorXd bound = config.gp.rkhs_bound;
  if (config.gp.auto_bound) {
    if (b.validation.size() == 0) {
      throw std::runtime_error("rkhs_bound: auto needs held-out rows; lower gp.points");
    }
    // B does not enter the posterior, so fit once and calibrate afterwards.
    const GPModel provisional = GPModel::fit(
        b.train, config.gp.kernels,
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config.robot.dof())));
    bound = calibrate_rkhs_bounds(provisional, b.validation.inputs(), b.validation.Y,
                                  config.gp.safety_factor);
    b.model = provisional.with_rkhs_bounds(bound);
  } else {
    b.model = GPModel::fit(b.train, config.gp.kernels, bound);
  }
  return b;
}

GPModel obtain_gp(const RunConfig& config) {
  if (!config.gp.model_path.empty()) {
    std::ifstream in(config.gp.model_path);
    if (!in) throw std::runtime_error("cannot open GP model " + config.gp.model_path);
    return GPModel::load(in);
  }
  return build_gp(config).model;
}

namespace {

FactorReport tune_factor(const RunConfig& config, const GPModel& gp, const ModelBounds& b,
                         double mu_max, NormFactor f) {
  SearchOptions opts = config.tuning.search;
  opts.norm_factor = f;
  FactorReport r;
  r.factor = f;
  r.actuation = check_actuation(b, mu_max, f);
  r.xi_max = r.actuation.xi_max;
  r.psi_max = psi(b, mu_max, config.barrier.gamma, config.barrier, 0.0, f);
  try {
    r.gamma_star = gamma_star(b, &gp, config.robot, config.geom, config.barrier, opts).value;
    r.gamma_ok = true;
  } catch (const std::runtime_error& e) {
    r.gamma_error = e.what();
  }
  r.delta_star = delta_star(b, &gp, config.robot, config.geom, config.barrier, opts).value;
  return r;
}

}  // namespace

TuneReport run_tuning(const RunConfig& config, const GPModel& gp) {
  TuneReport r;
  r.bounds = compute_model_bounds(config.robot, config.geom, config.tuning.grid_resolution);
  r.bounds.lambda_bar = gp.uniform_bound();
  r.mu_max = max_mu_norm(&gp, config.robot, config.geom, config.tuning.search).value;
  r.paper = tune_factor(config, gp, r.bounds, r.mu_max, NormFactor::paper);
  r.tight = tune_factor(config, gp, r.bounds, r.mu_max, NormFactor::tight);
  return r;
}

void write_tune_report(const TuneReport& r, const RunConfig& config, std::ostream& os) {
  const auto& b = r.bounds;
  os << std::setprecision(6);
  os << "model bounds (grid " << config.tuning.grid_resolution << " per axis, locally refined)\n"
     << "  m_min      " << b.m_min << "\n"
     << "  m_max      " << b.m_max << "\n"
     << "  c_max      " << b.c_max << "\n"
     << "  g_max      " << b.g_max << "\n"
     << "  f_q g_q    " << b.f_q << ' ' << b.g_q << "\n"
     << "  f_q2 g_q2  " << b.f_q2 << ' ' << b.g_q2 << "\n"
     << "  eta_qmax   " << b.eta_qmax << "\n"
     << "  eta_max2   " << b.eta_max2 << "\n"
     << "gp\n"
     << "  lambda_bar " << b.lambda_bar << "\n"
     << "  max |mu|   " << r.mu_max << "\n";
  for (const FactorReport* f : {&r.paper, &r.tight}) {
    os << "norm factor " << to_string(f->factor) << " (s = " << b.norm_scale(f->factor) << ")\n"
       << "  xi_max            " << f->xi_max << "\n"
       << "  actuation margin  " << f->actuation.margin
       << (f->actuation.pass ? " (pass)" : " (FAIL)") << "\n";
    if (f->gamma_ok) {
      os << "  gamma*            " << f->gamma_star << "\n";
    } else {
      os << "  gamma*            undefined: " << f->gamma_error << "\n";
    }
    os << "  delta*            " << f->delta_star << "  (h >= " << config.tuning.search.h_floor
       << ")\n";
  }
  const FactorReport& sel = r.selected(config.tuning.search.norm_factor);
  os << "configured gamma = " << config.barrier.gamma << ", delta = " << config.barrier.delta
     << ": gamma <= gamma* " << (sel.gamma_ok && config.barrier.gamma <= sel.gamma_star ? "yes" : "no")
     << ", delta >= delta* " << (config.barrier.delta >= sel.delta_star ? "yes" : "no") << "\n";
}

void write_tune_csv(const TuneReport& r, std::ostream& os) {
  const auto& b = r.bounds;
  os << std::setprecision(17) << "quantity,value\n"
     << "m_min," << b.m_min << "\nm_max," << b.m_max << "\nc_max," << b.c_max
     << "\ng_max," << b.g_max << "\nf_q," << b.f_q << "\ng_q," << b.g_q << "\nf_q2," << b.f_q2
     << "\ng_q2," << b.g_q2 << "\neta_qmax," << b.eta_qmax << "\neta_max2," << b.eta_max2
     << "\nlambda_bar," << b.lambda_bar << "\nmu_max," << r.mu_max << '\n';
  for (const FactorReport* f : {&r.paper, &r.tight}) {
    const std::string p = to_string(f->factor) + "_";
    os << p << "xi_max," << f->xi_max << '\n'
       << p << "actuation_margin," << f->actuation.margin << '\n'
       << p << "gamma_star," << (f->gamma_ok ? f->gamma_star : std::nan("")) << '\n'
       << p << "delta_star," << f->delta_star << '\n';
  }
}

void sweep_grids(const RunConfig& config, const TuneReport& tune,
                 std::vector<double>& gammas, std::vector<double>& deltas) {
  if (!config.sweep.tuned) {
    gammas = config.sweep.gammas;
    deltas = config.sweep.deltas;
    return;
  }
  const FactorReport& f = tune.selected(config.tuning.search.norm_factor);
  if (!f.gamma_ok) throw std::runtime_error("tuned sweep grid needs gamma*: " + f.gamma_error);
  gammas.clear();
  deltas.clear();
  for (double x : config.sweep.gamma_fractions) gammas.push_back(x * f.gamma_star);
  for (double x : config.sweep.delta_multiples) deltas.push_back(x * f.delta_star);
}

}  // namespace scbf
