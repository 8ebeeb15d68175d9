// scbf: tune, fit-gp, simulate, sweep, validate.
// Exit codes: 0 success, 1 validation or run failure, 2 configuration error.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "scbf/pipeline.hpp"
#include "scbf/safety_filter.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using namespace scbf;

namespace {

struct Options {
  std::string config_path;
  std::string out;
  std::string mode;
  std::string dataset;
  long long seed = -1;
  bool plots = false;
  bool corrupt_hessian = false;
};

RunConfig load(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (!o.out.empty()) c.output = o.out;
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  if (!o.mode.empty()) {
    try {
      c.simulation.mode = parse_filter_mode(o.mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError({std::string("--mode: ") + e.what()});
    }
  }
  if (!o.dataset.empty()) c.dataset.path = o.dataset;
  fs::create_directories(c.output);
  return c;
}

std::ofstream open_out(const RunConfig& c, const std::string& name) {
  const fs::path p = fs::path(c.output) / name;
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

int cmd_tune(const Options& o) {
  const RunConfig c = load(o);
  const GPModel gp = obtain_gp(c);
  const TuneReport r = run_tuning(c, gp);
  write_tune_report(r, c, std::cout);
  auto txt = open_out(c, "tune_report.txt");
  write_tune_report(r, c, txt);
  auto csv = open_out(c, "tune_report.csv");
  write_tune_csv(r, csv);
  return r.selected(c.tuning.search.norm_factor).actuation.pass ? 0 : 1;
}

int cmd_fit_gp(const Options& o) {
  const RunConfig c = load(o);
  const GPBuild b = build_gp(c);
  auto data = open_out(c, "dataset.csv");
  write_dataset_csv(b.full, data);
  auto model = open_out(c, "gp_model.txt");
  b.model.save(model);
  auto summary = open_out(c, "gp_summary.txt");
  for (std::ostream* os : {static_cast<std::ostream*>(&std::cout), static_cast<std::ostream*>(&summary)}) {
    *os << std::setprecision(8) << "rows " << b.full.size() << ", fitted " << b.train.size()
        << ", held out " << b.validation.size() << '\n';
    for (std::size_t i = 0; i < b.model.output_dim(); ++i) {
      *os << "output " << i + 1 << ": omega " << b.model.omega(i) << ", B "
          << b.model.rkhs_bound()(static_cast<Eigen::Index>(i)) << ", jitter "
          << b.model.jitter(i) << '\n';
    }
    *os << "lambda_bar " << b.model.uniform_bound() << '\n';
  }
  return 0;
}

void episode_plots(const RunConfig& c, const EpisodeLog& log, const std::string& tag) {
  plot::Series z{"z", {}, {}}, h{"h", {}, {}}, q2{"q2", {}, {}}, q2r{"q2 ref", {}, {}};
  std::vector<plot::Series> u(2 * log.rows.front().q.size());
  const TrajectorySpec ref = c.reference();
  for (const auto& r : log.rows) {
    z.x.push_back(r.t), z.y.push_back(r.z);
    h.x.push_back(r.t), h.y.push_back(r.h);
    q2.x.push_back(r.t), q2.y.push_back(r.q(1));
    q2r.x.push_back(r.t), q2r.y.push_back(ref.position(r.t)(1));
    for (Eigen::Index i = 0; i < r.q.size(); ++i) {
      u[static_cast<std::size_t>(2 * i)].x.push_back(r.t);
      u[static_cast<std::size_t>(2 * i)].y.push_back(r.u(i));
      u[static_cast<std::size_t>(2 * i + 1)].x.push_back(r.t);
      u[static_cast<std::size_t>(2 * i + 1)].y.push_back(r.u_nom(i));
    }
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i].name = (i % 2 ? "unom" : "u") + std::to_string(i / 2 + 1);
  }
  auto f1 = open_out(c, "z_" + tag + ".svg");
  plot::line_chart(f1, "singularity measure z (" + tag + ")", "t [s]", "z", {z}, true);
  auto f2 = open_out(c, "h_" + tag + ".svg");
  plot::line_chart(f2, "barrier h (" + tag + ")", "t [s]", "h", {h}, true);
  auto f3 = open_out(c, "q_" + tag + ".svg");
  plot::line_chart(f3, "joint 2 tracking (" + tag + ")", "t [s]", "rad", {q2, q2r});
  auto f4 = open_out(c, "u_" + tag + ".svg");
  plot::line_chart(f4, "torques (" + tag + ")", "t [s]", "N m", u);
}

int cmd_simulate(const Options& o) {
  const RunConfig c = load(o);
  GPModel gp;
  const bool need_gp = c.simulation.mode == FilterMode::filtered_gp;
  if (need_gp) gp = obtain_gp(c);
  const EpisodeLog log = run_episode(c.episode(need_gp ? &gp : nullptr));
  std::string tag = to_string(c.simulation.mode);
  std::replace(tag.begin(), tag.end(), '+', 'p');
  std::replace(tag.begin(), tag.end(), '-', 'm');
  auto csv = open_out(c, "episode_" + tag + ".csv");
  write_episode_csv(log, csv);
  if (o.plots && !log.rows.empty()) episode_plots(c, log, tag);
  std::cout << std::setprecision(6) << "mode " << to_string(c.simulation.mode) << ": "
            << log.rows.size() << " steps, z_min " << log.z_min() << ", h_min " << log.h_min()
            << ", max |v| " << log.v_abs_max() << ", max |u| " << log.u_abs_max()
            << ", relaxed " << log.count(QPStatus::relaxed) << ", infeasible "
            << log.count(QPStatus::infeasible) << '\n';
  if (log.aborted) {
    std::cerr << "episode aborted: " << log.abort_reason << '\n';
    return 1;
  }
  return 0;
}

int cmd_sweep(const Options& o) {
  const RunConfig c = load(o);
  const GPModel gp = obtain_gp(c);
  const TuneReport tune = run_tuning(c, gp);
  std::vector<double> gammas, deltas;
  sweep_grids(c, tune, gammas, deltas);
  const FactorReport& f = tune.selected(c.tuning.search.norm_factor);
  EpisodeConfig base = c.episode(&gp);
  base.mode = FilterMode::filtered_gp;
  const SweepResult r = sweep_gamma_delta(base, gammas, deltas,
                                          f.gamma_ok ? f.gamma_star : 0.0, f.delta_star,
                                          c.sweep.threads);
  auto csv = open_out(c, "sweep.csv");
  write_sweep_csv(r, csv);
  if (o.plots) {
    std::vector<std::vector<double>> vals(gammas.size(), std::vector<double>(deltas.size()));
    for (std::size_t i = 0; i < gammas.size(); ++i) {
      for (std::size_t j = 0; j < deltas.size(); ++j) {
        vals[i][j] = r.z_min(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    auto svg = open_out(c, "sweep.svg");
    plot::heatmap(svg, "z_min over (gamma, delta)", "delta", "gamma", deltas, gammas, vals);
  }
  const SweepTrend t = sweep_trend(r);
  std::cout << std::setprecision(6) << "cells " << gammas.size() * deltas.size()
            << ", spearman(gamma) " << t.rho_gamma << ", spearman(delta) " << t.rho_delta
            << ", unsafe in-criterion cells " << t.unsafe_cells << '\n';
  for (std::size_t k = 0; k < r.failures.size(); ++k) {
    if (!r.failures[k].empty()) {
      std::cout << "cell gamma=" << gammas[k / deltas.size()]
                << " delta=" << deltas[k % deltas.size()] << ": " << r.failures[k] << '\n';
    }
  }
  const bool ok = t.rho_gamma <= -0.8 && t.rho_delta <= -0.8 && t.unsafe_cells == 0;
  return ok ? 0 : 1;
}

int cmd_validate(const Options& o) {
  const RunConfig c = load(o);
  HessianFn hessian = hess_eta;
  if (o.corrupt_hessian) {
    hessian = [](const SingularityGeometry& g, const Eigen::Vector2d& q) {
      return Eigen::Matrix2d(hess_eta(g, q) + 20.0 * Eigen::Matrix2d::Identity());
    };
  }
  bool all = true;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    all = all && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
  };
  std::ostringstream d;

  const ModelBounds b = compute_model_bounds(c.robot, c.geom, c.tuning.grid_resolution);
  const DerivativeBoundReport dr = verify_derivative_bounds(
      c.geom, b, c.robot.q_max, c.tuning.derivative_samples, c.seed, hessian);
  d << dr.samples << " samples, worst |grad|/bound " << dr.worst_grad_ratio
    << ", worst |H|/bound " << dr.worst_hess_ratio << ", violations " << dr.grad_violations
    << '/' << dr.hess_violations;
  report("derivative bounds", dr.pass(), d.str());

  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> uq(-c.robot.q_max, c.robot.q_max);
  double worst_g = 0.0, worst_h = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector2d q(uq(rng), uq(rng));
    const double e = 1e-6;
    Eigen::Vector2d g_fd;
    Eigen::Matrix2d h_fd;
    for (int i = 0; i < 2; ++i) {
      const Eigen::Vector2d dq = e * Eigen::Vector2d::Unit(i);
      g_fd(i) = (eta(c.geom, q + dq) - eta(c.geom, q - dq)) / (2 * e);
      h_fd.col(i) = (grad_eta(c.geom, q + dq) - grad_eta(c.geom, q - dq)) / (2 * e);
    }
    worst_g = std::max(worst_g, (g_fd - grad_eta(c.geom, q)).norm() /
                                    std::max(1e-3, grad_eta(c.geom, q).norm()));
    worst_h = std::max(worst_h, (h_fd - hessian(c.geom, q)).norm() /
                                    std::max(1e-3, hessian(c.geom, q).norm()));
  }
  d.str("");
  d << "max relative error " << worst_g;
  report("gradient vs central differences", worst_g < 1e-7, d.str());
  d.str("");
  d << "max relative error " << worst_h;
  report("Hessian vs central differences", worst_h < 1e-5, d.str());

  double worst_skew = 0.0;
  std::uniform_real_distribution<double> uv(-c.robot.v_max, c.robot.v_max);
  for (int k = 0; k < 200; ++k) {
    const Eigen::VectorXd q = Eigen::Vector2d(uq(rng), uq(rng));
    const Eigen::VectorXd v = Eigen::Vector2d(uv(rng), uv(rng));
    const double e = 1e-6;
    const Eigen::MatrixXd Mdot = (mass_matrix(c.robot, q + e * v, ModelVariant::truth) -
                                  mass_matrix(c.robot, q - e * v, ModelVariant::truth)) /
                                 (2 * e);
    const Eigen::MatrixXd S = Mdot - 2.0 * coriolis_matrix(c.robot, q, v, ModelVariant::truth);
    worst_skew = std::max(worst_skew, (S + S.transpose()).cwiseAbs().maxCoeff());
  }
  d.str("");
  d << "max |S + S^T| " << worst_skew;
  report("skew symmetry of Mdot - 2C", worst_skew < 1e-6, d.str());

  const GPModel gp = obtain_gp(c);
  const TuneReport t = run_tuning(c, gp);
  const ActuationCheck& act = t.selected(c.tuning.search.norm_factor).actuation;
  d.str("");
  d << "margin " << act.margin << " N m (lambda_bar " << t.bounds.lambda_bar << ", max |mu| "
    << t.mu_max << ")";
  report("actuation", act.pass, d.str());
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singularity-avoiding CBF safety filter with GP mismatch compensation"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "YAML configuration file");
  app.add_option("--out", o.out, "output directory (overrides the config)");
  app.add_option("--seed", o.seed, "seed for subsampling and initial-state perturbation");
  app.add_option("--mode", o.mode, "filtered+gp, filtered-gp or unfiltered");
  app.add_flag("--plots", o.plots, "also write SVG plots");

  auto* tune = app.add_subcommand("tune", "bound constants, gamma*, delta*, actuation margin");
  auto* fit = app.add_subcommand("fit-gp", "generate or load the dataset and fit the GP");
  fit->add_option("--dataset", o.dataset, "dataset CSV to fit instead of generating one");
  auto* sim = app.add_subcommand("simulate", "one closed-loop episode");
  auto* sweep = app.add_subcommand("sweep", "z_min over the gamma-delta grid");
  auto* val = app.add_subcommand("validate", "derivative, dynamics and actuation checks");
  val->add_flag("--corrupt-hessian", o.corrupt_hessian)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (*tune) return cmd_tune(o);
    if (*fit) return cmd_fit_gp(o);
    if (*sim) return cmd_simulate(o);
    if (*sweep) return cmd_sweep(o);
    if (*val) return cmd_validate(o);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
