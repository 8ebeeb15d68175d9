#pragma once
// End-to-end steps shared by the CLI and the acceptance suite: dataset,
// GP fit with calibrated bounds, and the tuning report.

#include <iosfwd>
#include <string>

#include "scbf/config.hpp"

namespace scbf {

struct GPBuild {
  Dataset full;        // every logged row after the start-up transient
  Dataset train;       // the gp.points rows used for the fit
  Dataset validation;  // the rest, used to calibrate B
  GPModel model;
};

/// Loads dataset.path or runs the excitation episode, subsamples with
/// `seed`, fits and sets B (calibrated or from the config).
GPBuild build_gp(const RunConfig& config);

/// gp.model if set, otherwise build_gp(config).model.
GPModel obtain_gp(const RunConfig& config);

struct FactorReport {
  NormFactor factor = NormFactor::paper;
  ActuationCheck actuation;
  bool gamma_ok = false;
  double gamma_star = 0.0;
  std::string gamma_error;
  double delta_star = 0.0;
  double xi_max = 0.0;
  double psi_max = 0.0;
};

struct TuneReport {
  ModelBounds bounds;
  double mu_max = 0.0;
  FactorReport paper;
  FactorReport tight;

  const FactorReport& selected(NormFactor f) const {
    return f == NormFactor::paper ? paper : tight;
  }
};

TuneReport run_tuning(const RunConfig& config, const GPModel& gp);

void write_tune_report(const TuneReport& r, const RunConfig& config, std::ostream& os);
void write_tune_csv(const TuneReport& r, std::ostream& os);

/// The sweep grids: explicit, or gamma* fractions and delta* multiples.
void sweep_grids(const RunConfig& config, const TuneReport& tune,
                 std::vector<double>& gammas, std::vector<double>& deltas);

}  // namespace scbf
