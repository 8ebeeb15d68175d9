#pragma once
// YAML run configuration. Every problem found while loading is collected
// with its file:line position; unknown keys are errors. The schema is in
// docs/config.md.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "scbf/barriers.hpp"
#include "scbf/gp_regression.hpp"
#include "scbf/robot_model.hpp"
#include "scbf/sim_harness.hpp"
#include "scbf/singularity_geometry.hpp"
#include "scbf/tuning.hpp"

namespace scbf {

struct DatasetConfig {
  TrajectorySpec excitation;  // PID-tracked on the true plant
  double discard = 1.0;       // s of start-up transient dropped from the log
  std::string path;           // CSV to load instead of generating
};

struct GPConfig {
  std::vector<KernelParams> kernels;
  double sigma_v2 = 1e-3;
  std::size_t points = 200;
  bool auto_bound = true;  // calibrate B on the held-out rows
  Eigen::VectorXd rkhs_bound;
  double safety_factor = 2.0;
  std::string model_path;  // saved model to load instead of fitting
};

struct TuningConfig {
  SearchOptions search;
  std::size_t grid_resolution = 100;
  std::size_t derivative_samples = 100000;
};

struct SimulationConfig {
  double dt = 1e-3;
  double duration = 10.0;
  FilterMode mode = FilterMode::filtered_gp;
  bool singularity_seeking = true;
  double reference_frequency = 0.2;
  TrajectorySpec reference;  // used when singularity_seeking is false
};

struct SweepConfig {
  // Either explicit grids or fractions of gamma* and multiples of delta*.
  bool tuned = true;
  std::vector<double> gamma_fractions{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> delta_multiples{1.0, 10.0, 100.0, 1000.0, 10000.0};
  std::vector<double> gammas;
  std::vector<double> deltas;
  std::size_t threads = 0;
};

struct RunConfig {
  RobotParams robot;
  SingularityGeometry geom;
  BarrierParams barrier;
  PIDGains pid;
  DatasetConfig dataset;
  GPConfig gp;
  TuningConfig tuning;
  SimulationConfig simulation;
  SweepConfig sweep;
  std::uint64_t seed = 0;
  std::string output = "out";

  RunConfig();
  TrajectorySpec reference() const;
  EpisodeConfig episode(const GPModel* gp) const;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> messages);
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
};

/// Throws ConfigError with every problem found, not just the first.
RunConfig load_config(const std::string& path);
RunConfig load_config_string(const std::string& text,
                             const std::string& name = "<config>");

}  // namespace scbf
