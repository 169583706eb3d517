#pragma once

// Closed-loop integration under a fixed uncertainty realisation.

#include <drlyap/lyapunov.hpp>
#include <drlyap/systems.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace drlyap {

using Derivative = std::function<Vec(const Vec&)>;

/// Classical fourth-order Runge-Kutta step. NumericError on a non-finite stage.
Vec rk4_step(const Derivative& deriv, const Vec& x, double dt);

enum class ModelKind { Taylor, Exact };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct RolloutOptions {
  double dt = 0.01;
  double horizon = 20.0;
  double convergence_tol = 0.2;
  ModelKind model = ModelKind::Exact;
  double blowup_norm = 1e6;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;    // shifted coordinates
  std::vector<Vec> controls;  // one shorter than states
  std::vector<double> V_values;
  std::vector<double> V_dot_values;
  bool converged = false;
  bool diverged = false;
  double final_distance = 0.0;
};

/// Integrates xdot = f + W xi (Taylor) or the physical model (Exact) under the
/// hard-clamped controller, from x0 in shifted coordinates.
Trajectory rollout(const LyapunovPair& pair, const UncertainSystem& sys, const Vec& xi,
                   const Vec& x0, const RolloutOptions& options);

/// Rollout of an arbitrary state-feedback law; V and V_dot are left at zero.
Trajectory rollout_policy(const std::function<Vec(const Vec&)>& policy,
                          const UncertainSystem& sys, const Vec& xi, const Vec& x0,
                          const RolloutOptions& options);

/// CSV rows t, x..., u..., V, Vdot; the last row leaves u empty.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path, int state_dim, int control_dim);

struct ControllerSummary {
  std::string name;
  int converged = 0;
  int diverged = 0;
  std::vector<double> final_distances;
  std::vector<Trajectory> trajectories;

  double mean_final_distance() const;
  double max_final_distance() const;
};

struct ExperimentSummary {
  std::string experiment;
  std::vector<Vec> initial_states;  // shifted coordinates
  ControllerSummary baseline;
  ControllerSummary dr;
};

/// n_inits states uniform in init_region (original coordinates), rolled out
/// under both pairs with the same xi_test.
ExperimentSummary batch_experiment(const LyapunovPair& baseline, const LyapunovPair& dr,
                                   const UncertainSystem& sys, const Vec& xi_test, int n_inits,
                                   const Box& init_region, std::uint64_t seed,
                                   const RolloutOptions& options,
                                   const std::string& experiment = "experiment");

/// Writes {dir}/{experiment}/{baseline,dr}/{i}.csv plus {dir}/{experiment}/index.json
/// and returns every path written.
std::vector<std::filesystem::path> write_experiment(const std::filesystem::path& dir,
                                                    const ExperimentSummary& summary);

}  // namespace drlyap
