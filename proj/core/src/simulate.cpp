#include <drlyap/simulate.hpp>

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace drlyap {

Vec rk4_step(const Derivative& deriv, const Vec& x, double dt) {
  if (!(dt > 0.0)) throw ContractError("rk4_step: dt must be > 0");
  auto checked = [&](const Vec& at) {
    Vec d = deriv(at);
    if (!d.allFinite()) throw NumericError("rk4_step: non-finite derivative");
    return d;
  };
  const Vec k1 = checked(x);
  const Vec k2 = checked(x + 0.5 * dt * k1);
  const Vec k3 = checked(x + 0.5 * dt * k2);
  const Vec k4 = checked(x + dt * k3);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::string to_string(ModelKind kind) { return kind == ModelKind::Exact ? "exact" : "taylor"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "exact") return ModelKind::Exact;
  if (name == "taylor") return ModelKind::Taylor;
  throw ConfigError("unknown model '" + name + "' (expected exact or taylor)");
}

namespace {

Trajectory integrate(const std::function<Vec(const Vec&)>& policy, const LyapunovPair* pair,
                     const UncertainSystem& sys, const Vec& xi, const Vec& x0,
                     const RolloutOptions& opt) {
  require_dim(x0.size(), sys.state_dim(), "rollout x0");
  require_dim(xi.size(), sys.uncertainty_dim(), "rollout xi");
  if (!x0.allFinite()) throw ContractError("rollout: x0 must be finite");
  if (!(opt.dt > 0.0)) throw ContractError("rollout: dt must be > 0");
  if (opt.horizon < 0.0) throw ContractError("rollout: horizon must be >= 0");

  auto field = [&](const Vec& x, const Vec& u) {
    return opt.model == ModelKind::Exact ? sys.eval_exact(x, u, xi) : sys.eval(x, u, xi);
  };
  auto record = [&](Trajectory& t, double time, const Vec& x) {
    t.times.push_back(time);
    t.states.push_back(x);
    if (pair != nullptr) {
      const Vec u = policy(x);
      t.V_values.push_back(V(*pair, x));
      t.V_dot_values.push_back(grad_V(*pair, x).dot(field(x, u)));
    } else {
      t.V_values.push_back(0.0);
      t.V_dot_values.push_back(0.0);
    }
  };

  const long steps = std::lround(opt.horizon / opt.dt);
  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(steps) + 1);
  Vec x = x0;
  record(traj, 0.0, x);
  for (long s = 0; s < steps; ++s) {
    const Vec u = policy(x);
    traj.controls.push_back(u);
    // Zero-order hold on the control over the step.
    x = rk4_step([&](const Vec& z) { return field(z, u); }, x, opt.dt);
    record(traj, static_cast<double>(s + 1) * opt.dt, x);
    if (!x.allFinite() || x.norm() > opt.blowup_norm) {
      traj.diverged = true;
      break;
    }
  }
  traj.final_distance = traj.diverged ? std::numeric_limits<double>::infinity()
                                      : sys.wrapped_distance(traj.states.back());
  traj.converged = !traj.diverged && traj.final_distance <= opt.convergence_tol;
  return traj;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> split_row(const std::string& line, std::size_t expect,
                              std::size_t& filled) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  filled = 0;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      out.push_back(std::stod(cell));
      ++filled;
    }
  }
  if (!line.empty() && line.back() == ',') out.push_back(std::numeric_limits<double>::quiet_NaN());
  if (out.size() != expect) throw ConfigError("trajectory CSV: wrong column count");
  return out;
}

}  // namespace

Trajectory rollout(const LyapunovPair& pair, const UncertainSystem& sys, const Vec& xi,
                   const Vec& x0, const RolloutOptions& options) {
  return integrate([&](const Vec& x) { return controller(pair, x, Saturation::Hard); }, &pair, sys,
                   xi, x0, options);
}

Trajectory rollout_policy(const std::function<Vec(const Vec&)>& policy,
                          const UncertainSystem& sys, const Vec& xi, const Vec& x0,
                          const RolloutOptions& options) {
  return integrate(policy, nullptr, sys, xi, x0, options);
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  if (traj.states.empty()) throw ContractError("write_trajectory_csv: empty trajectory");
  const Eigen::Index n = traj.states.front().size();
  const Eigen::Index m = traj.controls.empty() ? 0 : traj.controls.front().size();
  std::ostringstream out;
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i;
  out << ",V,Vdot\n";
  for (std::size_t r = 0; r < traj.states.size(); ++r) {
    out << fmt(traj.times[r]);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << fmt(traj.states[r][i]);
    for (Eigen::Index i = 0; i < m; ++i) {
      out << ',';
      if (r < traj.controls.size()) out << fmt(traj.controls[r][i]);
    }
    out << ',' << fmt(traj.V_values[r]) << ',' << fmt(traj.V_dot_values[r]) << '\n';
  }
  detail::write_text_file(path, out.str());
}

Trajectory read_trajectory_csv(const std::filesystem::path& path, int state_dim,
                               int control_dim) {
  std::istringstream in(detail::read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,", 0) != 0) {
    throw ConfigError(path.string() + ": not a trajectory CSV");
  }
  const std::size_t cols = 1 + static_cast<std::size_t>(state_dim + control_dim) + 2;
  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t filled = 0;
    const auto row = split_row(line, cols, filled);
    traj.times.push_back(row[0]);
    Vec x(state_dim);
    for (int i = 0; i < state_dim; ++i) x[i] = row[1 + static_cast<std::size_t>(i)];
    traj.states.push_back(x);
    if (filled == cols) {
      Vec u(control_dim);
      for (int i = 0; i < control_dim; ++i) {
        u[i] = row[1 + static_cast<std::size_t>(state_dim + i)];
      }
      traj.controls.push_back(u);
    }
    traj.V_values.push_back(row[cols - 2]);
    traj.V_dot_values.push_back(row[cols - 1]);
  }
  return traj;
}

double ControllerSummary::mean_final_distance() const {
  if (final_distances.empty()) return 0.0;
  double s = 0.0;
  for (double d : final_distances) s += d;
  return s / static_cast<double>(final_distances.size());
}

double ControllerSummary::max_final_distance() const {
  double m = 0.0;
  for (double d : final_distances) m = std::max(m, d);
  return m;
}

ExperimentSummary batch_experiment(const LyapunovPair& baseline, const LyapunovPair& dr,
                                   const UncertainSystem& sys, const Vec& xi_test, int n_inits,
                                   const Box& init_region, std::uint64_t seed,
                                   const RolloutOptions& options, const std::string& experiment) {
  if (n_inits < 0) throw ContractError("batch_experiment: n_inits must be >= 0");
  require_dim(init_region.dim(), sys.state_dim(), "batch_experiment init region");
  ExperimentSummary out;
  out.experiment = experiment;
  out.baseline.name = "baseline";
  out.dr.name = "dr";
  Rng rng(seed);
  for (int i = 0; i < n_inits; ++i) {
    Vec x(sys.state_dim());
    for (Eigen::Index d = 0; d < x.size(); ++d) {
      x[d] = rng.uniform(init_region.lower[d], init_region.upper[d]);
    }
    out.initial_states.push_back(sys.to_shifted(x));
  }
  auto run = [&](const LyapunovPair& pair, ControllerSummary& summary) {
    for (const auto& x0 : out.initial_states) {
      Trajectory t = rollout(pair, sys, xi_test, x0, options);
      summary.converged += t.converged ? 1 : 0;
      summary.diverged += t.diverged ? 1 : 0;
      summary.final_distances.push_back(t.final_distance);
      summary.trajectories.push_back(std::move(t));
    }
  };
  run(baseline, out.baseline);
  run(dr, out.dr);
  return out;
}

std::vector<std::filesystem::path> write_experiment(const std::filesystem::path& dir,
                                                    const ExperimentSummary& summary) {
  std::vector<std::filesystem::path> written;
  const auto root = dir / summary.experiment;
  nlohmann::json index;
  index["experiment"] = summary.experiment;
  index["initial_states"] = nlohmann::json::array();
  for (const auto& x : summary.initial_states) {
    index["initial_states"].push_back(detail::vec_to_json(x));
  }
  for (const ControllerSummary* c : {&summary.baseline, &summary.dr}) {
    nlohmann::json entry;
    entry["converged"] = c->converged;
    entry["diverged"] = c->diverged;
    entry["runs"] = c->trajectories.size();
    entry["final_distances"] = nlohmann::json::array();
    entry["files"] = nlohmann::json::array();
    for (std::size_t i = 0; i < c->trajectories.size(); ++i) {
      const auto rel = std::filesystem::path(c->name) / (std::to_string(i) + ".csv");
      write_trajectory_csv(root / rel, c->trajectories[i]);
      written.push_back(root / rel);
      entry["files"].push_back(rel.generic_string());
      const double d = c->final_distances[i];
      entry["final_distances"].push_back(std::isfinite(d) ? nlohmann::json(d) : nlohmann::json());
    }
    index["controllers"][c->name] = entry;
  }
  detail::write_text_file(root / "index.json", index.dump(1) + "\n");
  written.push_back(root / "index.json");
  return written;
}

}  // namespace drlyap
