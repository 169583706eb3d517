#include <drlyap/experiment.hpp>
#include <drlyap/weights_io.hpp>

#include "json_util.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#ifndef DRLYAP_GIT_DESCRIBE
#define DRLYAP_GIT_DESCRIBE "unknown"
#endif

namespace drlyap {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::string warm_start_name(WarmStart w) {
  switch (w) {
    case WarmStart::None: return "none";
    case WarmStart::Nominal: return "nominal";
    case WarmStart::Baseline: return "baseline";
  }
  return "none";
}

WarmStart warm_start_from(const std::string& s) {
  if (s == "none") return WarmStart::None;
  if (s == "nominal") return WarmStart::Nominal;
  if (s == "baseline") return WarmStart::Baseline;
  throw ConfigError("unknown warm_start '" + s + "' (expected none, nominal or baseline)");
}

json box_to_json(const Box& b) {
  return {{"lower", detail::vec_to_json(b.lower)}, {"upper", detail::vec_to_json(b.upper)}};
}

Box box_from_json(const json& j) {
  Box b{detail::vec_from_json(j.at("lower")), detail::vec_from_json(j.at("upper"))};
  if (b.lower.size() != b.upper.size() || (b.lower.array() > b.upper.array()).any()) {
    throw ConfigError("box needs lower <= upper of equal length");
  }
  return b;
}

std::vector<int> ints(const json& j) { return j.get<std::vector<int>>(); }

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_json(const fs::path& path, const json& j) { detail::write_text_file(path, j.dump(1) + "\n"); }

json manifest_json(const ExperimentConfig& config, const std::string& command,
                   const std::vector<fs::path>& outputs, const json& results) {
  json m;
  m["command"] = command;
  m["config_hash"] = config_hash(config);
  m["seed"] = config.seed;
  m["git_describe"] = DRLYAP_GIT_DESCRIBE;
  json files = json::array();
  for (const auto& p : outputs) files.push_back(p.generic_string());
  files.push_back("manifest.json");
  m["outputs"] = files;
  m["results"] = results;
  return m;
}

json run_json(const TrainResult& r) {
  json j;
  j["epochs_run"] = r.log.empty() ? 0 : r.log.back().epoch;
  j["final_loss"] = r.log.empty() ? 0.0 : r.log.back().loss;
  j["best_loss"] = r.best_loss;
  j["converged_epoch"] = r.converged_epoch ? json(*r.converged_epoch) : json();
  j["warning"] = r.warning;
  return j;
}

// Paths are relative to the output directory; `written` collects them.
void save_stage(const fs::path& dir, const std::string& stem, const TrainResult& run,
                std::vector<fs::path>& written) {
  save_pair(run.pair, dir / stem);
  written.push_back(stem + ".json");
  written.push_back(stem + "_certificate.json");
  written.push_back(stem + "_controller.json");
  write_train_log(dir / ("train_log_" + stem + ".csv"), run.log);
  written.push_back("train_log_" + stem + ".csv");
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

CertificateReport certify_pair(const ExperimentConfig& config, const LyapunovPair& pair,
                               const UncertainSystem& sys, const AmbiguitySpec& spec) {
  const auto states = sample_domain(sys, config.train.M, config.train.delta, config.train.seed);
  const UncertaintyDistribution* dist =
      config.distribution.dim() > 0 ? &config.distribution : nullptr;
  return certify(pair, sys, spec, states, dist, config.verify);
}

void print_report(std::ostream& out, const CertificateReport& r) {
  out << "grid " << r.grid.resolution << "^n (" << r.grid.points << " points)\n";
  out << "  worst nominal margin " << fmt_double(r.grid.worst_nominal)
      << (r.grid.nominal_pass ? "  pass\n" : "  FAIL\n");
  out << "  worst DR margin      " << fmt_double(r.grid.worst_dr)
      << (r.grid.dr_pass ? "  pass\n" : "  FAIL\n");
  if (r.slack) out << "  theoretical slack    " << fmt_double(*r.slack) << "\n";
  if (r.chance) {
    out << "  chance " << fmt_double(r.chance->probability) << " (" << r.chance->passes << "/"
        << r.chance->trials << ", Wilson95 [" << fmt_double(r.chance->wilson_low) << ", "
        << fmt_double(r.chance->wilson_high) << "])" << (r.chance_pass ? "  pass\n" : "  FAIL\n");
  }
}

struct Check {
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Check> repro_checks(const ExperimentConfig& config, const ReproOutcome& o) {
  std::vector<Check> checks;
  const int n = static_cast<int>(o.summary.initial_states.size());
  const auto frac = [n](int k) { return std::to_string(k) + "/" + std::to_string(n); };
  checks.push_back({"dr_converges", o.summary.dr.converged >= std::ceil(0.9 * n - 1e-9),
                    frac(o.summary.dr.converged) + " (need >= 90%)"});
  checks.push_back({"baseline_fails", o.summary.baseline.converged <= std::floor(0.3 * n + 1e-9),
                    frac(o.summary.baseline.converged) + " (need <= 30%)"});
  for (std::size_t i = 0; i < o.probes.size(); ++i) {
    const auto& s = o.probe_stats[i];
    const bool ok = o.probes[i].converged && s.fraction() >= 0.95 &&
                    s.max_increase <= 1e-4 * s.V_max;
    std::ostringstream d;
    d << "x0=(" << fmt_double(config.probe_states[i][0]) << ", "
      << fmt_double(config.probe_states[i][1]) << ") converged=" << o.probes[i].converged
      << " nonincreasing=" << fmt_double(s.fraction())
      << " max_increase/V_max=" << fmt_double(s.V_max > 0 ? s.max_increase / s.V_max : 0.0);
    checks.push_back({"monotone_probe_" + std::to_string(i), ok, d.str()});
  }
  if (o.report.chance) {
    checks.push_back({"chance", o.report.chance_pass,
                      fmt_double(o.report.chance->probability) + " low95=" +
                          fmt_double(o.report.chance->wilson_low)});
  }
  return checks;
}

}  // namespace

std::uint64_t ExperimentConfig::resolved_uncertainty_seed() const {
  return uncertainty_seed ? *uncertainty_seed : seed + 1;
}

std::uint64_t ExperimentConfig::resolved_test_seed() const {
  return test_seed ? *test_seed : seed + 2;
}

json ExperimentConfig::to_json() const {
  json j;
  j["name"] = name;
  j["system"] = system;
  j["seed"] = seed;
  j["output_dir"] = output_dir.generic_string();
  j["train"] = {{"M", train.M},
                {"epochs", train.epochs},
                {"learning_rate", train.learning_rate},
                {"gamma", train.gamma},
                {"delta", train.delta},
                {"alpha_hat", train.alpha_hat},
                {"loss_kind", to_string(train.loss_kind)},
                {"decay_rate", train.decay_rate},
                {"batch_size", train.batch_size},
                {"resample_every", train.resample_every},
                {"loss_tol", train.loss_tol},
                {"smooth_clamp", train.smooth_clamp},
                {"certificate_hidden", train.shape.certificate_hidden},
                {"certificate_output", train.shape.certificate_output},
                {"controller_hidden", train.shape.controller_hidden},
                {"baseline_epochs", baseline_epochs},
                {"warm_start_epochs", warm_start_epochs},
                {"warm_start", warm_start_name(warm_start)}};
  j["ambiguity"] = {{"r", train.r}, {"epsilon", train.epsilon}};
  json unc;
  unc["N"] = train.N;
  unc["seed"] = uncertainty_seed ? json(*uncertainty_seed) : json();
  unc["samples_file"] = samples_file ? json(samples_file->generic_string()) : json();
  unc["distributions"] = distribution.dim() > 0 ? distribution.to_json() : json();
  unc["support_bound"] = support_bound ? json(*support_bound) : json();
  j["uncertainty"] = unc;
  json probes = json::array();
  for (const auto& p : probe_states) probes.push_back(detail::vec_to_json(p));
  j["test"] = {{"xi", detail::vec_to_json(xi_test)},
               {"n_inits", n_inits},
               {"init_region", box_to_json(init_region)},
               {"seed", test_seed ? json(*test_seed) : json()},
               {"dt", rollout.dt},
               {"horizon", rollout.horizon},
               {"convergence_tol", rollout.convergence_tol},
               {"model", to_string(rollout.model)},
               {"probe_states", probes}};
  j["verify"] = {{"resolution", verify.resolution},
                 {"mc_trials", verify.mc_trials},
                 {"lipschitz_pairs", verify.lipschitz_pairs},
                 {"chance_target", verify.chance_target},
                 {"require_slack", verify.require_slack}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    ExperimentConfig c;
    if (j.contains("preset")) c = experiment_preset(j.at("preset").get<std::string>());
    c.base_dir = base_dir;
    maybe(j, "name", c.name);
    maybe(j, "system", c.system);
    maybe(j, "seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();

    if (j.contains("train")) {
      const json& t = j.at("train");
      maybe(t, "M", c.train.M);
      maybe(t, "epochs", c.train.epochs);
      maybe(t, "learning_rate", c.train.learning_rate);
      maybe(t, "gamma", c.train.gamma);
      maybe(t, "delta", c.train.delta);
      maybe(t, "alpha_hat", c.train.alpha_hat);
      if (t.contains("loss_kind")) {
        c.train.loss_kind = loss_kind_from_string(t.at("loss_kind").get<std::string>());
      }
      maybe(t, "decay_rate", c.train.decay_rate);
      maybe(t, "batch_size", c.train.batch_size);
      maybe(t, "resample_every", c.train.resample_every);
      maybe(t, "loss_tol", c.train.loss_tol);
      maybe(t, "smooth_clamp", c.train.smooth_clamp);
      if (t.contains("certificate_hidden")) c.train.shape.certificate_hidden = ints(t.at("certificate_hidden"));
      maybe(t, "certificate_output", c.train.shape.certificate_output);
      if (t.contains("controller_hidden")) c.train.shape.controller_hidden = ints(t.at("controller_hidden"));
      maybe(t, "baseline_epochs", c.baseline_epochs);
      maybe(t, "warm_start_epochs", c.warm_start_epochs);
      if (t.contains("warm_start")) c.warm_start = warm_start_from(t.at("warm_start").get<std::string>());
    }
    if (j.contains("ambiguity")) {
      maybe(j.at("ambiguity"), "r", c.train.r);
      maybe(j.at("ambiguity"), "epsilon", c.train.epsilon);
    }
    if (j.contains("uncertainty")) {
      const json& u = j.at("uncertainty");
      maybe(u, "N", c.train.N);
      if (u.contains("seed") && !u.at("seed").is_null()) c.uncertainty_seed = u.at("seed").get<std::uint64_t>();
      if (u.contains("samples_file") && !u.at("samples_file").is_null()) {
        c.samples_file = u.at("samples_file").get<std::string>();
      }
      if (u.contains("distributions") && !u.at("distributions").is_null()) {
        c.distribution = UncertaintyDistribution::from_json(u.at("distributions"));
      }
      if (u.contains("support_bound") && !u.at("support_bound").is_null()) {
        c.support_bound = u.at("support_bound").get<double>();
      }
    }
    if (j.contains("test")) {
      const json& t = j.at("test");
      if (t.contains("xi")) c.xi_test = detail::vec_from_json(t.at("xi"));
      maybe(t, "n_inits", c.n_inits);
      if (t.contains("init_region")) c.init_region = box_from_json(t.at("init_region"));
      if (t.contains("seed") && !t.at("seed").is_null()) c.test_seed = t.at("seed").get<std::uint64_t>();
      maybe(t, "dt", c.rollout.dt);
      maybe(t, "horizon", c.rollout.horizon);
      maybe(t, "convergence_tol", c.rollout.convergence_tol);
      if (t.contains("model")) c.rollout.model = model_kind_from_string(t.at("model").get<std::string>());
      if (t.contains("probe_states")) {
        c.probe_states.clear();
        for (const auto& p : t.at("probe_states")) c.probe_states.push_back(detail::vec_from_json(p));
      }
    }
    if (j.contains("verify")) {
      const json& v = j.at("verify");
      maybe(v, "resolution", c.verify.resolution);
      maybe(v, "mc_trials", c.verify.mc_trials);
      maybe(v, "lipschitz_pairs", c.verify.lipschitz_pairs);
      maybe(v, "chance_target", c.verify.chance_target);
      maybe(v, "require_slack", c.verify.require_slack);
    }
    c.train.seed = c.seed;
    c.verify.seed = c.seed + 3;
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void ExperimentConfig::validate() const {
  const UncertainSystem sys = system_by_name(system);
  train.validate();
  if (baseline_epochs < 0 || warm_start_epochs < 0) throw ConfigError("epoch counts must be >= 0");
  if (!samples_file && distribution.dim() == 0) {
    throw ConfigError("uncertainty needs samples_file or distributions");
  }
  if (distribution.dim() > 0 && distribution.dim() != sys.uncertainty_dim()) {
    throw ConfigError("distributions must have one entry per uncertainty component");
  }
  if (samples_file && !fs::exists(base_dir / *samples_file)) {
    throw ConfigError("samples_file not found: " + (base_dir / *samples_file).string());
  }
  if (xi_test.size() != sys.uncertainty_dim()) throw ConfigError("test.xi has the wrong dimension");
  if (n_inits < 0) throw ConfigError("test.n_inits must be >= 0");
  if (init_region.dim() != sys.state_dim()) throw ConfigError("test.init_region has the wrong dimension");
  if (!(rollout.dt > 0.0) || rollout.horizon < 0.0) throw ConfigError("test.dt > 0 and horizon >= 0 required");
  for (const auto& p : probe_states) {
    if (p.size() != sys.state_dim()) throw ConfigError("probe state has the wrong dimension");
  }
  if (verify.resolution < 2) throw ConfigError("verify.resolution must be >= 2");
  if (verify.mc_trials < 1 || verify.lipschitz_pairs < 1) {
    throw ConfigError("verify.mc_trials and lipschitz_pairs must be >= 1");
  }
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return ExperimentConfig::from_json(detail::parse_json_file(path), path.parent_path());
}

std::vector<std::string> preset_names() { return {"pendulum-dr", "mountain-car-dr"}; }

ExperimentConfig experiment_preset(const std::string& name) {
  using M = UncertaintyDistribution::Marginal;
  ExperimentConfig c;
  if (name == "pendulum-dr") {
    c.name = "pendulum";
    c.system = "pendulum";
    c.output_dir = "runs/pendulum";
    c.train.M = 3600;
    c.train.N = 5;
    c.train.learning_rate = 0.002;
    c.train.r = 0.01;
    c.train.epsilon = 0.1;
    c.distribution.marginals = {{M::Kind::Uniform, -0.04, 0.08}, {M::Kind::Normal, 0.0, 0.02}};
    c.xi_test = vec2(0.1, 0.05);
    c.init_region = {vec2(0.0, -6.0), vec2(2.0 * std::numbers::pi, 6.0)};
    c.rollout.dt = 0.01;
    c.rollout.horizon = 20.0;
    c.rollout.convergence_tol = 0.2;
    c.probe_states = {vec2(std::numbers::pi, 0.0), vec2(-std::numbers::pi / 2.0, 5.5)};
  } else if (name == "mountain-car-dr") {
    c.name = "mountain_car";
    c.system = "mountain_car";
    c.output_dir = "runs/mountain_car";
    c.train.M = 1600;
    c.train.N = 3;
    c.train.learning_rate = 0.002;
    c.train.r = 0.0001;
    c.train.epsilon = 0.1;
    c.distribution.marginals = {{M::Kind::Normal, 0.0, 0.0002}};
    c.xi_test = Vec::Constant(1, -0.0003);
    c.init_region = {vec2(-1.0, -0.1), vec2(1.0, 0.1)};
    c.rollout.dt = 1.0;
    c.rollout.horizon = 2000.0;
    c.rollout.convergence_tol = 0.05;
    // The dynamics are ~1e-3 per unit time, so the decrease rate and the
    // stopping tolerance are scaled down to match.
    c.train.gamma = 1e-4;
    c.train.loss_tol = 1e-9;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.train.shape.certificate_hidden = {32, 32};
  c.train.shape.controller_hidden = {32, 32};
  c.train.epochs = c.baseline_epochs = c.warm_start_epochs = 3000;
  c.train.resample_every = 10;
  c.train.seed = c.seed;
  c.verify.seed = c.seed + 3;
  return c;
}

std::string config_hash(const ExperimentConfig& config) {
  json j = config.to_json();
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AmbiguitySpec build_ambiguity(const ExperimentConfig& config, const UncertainSystem& sys) {
  AmbiguitySpec spec;
  spec.radius = config.train.r;
  spec.epsilon = config.train.epsilon;
  spec.samples.support_bound = config.support_bound;
  if (config.samples_file) {
    const json j = detail::parse_json_file(config.base_dir / *config.samples_file);
    if (!j.is_array()) throw ConfigError("samples_file must hold a JSON array of vectors");
    for (const auto& s : j) spec.samples.samples.push_back(detail::vec_from_json(s));
  } else {
    spec.samples.samples = config.distribution.sample(static_cast<std::size_t>(config.train.N),
                                                      config.resolved_uncertainty_seed());
  }
  spec.samples.validate(sys.uncertainty_dim());
  spec.validate();
  return spec;
}

TrainedPairs train_pairs(const ExperimentConfig& config) {
  const UncertainSystem sys = system_by_name(config.system);
  TrainedPairs out;
  out.spec = build_ambiguity(config, sys);

  TrainConfig base = config.train;
  base.loss_kind = LossKind::Nominal;
  base.epochs = config.baseline_epochs;
  const UncertainSystem mean_sys = sample_mean_system(config.system, out.spec.samples.mean());
  out.baseline_run = train(base, mean_sys, out.spec);
  out.baseline = out.baseline_run.pair;

  const LyapunovPair* init = nullptr;
  if (config.warm_start == WarmStart::Nominal) {
    TrainConfig warm = config.train;
    warm.loss_kind = LossKind::Nominal;
    warm.epochs = config.warm_start_epochs;
    out.warm_run = train(warm, sys, out.spec);
    init = &out.warm_run->pair;
  } else if (config.warm_start == WarmStart::Baseline) {
    init = &out.baseline;
  }
  out.dr_run = train(config.train, sys, out.spec, init);
  out.dr = out.dr_run.pair;
  return out;
}

MonotonicityStats monotonicity(const Trajectory& traj, double delta) {
  MonotonicityStats s;
  for (double v : traj.V_values) s.V_max = std::max(s.V_max, v);
  const double tol = 1e-6 * s.V_max;
  for (std::size_t i = 0; i + 1 < traj.states.size(); ++i) {
    if (traj.states[i].norm() <= delta) continue;
    ++s.steps_outside;
    const double inc = traj.V_values[i + 1] - traj.V_values[i];
    if (inc <= tol) ++s.nonincreasing;
    s.max_increase = std::max(s.max_increase, inc);
  }
  return s;
}

void apply_overrides(ExperimentConfig& config, const RunOverrides& overrides) {
  if (overrides.seed) {
    config.seed = *overrides.seed;
    config.train.seed = config.seed;
    config.verify.seed = config.seed + 3;
  }
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
}

json summary_to_json(const ExperimentSummary& s) {
  json j;
  j["experiment"] = s.experiment;
  j["initial_states"] = json::array();
  for (const auto& x : s.initial_states) j["initial_states"].push_back(detail::vec_to_json(x));
  for (const ControllerSummary* c : {&s.baseline, &s.dr}) {
    json d = json::array();
    for (double v : c->final_distances) d.push_back(std::isfinite(v) ? json(v) : json());
    j[c->name] = {{"converged", c->converged},
                  {"diverged", c->diverged},
                  {"runs", c->final_distances.size()},
                  {"final_distances", d}};
  }
  return j;
}

ReproOutcome run_repro(const ExperimentConfig& config, bool write_files) {
  const UncertainSystem sys = system_by_name(config.system);
  ReproOutcome o;
  o.pairs = train_pairs(config);
  o.report = certify_pair(config, o.pairs.dr, sys, o.pairs.spec);
  o.summary = batch_experiment(o.pairs.baseline, o.pairs.dr, sys, config.xi_test, config.n_inits,
                               config.init_region, config.resolved_test_seed(), config.rollout,
                               config.name);
  for (const auto& p : config.probe_states) {
    const Vec x0 = sys.wrap_into_domain(sys.to_shifted(p));
    o.probes.push_back(rollout(o.pairs.dr, sys, config.xi_test, x0, config.rollout));
    o.probe_stats.push_back(monotonicity(o.probes.back(), o.pairs.dr.delta));
  }
  if (!write_files) return o;

  const fs::path& dir = config.output_dir;
  write_json(dir / "config.json", config.to_json());
  o.outputs.push_back("config.json");
  save_stage(dir, "baseline", o.pairs.baseline_run, o.outputs);
  if (o.pairs.warm_run) save_stage(dir, "nominal", *o.pairs.warm_run, o.outputs);
  save_stage(dir, "dr", o.pairs.dr_run, o.outputs);
  write_json(dir / "verify_report.json", o.report.to_json());
  o.outputs.push_back("verify_report.json");
  for (const auto& p : write_experiment(dir, o.summary)) o.outputs.push_back(fs::relative(p, dir));
  for (std::size_t i = 0; i < o.probes.size(); ++i) {
    const fs::path rel = fs::path(config.name) / "probes" / (std::to_string(i) + ".csv");
    write_trajectory_csv(dir / rel, o.probes[i]);
    o.outputs.push_back(rel);
  }
  json summary = summary_to_json(o.summary);
  json checks = json::array();
  for (const auto& c : repro_checks(config, o)) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  summary["checks"] = checks;
  write_json(dir / "summary.json", summary);
  o.outputs.push_back("summary.json");
  json results = {{"baseline", run_json(o.pairs.baseline_run)}, {"dr", run_json(o.pairs.dr_run)}};
  if (o.pairs.warm_run) results["nominal"] = run_json(*o.pairs.warm_run);
  results["checks"] = checks;
  write_json(dir / "manifest.json", manifest_json(config, "repro", o.outputs, results));
  return o;
}

int cmd_train(const fs::path& config_path, const RunOverrides& overrides, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig config = load_experiment_config(config_path);
    apply_overrides(config, overrides);
    const TrainedPairs pairs = train_pairs(config);
    const fs::path& dir = config.output_dir;
    std::vector<fs::path> written;
    write_json(dir / "config.json", config.to_json());
    written.push_back("config.json");
    save_stage(dir, "baseline", pairs.baseline_run, written);
    if (pairs.warm_run) save_stage(dir, "nominal", *pairs.warm_run, written);
    save_stage(dir, "dr", pairs.dr_run, written);
    json results = {{"baseline", run_json(pairs.baseline_run)}, {"dr", run_json(pairs.dr_run)}};
    if (pairs.warm_run) results["nominal"] = run_json(*pairs.warm_run);
    write_json(dir / "manifest.json", manifest_json(config, "train", written, results));
    for (const auto* r : {&pairs.baseline_run, &pairs.dr_run}) {
      if (r->warning) err << "warning: training stopped at the epoch budget; kept the best pair\n";
    }
    out << "baseline loss " << fmt_double(pairs.baseline_run.best_loss) << ", dr loss "
        << fmt_double(pairs.dr_run.best_loss) << "\nwrote " << (dir / "manifest.json").string()
        << "\n";
    return kExitOk;
  });
}

int cmd_verify(const fs::path& pair_header, const fs::path& config_path,
               const RunOverrides& overrides, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig config = load_experiment_config(config_path);
    apply_overrides(config, overrides);
    const UncertainSystem sys = system_by_name(config.system);
    const LyapunovPair pair = load_pair(pair_header);
    const AmbiguitySpec spec = build_ambiguity(config, sys);
    const CertificateReport report = certify_pair(config, pair, sys, spec);
    write_json(config.output_dir / "verify_report.json", report.to_json());
    print_report(out, report);
    return report.all_pass() ? kExitOk : kExitCheckFailed;
  });
}

int cmd_simulate(const fs::path& baseline_header, const fs::path& dr_header,
                 const fs::path& config_path, const RunOverrides& overrides, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig config = load_experiment_config(config_path);
    apply_overrides(config, overrides);
    const UncertainSystem sys = system_by_name(config.system);
    const LyapunovPair baseline = load_pair(baseline_header);
    const LyapunovPair dr = load_pair(dr_header);
    const ExperimentSummary summary =
        batch_experiment(baseline, dr, sys, config.xi_test, config.n_inits, config.init_region,
                         config.resolved_test_seed(), config.rollout, config.name);
    write_experiment(config.output_dir, summary);
    write_json(config.output_dir / "summary.json", summary_to_json(summary));
    out << "baseline converged " << summary.baseline.converged << "/" << config.n_inits
        << ", dr converged " << summary.dr.converged << "/" << config.n_inits << "\n";
    return kExitOk;
  });
}

int cmd_repro(const std::string& experiment, const RunOverrides& overrides, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig config;
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), experiment) != names.end()) {
      config = experiment_preset(experiment);
    } else {
      config = load_experiment_config(experiment);
    }
    apply_overrides(config, overrides);
    config.validate();
    const ReproOutcome o = run_repro(config);
    print_report(out, o.report);
    bool all = true;
    for (const auto& c : repro_checks(config, o)) {
      out << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(18) << c.name << c.detail
          << "\n";
      all = all && c.pass;
    }
    return all ? kExitOk : kExitCheckFailed;
  });
}

}  // namespace drlyap
