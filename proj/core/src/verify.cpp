#include <drlyap/parallel.hpp>
#include <drlyap/verify.hpp>

#include "json_util.hpp"

#include <algorithm>
#include <cmath>

namespace drlyap {

std::vector<Vec> domain_grid(const UncertainSystem& sys, int resolution, double delta) {
  if (resolution < 2) throw ContractError("grid resolution must be >= 2");
  const Box& box = sys.domain();
  const Eigen::Index n = box.dim();
  std::vector<Vec> out;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  const double keep = delta * (1.0 - 1e-12);
  while (true) {
    Vec x(n);
    for (Eigen::Index d = 0; d < n; ++d) {
      const double t = static_cast<double>(idx[static_cast<std::size_t>(d)]) / (resolution - 1);
      x[d] = box.lower[d] + (box.upper[d] - box.lower[d]) * t;
    }
    if (x.norm() >= keep) out.push_back(x);
    Eigen::Index d = 0;
    while (d < n && ++idx[static_cast<std::size_t>(d)] == resolution) {
      idx[static_cast<std::size_t>(d)] = 0;
      ++d;
    }
    if (d == n) break;
  }
  return out;
}

GridMarginResult margin_check_points(const LyapunovPair& pair, const UncertainSystem& sys,
                                     const AmbiguitySpec& spec, const std::vector<Vec>& points) {
  spec.validate();
  std::vector<double> nominal(points.size());
  std::vector<double> dr(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    nominal[i] = nominal_margin(pair, sys, points[i]);
    dr[i] = dr_pointwise_margin(pair, sys, spec, points[i]);
  });
  GridMarginResult out;
  out.points = points.size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (nominal[i] > out.worst_nominal) {
      out.worst_nominal = nominal[i];
      out.worst_nominal_state = points[i];
    }
    if (dr[i] > out.worst_dr) {
      out.worst_dr = dr[i];
      out.worst_dr_state = points[i];
    }
  }
  out.nominal_pass = out.worst_nominal <= 0.0;
  out.dr_pass = out.worst_dr <= 0.0;
  return out;
}

GridMarginResult grid_margin_check(const LyapunovPair& pair, const UncertainSystem& sys,
                                   const AmbiguitySpec& spec, int resolution, double delta) {
  GridMarginResult out = margin_check_points(pair, sys, spec, domain_grid(sys, resolution, delta));
  out.resolution = resolution;
  return out;
}

namespace {

template <typename Dist>
double lipschitz_impl(const Box& domain, int pairs, std::uint64_t seed, Dist dist) {
  if (pairs < 1) throw ContractError("empirical_lipschitz: pairs must be >= 1");
  Rng rng(seed);
  double best = 0.0;
  const Eigen::Index n = domain.dim();
  for (int p = 0; p < pairs; ++p) {
    Vec x(n);
    Vec y(n);
    for (Eigen::Index d = 0; d < n; ++d) x[d] = rng.uniform(domain.lower[d], domain.upper[d]);
    for (Eigen::Index d = 0; d < n; ++d) y[d] = rng.uniform(domain.lower[d], domain.upper[d]);
    const double gap = (x - y).norm();
    if (gap == 0.0) continue;
    best = std::max(best, dist(x, y) / gap);
  }
  return best;
}

}  // namespace

double empirical_lipschitz(const std::function<double(const Vec&)>& fn, const Box& domain,
                           int pairs, std::uint64_t seed) {
  return lipschitz_impl(domain, pairs, seed,
                        [&](const Vec& x, const Vec& y) { return std::abs(fn(x) - fn(y)); });
}

double empirical_lipschitz(const std::function<Vec(const Vec&)>& fn, const Box& domain, int pairs,
                           std::uint64_t seed) {
  return lipschitz_impl(domain, pairs, seed,
                        [&](const Vec& x, const Vec& y) { return (fn(x) - fn(y)).norm(); });
}

double covering_constant(const std::vector<Vec>& dataset, const std::vector<Vec>& grid) {
  if (dataset.empty() || grid.empty()) throw ContractError("covering_constant: empty input");
  std::vector<double> inv_norm(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const double n = dataset[i].norm();
    if (n == 0.0) throw ContractError("covering_constant: dataset point at the origin");
    inv_norm[i] = 1.0 / n;
  }
  std::vector<double> per_point(grid.size());
  parallel_for(grid.size(), [&](std::size_t g) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      best = std::min(best, (grid[g] - dataset[i]).norm() * inv_norm[i]);
    }
    per_point[g] = best;
  });
  return *std::max_element(per_point.begin(), per_point.end());
}

std::pair<double, double> wilson_interval(int successes, int trials, double z) {
  if (trials < 1) throw ContractError("wilson_interval: trials must be >= 1");
  const double n = trials;
  const double p = successes / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

Vec UncertaintyDistribution::sample(Rng& rng) const {
  Vec xi(dim());
  for (int i = 0; i < dim(); ++i) {
    const Marginal& m = marginals[static_cast<std::size_t>(i)];
    switch (m.kind) {
      case Marginal::Kind::Uniform: xi[i] = rng.uniform(m.a, m.b); break;
      case Marginal::Kind::Normal: xi[i] = rng.normal(m.a, m.b); break;
      case Marginal::Kind::Point: xi[i] = m.a; break;
    }
  }
  return xi;
}

std::vector<Vec> UncertaintyDistribution::sample(std::size_t count, std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<Vec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample(rng));
  return out;
}

UncertaintyDistribution UncertaintyDistribution::point(const Vec& xi) {
  UncertaintyDistribution d;
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    d.marginals.push_back({Marginal::Kind::Point, xi[i], 0.0});
  }
  return d;
}

nlohmann::json UncertaintyDistribution::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : marginals) {
    switch (m.kind) {
      case Marginal::Kind::Uniform: out.push_back({{"kind", "uniform"}, {"a", m.a}, {"b", m.b}}); break;
      case Marginal::Kind::Normal:
        out.push_back({{"kind", "normal"}, {"mu", m.a}, {"sigma", m.b}});
        break;
      case Marginal::Kind::Point: out.push_back({{"kind", "point"}, {"value", m.a}}); break;
    }
  }
  return out;
}

UncertaintyDistribution UncertaintyDistribution::from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("distributions must be a nonempty array");
  UncertaintyDistribution d;
  try {
    for (const auto& e : j) {
      const std::string kind = e.at("kind").get<std::string>();
      Marginal m;
      if (kind == "uniform") {
        m = {Marginal::Kind::Uniform, e.at("a").get<double>(), e.at("b").get<double>()};
        if (!(m.a < m.b)) throw ConfigError("uniform distribution needs a < b");
      } else if (kind == "normal") {
        m = {Marginal::Kind::Normal, e.at("mu").get<double>(), e.at("sigma").get<double>()};
        if (m.b < 0.0) throw ConfigError("normal distribution needs sigma >= 0");
      } else if (kind == "point") {
        m = {Marginal::Kind::Point, e.at("value").get<double>(), 0.0};
      } else {
        throw ConfigError("unknown distribution kind '" + kind + "'");
      }
      d.marginals.push_back(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("distribution: ") + e.what());
  }
  return d;
}

ChanceEstimate monte_carlo_chance(const std::function<Vec(Rng&)>& sampler,
                                  const std::function<bool(const Vec&)>& pass, int trials,
                                  std::uint64_t seed) {
  if (trials < 1) throw ContractError("monte_carlo_chance: trials must be >= 1");
  Rng rng(seed);
  ChanceEstimate out;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) out.passes += pass(sampler(rng)) ? 1 : 0;
  out.probability = static_cast<double>(out.passes) / trials;
  std::tie(out.wilson_low, out.wilson_high) = wilson_interval(out.passes, trials);
  return out;
}

ChanceEstimate monte_carlo_chance(const LyapunovPair& pair, const UncertainSystem& sys,
                                  const UncertaintyDistribution& dist, int trials,
                                  const std::vector<Vec>& grid, std::uint64_t seed) {
  require_dim(dist.dim(), sys.uncertainty_dim(), "monte_carlo_chance distribution");
  if (grid.empty()) throw ContractError("monte_carlo_chance: empty grid");
  // V_dot + gamma |x| is affine in xi: offset_i + slope_i . xi.
  const Eigen::Index k = sys.uncertainty_dim();
  Vec offset(static_cast<Eigen::Index>(grid.size()));
  Mat slope(k, static_cast<Eigen::Index>(grid.size()));
  parallel_for(grid.size(), [&](std::size_t i) {
    const Vec& x = grid[i];
    const Vec u = controller(pair, x, Saturation::Hard);
    const Vec g = grad_V(pair, x);
    const Eigen::Index c = static_cast<Eigen::Index>(i);
    offset[c] = g.dot(sys.f(x, u)) + pair.gamma * x.norm();
    slope.col(c) = sys.W(x, u).transpose() * g;
  });
  return monte_carlo_chance(
      [&](Rng& rng) { return dist.sample(rng); },
      [&](const Vec& xi) { return ((slope.transpose() * xi) + offset).maxCoeff() <= 0.0; }, trials,
      seed);
}

bool CertificateReport::all_pass() const {
  return grid.nominal_pass && grid.dr_pass && (!slack_required || slack_pass) &&
         (!chance || chance_pass);
}

double theoretical_slack(const CertificateReport& report, double gamma, double r, double epsilon) {
  if (!report.lipschitz_vdot || !report.lipschitz_wgrad || !report.xi_bound || !report.covering) {
    throw ContractError("theoretical_slack: report is missing constant estimates");
  }
  if (!(epsilon > 0.0)) throw ContractError("theoretical_slack: epsilon must be > 0");
  const double c = *report.covering;
  const double l_max = *report.lipschitz_vdot + *report.lipschitz_wgrad * *report.xi_bound;
  return gamma - r / epsilon * *report.lipschitz_wgrad * c - l_max * c;
}

nlohmann::json CertificateReport::to_json() const {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
  };
  nlohmann::json j;
  j["grid_resolution"] = grid.resolution;
  j["grid_points"] = grid.points;
  j["worst_nominal_margin"] = {{"value", grid.worst_nominal},
                               {"state", detail::vec_to_json(grid.worst_nominal_state)}};
  j["worst_dr_margin"] = {{"value", grid.worst_dr},
                          {"state", detail::vec_to_json(grid.worst_dr_state)}};
  j["empirical"] = {{"lipschitz_vdot_lower_bound", opt(lipschitz_vdot)},
                    {"lipschitz_wgrad_lower_bound", opt(lipschitz_wgrad)},
                    {"xi_bound_sample_max", opt(xi_bound)},
                    {"covering_constant", opt(covering)}};
  j["theoretical_slack"] = opt(slack);
  if (chance) {
    j["mc_pass_probability"] = {{"value", chance->probability},
                                {"passes", chance->passes},
                                {"trials", chance->trials},
                                {"wilson95", {chance->wilson_low, chance->wilson_high}}};
  } else {
    j["mc_pass_probability"] = nullptr;
  }
  j["settings"] = {{"gamma", gamma}, {"delta", delta}, {"r", radius}, {"epsilon", epsilon}};
  j["pass"] = {{"nominal_grid", grid.nominal_pass},
               {"dr_grid", grid.dr_pass},
               {"slack_positive", slack_pass},
               {"slack_required", slack_required},
               {"chance", chance ? nlohmann::json(chance_pass) : nlohmann::json()},
               {"all", all_pass()}};
  return j;
}

CertificateReport certify(const LyapunovPair& pair, const UncertainSystem& sys,
                          const AmbiguitySpec& spec, const std::vector<Vec>& training_states,
                          const UncertaintyDistribution* dist, const VerifyOptions& options) {
  CertificateReport report;
  report.gamma = pair.gamma;
  report.delta = pair.delta;
  report.radius = spec.radius;
  report.epsilon = spec.epsilon;
  report.slack_required = options.require_slack;
  const std::vector<Vec> grid = domain_grid(sys, options.resolution, pair.delta);
  report.grid = margin_check_points(pair, sys, spec, grid);
  report.grid.resolution = options.resolution;

  const Vec zero_xi = Vec::Zero(sys.uncertainty_dim());
  report.lipschitz_vdot = empirical_lipschitz(
      [&](const Vec& x) -> double { return V_dot(pair, sys, x, zero_xi); }, sys.domain(),
      options.lipschitz_pairs, options.seed);
  report.lipschitz_wgrad = empirical_lipschitz(
      [&](const Vec& x) -> Vec {
        return sys.W(x, controller(pair, x)).transpose() * grad_V(pair, x);
      },
      sys.domain(), options.lipschitz_pairs, options.seed + 1);
  report.xi_bound = spec.samples.support_bound ? *spec.samples.support_bound
                                               : spec.samples.max_norm();
  if (!training_states.empty()) {
    report.covering = covering_constant(training_states, grid);
    report.slack = theoretical_slack(report, pair.gamma, spec.radius, spec.epsilon);
    report.slack_pass = *report.slack > 0.0;
  }
  if (dist != nullptr) {
    report.chance = monte_carlo_chance(pair, sys, *dist, options.mc_trials, grid, options.seed + 2);
    report.chance_pass = report.chance->probability >= options.chance_target &&
                         report.chance->wilson_low > 0.5;
  }
  return report;
}

}  // namespace drlyap
