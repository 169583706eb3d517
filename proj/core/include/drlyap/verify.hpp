#pragma once

// Post-training checks. All constants are empirical: Lipschitz values are
// lower bounds from sampled pairs, B-constants are sampled maxima.

#include <drlyap/dro.hpp>
#include <drlyap/lyapunov.hpp>
#include <drlyap/systems.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace drlyap {

/// resolution^n uniform grid over the domain, keeping points with |x| >= delta.
std::vector<Vec> domain_grid(const UncertainSystem& sys, int resolution, double delta);

struct GridMarginResult {
  int resolution = 0;
  std::size_t points = 0;
  double worst_nominal = -std::numeric_limits<double>::infinity();
  Vec worst_nominal_state;
  double worst_dr = -std::numeric_limits<double>::infinity();
  Vec worst_dr_state;
  bool nominal_pass = false;
  bool dr_pass = false;
};

/// Nominal and DR pointwise margins over domain_grid with the hard clamp.
GridMarginResult grid_margin_check(const LyapunovPair& pair, const UncertainSystem& sys,
                                   const AmbiguitySpec& spec, int resolution, double delta);

/// Same check over an explicit point set.
GridMarginResult margin_check_points(const LyapunovPair& pair, const UncertainSystem& sys,
                                     const AmbiguitySpec& spec, const std::vector<Vec>& points);

/// max over random pairs in the box of |fn(x) - fn(y)| / |x - y|.
double empirical_lipschitz(const std::function<double(const Vec&)>& fn, const Box& domain,
                           int pairs, std::uint64_t seed);
/// Vector-valued form with the Euclidean norm on the output.
double empirical_lipschitz(const std::function<Vec(const Vec&)>& fn, const Box& domain,
                           int pairs, std::uint64_t seed);

/// max over grid points of min over the dataset of |x - x_i| / |x_i|.
double covering_constant(const std::vector<Vec>& dataset, const std::vector<Vec>& grid);

struct ChanceEstimate {
  double probability = 0.0;
  int passes = 0;
  int trials = 0;
  double wilson_low = 0.0;
  double wilson_high = 1.0;
};

/// 95% Wilson score interval for k successes out of n.
std::pair<double, double> wilson_interval(int successes, int trials, double z = 1.959963984540054);

/// Named independent marginals: uniform(a, b), normal(mu, sigma) or a point mass.
struct UncertaintyDistribution {
  struct Marginal {
    enum class Kind { Uniform, Normal, Point } kind = Kind::Point;
    double a = 0.0;  // lower bound, mean or value
    double b = 0.0;  // upper bound or standard deviation
  };
  std::vector<Marginal> marginals;

  int dim() const { return static_cast<int>(marginals.size()); }
  Vec sample(Rng& rng) const;
  std::vector<Vec> sample(std::size_t count, std::uint64_t seed) const;
  static UncertaintyDistribution point(const Vec& xi);

  nlohmann::json to_json() const;
  /// [{"kind": "uniform", "a":..,"b":..} | {"kind": "normal", "mu":..,"sigma":..} | {"kind": "point", "value":..}]
  static UncertaintyDistribution from_json(const nlohmann::json& j);
};

/// Fraction of seeded draws for which pass(xi) holds.
ChanceEstimate monte_carlo_chance(const std::function<Vec(Rng&)>& sampler,
                                  const std::function<bool(const Vec&)>& pass, int trials,
                                  std::uint64_t seed);

/// P(max over grid of V_dot(x, xi) + gamma |x| <= 0) with xi from the distribution.
ChanceEstimate monte_carlo_chance(const LyapunovPair& pair, const UncertainSystem& sys,
                                  const UncertaintyDistribution& dist, int trials,
                                  const std::vector<Vec>& grid, std::uint64_t seed);

struct CertificateReport {
  GridMarginResult grid;
  std::optional<double> lipschitz_vdot;     // x -> V_dot(x, 0)
  std::optional<double> lipschitz_wgrad;    // x -> W^T grad V
  std::optional<double> xi_bound;           // max sample norm
  std::optional<double> covering;           // c-hat
  std::optional<double> slack;
  std::optional<ChanceEstimate> chance;
  double gamma = 0.0;
  double delta = 0.0;
  double radius = 0.0;
  double epsilon = 0.0;
  bool slack_pass = false;
  bool slack_required = false;  // otherwise the slack is informational
  bool chance_pass = false;

  bool all_pass() const;
  nlohmann::json to_json() const;
};

/// gamma - (r/eps) L_wgrad c - (L_vdot + L_wgrad B_xi) c.
/// ContractError when any of the estimates is missing.
double theoretical_slack(const CertificateReport& report, double gamma, double r, double epsilon);

struct VerifyOptions {
  int resolution = 201;
  int lipschitz_pairs = 20000;
  int mc_trials = 1000;
  std::uint64_t seed = 0;
  double chance_target = 0.9;
  bool require_slack = false;
};

/// Full report: grid margins, Lipschitz estimates, covering constant of the
/// training set, slack and (when a distribution is given) the chance estimate.
CertificateReport certify(const LyapunovPair& pair, const UncertainSystem& sys,
                          const AmbiguitySpec& spec, const std::vector<Vec>& training_states,
                          const UncertaintyDistribution* dist, const VerifyOptions& options);

}  // namespace drlyap
