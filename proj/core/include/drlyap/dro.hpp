#pragma once

// Empirical CVaR and the 1-Wasserstein distributionally robust sufficient
// conditions built on it.
//
// For values h sorted descending and risk level eps, the Rockafellar
// objective  g(t) = (1/N) sum_i (h_i + t)_+ - t eps  is piecewise linear with
// breakpoints -h_i and slope (i-1)/N - eps on the i-th interval, so it is
// minimised at t* = -h_j with j the first index where the slope turns
// nonnegative. That gives
//   CVaR = (1/(N eps)) sum_{i<j} (h_i - h_j) + h_j,
// and the DR condition adds (r/eps) times the Lipschitz constant in xi.

#include <drlyap/lyapunov.hpp>
#include <drlyap/systems.hpp>

#include <vector>

namespace drlyap {

struct AmbiguitySpec {
  UncertaintySampleSet samples;
  double radius = 0.0;   // 1-Wasserstein ball radius r >= 0
  double epsilon = 0.1;  // risk tolerance in (0, 1)

  std::size_t size() const { return samples.size(); }
  /// Throws ConfigError on r < 0, eps outside (0, 1) or an empty sample set.
  void validate() const;
};

struct RiskEvalResult {
  double value = 0.0;
  double optimal_t = 0.0;
  std::vector<std::size_t> sorted_indices;  // descending by value, stable on ties
  std::size_t j = 1;                        // 1-based breakpoint index
};

/// inf{t : fraction(values <= t) >= 1 - eps}.
double var(const std::vector<double>& values, double epsilon);

/// Closed-form empirical CVaR_{1-eps}.
double cvar(const std::vector<double>& values, double epsilon);
RiskEvalResult cvar_detail(const std::vector<double>& values, double epsilon);

/// Rockafellar objective eps^{-1} mean((v + t)_+) - t at a given t.
double rockafellar_objective(const std::vector<double>& values, double epsilon, double t);

/// The unique j in [1, N] with (j-1)/N - eps < 0 <= j/N - eps.
std::size_t select_index_j(std::size_t n, double epsilon);

/// Radius rule for light-tailed distributions: the Wasserstein ball of this
/// radius contains the true distribution with probability at least 1 - eps_bar.
double wasserstein_radius(std::size_t n, double eps_bar, double c1, double c2, int k,
                          double rho);

/// (r/eps) L + (1/(N eps)) sum_{i<j}(h_i - h_j) + h_j for h sorted descending.
double dr_margin_general(const std::vector<double>& h_sorted_desc, const AmbiguitySpec& spec,
                         double lipschitz);

/// Same quantity through the dual form eps^{-1}(r L + inf_t [mean((h+t)_+) - t eps])
/// evaluated at the breakpoints; independent of the index-j bookkeeping.
double dr_margin_dual(const std::vector<double>& h, const AmbiguitySpec& spec, double lipschitz);

/// Per-sample weights w with CVaR = sum_i w_i h_i (first maximal index on ties).
std::vector<double> cvar_weights(const std::vector<double>& values, double epsilon);

/// Per-state DR margin (r/eps)|W^T grad V| + CVaR_i V_dot(x, xi_i) + gamma |x|.
double dr_pointwise_margin(const LyapunovPair& pair, const UncertainSystem& sys,
                           const AmbiguitySpec& spec, const Vec& x,
                           Saturation mode = Saturation::Hard);

/// Pointwise margin plus alpha V(x).
double dr_exponential_margin(const LyapunovPair& pair, const UncertainSystem& sys,
                             const AmbiguitySpec& spec, const Vec& x, double alpha,
                             Saturation mode = Saturation::Hard);

/// Nominal margin V_dot(x, xi = 0) + gamma |x|.
double nominal_margin(const LyapunovPair& pair, const UncertainSystem& sys, const Vec& x,
                      Saturation mode = Saturation::Hard);

}  // namespace drlyap
