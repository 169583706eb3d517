#include <drlyap/dro.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace drlyap {

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ContractError("epsilon must lie in (0, 1)");
}

void check_nonempty(const std::vector<double>& values) {
  if (values.empty()) throw ContractError("risk measure of an empty list");
}

std::vector<std::size_t> descending_order(const std::vector<double>& values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return idx;
}

double closed_form(const std::vector<double>& sorted_desc, double epsilon, std::size_t j) {
  const double n = static_cast<double>(sorted_desc.size());
  const double hj = sorted_desc[j - 1];
  double excess = 0.0;
  for (std::size_t i = 0; i + 1 < j; ++i) excess += sorted_desc[i] - hj;
  return excess / (n * epsilon) + hj;
}

}  // namespace

void AmbiguitySpec::validate() const {
  if (radius < 0.0 || !std::isfinite(radius)) throw ConfigError("Wasserstein radius must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (samples.samples.empty()) throw ConfigError("ambiguity set needs at least one sample");
}

double var(const std::vector<double>& values, double epsilon) {
  check_nonempty(values);
  check_epsilon(epsilon);
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Smallest atom whose cumulative mass k/N reaches 1 - eps.
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    if (static_cast<double>(k) / n >= 1.0 - epsilon) return sorted[k - 1];
  }
  return sorted.back();
}

std::size_t select_index_j(std::size_t n, double epsilon) {
  if (n == 0) throw ContractError("select_index_j: N must be >= 1");
  check_epsilon(epsilon);
  const double nd = static_cast<double>(n);
  for (std::size_t j = 1; j <= n; ++j) {
    if (static_cast<double>(j) / nd - epsilon >= 0.0) return j;
  }
  return n;
}

RiskEvalResult cvar_detail(const std::vector<double>& values, double epsilon) {
  check_nonempty(values);
  check_epsilon(epsilon);
  RiskEvalResult out;
  out.sorted_indices = descending_order(values);
  std::vector<double> sorted(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sorted[i] = values[out.sorted_indices[i]];
  out.j = select_index_j(values.size(), epsilon);
  out.optimal_t = -sorted[out.j - 1];
  out.value = closed_form(sorted, epsilon, out.j);
  return out;
}

double cvar(const std::vector<double>& values, double epsilon) {
  return cvar_detail(values, epsilon).value;
}

double rockafellar_objective(const std::vector<double>& values, double epsilon, double t) {
  check_nonempty(values);
  double acc = 0.0;
  for (double v : values) acc += std::max(v + t, 0.0);
  return acc / (static_cast<double>(values.size()) * epsilon) - t;
}

std::vector<double> cvar_weights(const std::vector<double>& values, double epsilon) {
  const RiskEvalResult res = cvar_detail(values, epsilon);
  const double n = static_cast<double>(values.size());
  std::vector<double> w(values.size(), 0.0);
  for (std::size_t i = 0; i + 1 < res.j; ++i) w[res.sorted_indices[i]] = 1.0 / (n * epsilon);
  w[res.sorted_indices[res.j - 1]] = 1.0 - static_cast<double>(res.j - 1) / (n * epsilon);
  return w;
}

double wasserstein_radius(std::size_t n, double eps_bar, double c1, double c2, int k,
                          double rho) {
  if (n == 0) throw ConfigError("wasserstein_radius: N must be >= 1");
  if (!(eps_bar > 0.0 && eps_bar < 1.0)) throw ConfigError("wasserstein_radius: eps_bar in (0,1)");
  if (!(c1 > 0.0) || !(c2 > 0.0) || !(rho > 0.0)) {
    throw ConfigError("wasserstein_radius: c1, c2 and rho must be positive");
  }
  if (k < 1) throw ConfigError("wasserstein_radius: k must be >= 1");
  const double log_term = std::log(c1 / eps_bar);
  // c1 <= eps_bar makes the concentration bound vacuous; a zero radius already meets it.
  if (log_term <= 0.0) return 0.0;
  const double base = log_term / (c2 * static_cast<double>(n));
  const double exponent = static_cast<double>(n) >= log_term / c2
                              ? 1.0 / static_cast<double>(std::max(k, 2))
                              : 1.0 / rho;
  return std::pow(base, exponent);
}

double dr_margin_general(const std::vector<double>& h, const AmbiguitySpec& spec,
                         double lipschitz) {
  check_nonempty(h);
  check_epsilon(spec.epsilon);
  if (lipschitz < 0.0) throw ContractError("dr_margin_general: Lipschitz term must be >= 0");
  for (std::size_t i = 1; i < h.size(); ++i) {
    if (h[i] > h[i - 1]) throw ContractError("dr_margin_general: values must be sorted descending");
  }
  const std::size_t j = select_index_j(h.size(), spec.epsilon);
  return spec.radius / spec.epsilon * lipschitz + closed_form(h, spec.epsilon, j);
}

double dr_margin_dual(const std::vector<double>& h, const AmbiguitySpec& spec, double lipschitz) {
  check_nonempty(h);
  check_epsilon(spec.epsilon);
  const double n = static_cast<double>(h.size());
  double best = std::numeric_limits<double>::infinity();
  for (double breakpoint : h) {
    const double t = -breakpoint;
    double acc = 0.0;
    for (double v : h) acc += std::max(v + t, 0.0);
    best = std::min(best, acc / n - t * spec.epsilon);
  }
  return (spec.radius * lipschitz + best) / spec.epsilon;
}

double dr_pointwise_margin(const LyapunovPair& pair, const UncertainSystem& sys,
                           const AmbiguitySpec& spec, const Vec& x, Saturation mode) {
  const Vec u = controller(pair, x, mode);
  const Vec g = grad_V(pair, x);
  const Vec fx = sys.f(x, u);
  const Mat w = sys.W(x, u);
  const Vec wg = w.transpose() * g;
  std::vector<double> vdots;
  vdots.reserve(spec.size());
  for (const auto& xi : spec.samples.samples) vdots.push_back(g.dot(fx) + wg.dot(xi));
  return spec.radius / spec.epsilon * wg.norm() + cvar(vdots, spec.epsilon) +
         pair.gamma * x.norm();
}

double dr_exponential_margin(const LyapunovPair& pair, const UncertainSystem& sys,
                             const AmbiguitySpec& spec, const Vec& x, double alpha,
                             Saturation mode) {
  if (alpha < 0.0) throw ContractError("dr_exponential_margin: alpha must be >= 0");
  return dr_pointwise_margin(pair, sys, spec, x, mode) + alpha * V(pair, x);
}

double nominal_margin(const LyapunovPair& pair, const UncertainSystem& sys, const Vec& x,
                      Saturation mode) {
  return V_dot(pair, sys, x, Vec::Zero(sys.uncertainty_dim()), mode) + pair.gamma * x.norm();
}

}  // namespace drlyap
