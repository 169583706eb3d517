#include <drlyap/systems.hpp>

#include <cmath>
#include <numbers>
#include <utility>

namespace drlyap {

bool Box::contains(const Vec& x) const {
  require_dim(x.size(), dim(), "Box::contains");
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

double Box::origin_inradius() const {
  const double lo = (-lower.array()).minCoeff();
  const double hi = upper.array().minCoeff();
  return std::max(0.0, std::min(lo, hi));
}

Vec Box::clamp(const Vec& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

UncertainSystem::UncertainSystem(Definition def) : def_(std::move(def)) {
  if (def_.state_dim <= 0 || def_.control_dim <= 0 || def_.uncertainty_dim <= 0) {
    throw ConfigError("UncertainSystem '" + def_.name + "': dimensions must be positive");
  }
  if (!def_.f || !def_.W) {
    throw ConfigError("UncertainSystem '" + def_.name + "': f and W are required");
  }
  require_dim(def_.domain.dim(), def_.state_dim, "UncertainSystem domain");
  require_dim(def_.input_bounds.dim(), def_.control_dim, "UncertainSystem input bounds");
  if (def_.equilibrium.size() == 0) def_.equilibrium = Vec::Zero(def_.state_dim);
  require_dim(def_.equilibrium.size(), def_.state_dim, "UncertainSystem equilibrium");
  if (def_.periodic.empty()) def_.periodic.assign(static_cast<std::size_t>(def_.state_dim), false);
  if ((def_.input_bounds.lower.array() > 0.0).any() ||
      (def_.input_bounds.upper.array() < 0.0).any()) {
    throw ConfigError("UncertainSystem '" + def_.name + "': input bounds must contain 0");
  }
}

Vec UncertainSystem::f(const Vec& x, const Vec& u) const {
  require_dim(x.size(), state_dim(), "f (x)");
  require_dim(u.size(), control_dim(), "f (u)");
  return def_.f(x, u);
}

Mat UncertainSystem::W(const Vec& x, const Vec& u) const {
  require_dim(x.size(), state_dim(), "W (x)");
  require_dim(u.size(), control_dim(), "W (u)");
  return def_.W(x, u);
}

Mat UncertainSystem::df_du(const Vec& x, const Vec& u) const {
  if (def_.df_du) return def_.df_du(x, u);
  constexpr double h = 1e-6;
  Mat jac(state_dim(), control_dim());
  for (int c = 0; c < control_dim(); ++c) {
    Vec up = u, dn = u;
    up[c] += h;
    dn[c] -= h;
    jac.col(c) = (def_.f(x, up) - def_.f(x, dn)) / (2.0 * h);
  }
  return jac;
}

Mat UncertainSystem::dWw_du(const Vec& x, const Vec& u, const Vec& w) const {
  require_dim(w.size(), uncertainty_dim(), "dWw_du (w)");
  if (def_.dWw_du) return def_.dWw_du(x, u, w);
  constexpr double h = 1e-6;
  Mat jac(state_dim(), control_dim());
  for (int c = 0; c < control_dim(); ++c) {
    Vec up = u, dn = u;
    up[c] += h;
    dn[c] -= h;
    jac.col(c) = (def_.W(x, up) * w - def_.W(x, dn) * w) / (2.0 * h);
  }
  return jac;
}

Vec UncertainSystem::eval(const Vec& x, const Vec& u, const Vec& xi) const {
  require_dim(xi.size(), uncertainty_dim(), "eval (xi)");
  return f(x, u) + W(x, u) * xi;
}

Vec UncertainSystem::eval_exact(const Vec& x, const Vec& u, const Vec& xi) const {
  if (!def_.exact) return eval(x, u, xi);
  require_dim(x.size(), state_dim(), "eval_exact (x)");
  require_dim(u.size(), control_dim(), "eval_exact (u)");
  require_dim(xi.size(), uncertainty_dim(), "eval_exact (xi)");
  return def_.exact(x, u, xi);
}

double UncertainSystem::wrapped_distance(const Vec& x) const {
  require_dim(x.size(), state_dim(), "wrapped_distance");
  double sq = 0.0;
  for (int i = 0; i < state_dim(); ++i) {
    double v = x[i];
    if (def_.periodic[static_cast<std::size_t>(i)]) {
      v = std::remainder(v, 2.0 * std::numbers::pi);
    }
    sq += v * v;
  }
  return std::sqrt(sq);
}

Vec UncertainSystem::wrap_into_domain(const Vec& x) const {
  require_dim(x.size(), state_dim(), "wrap_into_domain");
  constexpr double turn = 2.0 * std::numbers::pi;
  Vec out = x;
  for (int i = 0; i < state_dim(); ++i) {
    if (!def_.periodic[static_cast<std::size_t>(i)]) continue;
    const double lo = def_.domain.lower[i];
    out[i] = x[i] - turn * std::floor((x[i] - lo) / turn);
  }
  return out;
}

UncertainSystem pendulum(const PendulumParams& p) {
  const double ml2 = p.mass * p.length * p.length;
  const double m2l2 = p.mass * p.mass * p.length * p.length;
  UncertainSystem::Definition def;
  def.name = "pendulum";
  def.state_dim = 2;
  def.control_dim = 1;
  def.uncertainty_dim = 2;
  def.f = [=](const Vec& x, const Vec& u) {
    Vec dx(2);
    dx << x[1], (p.mass * p.gravity * p.length * std::sin(x[0]) - p.damping * x[1] + u[0]) / ml2;
    return dx;
  };
  def.W = [=](const Vec& x, const Vec& u) {
    Mat w = Mat::Zero(2, 2);
    w(1, 0) = (p.damping * x[1] - u[0]) / m2l2;
    w(1, 1) = -x[1] / ml2;
    return w;
  };
  def.df_du = [=](const Vec&, const Vec&) {
    Mat j = Mat::Zero(2, 1);
    j(1, 0) = 1.0 / ml2;
    return j;
  };
  def.dWw_du = [=](const Vec&, const Vec&, const Vec& w) {
    Mat j = Mat::Zero(2, 1);
    j(1, 0) = -w[0] / m2l2;
    return j;
  };
  def.exact = [=](const Vec& x, const Vec& u, const Vec& xi) {
    const double m = p.mass + xi[0];
    const double b = p.damping + xi[1];
    const double ml2x = m * p.length * p.length;
    Vec dx(2);
    dx << x[1], (m * p.gravity * p.length * std::sin(x[0]) - b * x[1] + u[0]) / ml2x;
    return dx;
  };
  def.domain = {Vec::Zero(2), Vec(2)};
  def.domain.upper << 2.0 * std::numbers::pi, 8.0;
  def.domain.lower << 0.0, -8.0;
  def.input_bounds = {Vec::Constant(1, -15.0), Vec::Constant(1, 15.0)};
  def.equilibrium = Vec::Zero(2);
  def.periodic = {true, false};
  return UncertainSystem(std::move(def));
}

UncertainSystem mountain_car(const MountainCarParams& params) {
  const double power = params.power;
  const double x_eq = std::numbers::pi / 6.0;
  UncertainSystem::Definition def;
  def.name = "mountain_car";
  def.state_dim = 2;
  def.control_dim = 1;
  def.uncertainty_dim = 1;
  // -0.0025 cos(3 (z + pi/6)) = 0.0025 sin(3 z): exact zero at the shifted origin.
  def.f = [=](const Vec& z, const Vec& u) {
    Vec dz(2);
    dz << z[1], 0.0025 * std::sin(3.0 * z[0]) + power * u[0];
    return dz;
  };
  def.W = [](const Vec&, const Vec& u) {
    Mat w = Mat::Zero(2, 1);
    w(1, 0) = u[0];
    return w;
  };
  def.df_du = [=](const Vec&, const Vec&) {
    Mat j = Mat::Zero(2, 1);
    j(1, 0) = power;
    return j;
  };
  def.dWw_du = [](const Vec&, const Vec&, const Vec& w) {
    Mat j = Mat::Zero(2, 1);
    j(1, 0) = w[0];
    return j;
  };
  Vec eq(2);
  eq << x_eq, 0.0;
  Box original{Vec(2), Vec(2)};
  original.lower << -2.0, -0.4;
  original.upper << 2.0, 0.4;
  def.domain = original.shifted(eq);
  def.input_bounds = {Vec::Constant(1, -2.0), Vec::Constant(1, 2.0)};
  def.equilibrium = eq;
  def.periodic = {false, false};
  return UncertainSystem(std::move(def));
}

UncertainSystem stable_linear(int state_dim, double half_width) {
  UncertainSystem::Definition def;
  def.name = "stable_linear";
  def.state_dim = state_dim;
  def.control_dim = 1;
  def.uncertainty_dim = 1;
  def.f = [](const Vec& x, const Vec&) -> Vec { return -x; };
  def.W = [state_dim](const Vec&, const Vec&) -> Mat { return Mat::Zero(state_dim, 1); };
  def.df_du = [state_dim](const Vec&, const Vec&) -> Mat { return Mat::Zero(state_dim, 1); };
  def.dWw_du = [state_dim](const Vec&, const Vec&, const Vec&) -> Mat {
    return Mat::Zero(state_dim, 1);
  };
  def.domain = {Vec::Constant(state_dim, -half_width), Vec::Constant(state_dim, half_width)};
  def.input_bounds = {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
  return UncertainSystem(std::move(def));
}

UncertainSystem system_by_name(const std::string& name) {
  if (name == "pendulum") return pendulum();
  if (name == "mountain_car") return mountain_car();
  if (name == "stable_linear") return stable_linear();
  throw ConfigError("unknown system '" + name + "'");
}

UncertainSystem sample_mean_system(const std::string& name, const Vec& mean_xi) {
  if (name == "pendulum") {
    require_dim(mean_xi.size(), 2, "sample_mean_system (pendulum)");
    PendulumParams p;
    p.mass += mean_xi[0];
    p.damping += mean_xi[1];
    return pendulum(p);
  }
  if (name == "mountain_car") {
    require_dim(mean_xi.size(), 1, "sample_mean_system (mountain_car)");
    MountainCarParams p;
    p.power += mean_xi[0];
    return mountain_car(p);
  }
  if (name == "stable_linear") return stable_linear();
  throw ConfigError("unknown system '" + name + "'");
}

Vec UncertaintySampleSet::mean() const {
  if (samples.empty()) throw ConfigError("uncertainty sample set is empty");
  Vec m = Vec::Zero(samples.front().size());
  for (const auto& s : samples) m += s;
  return m / static_cast<double>(samples.size());
}

double UncertaintySampleSet::max_norm() const {
  double best = 0.0;
  for (const auto& s : samples) best = std::max(best, s.norm());
  return best;
}

void UncertaintySampleSet::validate(int uncertainty_dim) const {
  if (samples.empty()) throw ConfigError("uncertainty sample set is empty");
  for (const auto& s : samples) {
    if (s.size() != uncertainty_dim) {
      throw ConfigError("uncertainty sample has dimension " + std::to_string(s.size()) +
                        ", expected " + std::to_string(uncertainty_dim));
    }
    if (!s.allFinite()) throw ConfigError("uncertainty sample is not finite");
    if (support_bound && s.norm() > *support_bound) {
      throw ConfigError("uncertainty sample exceeds the declared support bound");
    }
  }
}

std::vector<Vec> sample_domain(const UncertainSystem& sys, int count, double delta,
                               std::uint64_t seed) {
  if (count < 1) throw ConfigError("sample_domain: count must be >= 1");
  if (delta < 0.0) throw ConfigError("sample_domain: delta must be >= 0");
  const Box& box = sys.domain();
  Rng rng(seed);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  long attempts = 0;
  const long min_attempts_before_check = 1000;
  while (static_cast<int>(out.size()) < count) {
    Vec x(box.dim());
    for (Eigen::Index i = 0; i < box.dim(); ++i) x[i] = rng.uniform(box.lower[i], box.upper[i]);
    ++attempts;
    if (x.norm() > delta) out.push_back(std::move(x));
    if (attempts >= min_attempts_before_check &&
        static_cast<double>(out.size()) < 0.01 * static_cast<double>(attempts)) {
      throw ConfigError("sample_domain: delta too large, rejection rate above 0.99");
    }
  }
  return out;
}

Mat stack_columns(const std::vector<Vec>& states) {
  if (states.empty()) return Mat();
  Mat m(states.front().size(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = states[i];
  return m;
}

}  // namespace drlyap
