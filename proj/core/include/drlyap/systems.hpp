#pragma once

// Uncertain control-affine systems  xdot = f(x, u) + W(x, u) xi,
// expressed in coordinates where the desired equilibrium is the origin.

#include <drlyap/common.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace drlyap {

/// Axis-aligned box [lower, upper].
struct Box {
  Vec lower;
  Vec upper;

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Vec& x) const;
  Vec center() const { return 0.5 * (lower + upper); }
  /// Largest r such that the closed r-ball around the origin fits in the box
  /// (zero when the origin is on or outside the boundary).
  double origin_inradius() const;
  Vec clamp(const Vec& x) const;
  Box shifted(const Vec& offset) const { return {lower - offset, upper - offset}; }
};

class UncertainSystem {
 public:
  using Dynamics = std::function<Vec(const Vec& x, const Vec& u)>;
  using Perturbation = std::function<Mat(const Vec& x, const Vec& u)>;
  using ControlJacobian = std::function<Mat(const Vec& x, const Vec& u)>;
  /// d/du of W(x, u) w for a fixed weight vector w (n x m).
  using PerturbationControlJacobian = std::function<Mat(const Vec& x, const Vec& u, const Vec& w)>;
  using ExactModel = std::function<Vec(const Vec& x, const Vec& u, const Vec& xi)>;

  struct Definition {
    std::string name;
    int state_dim = 0;
    int control_dim = 0;
    int uncertainty_dim = 0;
    Dynamics f;
    Perturbation W;
    ControlJacobian df_du;                  // optional: central differences when empty
    PerturbationControlJacobian dWw_du;     // optional: central differences when empty
    ExactModel exact;                       // optional: falls back to f + W xi
    Box domain;                             // shifted coordinates
    Box input_bounds;
    Vec equilibrium;                        // original coordinates of the shifted origin
    std::vector<bool> periodic;             // 2*pi-periodic coordinates (metrics only)
  };

  explicit UncertainSystem(Definition def);

  const std::string& name() const { return def_.name; }
  int state_dim() const { return def_.state_dim; }
  int control_dim() const { return def_.control_dim; }
  int uncertainty_dim() const { return def_.uncertainty_dim; }
  const Box& domain() const { return def_.domain; }
  const Box& input_bounds() const { return def_.input_bounds; }
  const Vec& equilibrium() const { return def_.equilibrium; }
  const std::vector<bool>& periodic() const { return def_.periodic; }
  bool has_exact_model() const { return static_cast<bool>(def_.exact); }

  Vec f(const Vec& x, const Vec& u) const;
  Mat W(const Vec& x, const Vec& u) const;
  Mat df_du(const Vec& x, const Vec& u) const;
  Mat dWw_du(const Vec& x, const Vec& u, const Vec& w) const;

  /// f(x, u) + W(x, u) xi.
  Vec eval(const Vec& x, const Vec& u, const Vec& xi) const;
  /// Physically perturbed dynamics when available, otherwise eval().
  Vec eval_exact(const Vec& x, const Vec& u, const Vec& xi) const;

  Vec to_shifted(const Vec& original) const { return original - def_.equilibrium; }
  Vec to_original(const Vec& shifted) const { return shifted + def_.equilibrium; }

  /// Distance to the origin with periodic coordinates wrapped into (-pi, pi].
  double wrapped_distance(const Vec& x) const;
  /// Same state with periodic coordinates moved by full turns into
  /// [domain lower, domain lower + 2 pi).
  Vec wrap_into_domain(const Vec& x) const;

 private:
  Definition def_;
};

struct PendulumParams {
  double gravity = 9.81;
  double mass = 1.0;
  double length = 1.0;
  double damping = 0.13;
};

/// Inverted pendulum, state (theta, theta_dot) with theta = 0 upright.
/// W columns are the first-order sensitivities to mass and damping.
UncertainSystem pendulum(const PendulumParams& params = {});

struct MountainCarParams {
  double power = 0.0015;
};

/// Mountain car in coordinates shifted so (pi/6, 0) is the origin; W = [0, u]^T.
UncertainSystem mountain_car(const MountainCarParams& params = {});

/// xdot = -x with one ineffective input and zero perturbation (test fixture).
UncertainSystem stable_linear(int state_dim = 2, double half_width = 1.0);

/// Built-in lookup: "pendulum", "mountain_car", "stable_linear".
UncertainSystem system_by_name(const std::string& name);

/// Parameters shifted by the mean of the uncertainty samples, i.e. the
/// "averaged-parameter" model used to train the uncertainty-agnostic baseline.
UncertainSystem sample_mean_system(const std::string& name, const Vec& mean_xi);

struct UncertaintySampleSet {
  std::vector<Vec> samples;
  std::optional<double> support_bound;

  std::size_t size() const { return samples.size(); }
  Vec mean() const;
  double max_norm() const;
  /// Throws ConfigError when empty, non-finite, of the wrong dimension or outside the bound.
  void validate(int uncertainty_dim) const;
};

/// M states uniform over the domain with the closed delta-ball removed.
std::vector<Vec> sample_domain(const UncertainSystem& sys, int count, double delta,
                               std::uint64_t seed);

/// Column-stacked form of sample_domain (n x M).
Mat stack_columns(const std::vector<Vec>& states);

}  // namespace drlyap
