#pragma once

// Hinge losses on the Lyapunov decrease condition and the Adam loop that
// minimises them jointly over the certificate and controller parameters.

#include <drlyap/dro.hpp>
#include <drlyap/lyapunov.hpp>
#include <drlyap/systems.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace drlyap {

enum class LossKind { Nominal, DrUniform, DrPointwise, DrExponential };

std::string to_string(LossKind kind);
/// Accepts "nominal", "dr_uniform", "dr_pointwise", "dr_exponential".
LossKind loss_kind_from_string(const std::string& name);

struct TrainConfig {
  int M = 3600;
  int N = 5;
  int epochs = 2000;
  double learning_rate = 0.002;
  std::uint64_t seed = 0;
  double gamma = 0.1;
  double delta = 0.1;
  double alpha_hat = 0.1;
  double r = 0.01;
  double epsilon = 0.1;
  LossKind loss_kind = LossKind::DrPointwise;
  double decay_rate = 0.0;  // alpha of the exponential loss
  std::optional<std::filesystem::path> warm_start;  // pair header
  int batch_size = 0;  // 0 = full batch
  // Draw a fresh set of M states every this many epochs (0 keeps one set).
  int resample_every = 0;
  PairShape shape;
  double loss_tol = 1e-6;
  bool smooth_clamp = true;
  bool freeze_certificate = false;
  bool freeze_controller = false;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

struct LossResult {
  double value = 0.0;
  Vec grad;     // d value / d [theta1; theta2]
  Vec margins;  // per-state hinge arguments
};

/// mean_i (V_dot(x_i, xi) + gamma |x_i|)_+ with a fixed xi (zero when empty).
LossResult nominal_loss(const LyapunovPair& pair, const UncertainSystem& sys, const Mat& states,
                        const Vec& xi = Vec());

/// ((r/eps) max_i |W^T grad V| + max_j mean_i (V_dot(x_i, xi_j) + gamma |x_i|))_+.
/// Requires eps <= 1/N. The per-state margins use the pointwise reading.
LossResult dr_uniform_loss(const LyapunovPair& pair, const UncertainSystem& sys,
                           const AmbiguitySpec& spec, const Mat& states);

/// mean_i ((r/eps) |W^T grad V| + CVaR_j V_dot(x_i, xi_j) + gamma |x_i|)_+.
/// For eps <= 1/N the CVaR term is the max over samples.
LossResult dr_pointwise_loss(const LyapunovPair& pair, const UncertainSystem& sys,
                             const AmbiguitySpec& spec, const Mat& states);

/// Pointwise loss with alpha V(x_i) added inside the hinge.
LossResult dr_exponential_loss(const LyapunovPair& pair, const UncertainSystem& sys,
                               const AmbiguitySpec& spec, const Mat& states, double alpha);

LossResult evaluate_loss(LossKind kind, const LyapunovPair& pair, const UncertainSystem& sys,
                         const AmbiguitySpec& spec, const Mat& states, double decay_rate = 0.0);

struct TrainLogEntry {
  int epoch = 0;
  double loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  LyapunovPair pair;
  std::vector<TrainLogEntry> log;
  std::optional<int> converged_epoch;  // first epoch with loss <= loss_tol
  bool warning = false;                // budget exhausted; pair is the best seen
  double best_loss = 0.0;
  Mat states;                          // last training set drawn, n x M
};

/// Seeded sampling, then Adam epochs until the loss reaches loss_tol.
/// `init` (or config.warm_start) replaces the fresh initialisation.
/// A non-finite loss throws NumericError naming the epoch.
TrainResult train(const TrainConfig& config, const UncertainSystem& sys,
                  const AmbiguitySpec& spec, const LyapunovPair* init = nullptr);

/// CSV with header epoch,loss,wall_ms.
void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log);
std::vector<TrainLogEntry> read_train_log(const std::filesystem::path& path);

}  // namespace drlyap
