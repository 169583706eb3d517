#pragma once

// Certificate / controller pair built from two dense networks:
//   V(x)  = |phi1(x) - phi1(0)|^2 + alpha_hat |x|^2
//   pi(x) = sat(phi2(x) - phi2(0))
// so V(0) = 0, V >= alpha_hat |x|^2 and pi(0) = 0 hold for any parameters.

#include <drlyap/autodiff_nn.hpp>
#include <drlyap/systems.hpp>

#include <filesystem>
#include <vector>

namespace drlyap {

enum class Saturation {
  Hard,    // componentwise clamp to the input bounds
  Smooth,  // bound * tanh(raw / bound) on each side of zero
};

struct LyapunovPair {
  DenseNet certificate;  // phi1: R^n -> R^d
  DenseNet controller;   // phi2: R^n -> R^m
  double alpha_hat = 0.1;
  double gamma = 0.1;
  double delta = 0.1;
  Box input_bounds;
  bool smooth_clamp = true;  // saturation used while training

  int state_dim() const { return certificate.input_dim(); }
  int control_dim() const { return controller.output_dim(); }
  Saturation training_saturation() const {
    return smooth_clamp ? Saturation::Smooth : Saturation::Hard;
  }
};

struct PairShape {
  std::vector<int> certificate_hidden{64, 64};
  int certificate_output = 1;
  std::vector<int> controller_hidden{64, 64};
};

/// Fresh pair with Glorot-initialised networks; the controller net uses seed + 1.
LyapunovPair make_pair(const UncertainSystem& sys, const PairShape& shape, std::uint64_t seed,
                       double alpha_hat = 0.1, double gamma = 0.1, double delta = 0.1);

double V(const LyapunovPair& pair, const Vec& x);
Vec grad_V(const LyapunovPair& pair, const Vec& x);
Vec controller(const LyapunovPair& pair, const Vec& x, Saturation mode = Saturation::Hard);

/// grad V(x)^T (f(x, pi(x)) + W(x, pi(x)) xi).
double V_dot(const LyapunovPair& pair, const UncertainSystem& sys, const Vec& x, const Vec& xi,
             Saturation mode = Saturation::Hard);

/// |W(x, pi(x))^T grad V(x)|, the Lipschitz constant of V_dot in xi at x.
double lipschitz_term(const LyapunovPair& pair, const UncertainSystem& sys, const Vec& x,
                      Saturation mode = Saturation::Hard);

Vec saturate(const Vec& raw, const Box& bounds, Saturation mode);
/// d saturate / d raw, componentwise.
Vec saturate_slope(const Vec& raw, const Box& bounds, Saturation mode);

/// Batched evaluation of everything the losses need, with the tapes kept for
/// a later reverse sweep.
struct PairBatch {
  Mat states;         // n x B
  Vec values;         // V, size B
  Mat grad;           // grad V, n x B
  Mat raw_control;    // phi2(x) - phi2(0), m x B
  Mat control;        // m x B
  Mat control_slope;  // m x B
  Mat cert_offset;    // phi1(x) - phi1(0), d x B
  GradTape controller_tape;
};

PairBatch evaluate_pair(const LyapunovPair& pair, const Mat& states, Saturation mode);

/// Downstream sensitivities of a scalar loss with respect to the batch outputs.
struct PairCotangent {
  Vec values;   // dLoss/dV, size B (may be empty for zero)
  Mat grad;     // dLoss/d grad V, n x B
  Mat control;  // dLoss/d control, m x B
};

/// Flattened parameter vector [theta1; theta2].
Vec pair_params(const LyapunovPair& pair);
void set_pair_params(LyapunovPair& pair, const Vec& params);

/// dLoss/d[theta1; theta2] given the cotangents of a batch evaluation.
Vec pair_param_gradient(const LyapunovPair& pair, const PairBatch& batch,
                        const PairCotangent& cotangent);

/// Writes `<stem>.json` (header) plus `<stem>_certificate.json` and
/// `<stem>_controller.json`; returns the header path.
std::filesystem::path save_pair(const LyapunovPair& pair, const std::filesystem::path& stem);
LyapunovPair load_pair(const std::filesystem::path& header);

}  // namespace drlyap
