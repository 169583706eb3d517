#pragma once

// Dense tanh networks with reverse-mode parameter gradients.
//
// The tape records a batched forward pass, optionally together with a
// forward-mode tangent (a Jacobian-vector product). Backpropagating through
// the tangent-augmented tape gives parameter gradients of expressions that
// contain the network's input Jacobian, which is what the Lyapunov losses
// need: they contract grad V(x) with the dynamics.

#include <drlyap/common.hpp>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace drlyap {

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;    // out
};

/// Fully connected network: tanh on every hidden layer, identity on the output.
class DenseNet {
 public:
  DenseNet() = default;

  /// Network with all parameters zero. `layer_widths` = {in, hidden..., out}.
  explicit DenseNet(std::vector<int> layer_widths);

  const std::vector<int>& layer_widths() const { return widths_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  std::size_t num_layers() const { return layers_.size(); }

  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  DenseLayer& layer(std::size_t i) { return layers_.at(i); }

  Eigen::Index num_params() const { return num_params_; }

  /// Layer-major; within a layer the weight matrix row-major, then the bias.
  Vec flatten() const;
  void unflatten(const Vec& params);

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  friend bool operator==(const DenseNet& a, const DenseNet& b);

 private:
  std::vector<int> widths_;
  std::vector<DenseLayer> layers_;
  Eigen::Index num_params_ = 0;
  std::uint64_t seed_ = 0;
};

/// Glorot-uniform weights, zero biases, drawn in flattening order.
DenseNet init_params(const std::vector<int>& layer_widths, std::uint64_t seed);

Vec forward(const DenseNet& net, const Vec& x);

/// Column-wise forward pass: inputs are in_dim x B, result is out_dim x B.
Mat forward_batch(const DenseNet& net, const Mat& inputs);

/// d x n Jacobian of the output with respect to the input.
Mat input_gradient(const DenseNet& net, const Vec& x);

struct Backprop;

/// Recorded batched forward pass plus the output seeds for a reverse sweep.
class GradTape {
 public:
  Eigen::Index batch_size() const { return activations_.front().cols(); }
  const Mat& inputs() const { return activations_.front(); }
  const Mat& output() const { return activations_.back(); }
  bool has_tangent() const { return !tangents_.empty(); }
  /// Directional derivative J(x) * tangent for every column; requires has_tangent().
  const Mat& output_tangent() const;

  /// Seed with dLoss/d(output), shape out_dim x B.
  void seed(Mat output_cotangent);
  /// Seed both the primal output and its tangent (tangent-augmented tapes only).
  void seed(Mat output_cotangent, Mat tangent_cotangent);
  /// Treat the single recorded output as the loss itself. Throws ContractError
  /// unless the tape holds exactly one scalar output.
  void seed_scalar(double weight = 1.0);

  bool seeded() const { return seeded_; }

 private:
  friend GradTape record(const DenseNet&, const Mat&);
  friend GradTape record(const DenseNet&, const Mat&, const Mat&);
  friend Backprop backpropagate(const DenseNet&, const GradTape&);

  std::vector<Mat> activations_;   // a_0 .. a_L
  std::vector<Mat> tangents_;      // tangent of a_0 .. a_L (empty when absent)
  Mat seed_output_;
  Mat seed_tangent_;
  bool seeded_ = false;
  std::vector<int> widths_;
};

GradTape record(const DenseNet& net, const Mat& inputs);
GradTape record(const DenseNet& net, const Mat& inputs, const Mat& input_tangents);

struct Backprop {
  Vec params;                  // flattened, same order as DenseNet::flatten
  Mat input_cotangent;         // in_dim x B
  Mat input_tangent_cotangent; // in_dim x B, zero-sized without a tangent
};

/// Reverse sweep over a seeded tape. Batch columns are reduced in index order.
Backprop backpropagate(const DenseNet& net, const GradTape& tape);

/// Parameter gradient of the seeded scalar loss.
Vec param_gradient(const DenseNet& net, const GradTape& tape);

struct DirectionalGrad {
  double value = 0.0;
  Vec params;
};

/// s = v^T J(x) w together with ds/dtheta, where J is the input Jacobian,
/// v an output cotangent (dim d) and w an input direction (dim n).
DirectionalGrad grad_of_directional_input_grad(const DenseNet& net, const Vec& x,
                                               const Vec& v, const Vec& direction);

/// Scalar-input form s = v^T J(x); needs input_dim() == 1.
DirectionalGrad grad_of_directional_input_grad(const DenseNet& net, const Vec& x,
                                               const Vec& v);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(Eigen::Index n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}

  Vec m;
  Vec v;
  long step = 0;
};

/// One bias-corrected Adam update in place. A non-finite gradient throws
/// NumericError and leaves params and state untouched.
void adam_step(Vec& params, const Vec& grad, AdamState& state, double lr,
               const AdamConfig& config = {});

}  // namespace drlyap
