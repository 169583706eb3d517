#include <drlyap/autodiff_nn.hpp>

#include <cmath>
#include <utility>

namespace drlyap {

DenseNet::DenseNet(std::vector<int> layer_widths) : widths_(std::move(layer_widths)) {
  if (widths_.size() < 2) {
    throw ContractError("DenseNet: need at least an input and an output width");
  }
  for (int w : widths_) {
    if (w <= 0) throw ContractError("DenseNet: layer widths must be positive");
  }
  layers_.reserve(widths_.size() - 1);
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    layers_.push_back({Mat::Zero(widths_[l], widths_[l - 1]), Vec::Zero(widths_[l])});
    num_params_ += static_cast<Eigen::Index>(widths_[l]) * (widths_[l - 1] + 1);
  }
}

Vec DenseNet::flatten() const {
  Vec out(num_params_);
  Eigen::Index k = 0;
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) out[k++] = layer.weight(r, c);
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out[k++] = layer.bias[r];
  }
  return out;
}

void DenseNet::unflatten(const Vec& params) {
  require_dim(params.size(), num_params_, "DenseNet::unflatten");
  Eigen::Index k = 0;
  for (auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = params[k++];
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = params[k++];
  }
}

bool operator==(const DenseNet& a, const DenseNet& b) {
  if (a.widths_ != b.widths_ || a.seed_ != b.seed_) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    if (a.layers_[l].weight != b.layers_[l].weight) return false;
    if (a.layers_[l].bias != b.layers_[l].bias) return false;
  }
  return true;
}

DenseNet init_params(const std::vector<int>& layer_widths, std::uint64_t seed) {
  DenseNet net(layer_widths);
  net.set_seed(seed);
  Rng rng(seed);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& layer = net.layer(l);
    const double fan_in = static_cast<double>(layer.weight.cols());
    const double fan_out = static_cast<double>(layer.weight.rows());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = rng.uniform(-limit, limit);
      }
    }
  }
  return net;
}

namespace {

bool is_hidden(const DenseNet& net, std::size_t l) { return l + 1 < net.num_layers(); }

// tanh through exp, which Eigen vectorises for doubles; exact 0 at 0 and
// saturates cleanly to +-1 when exp overflows or underflows.
Mat activate(const Mat& z) { return (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix(); }

}  // namespace

Mat forward_batch(const DenseNet& net, const Mat& inputs) {
  require_dim(inputs.rows(), net.input_dim(), "forward");
  Mat a = inputs;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layer(l);
    Mat z = layer.weight * a;
    z.colwise() += layer.bias;
    if (is_hidden(net, l)) z = activate(z);
    a = std::move(z);
  }
  return a;
}

Vec forward(const DenseNet& net, const Vec& x) {
  require_dim(x.size(), net.input_dim(), "forward");
  return forward_batch(net, x);
}

Mat input_gradient(const DenseNet& net, const Vec& x) {
  require_dim(x.size(), net.input_dim(), "input_gradient");
  Vec a = x;
  Mat jac = Mat::Identity(x.size(), x.size());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layer(l);
    Vec z = layer.weight * a + layer.bias;
    jac = layer.weight * jac;
    if (is_hidden(net, l)) {
      a = activate(z);
      const Vec slope = (1.0 - a.array().square()).matrix();
      jac = slope.asDiagonal() * jac;
    } else {
      a = std::move(z);
    }
  }
  return jac;
}

const Mat& GradTape::output_tangent() const {
  if (!has_tangent()) throw ContractError("GradTape: tape was recorded without a tangent");
  return tangents_.back();
}

void GradTape::seed(Mat output_cotangent) {
  if (output_cotangent.rows() != output().rows() || output_cotangent.cols() != batch_size()) {
    throw ContractError("GradTape::seed: cotangent shape must match the recorded output");
  }
  seed_output_ = std::move(output_cotangent);
  seed_tangent_.resize(0, 0);
  seeded_ = true;
}

void GradTape::seed(Mat output_cotangent, Mat tangent_cotangent) {
  if (!has_tangent()) throw ContractError("GradTape::seed: tape has no tangent to seed");
  if (tangent_cotangent.rows() != output().rows() || tangent_cotangent.cols() != batch_size()) {
    throw ContractError("GradTape::seed: tangent cotangent shape must match the output");
  }
  seed(std::move(output_cotangent));
  seed_tangent_ = std::move(tangent_cotangent);
}

void GradTape::seed_scalar(double weight) {
  if (output().rows() != 1 || batch_size() != 1) {
    throw ContractError("GradTape::seed_scalar: recorded output is not a scalar");
  }
  seed(Mat::Constant(1, 1, weight));
}

GradTape record(const DenseNet& net, const Mat& inputs) {
  require_dim(inputs.rows(), net.input_dim(), "record");
  GradTape tape;
  tape.widths_ = net.layer_widths();
  tape.activations_.reserve(net.num_layers() + 1);
  tape.activations_.push_back(inputs);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layer(l);
    Mat z = layer.weight * tape.activations_.back();
    z.colwise() += layer.bias;
    if (is_hidden(net, l)) z = activate(z);
    tape.activations_.push_back(std::move(z));
  }
  return tape;
}

GradTape record(const DenseNet& net, const Mat& inputs, const Mat& input_tangents) {
  require_dim(input_tangents.rows(), net.input_dim(), "record (tangent)");
  require_dim(input_tangents.cols(), inputs.cols(), "record (tangent batch)");
  GradTape tape = record(net, inputs);
  tape.tangents_.reserve(net.num_layers() + 1);
  tape.tangents_.push_back(input_tangents);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Mat zdot = net.layer(l).weight * tape.tangents_.back();
    if (is_hidden(net, l)) {
      const auto& a = tape.activations_[l + 1];
      zdot = ((1.0 - a.array().square()) * zdot.array()).matrix();
    }
    tape.tangents_.push_back(std::move(zdot));
  }
  return tape;
}

// Reverse sweep. For a hidden layer a = tanh(z), adot = s(z) zdot with
// s = 1 - a^2 and ds/dz = -2 a s, so with cotangents (abar, adotbar):
//   zbar    = s * abar + adotbar * zdot * (-2 a s) = s * abar - 2 a * adotbar * adot
//   zdotbar = s * adotbar
// and the affine map z = W a_prev + b, zdot = W adot_prev distributes them.
Backprop backpropagate(const DenseNet& net, const GradTape& tape) {
  if (!tape.seeded()) throw ContractError("backpropagate: tape has not been seeded");
  if (tape.widths_ != net.layer_widths()) {
    throw ContractError("backpropagate: tape was recorded with a different architecture");
  }
  const bool tangent = tape.has_tangent() && tape.seed_tangent_.size() > 0;

  Mat abar = tape.seed_output_;
  Mat adotbar;
  if (tangent) adotbar = tape.seed_tangent_;

  Backprop out;
  out.params.resize(net.num_params());
  std::vector<Mat> grad_weight(net.num_layers());
  std::vector<Vec> grad_bias(net.num_layers());

  for (std::size_t li = net.num_layers(); li-- > 0;) {
    const auto& layer = net.layer(li);
    const Mat& a_out = tape.activations_[li + 1];
    const Mat& a_in = tape.activations_[li];
    Mat zbar;
    Mat zdotbar;
    if (is_hidden(net, li)) {
      const Eigen::ArrayXXd slope = 1.0 - a_out.array().square();
      zbar = (slope * abar.array()).matrix();
      if (tangent) {
        const Mat& adot_out = tape.tangents_[li + 1];
        zbar.array() -= 2.0 * a_out.array() * adotbar.array() * adot_out.array();
        zdotbar = (slope * adotbar.array()).matrix();
      }
    } else {
      zbar = abar;
      if (tangent) zdotbar = adotbar;
    }
    grad_weight[li] = zbar * a_in.transpose();
    grad_bias[li] = zbar.rowwise().sum();
    if (tangent) grad_weight[li].noalias() += zdotbar * tape.tangents_[li].transpose();

    abar = layer.weight.transpose() * zbar;
    if (tangent) adotbar = layer.weight.transpose() * zdotbar;
  }

  Eigen::Index k = 0;
  for (std::size_t li = 0; li < net.num_layers(); ++li) {
    const Mat& gw = grad_weight[li];
    for (Eigen::Index r = 0; r < gw.rows(); ++r) {
      for (Eigen::Index c = 0; c < gw.cols(); ++c) out.params[k++] = gw(r, c);
    }
    for (Eigen::Index r = 0; r < grad_bias[li].size(); ++r) out.params[k++] = grad_bias[li][r];
  }
  out.input_cotangent = std::move(abar);
  if (tangent) out.input_tangent_cotangent = std::move(adotbar);
  return out;
}

Vec param_gradient(const DenseNet& net, const GradTape& tape) {
  return backpropagate(net, tape).params;
}

DirectionalGrad grad_of_directional_input_grad(const DenseNet& net, const Vec& x, const Vec& v,
                                               const Vec& direction) {
  require_dim(x.size(), net.input_dim(), "grad_of_directional_input_grad (x)");
  require_dim(v.size(), net.output_dim(), "grad_of_directional_input_grad (v)");
  require_dim(direction.size(), net.input_dim(), "grad_of_directional_input_grad (direction)");
  GradTape tape = record(net, x, direction);
  DirectionalGrad out;
  out.value = v.dot(tape.output_tangent().col(0));
  tape.seed(Mat::Zero(net.output_dim(), 1), v);
  out.params = param_gradient(net, tape);
  return out;
}

DirectionalGrad grad_of_directional_input_grad(const DenseNet& net, const Vec& x, const Vec& v) {
  if (net.input_dim() != 1) {
    throw ShapeError("grad_of_directional_input_grad: scalar form needs a 1-D input");
  }
  return grad_of_directional_input_grad(net, x, v, Vec::Ones(1));
}

void adam_step(Vec& params, const Vec& grad, AdamState& state, double lr,
               const AdamConfig& config) {
  require_dim(grad.size(), params.size(), "adam_step");
  if (!(lr > 0.0)) throw ContractError("adam_step: learning rate must be positive");
  if (!grad.allFinite()) throw NumericError("adam_step: gradient contains NaN or Inf");
  if (state.m.size() != params.size()) {
    state.m = Vec::Zero(params.size());
    state.v = Vec::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  const Vec m_hat = state.m / bc1;
  const Vec v_hat = state.v / bc2;
  params.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + config.eps);
}

}  // namespace drlyap
