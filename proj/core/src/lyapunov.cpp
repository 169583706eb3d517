#include <drlyap/lyapunov.hpp>
#include <drlyap/weights_io.hpp>

#include "json_util.hpp"

#include <algorithm>
#include <cmath>

namespace drlyap {

namespace {

std::vector<int> widths_of(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w;
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

void check_bounds(const Box& bounds) {
  if ((bounds.lower.array() > 0.0).any() || (bounds.upper.array() < 0.0).any()) {
    throw ConfigError("controller: input bounds must contain 0");
  }
}

}  // namespace

LyapunovPair make_pair(const UncertainSystem& sys, const PairShape& shape, std::uint64_t seed,
                       double alpha_hat, double gamma, double delta) {
  LyapunovPair pair;
  pair.certificate =
      init_params(widths_of(sys.state_dim(), shape.certificate_hidden, shape.certificate_output),
                  seed);
  pair.controller =
      init_params(widths_of(sys.state_dim(), shape.controller_hidden, sys.control_dim()), seed + 1);
  pair.alpha_hat = alpha_hat;
  pair.gamma = gamma;
  pair.delta = delta;
  pair.input_bounds = sys.input_bounds();
  return pair;
}

Vec saturate(const Vec& raw, const Box& bounds, Saturation mode) {
  require_dim(raw.size(), bounds.dim(), "saturate");
  Vec out(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double lo = bounds.lower[i];
    const double hi = bounds.upper[i];
    const double r = raw[i];
    if (mode == Saturation::Hard) {
      out[i] = std::clamp(r, lo, hi);
    } else if (r >= 0.0) {
      out[i] = hi > 0.0 ? hi * std::tanh(r / hi) : 0.0;
    } else {
      out[i] = lo < 0.0 ? -lo * std::tanh(r / -lo) : 0.0;
    }
  }
  return out;
}

Vec saturate_slope(const Vec& raw, const Box& bounds, Saturation mode) {
  require_dim(raw.size(), bounds.dim(), "saturate_slope");
  Vec out(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double lo = bounds.lower[i];
    const double hi = bounds.upper[i];
    const double r = raw[i];
    if (mode == Saturation::Hard) {
      out[i] = (r >= lo && r <= hi) ? 1.0 : 0.0;
    } else {
      const double scale = r >= 0.0 ? hi : -lo;
      if (scale <= 0.0) {
        out[i] = 0.0;
      } else {
        const double t = std::tanh(r / scale);
        out[i] = 1.0 - t * t;
      }
    }
  }
  return out;
}

double V(const LyapunovPair& pair, const Vec& x) {
  require_dim(x.size(), pair.state_dim(), "V");
  const Vec e = forward(pair.certificate, x) - forward(pair.certificate, Vec::Zero(x.size()));
  return e.squaredNorm() + pair.alpha_hat * x.squaredNorm();
}

Vec grad_V(const LyapunovPair& pair, const Vec& x) {
  require_dim(x.size(), pair.state_dim(), "grad_V");
  const Vec e = forward(pair.certificate, x) - forward(pair.certificate, Vec::Zero(x.size()));
  return 2.0 * input_gradient(pair.certificate, x).transpose() * e + 2.0 * pair.alpha_hat * x;
}

Vec controller(const LyapunovPair& pair, const Vec& x, Saturation mode) {
  require_dim(x.size(), pair.state_dim(), "controller");
  check_bounds(pair.input_bounds);
  const Vec raw = forward(pair.controller, x) - forward(pair.controller, Vec::Zero(x.size()));
  return saturate(raw, pair.input_bounds, mode);
}

double V_dot(const LyapunovPair& pair, const UncertainSystem& sys, const Vec& x, const Vec& xi,
             Saturation mode) {
  const Vec u = controller(pair, x, mode);
  return grad_V(pair, x).dot(sys.eval(x, u, xi));
}

double lipschitz_term(const LyapunovPair& pair, const UncertainSystem& sys, const Vec& x,
                      Saturation mode) {
  const Vec u = controller(pair, x, mode);
  return (sys.W(x, u).transpose() * grad_V(pair, x)).norm();
}

PairBatch evaluate_pair(const LyapunovPair& pair, const Mat& states, Saturation mode) {
  require_dim(states.rows(), pair.state_dim(), "evaluate_pair");
  check_bounds(pair.input_bounds);
  const Eigen::Index n = states.rows();
  const Eigen::Index batch = states.cols();
  PairBatch out;
  out.states = states;

  GradTape cert = record(pair.certificate, states);
  const Vec cert0 = forward(pair.certificate, Vec::Zero(n));
  out.cert_offset = cert.output().colwise() - cert0;
  out.values = out.cert_offset.colwise().squaredNorm().transpose() +
               pair.alpha_hat * states.colwise().squaredNorm().transpose();
  cert.seed(out.cert_offset);
  out.grad = 2.0 * backpropagate(pair.certificate, cert).input_cotangent +
             2.0 * pair.alpha_hat * states;

  out.controller_tape = record(pair.controller, states);
  const Vec ctrl0 = forward(pair.controller, Vec::Zero(n));
  out.raw_control = out.controller_tape.output().colwise() - ctrl0;
  out.control.resize(out.raw_control.rows(), batch);
  out.control_slope.resize(out.raw_control.rows(), batch);
  for (Eigen::Index r = 0; r < out.raw_control.rows(); ++r) {
    const double lo = pair.input_bounds.lower[r];
    const double hi = pair.input_bounds.upper[r];
    const Eigen::ArrayXd raw = out.raw_control.row(r).transpose().array();
    if (mode == Saturation::Hard) {
      out.control.row(r) = raw.max(lo).min(hi).matrix().transpose();
      out.control_slope.row(r) = ((raw >= lo) && (raw <= hi)).cast<double>().matrix().transpose();
      continue;
    }
    // Smooth branch per sign; a zero bound collapses that side to zero.
    const Eigen::ArrayXd pos = hi > 0.0 ? Eigen::ArrayXd(hi * (raw / hi).tanh())
                                        : Eigen::ArrayXd::Zero(batch);
    const Eigen::ArrayXd neg = lo < 0.0 ? Eigen::ArrayXd(-lo * (raw / -lo).tanh())
                                        : Eigen::ArrayXd::Zero(batch);
    const Eigen::ArrayXd pos_slope = hi > 0.0 ? Eigen::ArrayXd(1.0 - (pos / hi).square())
                                              : Eigen::ArrayXd::Zero(batch);
    const Eigen::ArrayXd neg_slope = lo < 0.0 ? Eigen::ArrayXd(1.0 - (neg / lo).square())
                                              : Eigen::ArrayXd::Zero(batch);
    out.control.row(r) = (raw >= 0.0).select(pos, neg).matrix().transpose();
    out.control_slope.row(r) = (raw >= 0.0).select(pos_slope, neg_slope).matrix().transpose();
  }
  return out;
}

Vec pair_params(const LyapunovPair& pair) {
  Vec p(pair.certificate.num_params() + pair.controller.num_params());
  p << pair.certificate.flatten(), pair.controller.flatten();
  return p;
}

void set_pair_params(LyapunovPair& pair, const Vec& params) {
  const Eigen::Index n1 = pair.certificate.num_params();
  require_dim(params.size(), n1 + pair.controller.num_params(), "set_pair_params");
  pair.certificate.unflatten(params.head(n1));
  pair.controller.unflatten(params.tail(pair.controller.num_params()));
}

// V = |E|^2 + a|x|^2 and grad V = 2 J^T E + 2 a x with E = phi1(x) - phi1(0).
// For a fixed cotangent G of grad V, <G, 2 J^T E> = 2 <J G, E>, so the
// certificate sensitivity comes from a tangent-augmented tape with tangent G:
//   dLoss/dE     = 2 (J G) + 2 dV * E        (seed on the primal output)
//   dLoss/d(J G) = 2 E                       (seed on the output tangent)
// and phi1(0) receives minus the column sum of dLoss/dE.
Vec pair_param_gradient(const LyapunovPair& pair, const PairBatch& batch,
                        const PairCotangent& cot) {
  const Eigen::Index n = batch.states.rows();
  const Eigen::Index b = batch.states.cols();
  require_dim(cot.grad.rows(), n, "pair_param_gradient (grad rows)");
  require_dim(cot.grad.cols(), b, "pair_param_gradient (grad cols)");
  require_dim(cot.control.cols(), b, "pair_param_gradient (control cols)");

  GradTape cert = record(pair.certificate, batch.states, cot.grad);
  Mat seed_out = 2.0 * cert.output_tangent();
  if (cot.values.size() > 0) {
    require_dim(cot.values.size(), b, "pair_param_gradient (values)");
    seed_out += 2.0 * (batch.cert_offset.array().rowwise() * cot.values.transpose().array()).matrix();
  }
  const Vec seed_origin = -seed_out.rowwise().sum();
  cert.seed(seed_out, 2.0 * batch.cert_offset);
  Vec g1 = param_gradient(pair.certificate, cert);
  GradTape cert0 = record(pair.certificate, Mat::Zero(n, 1));
  cert0.seed(seed_origin);
  g1 += param_gradient(pair.certificate, cert0);

  const Mat raw_cot = (cot.control.array() * batch.control_slope.array()).matrix();
  GradTape ctrl = batch.controller_tape;
  ctrl.seed(raw_cot);
  Vec g2 = param_gradient(pair.controller, ctrl);
  GradTape ctrl0 = record(pair.controller, Mat::Zero(n, 1));
  ctrl0.seed(-raw_cot.rowwise().sum());
  g2 += param_gradient(pair.controller, ctrl0);

  Vec out(g1.size() + g2.size());
  out << g1, g2;
  return out;
}

std::filesystem::path save_pair(const LyapunovPair& pair, const std::filesystem::path& stem) {
  const auto dir = stem.parent_path();
  const std::string base = stem.filename().string();
  const auto header = dir / (base + ".json");
  const std::string cert_name = base + "_certificate.json";
  const std::string ctrl_name = base + "_controller.json";
  save_weights(pair.certificate, dir / cert_name);
  save_weights(pair.controller, dir / ctrl_name);
  nlohmann::json j;
  j["certificate_weights"] = cert_name;
  j["controller_weights"] = ctrl_name;
  j["alpha_hat"] = pair.alpha_hat;
  j["gamma"] = pair.gamma;
  j["delta"] = pair.delta;
  j["input_bounds"] = {{"lower", detail::vec_to_json(pair.input_bounds.lower)},
                       {"upper", detail::vec_to_json(pair.input_bounds.upper)}};
  j["smooth_clamp"] = pair.smooth_clamp;
  detail::write_text_file(header, j.dump(1) + "\n");
  return header;
}

LyapunovPair load_pair(const std::filesystem::path& header) {
  const auto j = detail::parse_json_file(header);
  try {
    LyapunovPair pair;
    const auto dir = header.parent_path();
    pair.certificate = load_weights(dir / j.at("certificate_weights").get<std::string>());
    pair.controller = load_weights(dir / j.at("controller_weights").get<std::string>());
    pair.alpha_hat = j.at("alpha_hat").get<double>();
    pair.gamma = j.at("gamma").get<double>();
    pair.delta = j.at("delta").get<double>();
    pair.input_bounds.lower = detail::vec_from_json(j.at("input_bounds").at("lower"));
    pair.input_bounds.upper = detail::vec_from_json(j.at("input_bounds").at("upper"));
    pair.smooth_clamp = j.at("smooth_clamp").get<bool>();
    if (pair.certificate.input_dim() != pair.controller.input_dim()) {
      throw ConfigError("pair header: certificate and controller input dims differ");
    }
    require_dim(pair.input_bounds.dim(), pair.controller.output_dim(), "pair header input bounds");
    return pair;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(header.string() + ": " + e.what());
  }
}

}  // namespace drlyap
