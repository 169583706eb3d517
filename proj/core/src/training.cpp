#include <drlyap/parallel.hpp>
#include <drlyap/training.hpp>

#include "json_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace drlyap {

namespace {

struct SampleTerms {
  Vec f;
  Mat w;
  Vec wg;      // W^T grad V
  double lip = 0.0;
  Vec vdot;    // V_dot under each uncertainty sample
};

std::vector<SampleTerms> sample_terms(const UncertainSystem& sys, const PairBatch& batch,
                                      const std::vector<Vec>& xis) {
  const std::size_t b = static_cast<std::size_t>(batch.states.cols());
  std::vector<SampleTerms> out(b);
  parallel_for(b, [&](std::size_t i) {
    const Eigen::Index c = static_cast<Eigen::Index>(i);
    const Vec x = batch.states.col(c);
    const Vec u = batch.control.col(c);
    const Vec g = batch.grad.col(c);
    SampleTerms& t = out[i];
    t.f = sys.f(x, u);
    t.w = sys.W(x, u);
    t.wg = t.w.transpose() * g;
    t.lip = t.wg.norm();
    const double gf = g.dot(t.f);
    t.vdot.resize(static_cast<Eigen::Index>(xis.size()));
    for (std::size_t j = 0; j < xis.size(); ++j) {
      t.vdot[static_cast<Eigen::Index>(j)] = gf + t.wg.dot(xis[j]);
    }
  });
  return out;
}

Vec unit_or_zero(const Vec& v) {
  const double n = v.norm();
  return n > 0.0 ? Vec(v / n) : Vec(Vec::Zero(v.size()));
}

// Every loss here is sum_i [cf_i grad V_i . f_i + grad V_i . W_i xt_i + cv_i V_i]
// to first order, so its cotangents follow from the per-sample coefficients.
Vec gradient_from_coefficients(const LyapunovPair& pair, const UncertainSystem& sys,
                               const PairBatch& batch, const std::vector<SampleTerms>& terms,
                               const Vec& cf, const Mat& xt, const Vec& cv) {
  const Eigen::Index n = batch.states.rows();
  const Eigen::Index b = batch.states.cols();
  PairCotangent cot;
  cot.values = cv;
  cot.grad = Mat::Zero(n, b);
  cot.control = Mat::Zero(batch.control.rows(), b);
  parallel_for(static_cast<std::size_t>(b), [&](std::size_t i) {
    const Eigen::Index c = static_cast<Eigen::Index>(i);
    if (cf[c] == 0.0 && xt.col(c).isZero(0.0)) return;
    const Vec x = batch.states.col(c);
    const Vec u = batch.control.col(c);
    const Vec g = batch.grad.col(c);
    const Vec w = xt.col(c);
    cot.grad.col(c) = cf[c] * terms[i].f + terms[i].w * w;
    const Mat du = cf[c] * sys.df_du(x, u) + sys.dWw_du(x, u, w);
    cot.control.col(c) = du.transpose() * g;
  });
  return pair_param_gradient(pair, batch, cot);
}

void check_states(const LyapunovPair& pair, const Mat& states) {
  require_dim(states.rows(), pair.state_dim(), "loss states");
  if (states.cols() == 0) throw ContractError("loss evaluated on an empty state set");
}

LossResult pointwise_loss(const LyapunovPair& pair, const UncertainSystem& sys,
                          const AmbiguitySpec& spec, const Mat& states, double alpha) {
  check_states(pair, states);
  spec.validate();
  const PairBatch batch = evaluate_pair(pair, states, pair.training_saturation());
  const auto terms = sample_terms(sys, batch, spec.samples.samples);
  const Eigen::Index b = states.cols();
  const Eigen::Index k = sys.uncertainty_dim();
  const double inv_m = 1.0 / static_cast<double>(b);
  const double scale = spec.radius / spec.epsilon;

  LossResult out;
  out.margins.resize(b);
  Vec cf = Vec::Zero(b);
  Vec cv = Vec::Zero(b);
  Mat xt = Mat::Zero(k, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& t = terms[static_cast<std::size_t>(i)];
    const std::vector<double> vd(t.vdot.data(), t.vdot.data() + t.vdot.size());
    const double margin = scale * t.lip + cvar(vd, spec.epsilon) +
                          pair.gamma * states.col(i).norm() + alpha * batch.values[i];
    out.margins[i] = margin;
    if (margin <= 0.0) continue;
    out.value += margin * inv_m;
    const std::vector<double> w = cvar_weights(vd, spec.epsilon);
    Vec mix = scale * unit_or_zero(t.wg);
    for (std::size_t j = 0; j < w.size(); ++j) mix += w[j] * spec.samples.samples[j];
    cf[i] = inv_m;
    cv[i] = alpha * inv_m;
    xt.col(i) = inv_m * mix;
  }
  out.grad = gradient_from_coefficients(pair, sys, batch, terms, cf, xt, cv);
  return out;
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Nominal: return "nominal";
    case LossKind::DrUniform: return "dr_uniform";
    case LossKind::DrPointwise: return "dr_pointwise";
    case LossKind::DrExponential: return "dr_exponential";
  }
  return "unknown";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "nominal") return LossKind::Nominal;
  if (name == "dr_uniform") return LossKind::DrUniform;
  if (name == "dr_pointwise") return LossKind::DrPointwise;
  if (name == "dr_exponential") return LossKind::DrExponential;
  throw ConfigError("unknown loss kind '" + name + "'");
}

void TrainConfig::validate() const {
  if (M < 1) throw ConfigError("train.M must be >= 1");
  if (N < 1) throw ConfigError("train.N must be >= 1");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (gamma < 0.0) throw ConfigError("train.gamma must be >= 0");
  if (delta < 0.0) throw ConfigError("train.delta must be >= 0");
  if (!(alpha_hat > 0.0)) throw ConfigError("train.alpha_hat must be > 0");
  if (r < 0.0) throw ConfigError("ambiguity.r must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("ambiguity.epsilon must lie in (0, 1)");
  if (decay_rate < 0.0) throw ConfigError("train.decay_rate must be >= 0");
  if (batch_size < 0) throw ConfigError("train.batch_size must be >= 0");
  if (resample_every < 0) throw ConfigError("train.resample_every must be >= 0");
  if (loss_tol < 0.0) throw ConfigError("train.loss_tol must be >= 0");
  if (loss_kind == LossKind::DrUniform && epsilon > 1.0 / N + 1e-12) {
    throw ConfigError("dr_uniform needs epsilon <= 1/N; use dr_pointwise instead");
  }
  for (int w : shape.certificate_hidden) {
    if (w < 1) throw ConfigError("certificate widths must be >= 1");
  }
  for (int w : shape.controller_hidden) {
    if (w < 1) throw ConfigError("controller widths must be >= 1");
  }
  if (shape.certificate_output < 1) throw ConfigError("certificate output width must be >= 1");
}

LossResult nominal_loss(const LyapunovPair& pair, const UncertainSystem& sys, const Mat& states,
                        const Vec& xi) {
  check_states(pair, states);
  const Vec fixed = xi.size() == 0 ? Vec(Vec::Zero(sys.uncertainty_dim())) : xi;
  require_dim(fixed.size(), sys.uncertainty_dim(), "nominal_loss xi");
  const PairBatch batch = evaluate_pair(pair, states, pair.training_saturation());
  const auto terms = sample_terms(sys, batch, {fixed});
  const Eigen::Index b = states.cols();
  const double inv_m = 1.0 / static_cast<double>(b);

  LossResult out;
  out.margins.resize(b);
  Vec cf = Vec::Zero(b);
  Mat xt = Mat::Zero(sys.uncertainty_dim(), b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const double margin = terms[static_cast<std::size_t>(i)].vdot[0] +
                          pair.gamma * states.col(i).norm();
    out.margins[i] = margin;
    if (margin <= 0.0) continue;
    out.value += margin * inv_m;
    cf[i] = inv_m;
    xt.col(i) = inv_m * fixed;
  }
  out.grad = gradient_from_coefficients(pair, sys, batch, terms, cf, xt, Vec::Zero(b));
  return out;
}

LossResult dr_uniform_loss(const LyapunovPair& pair, const UncertainSystem& sys,
                           const AmbiguitySpec& spec, const Mat& states) {
  check_states(pair, states);
  spec.validate();
  const std::size_t n_xi = spec.size();
  if (spec.epsilon > 1.0 / static_cast<double>(n_xi) + 1e-12) {
    throw ConfigError("dr_uniform needs epsilon <= 1/N; use dr_pointwise instead");
  }
  const PairBatch batch = evaluate_pair(pair, states, pair.training_saturation());
  const auto terms = sample_terms(sys, batch, spec.samples.samples);
  const Eigen::Index b = states.cols();
  const double inv_m = 1.0 / static_cast<double>(b);
  const double scale = spec.radius / spec.epsilon;

  LossResult out;
  out.margins.resize(b);
  Eigen::Index worst_state = 0;
  double max_lip = -1.0;
  Vec column_means = Vec::Zero(static_cast<Eigen::Index>(n_xi));
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& t = terms[static_cast<std::size_t>(i)];
    const double gx = pair.gamma * states.col(i).norm();
    if (t.lip > max_lip) {
      max_lip = t.lip;
      worst_state = i;
    }
    column_means += inv_m * (t.vdot.array() + gx).matrix();
    out.margins[i] = scale * t.lip + t.vdot.maxCoeff() + gx;
  }
  Eigen::Index worst_xi = 0;
  const double max_mean = column_means.maxCoeff(&worst_xi);
  const double arg = scale * max_lip + max_mean;

  Vec cf = Vec::Zero(b);
  Mat xt = Mat::Zero(sys.uncertainty_dim(), b);
  if (arg > 0.0) {
    out.value = arg;
    const Vec& xi = spec.samples.samples[static_cast<std::size_t>(worst_xi)];
    for (Eigen::Index i = 0; i < b; ++i) {
      cf[i] = inv_m;
      xt.col(i) = inv_m * xi;
    }
    xt.col(worst_state) += scale * unit_or_zero(terms[static_cast<std::size_t>(worst_state)].wg);
  }
  out.grad = gradient_from_coefficients(pair, sys, batch, terms, cf, xt, Vec::Zero(b));
  return out;
}

LossResult dr_pointwise_loss(const LyapunovPair& pair, const UncertainSystem& sys,
                             const AmbiguitySpec& spec, const Mat& states) {
  return pointwise_loss(pair, sys, spec, states, 0.0);
}

LossResult dr_exponential_loss(const LyapunovPair& pair, const UncertainSystem& sys,
                               const AmbiguitySpec& spec, const Mat& states, double alpha) {
  if (alpha < 0.0) throw ContractError("dr_exponential_loss: alpha must be >= 0");
  return pointwise_loss(pair, sys, spec, states, alpha);
}

LossResult evaluate_loss(LossKind kind, const LyapunovPair& pair, const UncertainSystem& sys,
                         const AmbiguitySpec& spec, const Mat& states, double decay_rate) {
  switch (kind) {
    case LossKind::Nominal: return nominal_loss(pair, sys, states);
    case LossKind::DrUniform: return dr_uniform_loss(pair, sys, spec, states);
    case LossKind::DrPointwise: return dr_pointwise_loss(pair, sys, spec, states);
    case LossKind::DrExponential: return dr_exponential_loss(pair, sys, spec, states, decay_rate);
  }
  throw ContractError("evaluate_loss: unknown loss kind");
}

TrainResult train(const TrainConfig& config, const UncertainSystem& sys,
                  const AmbiguitySpec& spec, const LyapunovPair* init) {
  config.validate();
  if (config.loss_kind != LossKind::Nominal) {
    spec.validate();
    spec.samples.validate(sys.uncertainty_dim());
  }

  TrainResult result;
  result.states = stack_columns(sample_domain(sys, config.M, config.delta, config.seed));

  LyapunovPair pair;
  if (init != nullptr) {
    pair = *init;
  } else if (config.warm_start) {
    pair = load_pair(*config.warm_start);
  } else {
    pair = make_pair(sys, config.shape, config.seed + 1000, config.alpha_hat);
  }
  if (pair.state_dim() != sys.state_dim() || pair.control_dim() != sys.control_dim()) {
    throw ConfigError("initial pair does not match the system dimensions");
  }
  pair.alpha_hat = config.alpha_hat;
  pair.gamma = config.gamma;
  pair.delta = config.delta;
  pair.smooth_clamp = config.smooth_clamp;
  pair.input_bounds = sys.input_bounds();

  const Eigen::Index n_cert = pair.certificate.num_params();
  Vec params = pair_params(pair);
  Vec best_params = params;
  double best = std::numeric_limits<double>::infinity();
  AdamState adam(params.size());

  const Eigen::Index m = result.states.cols();
  const bool minibatch = config.batch_size > 0 && config.batch_size < m;
  Rng shuffle_rng(config.seed + 2000);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  auto masked = [&](Vec g) {
    if (config.freeze_certificate) g.head(n_cert).setZero();
    if (config.freeze_controller) g.tail(g.size() - n_cert).setZero();
    return g;
  };

  const auto start = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    if (config.resample_every > 0 && epoch > 0 && epoch % config.resample_every == 0) {
      const auto draw = static_cast<std::uint64_t>(epoch / config.resample_every);
      result.states = stack_columns(
          sample_domain(sys, config.M, config.delta, config.seed + 0x9e3779b97f4a7c15ull * draw));
    }
    const LossResult full =
        evaluate_loss(config.loss_kind, pair, sys, spec, result.states, config.decay_rate);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back({epoch, full.value, ms});
    if (!std::isfinite(full.value)) {
      throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (full.value < best) {
      best = full.value;
      best_params = params;
    }
    if (full.value <= config.loss_tol) {
      result.converged_epoch = epoch;
      break;
    }
    if (epoch == config.epochs) break;

    if (!minibatch) {
      adam_step(params, masked(full.grad), adam, config.learning_rate);
      set_pair_params(pair, params);
      continue;
    }
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);
    }
    for (Eigen::Index begin = 0; begin < m; begin += config.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(config.batch_size, m - begin);
      Mat chunk(result.states.rows(), len);
      for (Eigen::Index c = 0; c < len; ++c) {
        chunk.col(c) = result.states.col(order[static_cast<std::size_t>(begin + c)]);
      }
      const LossResult part =
          evaluate_loss(config.loss_kind, pair, sys, spec, chunk, config.decay_rate);
      adam_step(params, masked(part.grad), adam, config.learning_rate);
      set_pair_params(pair, params);
    }
  }

  result.best_loss = best;
  if (!result.converged_epoch) {
    result.warning = true;
    set_pair_params(pair, best_params);
  }
  result.pair = pair;
  return result;
}

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log) {
  std::ostringstream out;
  out << "epoch,loss,wall_ms\n";
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.3f\n", e.epoch, e.loss, e.wall_ms);
    out << buf;
  }
  detail::write_text_file(path, out.str());
}

std::vector<TrainLogEntry> read_train_log(const std::filesystem::path& path) {
  std::istringstream in(detail::read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "epoch,loss,wall_ms") {
    throw ConfigError(path.string() + ": not a training log");
  }
  std::vector<TrainLogEntry> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TrainLogEntry e;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &e.epoch, &e.loss, &e.wall_ms) != 3) {
      throw ConfigError(path.string() + ": malformed row '" + line + "'");
    }
    log.push_back(e);
  }
  return log;
}

}  // namespace drlyap
