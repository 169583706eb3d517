#include <doctest.h>

#include <drlyap/simulate.hpp>

#include "../support/fd.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace drlyap;
using drlyap::testing::random_vec;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

double decay_error(double dt) {
  Vec x = v1(1.0);
  const long steps = std::lround(1.0 / dt);
  for (long s = 0; s < steps; ++s) x = rk4_step([](const Vec& z) { return Vec(-z); }, x, dt);
  return std::abs(x[0] - std::exp(-1.0));
}

LyapunovPair zero_pair(const UncertainSystem& sys) {
  LyapunovPair pair = make_pair(sys, PairShape{{4}, 1, {4}}, 0, 0.5);
  pair.certificate = DenseNet({sys.state_dim(), 4, 1});
  pair.controller = DenseNet({sys.state_dim(), 4, sys.control_dim()});
  return pair;
}

}  // namespace

TEST_CASE("rk4 step examples") {
  CHECK(rk4_step([](const Vec& z) { return Vec(Vec::Zero(z.size())); }, v1(3.0), 0.5)[0] == 3.0);
  // Four stages by hand for xdot = -x, x = 1, dt = 0.1.
  CHECK(rk4_step([](const Vec& z) { return Vec(-z); }, v1(1.0), 0.1)[0] ==
        doctest::Approx(0.9048375).epsilon(1e-15));
  CHECK(rk4_step([](const Vec&) { return v1(2.5); }, v1(1.0), 0.3)[0] == 1.0 + 2.5 * 0.3);
  CHECK_THROWS_AS(rk4_step([](const Vec&) { return v1(NAN); }, v1(1.0), 0.1), NumericError);
  CHECK_THROWS_AS(rk4_step([](const Vec& z) { return Vec(-z); }, v1(1.0), 0.0), ContractError);
}

TEST_CASE("rk4 is fourth order") {
  for (double dt : {0.1, 0.05, 0.025}) {
    const double ratio = decay_error(dt) / decay_error(dt / 2);
    CHECK(ratio >= 12.0);
    CHECK(ratio <= 20.0);
  }
}

TEST_CASE("rollout of the linear system follows the exponential") {
  const UncertainSystem lin = stable_linear(1, 2.0);
  const LyapunovPair pair = zero_pair(lin);
  RolloutOptions o;
  o.dt = 0.01;
  o.horizon = 1.0;
  o.convergence_tol = 0.5;
  const Trajectory t = rollout(pair, lin, Vec::Zero(1), v1(1.0), o);
  REQUIRE(t.states.size() == 101);
  CHECK(t.controls.size() == 100);
  CHECK(std::abs(t.states.back()[0] - std::exp(-1.0)) < 1e-6);
  CHECK(t.times.back() == doctest::Approx(1.0));
  CHECK(t.converged);
  CHECK(t.V_values.front() == doctest::Approx(0.5));
  CHECK(t.V_dot_values.front() == doctest::Approx(-1.0));
}

TEST_CASE("equilibrium start stays put for any xi") {
  const UncertainSystem sys = pendulum();
  const LyapunovPair pair = make_pair(sys, PairShape{{8}, 1, {8}}, 3);
  RolloutOptions o;
  o.horizon = 2.0;
  const Trajectory t = rollout(pair, sys, Vec::Constant(2, 0.1), Vec::Zero(2), o);
  CHECK(t.states.back().norm() < 1e-12);
  CHECK(t.converged);
}

TEST_CASE("blow-up flags divergence and stops early") {
  UncertainSystem::Definition def;
  def.name = "growth";
  def.state_dim = 1;
  def.control_dim = 1;
  def.uncertainty_dim = 1;
  def.f = [](const Vec& x, const Vec&) -> Vec { return 5.0 * x; };
  def.W = [](const Vec&, const Vec&) -> Mat { return Mat::Zero(1, 1); };
  def.domain = {v1(-1.0), v1(1.0)};
  def.input_bounds = {v1(-1.0), v1(1.0)};
  def.equilibrium = Vec::Zero(1);
  def.periodic = {false};
  const UncertainSystem sys(def);
  RolloutOptions o;
  o.dt = 0.1;
  o.horizon = 100.0;
  const Trajectory t = rollout(zero_pair(sys), sys, Vec::Zero(1), v1(1.0), o);
  CHECK(t.diverged);
  CHECK_FALSE(t.converged);
  CHECK(t.states.size() < 1001);
  CHECK(std::isinf(t.final_distance));
}

TEST_CASE("exact and first-order pendulum models differ under large xi") {
  const UncertainSystem sys = pendulum();
  LyapunovPair pair = zero_pair(sys);
  RolloutOptions o;
  o.horizon = 1.0;
  Vec x0(2);
  x0 << 0.5, 0.0;
  Vec xi(2);
  xi << 0.3, 0.2;
  o.model = ModelKind::Exact;
  const Trajectory exact = rollout(pair, sys, xi, x0, o);
  o.model = ModelKind::Taylor;
  const Trajectory taylor = rollout(pair, sys, xi, x0, o);
  CHECK((exact.states.back() - taylor.states.back()).norm() > 1e-3);
  CHECK(model_kind_from_string(to_string(ModelKind::Exact)) == ModelKind::Exact);
  CHECK(model_kind_from_string("taylor") == ModelKind::Taylor);
  CHECK_THROWS_AS(model_kind_from_string("euler"), ConfigError);
}

TEST_CASE("pendulum convergence is measured modulo full turns") {
  const UncertainSystem sys = pendulum();
  const LyapunovPair pair = zero_pair(sys);
  RolloutOptions o;
  o.horizon = 0.0;
  Vec x0(2);
  x0 << 2 * std::numbers::pi - 0.05, 0.0;
  const Trajectory t = rollout(pair, sys, Vec::Zero(2), x0, o);
  CHECK(t.converged);
  CHECK(t.final_distance == doctest::Approx(0.05));
}

TEST_CASE("trajectory csv round trip is exact") {
  const UncertainSystem sys = pendulum();
  const LyapunovPair pair = make_pair(sys, PairShape{{8}, 1, {8}}, 4);
  RolloutOptions o;
  o.horizon = 0.3;
  Vec x0(2);
  x0 << 1.0, -0.7;
  const Trajectory t = rollout(pair, sys, Vec::Constant(2, 0.02), x0, o);
  const auto path = std::filesystem::temp_directory_path() / "drlyap_traj_rt.csv";
  write_trajectory_csv(path, t);
  const Trajectory back = read_trajectory_csv(path, 2, 1);
  REQUIRE(back.states.size() == t.states.size());
  REQUIRE(back.controls.size() == t.controls.size());
  for (std::size_t i = 0; i < t.states.size(); ++i) {
    CHECK(back.times[i] == t.times[i]);
    CHECK(back.states[i] == t.states[i]);
    CHECK(back.V_values[i] == t.V_values[i]);
    CHECK(back.V_dot_values[i] == t.V_dot_values[i]);
  }
  for (std::size_t i = 0; i < t.controls.size(); ++i) CHECK(back.controls[i] == t.controls[i]);
  std::filesystem::remove(path);
}

TEST_CASE("batch experiment basics") {
  const UncertainSystem sys = pendulum();
  const LyapunovPair pair = make_pair(sys, PairShape{{8}, 1, {8}}, 5);
  RolloutOptions o;
  o.horizon = 0.5;
  Box region{Vec::Zero(2), Vec::Constant(2, 1.0)};
  const ExperimentSummary same = batch_experiment(pair, pair, sys, Vec::Zero(2), 4, region, 9, o);
  CHECK(same.initial_states.size() == 4);
  CHECK(same.baseline.converged == same.dr.converged);
  CHECK(same.baseline.final_distances == same.dr.final_distances);

  const ExperimentSummary none = batch_experiment(pair, pair, sys, Vec::Zero(2), 0, region, 9, o);
  CHECK(none.initial_states.empty());
  CHECK(none.dr.trajectories.empty());
  CHECK(none.dr.mean_final_distance() == 0.0);

  const auto dir = std::filesystem::temp_directory_path() / "drlyap_batch";
  std::filesystem::remove_all(dir);
  const auto files = write_experiment(dir, same);
  CHECK(files.size() == 9);
  for (const auto& f : files) CHECK(std::filesystem::exists(f));
  std::filesystem::remove_all(dir);
}
