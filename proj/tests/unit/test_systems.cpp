#include <doctest.h>

#include <drlyap/systems.hpp>

#include "../support/fd.hpp"

#include <cmath>
#include <numbers>

using namespace drlyap;
using drlyap::testing::random_vec;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
Vec v1(double a) { return Vec::Constant(1, a); }

}  // namespace

TEST_CASE("origin is an equilibrium of every built-in for any xi") {
  Rng rng(4);
  for (const char* name : {"pendulum", "mountain_car", "stable_linear"}) {
    const UncertainSystem sys = system_by_name(name);
    const Vec x0 = Vec::Zero(sys.state_dim());
    const Vec u0 = Vec::Zero(sys.control_dim());
    CHECK(sys.f(x0, u0).isZero(0.0));
    CHECK(sys.W(x0, u0).isZero(0.0));
    for (int k = 0; k < 5; ++k) {
      CHECK(sys.eval(x0, u0, random_vec(rng, sys.uncertainty_dim())).isZero(0.0));
    }
  }
}

TEST_CASE("pendulum nominal dynamics") {
  const UncertainSystem sys = pendulum();
  const Vec d = sys.eval(v2(std::numbers::pi / 2, 1.0), v1(0.0), Vec::Zero(2));
  CHECK(d[0] == doctest::Approx(1.0));
  CHECK(d[1] == doctest::Approx(9.68).epsilon(1e-12));
}

TEST_CASE("pendulum perturbation columns") {
  const UncertainSystem sys = pendulum();
  const Mat w0 = sys.W(v2(0.3, 0.0), v1(0.0));
  CHECK(w0.col(0).isZero(0.0));
  const Mat w = sys.W(v2(0.3, 2.0), v1(3.0));
  CHECK(w(0, 0) == 0.0);
  CHECK(w(1, 0) == doctest::Approx(-2.74));
  CHECK(w(0, 1) == 0.0);
  CHECK(w(1, 1) == doctest::Approx(-2.0));
}

TEST_CASE("mountain car dynamics in original coordinates") {
  const UncertainSystem sys = mountain_car();
  SUBCASE("valley floor with full throttle") {
    const Vec d = sys.eval(sys.to_shifted(v2(0.0, 0.0)), v1(1.0), Vec::Zero(1));
    CHECK(d[0] == doctest::Approx(0.0));
    CHECK(d[1] == doctest::Approx(-0.001).epsilon(1e-12));
  }
  SUBCASE("hilltop is an equilibrium") {
    const Vec d = sys.eval(sys.to_shifted(v2(std::numbers::pi / 6, 0.0)), v1(0.0), Vec::Zero(1));
    CHECK(d.norm() < 1e-15);
  }
  SUBCASE("perturbation column") {
    const Mat w = sys.W(Vec::Zero(2), v1(2.0));
    CHECK(w(0, 0) == 0.0);
    CHECK(w(1, 0) == 2.0);
  }
  SUBCASE("xi multiplies u") {
    const Vec d = sys.eval(sys.to_shifted(v2(0.0, 0.0)), v1(0.0), v1(-0.0003));
    CHECK(d[0] == doctest::Approx(0.0));
    CHECK(d[1] == doctest::Approx(-0.0025).epsilon(1e-12));
  }
}

TEST_CASE("zero xi reproduces the nominal field") {
  Rng rng(8);
  for (const char* name : {"pendulum", "mountain_car"}) {
    const UncertainSystem sys = system_by_name(name);
    for (int k = 0; k < 50; ++k) {
      const Vec x = random_vec(rng, 2, -3, 3);
      const Vec u = random_vec(rng, 1, -2, 2);
      CHECK(sys.eval(x, u, Vec::Zero(sys.uncertainty_dim())) == sys.f(x, u));
    }
  }
}

TEST_CASE("pendulum first-order model tracks the exact model for small xi") {
  const UncertainSystem sys = pendulum();
  Rng rng(9);
  double worst = 0.0;
  for (int k = 0; k < 2000; ++k) {
    Vec x(2);
    x << rng.uniform(0.0, 2 * std::numbers::pi), rng.uniform(-8.0, 8.0);
    const Vec u = random_vec(rng, 1, -15, 15);
    Vec xi = random_vec(rng, 2);
    xi *= 0.01 * rng.uniform() / xi.norm();
    worst = std::max(worst, std::abs(sys.eval(x, u, xi)[1] - sys.eval_exact(x, u, xi)[1]));
  }
  CHECK(worst < 0.01);
}

TEST_CASE("analytic control Jacobians match central differences") {
  Rng rng(10);
  for (const char* name : {"pendulum", "mountain_car"}) {
    const UncertainSystem sys = system_by_name(name);
    for (int k = 0; k < 20; ++k) {
      const Vec x = random_vec(rng, 2, -2, 2);
      const Vec u = random_vec(rng, 1, -2, 2);
      const Vec w = random_vec(rng, sys.uncertainty_dim());
      const double h = 1e-6;
      const Vec fd_f = (sys.f(x, u + v1(h)) - sys.f(x, u - v1(h))) / (2 * h);
      const Vec fd_w = (sys.W(x, u + v1(h)) * w - sys.W(x, u - v1(h)) * w) / (2 * h);
      CHECK((sys.df_du(x, u).col(0) - fd_f).norm() < 1e-7);
      CHECK((sys.dWw_du(x, u, w).col(0) - fd_w).norm() < 1e-7);
    }
  }
}

TEST_CASE("sample_domain respects the box, the delta-ball and the seed") {
  const UncertainSystem sys = pendulum();
  const auto all = sample_domain(sys, 500, 0.0, 3);
  CHECK(all.size() == 500);
  for (const auto& x : all) CHECK(sys.domain().contains(x));

  const auto far = sample_domain(stable_linear(), 400, 0.5, 3);
  for (const auto& x : far) CHECK(x.norm() > 0.5);

  const auto again = sample_domain(sys, 500, 0.0, 3);
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == again[i]);
  CHECK(sample_domain(sys, 500, 0.0, 4)[0] != all[0]);

  CHECK_THROWS_AS(sample_domain(stable_linear(2, 1.0), 10, 1.41, 0), ConfigError);
}

TEST_CASE("sample-mean system shifts the physical parameters") {
  const UncertainSystem avg = sample_mean_system("pendulum", v2(0.02, 0.0));
  const UncertainSystem sys = pendulum();
  const Vec x = v2(1.0, -2.0);
  const Vec u = v1(3.0);
  CHECK((avg.f(x, u) - sys.eval_exact(x, u, v2(0.02, 0.0))).norm() < 1e-14);
  CHECK_THROWS_AS(sample_mean_system("nope", Vec::Zero(1)), ConfigError);
}

TEST_CASE("uncertainty sample set validation") {
  UncertaintySampleSet set;
  CHECK_THROWS_AS(set.validate(2), ConfigError);
  set.samples = {v2(0.1, 0.0), v2(-0.1, 0.2)};
  CHECK_NOTHROW(set.validate(2));
  CHECK_THROWS_AS(set.validate(1), ConfigError);
  CHECK(set.mean()[1] == doctest::Approx(0.1));
  CHECK(set.max_norm() == doctest::Approx(std::sqrt(0.05)));
  set.support_bound = 0.15;
  CHECK_THROWS_AS(set.validate(2), ConfigError);
}

TEST_CASE("wrapped distance identifies full turns") {
  const UncertainSystem sys = pendulum();
  CHECK(sys.wrapped_distance(v2(2 * std::numbers::pi, 0.0)) < 1e-12);
  CHECK(sys.wrapped_distance(v2(2 * std::numbers::pi - 0.1, 0.0)) == doctest::Approx(0.1));
  CHECK(mountain_car().wrapped_distance(v2(2 * std::numbers::pi, 0.0)) ==
        doctest::Approx(2 * std::numbers::pi));
}

TEST_CASE("wrap_into_domain moves angles by full turns only") {
  const UncertainSystem sys = pendulum();
  const Vec w = sys.wrap_into_domain(v2(-std::numbers::pi / 2, 5.5));
  CHECK(w[0] == doctest::Approx(1.5 * std::numbers::pi));
  CHECK(w[1] == 5.5);
  CHECK(sys.wrap_into_domain(v2(1.0, -3.0)) == v2(1.0, -3.0));
  CHECK(sys.wrap_into_domain(v2(7.0, 0.0))[0] == doctest::Approx(7.0 - 2 * std::numbers::pi));
  const UncertainSystem car = mountain_car();
  CHECK(car.wrap_into_domain(v2(-9.0, 0.2)) == v2(-9.0, 0.2));
}

TEST_CASE("box helpers") {
  Box b{v2(-1.0, -2.0), v2(3.0, 0.5)};
  CHECK(b.origin_inradius() == doctest::Approx(0.5));
  CHECK(b.contains(v2(0.0, 0.0)));
  CHECK_FALSE(b.contains(v2(0.0, 0.6)));
  CHECK(b.clamp(v2(5.0, -5.0)) == v2(3.0, -2.0));
}
