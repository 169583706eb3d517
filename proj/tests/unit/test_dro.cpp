#include <doctest.h>

#include <drlyap/dro.hpp>

#include "../support/cvar_oracle.hpp"
#include "../support/fd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace drlyap;
using drlyap::testing::brute_cvar;
using drlyap::testing::random_vec;

namespace {

std::vector<double> random_list(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-5.0, 5.0);
  // Occasional ties exercise the stable ordering.
  if (n > 2 && rng.uniform() < 0.2) v[1] = v[0];
  return v;
}

AmbiguitySpec spec_with(double r, double eps, std::size_t n = 1) {
  AmbiguitySpec s;
  s.radius = r;
  s.epsilon = eps;
  s.samples.samples.assign(n, Vec::Zero(1));
  return s;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("var examples") {
  CHECK(var({1, 2, 3, 4, 5}, 0.4) == 3.0);
  CHECK(var({2.5, 2.5, 2.5}, 0.7) == 2.5);
  CHECK(var({1, 9, 3}, 0.2) == 9.0);
  CHECK_THROWS_AS(var({}, 0.1), ContractError);
}

TEST_CASE("cvar examples") {
  // Top two atoms of five at eps 0.4 carry all the tail mass: mean of {4, 5}.
  CHECK(cvar({1, 2, 3, 4, 5}, 0.4) == doctest::Approx(4.5).epsilon(1e-15));
  CHECK(brute_cvar({1, 2, 3, 4, 5}, 0.4) == doctest::Approx(4.5).epsilon(1e-15));
  CHECK(cvar({-1.5, -1.5, -1.5, -1.5}, 0.3) == doctest::Approx(-1.5));
  CHECK(cvar({1, 7, -2, 3}, 0.25) == 7.0);
  CHECK(cvar({1, 7, -2, 3}, 0.1) == 7.0);
  CHECK_THROWS_AS(cvar({}, 0.1), ContractError);
}

TEST_CASE("select_index_j examples and defining inequalities") {
  CHECK(select_index_j(10, 0.25) == 3);
  CHECK(select_index_j(10, 0.05) == 1);
  CHECK(select_index_j(10, 0.1) == 1);
  CHECK(select_index_j(1, 0.7) == 1);
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + rng.next_u64() % 40;
    const double eps = rng.uniform(1e-3, 0.999);
    const std::size_t j = select_index_j(n, eps);
    REQUIRE(j >= 1);
    REQUIRE(j <= n);
    CHECK(static_cast<double>(j - 1) / n - eps < 0.0);
    CHECK(static_cast<double>(j) / n - eps >= -1e-15);
  }
}

TEST_CASE("closed-form cvar matches the brute-force oracle") {
  Rng rng(2);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto h = random_list(rng, 1 + rng.next_u64() % 12);
    const double eps = rng.uniform(0.01, 0.99);
    worst = std::max(worst, std::abs(cvar(h, eps) - brute_cvar(h, eps)));
    CHECK(cvar(h, eps) >= var(h, eps) - 1e-12);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("cvar is invariant to input order and ties") {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    auto h = random_list(rng, 7);
    const double eps = rng.uniform(0.05, 0.95);
    const double a = cvar(h, eps);
    std::reverse(h.begin(), h.end());
    CHECK(cvar(h, eps) == doctest::Approx(a).epsilon(1e-14));
  }
  const RiskEvalResult d = cvar_detail({2, 5, 5, 1}, 0.3);
  CHECK(d.sorted_indices == std::vector<std::size_t>{1, 2, 0, 3});
}

TEST_CASE("cvar weights reproduce the closed form") {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const auto h = random_list(rng, 1 + rng.next_u64() % 9);
    const double eps = rng.uniform(0.01, 0.99);
    const auto w = cvar_weights(h, eps);
    double s = 0.0, total = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      CHECK(w[i] >= 0.0);
      s += w[i] * h[i];
      total += w[i];
    }
    CHECK(total == doctest::Approx(1.0));
    CHECK(s == doctest::Approx(cvar(h, eps)).epsilon(1e-12));
  }
}

TEST_CASE("wasserstein radius rule") {
  CHECK(wasserstein_radius(10, std::exp(-1.0), 1.0, 1.0, 2, 1.0) ==
        doctest::Approx(0.31622776601683794).epsilon(1e-12));
  // Larger N shrinks the radius; k = 3 switches the exponent to 1/3.
  CHECK(wasserstein_radius(20, std::exp(-1.0), 1.0, 1.0, 2, 1.0) <
        wasserstein_radius(10, std::exp(-1.0), 1.0, 1.0, 2, 1.0));
  CHECK(wasserstein_radius(10, std::exp(-1.0), 1.0, 1.0, 3, 1.0) ==
        doctest::Approx(std::pow(0.1, 1.0 / 3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(wasserstein_radius(10, 0.1, -1.0, 1.0, 2, 1.0), ConfigError);
  CHECK_THROWS_AS(wasserstein_radius(10, 0.1, 1.0, 0.0, 2, 1.0), ConfigError);
  CHECK_THROWS_AS(wasserstein_radius(10, 0.1, 1.0, 1.0, 2, 0.0), ConfigError);
}

TEST_CASE("dr_margin_general examples") {
  CHECK(dr_margin_general({5, 4, 3, 2, 1}, spec_with(0.0, 0.4, 5), 3.0) ==
        doctest::Approx(4.5));
  CHECK(dr_margin_general({-10, -10, -10, -10, -10}, spec_with(0.01, 0.1, 5), 1.0) ==
        doctest::Approx(-9.9).epsilon(1e-14));
  CHECK(dr_margin_general({2, 1.5, -3}, spec_with(0.02, 0.25, 3), 2.0) ==
        doctest::Approx(0.02 / 0.25 * 2.0 + 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(dr_margin_general({1, 2}, spec_with(0.0, 0.3, 2), 0.0), ContractError);
  CHECK_THROWS_AS(dr_margin_general({2, 1}, spec_with(0.0, 0.3, 2), -1.0), ContractError);
}

TEST_CASE("dr_margin_general properties") {
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    auto h = random_list(rng, 1 + rng.next_u64() % 10);
    std::sort(h.begin(), h.end(), std::greater<>());
    const double eps = rng.uniform(0.01, 0.99);
    const double r = rng.uniform(0.0, 0.1);
    const double L = rng.uniform(0.0, 5.0);
    const AmbiguitySpec s = spec_with(r, eps, h.size());
    const double m = dr_margin_general(h, s, L);
    // r = 0 is exactly the cvar; otherwise it adds (r/eps) L.
    CHECK(dr_margin_general(h, spec_with(0.0, eps, h.size()), L) == cvar(h, eps));
    CHECK(std::abs(m - (r / eps * L + brute_cvar(h, eps))) <= 1e-9);
    CHECK(std::abs(m - dr_margin_dual(h, s, L)) <= 1e-9);
    if (eps <= 1.0 / static_cast<double>(h.size())) CHECK(m == r / eps * L + h.front());
    // Monotone in r and in each entry.
    CHECK(dr_margin_general(h, spec_with(r + 0.01, eps, h.size()), L) >= m);
    auto bumped = h;
    bumped.front() += 0.5;
    CHECK(dr_margin_general(bumped, s, L) >= m);
    bumped = h;
    bumped.back() += 1e-3;
    std::sort(bumped.begin(), bumped.end(), std::greater<>());
    CHECK(dr_margin_general(bumped, s, L) >= m - 1e-14);
  }
}

TEST_CASE("ambiguity set validation") {
  CHECK_NOTHROW(spec_with(0.01, 0.1).validate());
  CHECK_THROWS_AS(spec_with(-0.01, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(spec_with(0.01, 1.0).validate(), ConfigError);
  CHECK_THROWS_AS(spec_with(0.01, 0.1, 0).validate(), ConfigError);
}

TEST_CASE("pointwise and exponential margins") {
  const UncertainSystem lin = stable_linear();
  LyapunovPair q = make_pair(lin, PairShape{{4}, 1, {4}}, 0, 0.5);
  q.certificate = DenseNet({2, 4, 1});
  q.controller = DenseNet({2, 4, 1});
  const Vec x = v2(0.3, -0.4);
  AmbiguitySpec s = spec_with(0.05, 0.1, 1);
  CHECK(dr_pointwise_margin(q, lin, s, Vec::Zero(2)) == 0.0);
  // W = 0 and one sample: V_dot + gamma |x| = -2 * 0.5 * 0.25 + 0.1 * 0.5.
  CHECK(dr_pointwise_margin(q, lin, s, x) == doctest::Approx(-0.2));
  CHECK(dr_pointwise_margin(q, lin, s, x) == doctest::Approx(nominal_margin(q, lin, x)));

  const UncertainSystem pend = pendulum();
  LyapunovPair r = make_pair(pend, PairShape{{6}, 1, {6}}, 42);
  AmbiguitySpec same;
  same.radius = 0.0;
  same.epsilon = 0.2;
  same.samples.samples.assign(4, v2(0.03, -0.01));
  const Vec y = v2(1.0, 2.0);
  CHECK(dr_pointwise_margin(r, pend, same, y) ==
        doctest::Approx(V_dot(r, pend, y, v2(0.03, -0.01)) + r.gamma * y.norm()));
  CHECK(dr_exponential_margin(r, pend, same, y, 0.0) == dr_pointwise_margin(r, pend, same, y));
  CHECK(dr_exponential_margin(r, pend, same, y, 1.0) ==
        doctest::Approx(dr_pointwise_margin(r, pend, same, y) + V(r, y)));
  CHECK(dr_exponential_margin(r, pend, same, Vec::Zero(2), 1.0) == 0.0);

  // Independent recomputation with radius and spread-out samples.
  Rng rng(6);
  AmbiguitySpec spread;
  spread.radius = 0.01;
  spread.epsilon = 0.1;
  for (int i = 0; i < 5; ++i) spread.samples.samples.push_back(random_vec(rng, 2, -0.05, 0.08));
  std::vector<double> h;
  for (const auto& xi : spread.samples.samples) h.push_back(V_dot(r, pend, y, xi));
  const double expect = 0.01 / 0.1 * lipschitz_term(r, pend, y) +
                        *std::max_element(h.begin(), h.end()) + r.gamma * y.norm();
  CHECK(dr_pointwise_margin(r, pend, spread, y) == doctest::Approx(expect).epsilon(1e-12));
}
