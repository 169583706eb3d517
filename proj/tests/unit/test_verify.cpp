#include <doctest.h>

#include <drlyap/verify.hpp>

#include "../support/fd.hpp"

#include <cmath>

using namespace drlyap;
using drlyap::testing::random_vec;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

LyapunovPair quadratic_pair(const UncertainSystem& sys, double alpha_hat, double gamma,
                            double delta) {
  LyapunovPair pair = make_pair(sys, PairShape{{4}, 1, {4}}, 0, alpha_hat, gamma, delta);
  pair.certificate = DenseNet({sys.state_dim(), 4, 1});
  pair.controller = DenseNet({sys.state_dim(), 4, sys.control_dim()});
  return pair;
}

// xdot = -x + xi x on [-1, 1]^2: with V = 0.5 |x|^2, gamma = 0.1 and delta = 0.2
// every grid point passes exactly when xi <= 0.5.
UncertainSystem scaled_decay() {
  UncertainSystem::Definition def;
  def.name = "scaled_decay";
  def.state_dim = 2;
  def.control_dim = 1;
  def.uncertainty_dim = 1;
  def.f = [](const Vec& x, const Vec&) -> Vec { return -x; };
  def.W = [](const Vec& x, const Vec&) -> Mat { return x; };
  def.domain = {Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)};
  def.input_bounds = {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
  def.equilibrium = Vec::Zero(2);
  def.periodic = {false, false};
  return UncertainSystem(def);
}

AmbiguitySpec single_sample(const Vec& xi, double r = 0.0) {
  AmbiguitySpec s;
  s.radius = r;
  s.epsilon = 0.1;
  s.samples.samples = {xi};
  return s;
}

}  // namespace

TEST_CASE("domain grid removes the delta-ball") {
  const auto g = domain_grid(stable_linear(), 11, 0.2);
  for (const auto& x : g) CHECK(x.norm() >= 0.2 - 1e-12);
  CHECK(g.size() == 120);  // axis neighbours sit exactly on the ball and stay
  CHECK(domain_grid(stable_linear(), 11, 0.0).size() == 121);
}

TEST_CASE("grid margin of a decreasing quadratic") {
  const UncertainSystem lin = stable_linear();
  const LyapunovPair q = quadratic_pair(lin, 0.5, 0.1, 0.2);
  const AmbiguitySpec s = single_sample(Vec::Zero(1), 0.3);
  for (int res : {11, 101}) {
    const GridMarginResult g = grid_margin_check(q, lin, s, res, 0.2);
    // -2 alpha delta^2 + gamma delta at the closest grid points to the ball.
    CHECK(g.worst_nominal == doctest::Approx(-0.02).epsilon(1e-9));
    CHECK(g.worst_dr == doctest::Approx(g.worst_nominal));
    CHECK(g.nominal_pass);
    CHECK(g.dr_pass);
  }
}

TEST_CASE("grid margins dominate the pointwise recomputation") {
  const UncertainSystem sys = pendulum();
  const LyapunovPair pair = make_pair(sys, PairShape{{8}, 1, {8}}, 5);
  Rng rng(1);
  AmbiguitySpec s;
  s.radius = 0.01;
  s.epsilon = 0.1;
  for (int i = 0; i < 5; ++i) s.samples.samples.push_back(random_vec(rng, 2, -0.04, 0.08));
  const auto pts = domain_grid(sys, 15, 0.1);
  const GridMarginResult g = margin_check_points(pair, sys, s, pts);
  double worst_nom = -1e300, worst_dr = -1e300;
  for (const auto& x : pts) {
    worst_nom = std::max(worst_nom, nominal_margin(pair, sys, x));
    worst_dr = std::max(worst_dr, dr_pointwise_margin(pair, sys, s, x));
  }
  CHECK(g.worst_nominal == doctest::Approx(worst_nom).epsilon(1e-12));
  CHECK(g.worst_dr == doctest::Approx(worst_dr).epsilon(1e-12));
  CHECK(g.points == pts.size());
}

TEST_CASE("finer passing grid implies coarser passing grid") {
  const UncertainSystem sys = scaled_decay();
  const LyapunovPair q = quadratic_pair(sys, 0.5, 0.1, 0.2);
  const AmbiguitySpec s = single_sample(Vec::Constant(1, 0.3));
  const GridMarginResult fine = grid_margin_check(q, sys, s, 41, 0.2);
  const GridMarginResult coarse = grid_margin_check(q, sys, s, 21, 0.2);
  REQUIRE(fine.dr_pass);
  CHECK(coarse.dr_pass);
  CHECK(coarse.worst_dr <= fine.worst_dr + 1e-15);
}

TEST_CASE("empirical Lipschitz estimates stay below known constants") {
  const Box box{Vec::Constant(1, -3.0), Vec::Constant(1, 3.0)};
  CHECK(empirical_lipschitz([](const Vec&) { return 4.2; }, box, 500, 1) == 0.0);
  const double abs2 = empirical_lipschitz([](const Vec& x) { return 2.0 * std::abs(x[0]); }, box,
                                          5000, 2);
  CHECK(abs2 <= 2.0 + 1e-12);
  CHECK(abs2 >= 1.99);
  const Box box3{Vec::Constant(3, -1.0), Vec::Constant(3, 1.0)};
  Vec a(3);
  a << 1.0, -2.0, 0.5;
  const double lin = empirical_lipschitz([&](const Vec& x) { return a.dot(x); }, box3, 5000, 3);
  CHECK(lin <= a.norm() + 1e-12);
  const double vec_lin = empirical_lipschitz(
      [&](const Vec& x) -> Vec { return 3.0 * x; }, box3, 200, 4);
  CHECK(vec_lin == doctest::Approx(3.0));
}

TEST_CASE("covering constant examples") {
  std::vector<Vec> data{v2(1.0, 0.0)};
  CHECK(covering_constant(data, {v2(1.1, 0.0)}) == doctest::Approx(0.1));
  CHECK(covering_constant(data, data) == 0.0);
  CHECK_THROWS_AS(covering_constant({Vec::Zero(2)}, data), ContractError);

  Rng rng(5);
  std::vector<Vec> big;
  for (int i = 0; i < 60; ++i) big.push_back(random_vec(rng, 2, -1, 1));
  const auto grid = domain_grid(stable_linear(), 21, 0.1);
  double prev = -1.0;
  for (std::size_t n : {60, 40, 20, 5}) {
    const std::vector<Vec> sub(big.begin(), big.begin() + static_cast<long>(n));
    const double c = covering_constant(sub, grid);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("theoretical slack is affine in the covering constant") {
  CertificateReport r;
  r.lipschitz_vdot = 2.0;
  r.lipschitz_wgrad = 3.0;
  r.xi_bound = 0.1;
  r.covering = 0.0;
  CHECK(theoretical_slack(r, 0.1, 0.01, 0.1) == 0.1);
  r.covering = 0.01;
  const double s1 = theoretical_slack(r, 0.1, 0.01, 0.1);
  r.covering = 0.02;
  const double s2 = theoretical_slack(r, 0.1, 0.01, 0.1);
  // gamma - (r/eps) L_w c - (L_v + L_w B) c.
  CHECK(s1 == doctest::Approx(0.1 - 0.1 * 3.0 * 0.01 - 2.3 * 0.01));
  CHECK(0.1 - s2 == doctest::Approx(2.0 * (0.1 - s1)));
  r.covering.reset();
  CHECK_THROWS_AS(theoretical_slack(r, 0.1, 0.01, 0.1), ContractError);
}

TEST_CASE("wilson interval against an independent formula") {
  auto [lo, hi] = wilson_interval(7, 10);
  CHECK(lo == doctest::Approx(0.39677814746114537).epsilon(1e-12));
  CHECK(hi == doctest::Approx(0.8922087325936989).epsilon(1e-12));
  auto [lo2, hi2] = wilson_interval(1000, 1000);
  CHECK(lo2 == doctest::Approx(0.996173241514445).epsilon(1e-12));
  CHECK(hi2 == doctest::Approx(1.0));
  CHECK(wilson_interval(0, 10).first == doctest::Approx(0.0));
}

TEST_CASE("monte carlo chance on degenerate and mixed distributions") {
  const UncertainSystem sys = scaled_decay();
  const LyapunovPair q = quadratic_pair(sys, 0.5, 0.1, 0.2);
  const auto grid = domain_grid(sys, 41, 0.2);
  const auto pass = UncertaintyDistribution::point(Vec::Zero(1));
  CHECK(monte_carlo_chance(q, sys, pass, 200, grid, 1).probability == 1.0);
  const auto fail = UncertaintyDistribution::point(Vec::Constant(1, 0.9));
  CHECK(monte_carlo_chance(q, sys, fail, 200, grid, 1).probability == 0.0);

  // Uniform on [0, 5/7] passes on [0, 0.5]: mass 0.7.
  UncertaintyDistribution mix;
  mix.marginals = {{UncertaintyDistribution::Marginal::Kind::Uniform, 0.0, 5.0 / 7.0}};
  const ChanceEstimate e = monte_carlo_chance(q, sys, mix, 10000, grid, 2);
  CHECK(e.trials == 10000);
  CHECK(e.wilson_low <= 0.7);
  CHECK(e.wilson_high >= 0.7);
  const ChanceEstimate again = monte_carlo_chance(q, sys, mix, 10000, grid, 2);
  CHECK(again.passes == e.passes);
}

TEST_CASE("generic monte carlo estimate converges on a synthetic oracle") {
  auto sampler = [](Rng& rng) { return Vec::Constant(1, rng.uniform()); };
  auto pass = [](const Vec& xi) { return xi[0] < 0.7; };
  double prev_err = 1.0;
  for (int trials : {100, 10000, 1000000}) {
    const ChanceEstimate e = monte_carlo_chance(sampler, pass, trials, 3);
    CHECK(e.wilson_low <= 0.7);
    CHECK(e.wilson_high >= 0.7);
    const double half = 0.5 * (e.wilson_high - e.wilson_low);
    CHECK(half < prev_err);
    prev_err = half;
  }
  CHECK(prev_err < 1e-3);
}

TEST_CASE("uncertainty distribution sampling and json") {
  UncertaintyDistribution d;
  d.marginals = {{UncertaintyDistribution::Marginal::Kind::Uniform, -0.04, 0.08},
                 {UncertaintyDistribution::Marginal::Kind::Normal, 0.0, 0.02},
                 {UncertaintyDistribution::Marginal::Kind::Point, 0.3, 0.0}};
  const auto s = d.sample(20000, 9);
  Vec mean = Vec::Zero(3);
  double var1 = 0.0;
  for (const auto& x : s) {
    CHECK(x[0] >= -0.04);
    CHECK(x[0] < 0.08);
    CHECK(x[2] == 0.3);
    mean += x;
  }
  mean /= static_cast<double>(s.size());
  for (const auto& x : s) var1 += (x[1] - mean[1]) * (x[1] - mean[1]);
  var1 /= static_cast<double>(s.size());
  CHECK(mean[0] == doctest::Approx(0.02).epsilon(0.05));
  CHECK(std::abs(mean[1]) < 1e-3);
  CHECK(std::sqrt(var1) == doctest::Approx(0.02).epsilon(0.03));
  CHECK(d.sample(5, 9)[4] == s[4]);

  const UncertaintyDistribution back = UncertaintyDistribution::from_json(d.to_json());
  CHECK(back.to_json() == d.to_json());
  CHECK_THROWS_AS(UncertaintyDistribution::from_json(nlohmann::json::parse(R"([{"kind":"cauchy"}])")),
                  ConfigError);
}

TEST_CASE("certify a decreasing quadratic") {
  const UncertainSystem sys = scaled_decay();
  const LyapunovPair q = quadratic_pair(sys, 0.5, 0.1, 0.2);
  const AmbiguitySpec s = single_sample(Vec::Constant(1, 0.1), 0.01);
  const auto data = sample_domain(sys, 300, 0.2, 4);
  const auto dist = UncertaintyDistribution::point(Vec::Constant(1, 0.1));
  VerifyOptions o;
  o.resolution = 41;
  o.lipschitz_pairs = 2000;
  o.mc_trials = 100;
  const CertificateReport r = certify(q, sys, s, data, &dist, o);
  CHECK(r.grid.nominal_pass);
  CHECK(r.grid.dr_pass);
  REQUIRE(r.chance.has_value());
  CHECK(r.chance->probability == 1.0);
  CHECK(r.chance_pass);
  REQUIRE(r.slack.has_value());
  CHECK(*r.slack == doctest::Approx(theoretical_slack(r, 0.1, 0.01, 0.1)));
  CHECK(r.all_pass());
  const auto j = r.to_json();
  CHECK(j["pass"]["all"] == true);
}
