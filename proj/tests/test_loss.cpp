#include <doctest.h>

#include <cmath>

#include "cvi/loss.hpp"
#include "cvi/rng.hpp"

using namespace cvi;

namespace {

ParameterSet random_params(const RegionGraph& g, std::uint64_t seed) {
  ParameterSet p = ParameterSet::zeros(g);
  SeededRng rng(seed);
  Eigen::VectorXd theta = p.to_flat();
  for (int j = 0; j < p.num_params(); ++j) {
    const auto a = p.decode(j);
    theta[j] =
        p.family[a.f].positive_weights ? rng.uniform(-0.4, 0.4) : rng.uniform(-1.0, 1.0);
  }
  p.from_flat(theta);
  return p;
}

BeliefVector random_beliefs(const RegionGraph& g, std::uint64_t seed) {
  SeededRng rng(seed);
  BeliefVector b(g.total_beliefs);
  for (int r = 0; r < g.num_regions(); ++r) {
    const int off = g.belief_offsets[r];
    const int nx = g.region_configs(r);
    double sum = 0.0;
    for (int xc = 0; xc < nx; ++xc) {
      b[off + xc] = rng.uniform(0.05, 1.0);
      sum += b[off + xc];
    }
    for (int xc = 0; xc < nx; ++xc) b[off + xc] /= sum;
  }
  return b;
}

// Deliberately direct re-implementations of the two risk sums.
double oracle_log_loss(const RegionGraph& g, const BeliefVector& b, const Sample& s) {
  double total = 0.0;
  for (int i : s.mask)
    total += -std::log(b[g.belief_offsets[g.singleton_of_hidden[i]] + s.hidden[i]]);
  return total;
}

double oracle_quad_loss(const RegionGraph& g, const BeliefVector& b, const Sample& s) {
  double total = 0.0;
  for (int i : s.mask) {
    const int off = g.belief_offsets[g.singleton_of_hidden[i]];
    double sq = 0.0;
    for (int x = 0; x < g.hidden_arity; ++x) sq += b[off + x] * b[off + x];
    total += -2.0 * b[off + s.hidden[i]] + sq;
  }
  return total;
}

}  // namespace

TEST_CASE("log loss: exact beliefs give zero, uniform gives n log 2") {
  RegionGraph g = build_grid_model(2, 2, 2, 2);
  Sample s = make_full_sample({0, 1, 1, 0}, {0, 0, 0, 0});

  BeliefVector sure = BeliefVector::Constant(g.total_beliefs, 1e-300);
  for (int i = 0; i < 4; ++i)
    sure[g.belief_offsets[g.singleton_of_hidden[i]] + s.hidden[i]] = 1.0;
  CHECK(log_loss(g, sure, s) == 0.0);

  BeliefVector uniform = uniform_beliefs(g);
  CHECK(log_loss(g, uniform, s) == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-14));

  BeliefVector rnd = random_beliefs(g, 3);
  CHECK(log_loss(g, rnd, s) == doctest::Approx(oracle_log_loss(g, rnd, s)).epsilon(1e-14));
  CHECK(log_loss(g, rnd, s) >= 0.0);
}

TEST_CASE("quad loss: uniform and probability-one identities, random oracle") {
  RegionGraph g = build_grid_model(2, 2, 2, 2);
  Sample s = make_full_sample({1, 0, 0, 1}, {0, 0, 0, 0});

  CHECK(quad_loss(g, uniform_beliefs(g), s) == doctest::Approx(-0.5 * 4).epsilon(1e-14));

  BeliefVector sure = BeliefVector::Constant(g.total_beliefs, 0.0);
  for (int i = 0; i < 4; ++i)
    sure[g.belief_offsets[g.singleton_of_hidden[i]] + s.hidden[i]] = 1.0;
  CHECK(quad_loss(g, sure, s) == doctest::Approx(-1.0 * 4).epsilon(1e-14));

  BeliefVector rnd = random_beliefs(g, 9);
  CHECK(quad_loss(g, rnd, s) == doctest::Approx(oracle_quad_loss(g, rnd, s)).epsilon(1e-14));
  // normalized beliefs keep the per-variable contribution in [-1, 0]
  CHECK(quad_loss(g, rnd, s) <= 0.0);
  CHECK(quad_loss(g, rnd, s) >= -4.0);
}

TEST_CASE("masking monotonicity and partial hidden states") {
  RegionGraph g = build_grid_model(2, 2, 2, 2);
  BeliefVector b = random_beliefs(g, 11);
  Sample full = make_full_sample({0, 1, 1, 0}, {0, 0, 0, 0});
  Sample masked = full;
  masked.mask = {0, 2};
  Sample rest = full;
  rest.mask = {1, 3};
  CHECK(log_loss(g, b, full) ==
        doctest::Approx(log_loss(g, b, masked) + log_loss(g, b, rest)).epsilon(1e-14));
  CHECK(quad_loss(g, b, full) ==
        doctest::Approx(quad_loss(g, b, masked) + quad_loss(g, b, rest)).epsilon(1e-14));

  // hidden marker outside the mask is fine, inside is an error
  Sample partial = full;
  partial.hidden[3] = kHiddenState;
  partial.mask = {0, 1, 2};
  CHECK_NOTHROW(log_loss(g, b, partial));
  partial.mask = {0, 1, 2, 3};
  CHECK_THROWS_AS(log_loss(g, b, partial), std::invalid_argument);
  CHECK_THROWS_AS(quad_loss(g, b, partial), std::invalid_argument);
}

TEST_CASE("dloss_dbeliefs: plug-ins, support and finite differences") {
  RegionGraph g = build_grid_model(2, 2, 2, 2);
  Sample s = make_full_sample({0, 1, 1, 0}, {0, 0, 0, 0});

  BeliefVector half = uniform_beliefs(g);
  Eigen::VectorXd gl = dloss_dbeliefs(LossKind::log, g, half, s);
  const int off0 = g.belief_offsets[g.singleton_of_hidden[0]];
  CHECK(gl[off0 + 0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(gl[off0 + 1] == 0.0);

  // quad gradient vanishes at probability-one correct beliefs
  BeliefVector sure = BeliefVector::Constant(g.total_beliefs, 0.0);
  for (int i = 0; i < 4; ++i)
    sure[g.belief_offsets[g.singleton_of_hidden[i]] + s.hidden[i]] = 1.0;
  CHECK(dloss_dbeliefs(LossKind::quad, g, sure, s).cwiseAbs().maxCoeff() == 0.0);

  BeliefVector b = random_beliefs(g, 13);
  for (LossKind kind : {LossKind::log, LossKind::quad}) {
    Eigen::VectorXd grad = dloss_dbeliefs(kind, g, b, s);
    // support: zero outside masked singleton blocks
    for (int r = 0; r < g.num_regions(); ++r) {
      if (g.regions[r].kind == RegionKind::singleton) continue;
      for (int xc = 0; xc < g.region_configs(r); ++xc)
        CHECK(grad[g.belief_offsets[r] + xc] == 0.0);
    }
    const double h = 1e-7;
    for (int k = 0; k < g.total_beliefs; ++k) {
      BeliefVector bp = b, bm = b;
      bp[k] += h;
      bm[k] -= h;
      const double fd = (loss_value(kind, g, bp, s) - loss_value(kind, g, bm, s)) / (2 * h);
      CHECK(std::abs(fd - grad[k]) <= 1e-6 * std::max(1.0, std::abs(grad[k])));
    }
  }
}

TEST_CASE("empirical risk: linearity and exact doubling") {
  RegionGraph g = build_grid_model(1, 2, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  ParameterSet p = random_params(g, 17);
  Sample s = make_full_sample({0, 1}, {1, 0});

  RiskResult one = empirical_risk({s}, g, p, sys, LossKind::log, 1e-10, 1);
  InferenceResult res = infer(g, p, sys, s.observed);
  CHECK(one.risk == doctest::Approx(log_loss(g, res.beliefs, s)).epsilon(1e-14));

  RiskResult two = empirical_risk({s, s}, g, p, sys, LossKind::log, 1e-10, 1);
  CHECK(two.risk == doctest::Approx(2.0 * one.risk).epsilon(1e-14));
  CHECK((two.gradient - 2.0 * one.gradient).cwiseAbs().maxCoeff() <= 1e-15);

  CHECK_THROWS_AS(empirical_risk({}, g, p, sys, LossKind::log, 1e-10, 1),
                  std::invalid_argument);
}

TEST_CASE("empirical risk gradient matches finite differences of the risk") {
  RegionGraph g = build_grid_model(1, 2, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  ParameterSet p = random_params(g, 19);
  SeededRng rng(23);
  std::vector<Sample> data;
  for (int n = 0; n < 4; ++n)
    data.push_back(make_full_sample({rng.coin(), rng.coin()}, {rng.coin(), rng.coin()}));

  for (LossKind kind : {LossKind::log, LossKind::quad}) {
    RiskResult rr = empirical_risk(data, g, p, sys, kind, 1e-12, 1);
    Eigen::VectorXd theta = p.to_flat();
    ParameterSet pp = p;
    const double h = 1e-5;
    for (int j = 0; j < p.num_params(); ++j) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      pp.from_flat(tp);
      const double fp = empirical_risk(data, g, pp, sys, kind, 1e-12, 1).risk;
      pp.from_flat(tm);
      const double fm = empirical_risk(data, g, pp, sys, kind, 1e-12, 1).risk;
      const double fd = (fp - fm) / (2 * h);
      CHECK(std::abs(rr.gradient[j] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("empirical risk honors observation masks end to end") {
  RegionGraph g = build_grid_model(1, 2, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  ParameterSet p = random_params(g, 53);
  Sample s = make_full_sample({0, kHiddenState}, {1, 0});
  s.mask = {0};  // variable 1 has no known state and stays out of the loss

  RiskResult rr = empirical_risk({s}, g, p, sys, LossKind::log, 1e-12, 1);
  Eigen::VectorXd theta = p.to_flat();
  ParameterSet pp = p;
  const double h = 1e-5;
  for (int j = 0; j < p.num_params(); ++j) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    pp.from_flat(tp);
    const double fp = empirical_risk({s}, g, pp, sys, LossKind::log, 1e-12, 1).risk;
    pp.from_flat(tm);
    const double fm = empirical_risk({s}, g, pp, sys, LossKind::log, 1e-12, 1).risk;
    CHECK(std::abs(rr.gradient[j] - (fp - fm) / (2 * h)) <= 1e-4);
  }
}

TEST_CASE("parallel kernel reproduces the serial reference bit for bit") {
  RegionGraph g = build_grid_model(2, 3, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  ParameterSet p = random_params(g, 29);
  SeededRng rng(31);
  std::vector<Sample> data;
  for (int n = 0; n < 12; ++n) {
    std::vector<int> hidden(6), observed(6);
    for (int& v : hidden) v = rng.coin();
    for (int& v : observed) v = rng.coin();
    data.push_back(make_full_sample(hidden, observed));
  }
  RiskResult ref = empirical_risk_serial(data, g, p, sys, LossKind::quad, 1e-10);
  for (int workers : {1, 2, 4}) {
    RiskResult par = empirical_risk(data, g, p, sys, LossKind::quad, 1e-10, workers);
    CHECK(par.risk == ref.risk);
    CHECK((par.gradient.array() == ref.gradient.array()).all());
  }
}

TEST_CASE("a failing sample is reported by index") {
  RegionGraph g = build_grid_model(1, 2, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  ParameterSet p = random_params(g, 37);
  std::vector<Sample> data = {make_full_sample({0, 1}, {1, 0}),
                              make_full_sample({1, 0}, {0, 1})};
  // an unattainable tolerance forces non-convergence
  CHECK_THROWS_WITH_AS(empirical_risk(data, g, p, sys, LossKind::log, 1e-30, 1),
                       doctest::Contains("sample 0"), std::runtime_error);
}
