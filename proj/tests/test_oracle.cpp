#include <doctest.h>

#include <cmath>

#include "cvi/oracle.hpp"
#include "cvi/rng.hpp"
#include "cvi/sensitivity.hpp"
#include "cvi/solver.hpp"
#include "cvi/trainer.hpp"

using namespace cvi;

TEST_CASE("brute force marginals: zero energy is uniform") {
  oracle::EnergyTableModel m;
  m.num_hidden = 1;
  m.num_observed = 1;
  m.cliques.push_back({{0}, {0}, Eigen::MatrixXd::Zero(2, 2)});
  auto marg = oracle::brute_force_conditional_marginals(m, {0});
  CHECK(marg[0][0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(marg[0][1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("brute force marginals: symmetric pair energies keep nodes at 0.5") {
  for (double a : {0.3, 1.0, 2.5}) {
    oracle::EnergyTableModel m;
    m.num_hidden = 2;
    m.num_observed = 1;
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(4, 2);
    e(0, 0) = a;  // (x1,x2) = (0,0)
    e(3, 0) = a;  // (1,1)
    m.cliques.push_back({{0, 1}, {0}, e});
    auto marg = oracle::brute_force_conditional_marginals(m, {0});
    CHECK(marg[0][0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(marg[1][0] == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("brute force marginals: chain matches an independent enumeration order") {
  SeededRng rng(3);
  oracle::EnergyTableModel m;
  m.num_hidden = 3;
  m.num_observed = 1;
  for (int c = 0; c < 2; ++c) {
    Eigen::MatrixXd e(4, 2);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) e(i, j) = rng.uniform(-1.5, 1.5);
    m.cliques.push_back({{c, c + 1}, {0}, e});
  }
  const ObservedAssignment y = {1};
  auto marg = oracle::brute_force_conditional_marginals(m, y);
  for (int i = 0; i < 3; ++i) CHECK(marg[i].sum() == doctest::Approx(1.0).epsilon(1e-12));

  // second enumeration, iterating states with the LAST variable most
  // significant, sharing no code with the oracle
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(8);
  std::vector<Eigen::VectorXd> marg2(3, Eigen::VectorXd::Zero(2));
  double z = 0.0;
  for (int x2 = 0; x2 < 2; ++x2)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x0 = 0; x0 < 2; ++x0) {
        const int xs[3] = {x0, x1, x2};
        double e = 0.0;
        for (int c = 0; c < 2; ++c) e += m.cliques[c].energy(xs[c] * 2 + xs[c + 1], y[0]);
        const double p = std::exp(e);
        z += p;
        for (int i = 0; i < 3; ++i) marg2[i][xs[i]] += p;
      }
  for (int i = 0; i < 3; ++i)
    for (int x = 0; x < 2; ++x)
      CHECK(marg[i][x] == doctest::Approx(marg2[i][x] / z).epsilon(1e-12));
}

TEST_CASE("oracle refuses oversized state spaces") {
  oracle::EnergyTableModel m;
  m.num_hidden = 25;  // 2^25 > 2^20
  m.num_observed = 1;
  CHECK_THROWS_AS(oracle::brute_force_conditional_marginals(m, {0}), std::invalid_argument);
}

TEST_CASE("finite differences: constant-shift direction is flat") {
  RegionGraph g = build_grid_model(1, 2, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  ParameterSet p = init_parameters(g);
  const ObservedAssignment y = {0, 1};
  const auto fd = oracle::finite_diff_belief_jacobian(g, p, sys, y, 1e-4, 1e-12);
  // summing the columns of one active linear y-column approximates the
  // derivative along a constant shift, which must vanish
  const int ycfg = g.y_config_of(2, y);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(g.total_beliefs);
  for (int xc = 0; xc < 4; ++xc) total += fd[p.encode(kLinearFunction, 1, xc, ycfg)];
  CHECK(total.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("finite differences reproduce the 1-node logistic derivative") {
  RegionGraph g = build_grid_model(1, 1, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  ParameterSet p = init_parameters(g);
  const auto fd = oracle::finite_diff_belief_jacobian(g, p, sys, {0}, 1e-5, 1e-12);
  const int j = p.encode(kLinearFunction, 0, 0, 0);
  CHECK(fd[j][0] == doctest::Approx(-0.25).epsilon(1e-6));
  CHECK(std::abs(fd[j][0]) == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("halving h shrinks the finite-difference error about fourfold") {
  RegionGraph g = build_grid_model(1, 1, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  ParameterSet p = init_parameters(g);
  const ObservedAssignment y = {0};
  InferenceResult res = infer(g, p, sys, y, 1e-13);
  REQUIRE(res.converged);
  SensitivitySolver sens(res, g, p, sys, y);

  const int j = p.encode(kLinearFunction, 0, 0, 0);
  const Eigen::VectorXd exact = sens.dbeliefs_dtheta(j);
  const auto coarse = oracle::finite_diff_belief_jacobian(g, p, sys, y, 1e-3, 1e-13);
  const auto fine = oracle::finite_diff_belief_jacobian(g, p, sys, y, 5e-4, 1e-13);
  const double err_coarse = (coarse[j] - exact).cwiseAbs().maxCoeff();
  const double err_fine = (fine[j] - exact).cwiseAbs().maxCoeff();
  REQUIRE(err_fine > 0.0);
  const double ratio = err_coarse / err_fine;
  CHECK(ratio > 2.5);
  CHECK(ratio < 6.0);
}

TEST_CASE("claim 1 toy check") {
  CHECK(oracle::claim1_toy_check());
  CHECK(oracle::claim1_toy_check(1e-12));
}
