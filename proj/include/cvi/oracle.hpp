#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cvi/model.hpp"
#include "cvi/polytope.hpp"

namespace cvi::oracle {

// Test-only reference implementations. Everything here uses its own
// enumeration and indexing, independent of the library's solver and
// region-graph helpers, so the two paths can certify each other.

struct OracleClique {
  std::vector<int> hidden;
  std::vector<int> observed;
  // energy(x_cfg, y_cfg), row-major flattening of the clique's variables in
  // ascending order, first variable most significant.
  Eigen::MatrixXd energy;
};

// Explicit-energy model p(x|y) proportional to exp(sum_c E(x_c, y_c)),
// enumerable up to 2^20 joint states.
struct EnergyTableModel {
  int num_hidden = 0;
  int num_observed = 0;
  int hidden_arity = 2;
  int observed_arity = 2;
  std::vector<OracleClique> cliques;
};

// Exact conditional marginals p(x_i | y) by full enumeration.
std::vector<Eigen::VectorXd> brute_force_conditional_marginals(const EnergyTableModel& model,
                                                               const ObservedAssignment& y);

// Exact joint probabilities p(x | y) in enumeration order (first hidden
// variable most significant); used to sample synthetic datasets.
Eigen::VectorXd brute_force_joint(const EnergyTableModel& model, const ObservedAssignment& y);

// Central differences of infer's beliefs over every flat parameter.
// inner_tol must be well below h^2 for the differences to be meaningful.
std::vector<Eigen::VectorXd> finite_diff_belief_jacobian(const RegionGraph& graph,
                                                         const ParameterSet& params,
                                                         const ConstraintSystem& system,
                                                         const ObservedAssignment& y, double h,
                                                         double inner_tol);

// Verifies the unconstrained implicit-function derivative on the toy
// F(b, theta) = theta b^2 - b (b* = 1/(2 theta)): the formula
// -(d2F/db2)^{-1} d2F/(db dtheta) must match -1/(2 theta^2) at
// theta in {0.5, 1, 2} to the given tolerance.
bool claim1_toy_check(double tol = 1e-12);

}  // namespace cvi::oracle
