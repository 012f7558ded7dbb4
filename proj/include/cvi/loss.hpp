#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cvi/model.hpp"
#include "cvi/polytope.hpp"
#include "cvi/solver.hpp"

namespace cvi {

enum class LossKind { log, quad };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind kind);

// One training example: hidden states (use kHiddenState for variables with
// no known state), a fully specified observation, and the hidden indices
// that contribute to the loss. The mask must address known states only.
struct Sample {
  std::vector<int> hidden;
  std::vector<int> observed;
  std::vector<int> mask;
};

inline constexpr int kHiddenState = -1;

// Builds a fully-observed sample (mask = every hidden variable).
Sample make_full_sample(std::vector<int> hidden, std::vector<int> observed);

// -sum_{i in mask} log b_i(xhat_i).
double log_loss(const RegionGraph& graph, const BeliefVector& b, const Sample& sample);

// sum_{i in mask} (-2 b_i(xhat_i) + sum_{x_i} b_i(x_i)^2).
double quad_loss(const RegionGraph& graph, const BeliefVector& b, const Sample& sample);

double loss_value(LossKind kind, const RegionGraph& graph, const BeliefVector& b,
                  const Sample& sample);

// Gradient of the loss in the beliefs; zero outside masked singleton blocks.
Eigen::VectorXd dloss_dbeliefs(LossKind kind, const RegionGraph& graph, const BeliefVector& b,
                               const Sample& sample);

struct RiskResult {
  double risk = 0.0;
  Eigen::VectorXd gradient;
};

// Empirical risk and its full parameter gradient: per-sample inference plus
// one adjoint solve each, summed in sample order. Samples fan out over
// OpenMP workers (workers <= 0: all cores); the fixed reduction order makes
// the result worker-count-invariant. A failing sample raises an error
// naming its index.
RiskResult empirical_risk(const std::vector<Sample>& dataset, const RegionGraph& graph,
                          const ParameterSet& params, const ConstraintSystem& system,
                          LossKind kind, double tol, int workers = 0);

// Serial reference implementation, kept for testing and benchmarking the
// parallel kernel against.
RiskResult empirical_risk_serial(const std::vector<Sample>& dataset, const RegionGraph& graph,
                                 const ParameterSet& params, const ConstraintSystem& system,
                                 LossKind kind, double tol);

}  // namespace cvi
