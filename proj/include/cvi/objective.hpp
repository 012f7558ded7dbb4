#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cvi/convex_family.hpp"
#include "cvi/model.hpp"

namespace cvi {

// Sparse vector over belief indices.
struct SparseVector {
  std::vector<int> index;
  std::vector<double> value;

  Eigen::VectorXd dense(int n) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (size_t k = 0; k < index.size(); ++k) v[index[k]] += value[k];
    return v;
  }
};

// F(b) = sum_f w_f^T f(b), f applied elementwise. Requires b > 0.
double eval_F(const BeliefVector& b, const WeightVector& w, const ConvexFunctionFamily& family);

// Entry k: sum_f w_{f,k} f'(b_k).
Eigen::VectorXd grad_F(const BeliefVector& b, const WeightVector& w,
                       const ConvexFunctionFamily& family);

// Diagonal of the belief Hessian: sum_f w_{f,k} f''(b_k). Must be strictly
// positive; a nonpositive entry (e.g. a zero entropy weight) is rejected as
// a singular Hessian.
Eigen::VectorXd hess_diag(const BeliefVector& b, const WeightVector& w,
                          const ConvexFunctionFamily& family);

// d^2 F / (db dtheta_j) = sum_f (dw_f/dtheta_j) .* f'(b); sparse with the
// support of the parameter's weight indicator.
SparseVector cross_derivative(const BeliefVector& b, const RegionGraph& graph,
                              const ParameterSet& params, const ObservedAssignment& y, int j);

}  // namespace cvi
