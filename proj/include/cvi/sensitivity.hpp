#pragma once

#include <Eigen/Dense>

#include "cvi/model.hpp"
#include "cvi/objective.hpp"
#include "cvi/polytope.hpp"
#include "cvi/solver.hpp"

namespace cvi {

// Differentiates the constrained minimizer with respect to the parameters.
// Holds one symmetric positive definite factorization of A D^{-1} A^T at a
// converged InferenceResult; the projector
//   X = D^{-1} - D^{-1} A^T (A D^{-1} A^T)^{-1} A D^{-1}
// is applied, never formed. Bound to one result; distinct samples' solvers
// may run concurrently.
class SensitivitySolver {
 public:
  SensitivitySolver(const InferenceResult& result, const RegionGraph& graph,
                    const ParameterSet& params, const ConstraintSystem& system,
                    const ObservedAssignment& y);

  // X v, computed as D^-1 v - D^-1 A^T s with (A D^-1 A^T) s = A D^-1 v.
  Eigen::VectorXd apply_X(const Eigen::VectorXd& v) const;

  // d b* / d theta_j = -X * d^2F/(db dtheta_j); stays in the constraint
  // plane (A times the result is 0).
  Eigen::VectorXd dbeliefs_dtheta(int j) const;

  // Full parameter gradient {dL/dtheta_j} = {-c_j^T g} with g = X dL_db:
  // one linear solve serves all parameters by symmetry of X.
  Eigen::VectorXd adjoint_loss_gradient(const Eigen::VectorXd& dL_db) const;

  const BeliefVector& beliefs() const { return beliefs_; }

 private:
  const RegionGraph* graph_;
  const ParameterSet* params_;
  ObservedAssignment y_;
  BeliefVector beliefs_;
  WeightVector weights_;
  SchurComplementSolver schur_;
};

}  // namespace cvi
