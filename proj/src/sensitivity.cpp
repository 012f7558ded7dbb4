#include "cvi/sensitivity.hpp"

#include <cmath>
#include <stdexcept>

namespace cvi {

SensitivitySolver::SensitivitySolver(const InferenceResult& result, const RegionGraph& graph,
                                     const ParameterSet& params, const ConstraintSystem& system,
                                     const ObservedAssignment& y)
    : graph_(&graph), params_(&params), y_(y), beliefs_(result.beliefs), schur_(system) {
  if (!result.converged)
    throw std::logic_error("sensitivities require a converged inference result");
  weights_ = realize_weights(graph, params, y);
  schur_.factorize(hess_diag(beliefs_, weights_, params.family));
}

Eigen::VectorXd SensitivitySolver::apply_X(const Eigen::VectorXd& v) const {
  if (v.size() != beliefs_.size()) throw std::invalid_argument("vector length mismatch");
  const Eigen::SparseMatrix<double>& A = schur_.system().A;
  Eigen::VectorXd t = schur_.dinv().cwiseProduct(v);
  Eigen::VectorXd s = schur_.solve_schur(A * t);
  return t - schur_.dinv().cwiseProduct(schur_.At() * s);
}

Eigen::VectorXd SensitivitySolver::dbeliefs_dtheta(int j) const {
  const SparseVector c = cross_derivative(beliefs_, *graph_, *params_, y_, j);
  return -apply_X(c.dense(static_cast<int>(beliefs_.size())));
}

Eigen::VectorXd SensitivitySolver::adjoint_loss_gradient(const Eigen::VectorXd& dL_db) const {
  const Eigen::VectorXd g = apply_X(dL_db);
  const ParameterSet& p = *params_;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.num_params());
  // grad[j] = -c_j^T g; the c_j share structure, so accumulate by walking
  // the belief vector once per function instead of forming each c_j.
  for (int r = 0; r < graph_->num_regions(); ++r) {
    const int gidx = graph_->regions[r].tie_group;
    const int yc = graph_->y_config_of(r, y_);
    const int off = graph_->belief_offsets[r];
    const int nx = graph_->region_configs(r);
    for (int xc = 0; xc < nx; ++xc) {
      const double gk = g[off + xc];
      if (gk == 0.0) continue;
      const double bk = beliefs_[off + xc];
      for (int f = 0; f < p.num_functions(); ++f) {
        const double dw = p.family[f].positive_weights
                              ? std::exp(p.raw_value(f, gidx, xc, yc))
                              : 1.0;
        grad[p.encode(f, gidx, xc, yc)] -= dw * p.family[f].deriv1(bk) * gk;
      }
    }
  }
  return grad;
}

}  // namespace cvi
