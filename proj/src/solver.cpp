#include "cvi/solver.hpp"

#include <cmath>
#include <stdexcept>

namespace cvi {

namespace {

constexpr double kBoundaryFraction = 0.99;
constexpr double kResidualDecrease = 1e-4;
constexpr int kMaxBacktracks = 60;

double kkt_residual_norm(const Eigen::VectorXd& r_dual, const Eigen::VectorXd& r_prim) {
  double res = r_dual.size() ? r_dual.cwiseAbs().maxCoeff() : 0.0;
  if (r_prim.size()) res = std::max(res, r_prim.cwiseAbs().maxCoeff());
  return res;
}

}  // namespace

SchurComplementSolver::SchurComplementSolver(const ConstraintSystem& system)
    : system_(&system), At_(system.A.transpose()) {}

void SchurComplementSolver::factorize(const Eigen::VectorXd& hess_diag) {
  if (hess_diag.size() != system_->cols())
    throw std::invalid_argument("Hessian diagonal length mismatch");
  for (Eigen::Index k = 0; k < hess_diag.size(); ++k)
    if (!(hess_diag[k] > 0.0)) throw std::runtime_error("Hessian diagonal must be positive");
  dinv_ = hess_diag.cwiseInverse();
  Eigen::SparseMatrix<double> S = system_->A * (dinv_.asDiagonal() * At_);
  if (!analyzed_) {
    ldlt_.analyzePattern(S);
    analyzed_ = true;
  }
  ldlt_.factorize(S);
  if (ldlt_.info() != Eigen::Success)
    throw std::runtime_error("Schur complement factorization failed");
}

Eigen::VectorXd SchurComplementSolver::solve_schur(const Eigen::VectorXd& rhs) const {
  if (!analyzed_) throw std::logic_error("factorize() must be called first");
  Eigen::VectorXd s = ldlt_.solve(rhs);
  if (ldlt_.info() != Eigen::Success)
    throw std::runtime_error("Schur complement solve failed");
  return s;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> SchurComplementSolver::solve_kkt(
    const Eigen::VectorXd& rhs_b, const Eigen::VectorXd& rhs_l) const {
  const Eigen::SparseMatrix<double>& A = system_->A;
  Eigen::VectorXd dl = solve_schur(A * dinv_.cwiseProduct(rhs_b) - rhs_l);
  Eigen::VectorXd db = dinv_.cwiseProduct(rhs_b - At_ * dl);
  return {std::move(db), std::move(dl)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> kkt_step(const BeliefVector& b,
                                                     const Eigen::VectorXd& lambda,
                                                     const Eigen::VectorXd& grad,
                                                     const Eigen::VectorXd& hess_diag,
                                                     const ConstraintSystem& system) {
  SchurComplementSolver schur(system);
  schur.factorize(hess_diag);
  Eigen::VectorXd rhs_b = -(grad + system.A.transpose() * lambda);
  Eigen::VectorXd rhs_l = system.d - system.A * b;
  return schur.solve_kkt(rhs_b, rhs_l);
}

InferenceResult infer_with_weights(const WeightVector& w, const ConvexFunctionFamily& family,
                                   const RegionGraph& graph, const ConstraintSystem& system,
                                   SchurComplementSolver& schur, double tol, int max_iters) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const Eigen::SparseMatrix<double>& A = system.A;

  InferenceResult res;
  res.beliefs = uniform_beliefs(graph);
  res.multipliers = Eigen::VectorXd::Zero(system.rows());

  Eigen::VectorXd g = grad_F(res.beliefs, w, family);
  Eigen::VectorXd r_dual = g + A.transpose() * res.multipliers;
  Eigen::VectorXd r_prim = A * res.beliefs - system.d;
  double kkt = kkt_residual_norm(r_dual, r_prim);

  for (int it = 0; it < max_iters; ++it) {
    if (kkt <= tol) {
      res.kkt_residual = kkt;
      res.iterations = it;
      res.converged = true;
      return res;
    }

    Eigen::VectorXd D = hess_diag(res.beliefs, w, family);
    schur.factorize(D);
    auto [db, dl] = schur.solve_kkt(-r_dual, -r_prim);

    // Fraction-to-boundary: b + alpha*db >= (1 - 0.99) * b.
    double alpha = 1.0;
    for (Eigen::Index k = 0; k < db.size(); ++k)
      if (db[k] < 0.0) alpha = std::min(alpha, kBoundaryFraction * res.beliefs[k] / -db[k]);

    const double f0 = eval_F(res.beliefs, w, family);
    bool accepted = false;
    Eigen::VectorXd b_new, l_new, g_new, rd_new, rp_new;
    double kkt_new = kkt;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, alpha *= 0.5) {
      b_new = res.beliefs + alpha * db;
      if ((b_new.array() <= 0.0).any()) continue;
      l_new = res.multipliers + alpha * dl;
      g_new = grad_F(b_new, w, family);
      rd_new = g_new + A.transpose() * l_new;
      rp_new = A * b_new - system.d;
      kkt_new = kkt_residual_norm(rd_new, rp_new);
      const double f_new = eval_F(b_new, w, family);
      if (kkt_new <= (1.0 - kResidualDecrease * alpha) * kkt &&
          f_new <= f0 + 1e-12 * (1.0 + std::abs(f0))) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.kkt_residual = kkt;
      res.iterations = it;
      res.converged = false;
      return res;
    }
    res.beliefs.swap(b_new);
    res.multipliers.swap(l_new);
    r_dual.swap(rd_new);
    r_prim.swap(rp_new);
    kkt = kkt_new;
  }

  res.kkt_residual = kkt;
  res.iterations = max_iters;
  res.converged = kkt <= tol;
  return res;
}

InferenceResult infer(const RegionGraph& graph, const ParameterSet& params,
                      const ConstraintSystem& system, const ObservedAssignment& y, double tol,
                      int max_iters) {
  const WeightVector w = realize_weights(graph, params, y);
  SchurComplementSolver schur(system);
  return infer_with_weights(w, params.family, graph, system, schur, tol, max_iters);
}

}  // namespace cvi
