#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <utility>

#include "cvi/model.hpp"
#include "cvi/objective.hpp"
#include "cvi/polytope.hpp"

namespace cvi {

// Minimizer, multipliers and diagnostics for one observation.
struct InferenceResult {
  BeliefVector beliefs;
  Eigen::VectorXd multipliers;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Saddle systems [D A^T; A 0] with diagonal D > 0, solved by Schur
// complement on A D^{-1} A^T. The sparsity pattern is analyzed once per
// constraint system; factorize() refactorizes for a new D.
class SchurComplementSolver {
 public:
  explicit SchurComplementSolver(const ConstraintSystem& system);

  void factorize(const Eigen::VectorXd& hess_diag);

  // Solves (A D^-1 A^T) s = rhs.
  Eigen::VectorXd solve_schur(const Eigen::VectorXd& rhs) const;

  // Solves [D A^T; A 0] [db; dl] = [rhs_b; rhs_l].
  std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_kkt(const Eigen::VectorXd& rhs_b,
                                                        const Eigen::VectorXd& rhs_l) const;

  const Eigen::VectorXd& dinv() const { return dinv_; }
  const ConstraintSystem& system() const { return *system_; }
  const Eigen::SparseMatrix<double>& At() const { return At_; }

 private:
  const ConstraintSystem* system_;
  Eigen::SparseMatrix<double> At_;  // cached transpose, reused every refactorization
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  Eigen::VectorXd dinv_;
  bool analyzed_ = false;
};

// One Newton step: solves the symmetric saddle system with right-hand side
// (-grad - A^T lambda, d - A b).
std::pair<Eigen::VectorXd, Eigen::VectorXd> kkt_step(const BeliefVector& b,
                                                     const Eigen::VectorXd& lambda,
                                                     const Eigen::VectorXd& grad,
                                                     const Eigen::VectorXd& hess_diag,
                                                     const ConstraintSystem& system);

inline constexpr double kDefaultInferTol = 1e-10;
// Trained models can place minimizers at extremely small beliefs; the
// fraction-to-boundary walk covers at most a factor 100 per iteration, so
// such solves legitimately need a few hundred iterations.
inline constexpr int kDefaultInferMaxIters = 600;

// Minimizes F over {b : A b = d, b > 0} by feasible-start equality-
// constrained Newton with a fraction-to-boundary backtracking line search
// on the KKT residual. Starts from uniform beliefs; the entropy term keeps
// iterates interior. Non-convergence returns the best iterate with
// converged = false; a singular KKT factorization throws.
InferenceResult infer(const RegionGraph& graph, const ParameterSet& params,
                      const ConstraintSystem& system, const ObservedAssignment& y,
                      double tol = kDefaultInferTol, int max_iters = kDefaultInferMaxIters);

// As above with precomputed weights; shares one SchurComplementSolver.
InferenceResult infer_with_weights(const WeightVector& w, const ConvexFunctionFamily& family,
                                   const RegionGraph& graph, const ConstraintSystem& system,
                                   SchurComplementSolver& schur, double tol, int max_iters);

}  // namespace cvi
