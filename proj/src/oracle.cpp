#include "cvi/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "cvi/solver.hpp"

namespace cvi::oracle {

namespace {

// Independent mixed-radix helpers (deliberately not the RegionGraph ones).
long long joint_states(const EnergyTableModel& m) {
  long long n = 1;
  for (int i = 0; i < m.num_hidden; ++i) {
    n *= m.hidden_arity;
    if (n > (1LL << 20)) throw std::invalid_argument("joint state space exceeds 2^20");
  }
  return n;
}

int state_of(long long joint, int var, int num_vars, int arity) {
  // first variable most significant
  long long div = 1;
  for (int v = num_vars - 1; v > var; --v) div *= arity;
  return static_cast<int>((joint / div) % arity);
}

double clique_energy(const EnergyTableModel& m, const OracleClique& c, long long joint,
                     const ObservedAssignment& y) {
  int xc = 0;
  for (int v : c.hidden) xc = xc * m.hidden_arity + state_of(joint, v, m.num_hidden, m.hidden_arity);
  int yc = 0;
  for (int v : c.observed) yc = yc * m.observed_arity + y.at(v);
  return c.energy(xc, yc);
}

}  // namespace

Eigen::VectorXd brute_force_joint(const EnergyTableModel& model, const ObservedAssignment& y) {
  if (static_cast<int>(y.size()) != model.num_observed)
    throw std::invalid_argument("observed assignment has wrong length");
  const long long n = joint_states(model);
  Eigen::VectorXd p(n);
  for (long long s = 0; s < n; ++s) {
    double e = 0.0;
    for (const OracleClique& c : model.cliques) e += clique_energy(model, c, s, y);
    p[s] = std::exp(e);
  }
  const double z = p.sum();
  if (!(z > 0.0)) throw std::runtime_error("degenerate joint: normalizer is zero");
  return p / z;
}

std::vector<Eigen::VectorXd> brute_force_conditional_marginals(const EnergyTableModel& model,
                                                               const ObservedAssignment& y) {
  const Eigen::VectorXd p = brute_force_joint(model, y);
  std::vector<Eigen::VectorXd> marg(model.num_hidden,
                                    Eigen::VectorXd::Zero(model.hidden_arity));
  for (long long s = 0; s < p.size(); ++s)
    for (int i = 0; i < model.num_hidden; ++i)
      marg[i][state_of(s, i, model.num_hidden, model.hidden_arity)] += p[s];
  return marg;
}

std::vector<Eigen::VectorXd> finite_diff_belief_jacobian(const RegionGraph& graph,
                                                         const ParameterSet& params,
                                                         const ConstraintSystem& system,
                                                         const ObservedAssignment& y, double h,
                                                         double inner_tol) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  ParameterSet perturbed = params;
  Eigen::VectorXd theta = params.to_flat();
  std::vector<Eigen::VectorXd> jac(params.num_params());
  for (int j = 0; j < params.num_params(); ++j) {
    const double saved = theta[j];
    theta[j] = saved + h;
    perturbed.from_flat(theta);
    InferenceResult plus = infer(graph, perturbed, system, y, inner_tol);
    theta[j] = saved - h;
    perturbed.from_flat(theta);
    InferenceResult minus = infer(graph, perturbed, system, y, inner_tol);
    theta[j] = saved;
    if (!plus.converged || !minus.converged)
      throw std::runtime_error("perturbed inference failed at parameter " + std::to_string(j));
    jac[j] = (plus.beliefs - minus.beliefs) / (2.0 * h);
  }
  return jac;
}

bool claim1_toy_check(double tol) {
  for (double theta : {0.5, 1.0, 2.0}) {
    // Minimize F(b) = theta b^2 - b numerically (Newton, exact for a quadratic).
    double b = 1.0;
    for (int it = 0; it < 50; ++it) {
      const double g = 2.0 * theta * b - 1.0;
      if (std::abs(g) < 1e-15) break;
      b -= g / (2.0 * theta);
    }
    const double d2F_dbdb = 2.0 * theta;
    const double d2F_dbdtheta = 2.0 * b;
    const double implicit = -d2F_dbdtheta / d2F_dbdb;
    const double closed_form = -1.0 / (2.0 * theta * theta);
    if (std::abs(implicit - closed_form) > tol) return false;
  }
  return true;
}

}  // namespace cvi::oracle
