#include "cvi/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace cvi {

namespace {

double f_linear(double b) { return b; }
double f_linear_d1(double) { return 1.0; }
double f_linear_d2(double) { return 0.0; }

double f_entropy(double b) { return b * std::log(b); }
double f_entropy_d1(double b) { return std::log(b) + 1.0; }
double f_entropy_d2(double b) { return 1.0 / b; }

void check_domain(const BeliefVector& b, const WeightVector& w,
                  const ConvexFunctionFamily& family) {
  if (w.per_f.size() != family.size())
    throw std::invalid_argument("weight vector count does not match family");
  for (const auto& wf : w.per_f)
    if (wf.size() != b.size()) throw std::invalid_argument("weight/belief length mismatch");
  for (Eigen::Index k = 0; k < b.size(); ++k)
    if (!(b[k] > 0.0)) throw std::domain_error("beliefs must be strictly positive");
}

}  // namespace

const ConvexFunctionFamily& standard_family() {
  static const ConvexFunctionFamily family = {
      {"linear", f_linear, f_linear_d1, f_linear_d2, false},
      {"entropy", f_entropy, f_entropy_d1, f_entropy_d2, true},
  };
  return family;
}

double eval_F(const BeliefVector& b, const WeightVector& w, const ConvexFunctionFamily& family) {
  check_domain(b, w, family);
  double total = 0.0;
  for (size_t f = 0; f < family.size(); ++f) {
    const Eigen::VectorXd& wf = w.per_f[f];
    double acc = 0.0;
    for (Eigen::Index k = 0; k < b.size(); ++k) acc += wf[k] * family[f].value(b[k]);
    total += acc;
  }
  return total;
}

Eigen::VectorXd grad_F(const BeliefVector& b, const WeightVector& w,
                       const ConvexFunctionFamily& family) {
  check_domain(b, w, family);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(b.size());
  for (size_t f = 0; f < family.size(); ++f) {
    const Eigen::VectorXd& wf = w.per_f[f];
    for (Eigen::Index k = 0; k < b.size(); ++k) g[k] += wf[k] * family[f].deriv1(b[k]);
  }
  return g;
}

Eigen::VectorXd hess_diag(const BeliefVector& b, const WeightVector& w,
                          const ConvexFunctionFamily& family) {
  check_domain(b, w, family);
  Eigen::VectorXd D = Eigen::VectorXd::Zero(b.size());
  for (size_t f = 0; f < family.size(); ++f) {
    const Eigen::VectorXd& wf = w.per_f[f];
    for (Eigen::Index k = 0; k < b.size(); ++k) D[k] += wf[k] * family[f].deriv2(b[k]);
  }
  for (Eigen::Index k = 0; k < D.size(); ++k)
    if (!(D[k] > 0.0))
      throw std::runtime_error("singular Hessian: nonpositive curvature at belief entry " +
                               std::to_string(k));
  return D;
}

SparseVector cross_derivative(const BeliefVector& b, const RegionGraph& graph,
                              const ParameterSet& params, const ObservedAssignment& y, int j) {
  if (b.size() != graph.total_beliefs)
    throw std::invalid_argument("belief length does not match graph");
  const WeightGradient wg = dweights_dtheta(graph, params, y, j);
  const ConvexFunction& fn = params.family[wg.f];
  SparseVector out;
  out.index = wg.index;
  out.value.resize(wg.value.size());
  for (size_t k = 0; k < wg.index.size(); ++k) {
    const double bk = b[wg.index[k]];
    if (!(bk > 0.0)) throw std::domain_error("beliefs must be strictly positive");
    out.value[k] = wg.value[k] * fn.deriv1(bk);
  }
  return out;
}

}  // namespace cvi
