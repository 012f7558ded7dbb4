#include "cvi/loss.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cvi/sensitivity.hpp"

#ifdef CVI_HAVE_OPENMP
#include <omp.h>
#endif

namespace cvi {

namespace {

// Validates the mask and yields the singleton region of each masked index.
int masked_singleton(const RegionGraph& graph, const Sample& sample, int i) {
  if (i < 0 || i >= graph.num_hidden) throw std::invalid_argument("mask index out of range");
  if (sample.hidden[i] == kHiddenState)
    throw std::invalid_argument("masked hidden variable has no known state");
  if (sample.hidden[i] < 0 || sample.hidden[i] >= graph.hidden_arity)
    throw std::invalid_argument("hidden state out of range");
  const int r = graph.singleton_of_hidden[i];
  if (r < 0) throw std::invalid_argument("masked hidden variable has no singleton region");
  return r;
}

void check_sample(const RegionGraph& graph, const Sample& sample) {
  if (static_cast<int>(sample.hidden.size()) != graph.num_hidden)
    throw std::invalid_argument("sample hidden length mismatch");
  if (static_cast<int>(sample.observed.size()) != graph.num_observed)
    throw std::invalid_argument("sample observed length mismatch");
}

}  // namespace

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "log") return LossKind::log;
  if (s == "quad") return LossKind::quad;
  throw std::invalid_argument("unknown loss kind: " + s);
}

std::string to_string(LossKind kind) { return kind == LossKind::log ? "log" : "quad"; }

Sample make_full_sample(std::vector<int> hidden, std::vector<int> observed) {
  Sample s;
  s.mask.resize(hidden.size());
  std::iota(s.mask.begin(), s.mask.end(), 0);
  s.hidden = std::move(hidden);
  s.observed = std::move(observed);
  return s;
}

double log_loss(const RegionGraph& graph, const BeliefVector& b, const Sample& sample) {
  check_sample(graph, sample);
  double loss = 0.0;
  for (int i : sample.mask) {
    const int r = masked_singleton(graph, sample, i);
    const double bi = b[graph.belief_offsets[r] + sample.hidden[i]];
    if (!(bi > 0.0)) throw std::domain_error("singleton belief must be positive");
    loss -= std::log(bi);
  }
  return loss;
}

double quad_loss(const RegionGraph& graph, const BeliefVector& b, const Sample& sample) {
  check_sample(graph, sample);
  double loss = 0.0;
  for (int i : sample.mask) {
    const int r = masked_singleton(graph, sample, i);
    const int off = graph.belief_offsets[r];
    loss -= 2.0 * b[off + sample.hidden[i]];
    for (int x = 0; x < graph.hidden_arity; ++x) loss += b[off + x] * b[off + x];
  }
  return loss;
}

double loss_value(LossKind kind, const RegionGraph& graph, const BeliefVector& b,
                  const Sample& sample) {
  return kind == LossKind::log ? log_loss(graph, b, sample) : quad_loss(graph, b, sample);
}

Eigen::VectorXd dloss_dbeliefs(LossKind kind, const RegionGraph& graph, const BeliefVector& b,
                               const Sample& sample) {
  check_sample(graph, sample);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(graph.total_beliefs);
  for (int i : sample.mask) {
    const int r = masked_singleton(graph, sample, i);
    const int off = graph.belief_offsets[r];
    const int xhat = sample.hidden[i];
    if (kind == LossKind::log) {
      const double bi = b[off + xhat];
      if (!(bi > 0.0)) throw std::domain_error("singleton belief must be positive");
      g[off + xhat] -= 1.0 / bi;
    } else {
      for (int x = 0; x < graph.hidden_arity; ++x)
        g[off + x] += 2.0 * (b[off + x] - (x == xhat ? 1.0 : 0.0));
    }
  }
  return g;
}

namespace {

struct PerSample {
  double loss = 0.0;
  Eigen::VectorXd gradient;
  std::string error;
};

PerSample risk_one_sample(const Sample& sample, const RegionGraph& graph,
                          const ParameterSet& params, const ConstraintSystem& system,
                          LossKind kind, double tol) {
  PerSample out;
  InferenceResult res = infer(graph, params, system, sample.observed, tol);
  if (!res.converged) {
    out.error = "inference did not converge (kkt residual " +
                std::to_string(res.kkt_residual) + ")";
    return out;
  }
  out.loss = loss_value(kind, graph, res.beliefs, sample);
  SensitivitySolver sens(res, graph, params, system, sample.observed);
  out.gradient = sens.adjoint_loss_gradient(dloss_dbeliefs(kind, graph, res.beliefs, sample));
  return out;
}

const char* kSkippedError = "skipped after another sample failed";

RiskResult reduce_in_order(const std::vector<PerSample>& per_sample, int num_params) {
  // report the first *real* failure in sample order, not a skip marker
  for (size_t s = 0; s < per_sample.size(); ++s)
    if (!per_sample[s].error.empty() && per_sample[s].error != kSkippedError)
      throw std::runtime_error("sample " + std::to_string(s) + ": " + per_sample[s].error);
  RiskResult out;
  out.gradient = Eigen::VectorXd::Zero(num_params);
  for (size_t s = 0; s < per_sample.size(); ++s) {
    out.risk += per_sample[s].loss;
    out.gradient += per_sample[s].gradient;
  }
  return out;
}

}  // namespace

RiskResult empirical_risk(const std::vector<Sample>& dataset, const RegionGraph& graph,
                          const ParameterSet& params, const ConstraintSystem& system,
                          LossKind kind, double tol, int workers) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  const int n = static_cast<int>(dataset.size());
  std::vector<PerSample> per_sample(n);
  // Once any sample fails the whole batch throws, so remaining samples are
  // skipped; successful batches always compute every sample, keeping results
  // worker-count-invariant.
  std::atomic<bool> failed{false};
#ifdef CVI_HAVE_OPENMP
  const int nthreads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (int s = 0; s < n; ++s) {
    if (failed.load(std::memory_order_relaxed)) {
      per_sample[s].error = kSkippedError;
      continue;
    }
    try {
      per_sample[s] = risk_one_sample(dataset[s], graph, params, system, kind, tol);
    } catch (const std::exception& e) {
      per_sample[s].error = e.what();
    }
    if (!per_sample[s].error.empty()) failed.store(true, std::memory_order_relaxed);
  }
#else
  (void)workers;
  (void)failed;
  return empirical_risk_serial(dataset, graph, params, system, kind, tol);
#endif
  return reduce_in_order(per_sample, params.num_params());
}

RiskResult empirical_risk_serial(const std::vector<Sample>& dataset, const RegionGraph& graph,
                                 const ParameterSet& params, const ConstraintSystem& system,
                                 LossKind kind, double tol) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  RiskResult out;
  out.gradient = Eigen::VectorXd::Zero(params.num_params());
  for (size_t s = 0; s < dataset.size(); ++s) {
    PerSample one;
    try {
      one = risk_one_sample(dataset[s], graph, params, system, kind, tol);
    } catch (const std::exception& e) {
      one.error = e.what();
    }
    if (!one.error.empty())
      throw std::runtime_error("sample " + std::to_string(s) + ": " + one.error);
    out.risk += one.loss;
    out.gradient += one.gradient;
  }
  return out;
}

}  // namespace cvi
