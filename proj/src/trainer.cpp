#include "cvi/trainer.hpp"

#include <atomic>
#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>

#include "cvi/sensitivity.hpp"

#ifdef CVI_HAVE_OPENMP
#include <omp.h>
#endif

namespace cvi {

void TrainConfig::validate() const {
  if (stage1_iters < 0 || stage2_iters < 0)
    throw std::invalid_argument("iteration counts must be >= 0");
  if (!(inner_tol > 0.0)) throw std::invalid_argument("inner tolerance must be positive");
  if (lbfgs_memory < 1) throw std::invalid_argument("quasi-Newton memory must be >= 1");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("gradient threshold must be positive");
}

void write_trace_csv(const TrainTrace& trace, std::ostream& os) {
  os << "iteration,stage,risk,grad_norm,step\n";
  char buf[160];
  for (const TraceRow& row : trace.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g,%.17g\n", row.iteration,
                  row.stage.c_str(), row.risk, row.grad_norm, row.step);
    os << buf;
  }
}

ParameterSet init_parameters(const RegionGraph& graph) {
  return ParameterSet::zeros(graph, standard_family());
}

namespace {

// Indices of positivity pre-parameters, masked to zero during stage 1.
std::vector<int> frozen_indices(const ParameterSet& params) {
  std::vector<int> idx;
  for (int f = 0; f < params.num_functions(); ++f) {
    if (!params.family[f].positive_weights) continue;
    for (int g = 0; g < params.num_groups(); ++g)
      for (int xc = 0; xc < params.group_x_configs[g]; ++xc)
        for (int yc = 0; yc < params.group_y_configs[g]; ++yc)
          idx.push_back(params.encode(f, g, xc, yc));
  }
  return idx;
}

struct LbfgsMemory {
  std::deque<Eigen::VectorXd> s, y;
  std::deque<double> rho;

  void clear() {
    s.clear();
    y.clear();
    rho.clear();
  }

  void push(const Eigen::VectorXd& step, const Eigen::VectorXd& grad_delta, int capacity) {
    const double sy = step.dot(grad_delta);
    if (sy <= 1e-12 * step.norm() * grad_delta.norm()) return;  // curvature guard
    s.push_back(step);
    y.push_back(grad_delta);
    rho.push_back(1.0 / sy);
    while (static_cast<int>(s.size()) > capacity) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }

  // Two-loop recursion; H0 = gamma I with gamma = s^T y / y^T y. With no
  // history yet, steepest descent normalized to unit inf-norm.
  Eigen::VectorXd direction(const Eigen::VectorXd& grad) const {
    Eigen::VectorXd q = -grad;
    if (s.empty()) {
      const double gnorm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
      if (gnorm > 1.0) q /= gnorm;
      return q;
    }
    const int m = static_cast<int>(s.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho[i] * s[i].dot(q);
      q -= alpha[i] * y[i];
    }
    q *= s.back().dot(y.back()) / y.back().dot(y.back());
    for (int i = 0; i < m; ++i) {
      const double beta = rho[i] * y[i].dot(q);
      q += (alpha[i] - beta) * s[i];
    }
    return q;
  }
};

constexpr double kArmijoC1 = 1e-4;
constexpr int kMaxBacktracks = 50;

}  // namespace

std::pair<ParameterSet, TrainTrace> train(const std::vector<Sample>& dataset,
                                          const RegionGraph& graph,
                                          const ConstraintSystem& system,
                                          const TrainConfig& config) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("empty dataset");

  ParameterSet params = init_parameters(graph);
  const std::vector<int> frozen = frozen_indices(params);
  Eigen::VectorXd theta = params.to_flat();

  TrainTrace trace;
  auto risk_at = [&](const Eigen::VectorXd& t) {
    params.from_flat(t);
    RiskResult r = empirical_risk(dataset, graph, params, system, config.loss, config.inner_tol,
                                  config.workers);
    if (!std::isfinite(r.risk)) throw std::runtime_error("non-finite empirical risk");
    return r;
  };

  RiskResult cur = risk_at(theta);
  trace.initial_risk = cur.risk;
  int global_iter = 0;

  for (int stage = 0; stage < 2; ++stage) {
    const bool frozen_stage = stage == 0;
    const int budget = frozen_stage ? config.stage1_iters : config.stage2_iters;
    const char* label = frozen_stage ? "frozen" : "full";
    LbfgsMemory memory;

    auto masked = [&](Eigen::VectorXd g) {
      if (frozen_stage)
        for (int j : frozen) g[j] = 0.0;
      return g;
    };

    Eigen::VectorXd grad = masked(cur.gradient);
    for (int it = 0; it < budget; ++it) {
      const double gnorm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
      if (gnorm < config.grad_tol) break;

      Eigen::VectorXd dir = memory.direction(grad);
      double slope = dir.dot(grad);
      if (slope >= 0.0) {  // not a descent direction; restart from steepest descent
        memory.clear();
        dir = -grad;
        slope = dir.dot(grad);
      }

      double alpha = 1.0;
      bool accepted = false;
      Eigen::VectorXd theta_new;
      RiskResult next;
      for (int bt = 0; bt < kMaxBacktracks; ++bt, alpha *= 0.5) {
        theta_new = theta + alpha * dir;
        try {
          next = risk_at(theta_new);
        } catch (const std::exception&) {
          continue;  // trial point unsolvable; shrink the step
        }
        if (next.risk <= cur.risk + kArmijoC1 * alpha * slope) {
          accepted = true;
          break;
        }
      }
      ++global_iter;
      trace.rows.push_back({global_iter, label, cur.risk, gnorm, accepted ? alpha : 0.0});
      if (!accepted) {
        trace.stop_reason = "line-search failure in stage " + std::string(label);
        params.from_flat(theta);
        trace.final_risk = cur.risk;
        return {params, trace};
      }

      Eigen::VectorXd grad_new = masked(next.gradient);
      memory.push(theta_new - theta, grad_new - grad, config.lbfgs_memory);
      theta.swap(theta_new);
      cur = next;
      grad.swap(grad_new);
    }
  }

  if (trace.stop_reason.empty()) trace.stop_reason = "completed";
  params.from_flat(theta);
  trace.final_risk = cur.risk;
  return {params, trace};
}

namespace {

struct SampleMetrics {
  double classification = 0.0;
  double regression = 0.0;
  double l_log = 0.0;
  double l_quad = 0.0;
  long masked = 0;
  std::string error;
};

SampleMetrics evaluate_one(const Sample& sample, const RegionGraph& graph,
                           const ConstraintSystem& system, const ParameterSet& params,
                           double tol) {
  SampleMetrics m;
  InferenceResult res = infer(graph, params, system, sample.observed, tol);
  if (!res.converged) {
    m.error = "inference did not converge";
    return m;
  }
  // the losses validate the mask and hidden states before anything indexes
  m.l_log = log_loss(graph, res.beliefs, sample);
  m.l_quad = quad_loss(graph, res.beliefs, sample);
  for (int i : sample.mask) {
    const int off = graph.belief_offsets[graph.singleton_of_hidden[i]];
    int best = 0;
    for (int x = 1; x < graph.hidden_arity; ++x)
      if (res.beliefs[off + x] > res.beliefs[off + best]) best = x;
    if (best != sample.hidden[i]) m.classification += 1.0;
    const double diff = static_cast<double>(sample.hidden[i]) - res.beliefs[off + 1];
    m.regression += diff * diff;
    ++m.masked;
  }
  return m;
}

const char* kSkippedError = "skipped after another sample failed";

MetricRecord reduce_metrics(const std::vector<SampleMetrics>& per_sample) {
  for (size_t s = 0; s < per_sample.size(); ++s)
    if (!per_sample[s].error.empty() && per_sample[s].error != kSkippedError)
      throw std::runtime_error("sample " + std::to_string(s) + ": " + per_sample[s].error);
  MetricRecord total;
  for (size_t s = 0; s < per_sample.size(); ++s) {
    const SampleMetrics& m = per_sample[s];
    total.classification += m.classification;
    total.regression += m.regression;
    total.l_log += m.l_log;
    total.l_quad += m.l_quad;
    total.masked_count += m.masked;
  }
  if (total.masked_count > 0) {
    total.classification /= total.masked_count;
    total.regression /= total.masked_count;
    total.l_log /= total.masked_count;
    total.l_quad /= total.masked_count;
  }
  return total;
}

}  // namespace

MetricRecord evaluate(const std::vector<Sample>& dataset, const RegionGraph& graph,
                      const ConstraintSystem& system, const ParameterSet& params, double tol,
                      int workers) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  const int n = static_cast<int>(dataset.size());
  std::vector<SampleMetrics> per_sample(n);
#ifdef CVI_HAVE_OPENMP
  std::atomic<bool> failed{false};
  const int nthreads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (int s = 0; s < n; ++s) {
    if (failed.load(std::memory_order_relaxed)) {
      per_sample[s].error = kSkippedError;
      continue;
    }
    try {
      per_sample[s] = evaluate_one(dataset[s], graph, system, params, tol);
    } catch (const std::exception& e) {
      per_sample[s].error = e.what();
    }
    if (!per_sample[s].error.empty()) failed.store(true, std::memory_order_relaxed);
  }
  return reduce_metrics(per_sample);
#else
  (void)workers;
  return evaluate_serial(dataset, graph, system, params, tol);
#endif
}

MetricRecord evaluate_serial(const std::vector<Sample>& dataset, const RegionGraph& graph,
                             const ConstraintSystem& system, const ParameterSet& params,
                             double tol) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  std::vector<SampleMetrics> per_sample(dataset.size());
  for (size_t s = 0; s < dataset.size(); ++s) {
    per_sample[s] = evaluate_one(dataset[s], graph, system, params, tol);
    if (!per_sample[s].error.empty())
      throw std::runtime_error("sample " + std::to_string(s) + ": " + per_sample[s].error);
  }
  return reduce_metrics(per_sample);
}

}  // namespace cvi
