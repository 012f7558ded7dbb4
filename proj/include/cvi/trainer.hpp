#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cvi/loss.hpp"
#include "cvi/model.hpp"
#include "cvi/polytope.hpp"

namespace cvi {

struct TrainConfig {
  LossKind loss = LossKind::log;
  int stage1_iters = 100;  // linear tables only, entropy pre-parameters frozen at 0
  int stage2_iters = 100;  // all parameters
  double inner_tol = 1e-10;
  int lbfgs_memory = 10;
  double grad_tol = 1e-6;  // stop when the outer gradient inf-norm drops below
  std::uint64_t seed = 0;  // recorded in traces/reports; training is deterministic
  int workers = 0;         // <= 0: all cores

  void validate() const;
};

struct TraceRow {
  int iteration = 0;       // global outer-iteration index, 1-based
  std::string stage;       // "frozen" | "full"
  double risk = 0.0;       // empirical risk at the iterate before the step
  double grad_norm = 0.0;  // inf-norm of the (masked) gradient
  double step = 0.0;       // accepted line-search step length
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::string stop_reason;
  double initial_risk = 0.0;
  double final_risk = 0.0;
};

// CSV stream of the trace: iteration, stage, risk, grad_norm, step.
void write_trace_csv(const TrainTrace& trace, std::ostream& os);

// All linear tables 0, all entropy pre-parameters 0 (entropy weights 1):
// inference under these parameters yields uniform beliefs for every y.
ParameterSet init_parameters(const RegionGraph& graph);

// Two-stage quasi-Newton (limited-memory BFGS with backtracking) descent on
// the empirical risk. Stage 1 masks the gradient of every positivity
// pre-parameter, leaving those entries bit-unchanged; stage 2 optimizes all
// parameters. Line-search failure stops early with the reason in the trace;
// a non-finite risk aborts.
std::pair<ParameterSet, TrainTrace> train(const std::vector<Sample>& dataset,
                                          const RegionGraph& graph,
                                          const ConstraintSystem& system,
                                          const TrainConfig& config);

// Per-pixel metrics over the masked variables of a dataset: classification
// error of the highest-belief state (ties predict the lowest state),
// regression error (xhat_i - b_i(1))^2, and both losses.
struct MetricRecord {
  double classification = 0.0;
  double regression = 0.0;
  double l_log = 0.0;
  double l_quad = 0.0;
  long masked_count = 0;
};

MetricRecord evaluate(const std::vector<Sample>& dataset, const RegionGraph& graph,
                      const ConstraintSystem& system, const ParameterSet& params, double tol,
                      int workers = 0);

// Serial reference for the parallel evaluate kernel.
MetricRecord evaluate_serial(const std::vector<Sample>& dataset, const RegionGraph& graph,
                             const ConstraintSystem& system, const ParameterSet& params,
                             double tol);

}  // namespace cvi
