#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cvi/convex_family.hpp"

namespace cvi {

// Flat vector of pseudomarginals over all (region, configuration) pairs,
// laid out per RegionGraph::belief_offsets.
using BeliefVector = Eigen::VectorXd;

// One state per observed variable.
using ObservedAssignment = std::vector<int>;

enum class RegionKind { singleton, clique };

struct Region {
  std::vector<int> hidden;    // ascending hidden-variable indices
  std::vector<int> observed;  // ascending observed-variable indices
  RegionKind kind = RegionKind::singleton;
  int tie_group = 0;
};

// Regions sharing one tie group share one weight table per convex function.
struct TieGroup {
  std::string label;
  int hidden_size = 0;
  int observed_size = 0;
};

// Regions (cliques and singletons) over hidden and observed variables,
// with tying groups and the flat belief layout. Immutable after
// construction; safe for concurrent read-only use.
struct RegionGraph {
  int num_hidden = 0;
  int num_observed = 0;
  int hidden_arity = 2;
  int observed_arity = 2;
  int grid_height = 0;  // 0 when not built from a grid
  int grid_width = 0;
  std::vector<Region> regions;
  std::vector<TieGroup> tie_groups;
  std::vector<int> belief_offsets;  // start of each region's block
  int total_beliefs = 0;
  std::vector<int> singleton_of_hidden;  // region index, -1 if none

  int num_regions() const { return static_cast<int>(regions.size()); }
  // Number of hidden configurations of region r: hidden_arity^{|hidden(r)|}.
  int region_configs(int r) const;
  int region_y_configs(int r) const;
  // Row-major flatten of y restricted to region r's observed set, ascending
  // variable order with the first variable most significant.
  int y_config_of(int r, const ObservedAssignment& y) const;
  // State of the p-th hidden variable of region r under flat config xc.
  int config_state(int r, int xc, int p) const;

  // Recomputes belief_offsets, total_beliefs and singleton_of_hidden from
  // the region list, then checks the structural invariants.
  void finalize();
  void validate() const;
};

// Grid of one singleton region per pixel (tied to its own observed pixel)
// plus one clique region per horizontally or vertically adjacent pair
// (tied to the observed pair at the same locations). Two tie groups: all
// singletons, all edges.
RegionGraph build_grid_model(int height, int width, int hidden_arity, int observed_arity);

// The learnable weight tables theta: one table per (convex function, tie
// group), indexed by (hidden config, observed config) row-major with the
// hidden config as the row. Positivity-constrained functions store
// pre-parameters rho with realized weight exp(rho).
struct ParameterSet {
  ConvexFunctionFamily family;
  // raw[f][g], flattened x_config * y_configs + y_config
  std::vector<std::vector<Eigen::VectorXd>> raw;
  std::vector<int> group_x_configs;
  std::vector<int> group_y_configs;

  static ParameterSet zeros(const RegionGraph& graph,
                            const ConvexFunctionFamily& family = standard_family());

  int num_functions() const { return static_cast<int>(family.size()); }
  int num_groups() const { return static_cast<int>(group_x_configs.size()); }
  int table_size(int g) const { return group_x_configs[g] * group_y_configs[g]; }
  int num_params() const;

  double raw_value(int f, int g, int xc, int yc) const {
    return raw[f][g][xc * group_y_configs[g] + yc];
  }
  // Realized weight: exp(raw) for positivity-constrained functions.
  double weight(int f, int g, int xc, int yc) const;

  struct ParamAddress {
    int f = 0;
    int group = 0;
    int x_config = 0;
    int y_config = 0;
  };
  // Flat parameter order: function-major, then group, then table row-major.
  int encode(int f, int g, int xc, int yc) const;
  ParamAddress decode(int j) const;

  Eigen::VectorXd to_flat() const;
  void from_flat(const Eigen::VectorXd& theta);
};

// Per-function weight vectors aligned with the belief layout, realized for
// one observation (the w_f(y) of the vectorized objective).
struct WeightVector {
  std::vector<Eigen::VectorXd> per_f;
};

WeightVector realize_weights(const RegionGraph& graph, const ParameterSet& params,
                             const ObservedAssignment& y);

// Sparse derivative of the weight vectors with respect to one flat
// parameter; the support lies in a single function's vector. Entries are 1
// for raw weights and exp(rho) through the reparametrization. Tying makes
// this an indicator over every region of the parameter's group whose
// observed configuration matches.
struct WeightGradient {
  int f = 0;
  std::vector<int> index;
  std::vector<double> value;
};

WeightGradient dweights_dtheta(const RegionGraph& graph, const ParameterSet& params,
                               const ObservedAssignment& y, int j);

// Bethe counting numbers: 1 for every clique, 1 - (number of containing
// cliques) for every singleton. Diagnostic and initialization helper;
// negative values are legal here and never become entropy weights.
std::vector<double> bethe_counting_numbers(const RegionGraph& graph);

}  // namespace cvi
