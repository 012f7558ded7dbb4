#include "cvi/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvi {

namespace {

int ipow(int base, int exp) {
  int out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

}  // namespace

int RegionGraph::region_configs(int r) const {
  return ipow(hidden_arity, static_cast<int>(regions[r].hidden.size()));
}

int RegionGraph::region_y_configs(int r) const {
  return ipow(observed_arity, static_cast<int>(regions[r].observed.size()));
}

int RegionGraph::y_config_of(int r, const ObservedAssignment& y) const {
  if (static_cast<int>(y.size()) != num_observed)
    throw std::invalid_argument("observed assignment has wrong length");
  int cfg = 0;
  for (int v : regions[r].observed) {
    const int s = y[v];
    if (s < 0 || s >= observed_arity)
      throw std::invalid_argument("observed state out of range");
    cfg = cfg * observed_arity + s;
  }
  return cfg;
}

int RegionGraph::config_state(int r, int xc, int p) const {
  const int k = static_cast<int>(regions[r].hidden.size());
  return (xc / ipow(hidden_arity, k - 1 - p)) % hidden_arity;
}

void RegionGraph::finalize() {
  belief_offsets.assign(regions.size(), 0);
  int off = 0;
  for (int r = 0; r < num_regions(); ++r) {
    belief_offsets[r] = off;
    off += region_configs(r);
  }
  total_beliefs = off;
  singleton_of_hidden.assign(num_hidden, -1);
  for (int r = 0; r < num_regions(); ++r)
    if (regions[r].kind == RegionKind::singleton)
      singleton_of_hidden[regions[r].hidden[0]] = r;
  validate();
}

void RegionGraph::validate() const {
  if (num_hidden < 1 || hidden_arity < 2 || observed_arity < 2)
    throw std::invalid_argument("invalid graph dimensions");
  for (int r = 0; r < num_regions(); ++r) {
    const Region& reg = regions[r];
    if (reg.kind == RegionKind::singleton && reg.hidden.size() != 1)
      throw std::invalid_argument("singleton region must contain exactly one hidden index");
    if (reg.kind == RegionKind::clique && reg.hidden.size() < 2)
      throw std::invalid_argument("clique region must contain at least two hidden indices");
    for (size_t p = 1; p < reg.hidden.size(); ++p)
      if (reg.hidden[p] <= reg.hidden[p - 1])
        throw std::invalid_argument("region hidden indices must be ascending");
    for (size_t p = 1; p < reg.observed.size(); ++p)
      if (reg.observed[p] <= reg.observed[p - 1])
        throw std::invalid_argument("region observed indices must be ascending");
    for (int v : reg.hidden)
      if (v < 0 || v >= num_hidden) throw std::invalid_argument("hidden index out of range");
    for (int v : reg.observed)
      if (v < 0 || v >= num_observed) throw std::invalid_argument("observed index out of range");
    if (reg.tie_group < 0 || reg.tie_group >= static_cast<int>(tie_groups.size()))
      throw std::invalid_argument("tie group out of range");
    const TieGroup& tg = tie_groups[reg.tie_group];
    if (static_cast<int>(reg.hidden.size()) != tg.hidden_size ||
        static_cast<int>(reg.observed.size()) != tg.observed_size)
      throw std::invalid_argument("tie group members must share hidden/observed sizes");
  }
  int off = 0;
  for (int r = 0; r < num_regions(); ++r) {
    if (belief_offsets[r] != off)
      throw std::invalid_argument("belief offsets are inconsistent");
    off += region_configs(r);
  }
  if (off != total_beliefs) throw std::invalid_argument("total belief length is inconsistent");
}

RegionGraph build_grid_model(int height, int width, int hidden_arity, int observed_arity) {
  if (height < 1 || width < 1) throw std::invalid_argument("grid dimensions must be positive");
  if (hidden_arity < 2 || observed_arity < 2) throw std::invalid_argument("arities must be >= 2");

  RegionGraph g;
  g.num_hidden = height * width;
  g.num_observed = height * width;
  g.hidden_arity = hidden_arity;
  g.observed_arity = observed_arity;
  g.grid_height = height;
  g.grid_width = width;

  const bool has_edges = height * width > 1;
  g.tie_groups.push_back({"node", 1, 1});
  if (has_edges) g.tie_groups.push_back({"edge", 2, 2});

  auto pix = [width](int r, int c) { return r * width + c; };

  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      Region reg;
      reg.hidden = {pix(r, c)};
      reg.observed = {pix(r, c)};
      reg.kind = RegionKind::singleton;
      reg.tie_group = 0;
      g.regions.push_back(std::move(reg));
    }
  // Horizontal then vertical edges, both row-major; one shared tie group.
  for (int r = 0; r < height; ++r)
    for (int c = 0; c + 1 < width; ++c) {
      Region reg;
      reg.hidden = {pix(r, c), pix(r, c + 1)};
      reg.observed = reg.hidden;
      reg.kind = RegionKind::clique;
      reg.tie_group = 1;
      g.regions.push_back(std::move(reg));
    }
  for (int r = 0; r + 1 < height; ++r)
    for (int c = 0; c < width; ++c) {
      Region reg;
      reg.hidden = {pix(r, c), pix(r + 1, c)};
      reg.observed = reg.hidden;
      reg.kind = RegionKind::clique;
      reg.tie_group = 1;
      g.regions.push_back(std::move(reg));
    }

  g.finalize();
  return g;
}

ParameterSet ParameterSet::zeros(const RegionGraph& graph, const ConvexFunctionFamily& family) {
  ParameterSet p;
  p.family = family;
  const int ngroups = static_cast<int>(graph.tie_groups.size());
  p.group_x_configs.resize(ngroups);
  p.group_y_configs.resize(ngroups);
  for (int gidx = 0; gidx < ngroups; ++gidx) {
    p.group_x_configs[gidx] = ipow(graph.hidden_arity, graph.tie_groups[gidx].hidden_size);
    p.group_y_configs[gidx] = ipow(graph.observed_arity, graph.tie_groups[gidx].observed_size);
  }
  p.raw.resize(family.size());
  for (auto& tables : p.raw) {
    tables.resize(ngroups);
    for (int gidx = 0; gidx < ngroups; ++gidx)
      tables[gidx] = Eigen::VectorXd::Zero(p.table_size(gidx));
  }
  return p;
}

int ParameterSet::num_params() const {
  int n = 0;
  for (int g = 0; g < num_groups(); ++g) n += table_size(g);
  return n * num_functions();
}

double ParameterSet::weight(int f, int g, int xc, int yc) const {
  const double v = raw_value(f, g, xc, yc);
  return family[f].positive_weights ? std::exp(v) : v;
}

int ParameterSet::encode(int f, int g, int xc, int yc) const {
  int base = 0;
  const int per_function = num_params() / num_functions();
  base += f * per_function;
  for (int gg = 0; gg < g; ++gg) base += table_size(gg);
  return base + xc * group_y_configs[g] + yc;
}

ParameterSet::ParamAddress ParameterSet::decode(int j) const {
  if (j < 0 || j >= num_params()) throw std::invalid_argument("parameter index out of range");
  const int per_function = num_params() / num_functions();
  ParamAddress a;
  a.f = j / per_function;
  int rem = j % per_function;
  a.group = 0;
  while (rem >= table_size(a.group)) {
    rem -= table_size(a.group);
    ++a.group;
  }
  a.x_config = rem / group_y_configs[a.group];
  a.y_config = rem % group_y_configs[a.group];
  return a;
}

Eigen::VectorXd ParameterSet::to_flat() const {
  Eigen::VectorXd theta(num_params());
  int k = 0;
  for (int f = 0; f < num_functions(); ++f)
    for (int g = 0; g < num_groups(); ++g)
      for (int i = 0; i < table_size(g); ++i) theta[k++] = raw[f][g][i];
  return theta;
}

void ParameterSet::from_flat(const Eigen::VectorXd& theta) {
  if (theta.size() != num_params()) throw std::invalid_argument("flat parameter length mismatch");
  int k = 0;
  for (int f = 0; f < num_functions(); ++f)
    for (int g = 0; g < num_groups(); ++g)
      for (int i = 0; i < table_size(g); ++i) raw[f][g][i] = theta[k++];
}

WeightVector realize_weights(const RegionGraph& graph, const ParameterSet& params,
                             const ObservedAssignment& y) {
  WeightVector w;
  w.per_f.resize(params.num_functions());
  for (auto& v : w.per_f) v.resize(graph.total_beliefs);
  for (int r = 0; r < graph.num_regions(); ++r) {
    const int yc = graph.y_config_of(r, y);
    const int off = graph.belief_offsets[r];
    const int g = graph.regions[r].tie_group;
    const int nx = graph.region_configs(r);
    for (int f = 0; f < params.num_functions(); ++f)
      for (int xc = 0; xc < nx; ++xc) w.per_f[f][off + xc] = params.weight(f, g, xc, yc);
  }
  return w;
}

WeightGradient dweights_dtheta(const RegionGraph& graph, const ParameterSet& params,
                               const ObservedAssignment& y, int j) {
  const ParameterSet::ParamAddress a = params.decode(j);
  WeightGradient grad;
  grad.f = a.f;
  const double dval = params.family[a.f].positive_weights
                          ? std::exp(params.raw_value(a.f, a.group, a.x_config, a.y_config))
                          : 1.0;
  for (int r = 0; r < graph.num_regions(); ++r) {
    if (graph.regions[r].tie_group != a.group) continue;
    if (graph.y_config_of(r, y) != a.y_config) continue;
    grad.index.push_back(graph.belief_offsets[r] + a.x_config);
    grad.value.push_back(dval);
  }
  return grad;
}

std::vector<double> bethe_counting_numbers(const RegionGraph& graph) {
  std::vector<int> membership(graph.num_hidden, 0);
  for (const Region& reg : graph.regions)
    if (reg.kind == RegionKind::clique)
      for (int v : reg.hidden) ++membership[v];
  std::vector<double> n(graph.num_regions());
  for (int r = 0; r < graph.num_regions(); ++r) {
    const Region& reg = graph.regions[r];
    n[r] = reg.kind == RegionKind::clique ? 1.0 : 1.0 - membership[reg.hidden[0]];
  }
  return n;
}

}  // namespace cvi
