#include "cvi/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cvi {

namespace {

constexpr const char* kMagic = "cvi-model";
constexpr int kVersion = 1;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void bad(const std::string& what) {
  throw std::runtime_error("model file parse error: " + what);
}

}  // namespace

void save_model(const RegionGraph& graph, const ParameterSet& params, std::ostream& os) {
  if (graph.grid_height < 1 || graph.grid_width < 1)
    throw std::invalid_argument("only grid models are serializable");
  os << kMagic << " v" << kVersion << "\n";
  os << "grid " << graph.grid_height << " " << graph.grid_width << "\n";
  os << "arity " << graph.hidden_arity << " " << graph.observed_arity << "\n";
  os << "groups " << graph.tie_groups.size() << "\n";
  for (std::size_t g = 0; g < graph.tie_groups.size(); ++g)
    os << "group " << g << " " << graph.tie_groups[g].label << " hidden "
       << graph.tie_groups[g].hidden_size << " observed " << graph.tie_groups[g].observed_size
       << "\n";
  for (int f = 0; f < params.num_functions(); ++f)
    for (int g = 0; g < params.num_groups(); ++g) {
      const int rows = params.group_x_configs[g];
      const int cols = params.group_y_configs[g];
      os << "table " << params.family[f].name << " group " << g << " rows " << rows << " cols "
         << cols << "\n";
      for (int x = 0; x < rows; ++x) {
        for (int y = 0; y < cols; ++y) os << (y ? " " : "") << fmt17(params.weight(f, g, x, y));
        os << "\n";
      }
    }
  if (!os) throw std::runtime_error("model serialization failed");
}

void load_model(std::istream& is, RegionGraph& graph, ParameterSet& params) {
  std::string word;
  if (!(is >> word) || word != kMagic) bad("missing magic");
  if (!(is >> word) || word != "v" + std::to_string(kVersion)) bad("unsupported version " + word);

  int height = 0, width = 0, hidden_arity = 0, observed_arity = 0;
  if (!(is >> word) || word != "grid" || !(is >> height >> width)) bad("bad grid line");
  if (!(is >> word) || word != "arity" || !(is >> hidden_arity >> observed_arity))
    bad("bad arity line");
  graph = build_grid_model(height, width, hidden_arity, observed_arity);

  std::size_t ngroups = 0;
  if (!(is >> word) || word != "groups" || !(is >> ngroups)) bad("bad groups line");
  if (ngroups != graph.tie_groups.size()) bad("tie group count does not match grid");
  for (std::size_t g = 0; g < ngroups; ++g) {
    std::size_t idx;
    std::string label;
    int hsize, osize;
    if (!(is >> word) || word != "group" || !(is >> idx >> label) || !(is >> word) ||
        word != "hidden" || !(is >> hsize) || !(is >> word) || word != "observed" ||
        !(is >> osize))
      bad("bad group line");
    if (idx != g || hsize != graph.tie_groups[g].hidden_size ||
        osize != graph.tie_groups[g].observed_size)
      bad("group " + std::to_string(g) + " does not match grid");
    graph.tie_groups[g].label = label;
  }

  params = ParameterSet::zeros(graph, standard_family());
  const int expected_tables = params.num_functions() * params.num_groups();
  for (int t = 0; t < expected_tables; ++t) {
    std::string fname;
    int g, rows, cols;
    if (!(is >> word) || word != "table" || !(is >> fname) || !(is >> word) || word != "group" ||
        !(is >> g) || !(is >> word) || word != "rows" || !(is >> rows) || !(is >> word) ||
        word != "cols" || !(is >> cols))
      bad("bad table header");
    int f = -1;
    for (int k = 0; k < params.num_functions(); ++k)
      if (params.family[k].name == fname) f = k;
    if (f < 0) bad("unknown function '" + fname + "'");
    if (g < 0 || g >= params.num_groups() || rows != params.group_x_configs[g] ||
        cols != params.group_y_configs[g])
      bad("table shape mismatch for function '" + fname + "'");
    for (int x = 0; x < rows; ++x)
      for (int y = 0; y < cols; ++y) {
        double v;
        if (!(is >> v)) bad("truncated table for function '" + fname + "'");
        if (params.family[f].positive_weights) {
          if (!(v > 0.0)) bad("nonpositive weight for positivity-constrained function");
          v = std::log(v);
        }
        params.raw[f][g][x * cols + y] = v;
      }
  }
}

void save_model_file(const RegionGraph& graph, const ParameterSet& params,
                     const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    save_model(graph, params, out);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

std::pair<RegionGraph, ParameterSet> load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  RegionGraph graph;
  ParameterSet params;
  load_model(in, graph, params);
  return {std::move(graph), std::move(params)};
}

}  // namespace cvi
