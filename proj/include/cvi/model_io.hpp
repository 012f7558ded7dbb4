#pragma once

#include <iosfwd>
#include <string>
#include <utility>

#include "cvi/model.hpp"

namespace cvi {

// Versioned human-readable model file: grid shape, arities, tie-group
// labels, and every weight table as decimal text with full round-trip
// precision (17 significant digits). Tables are written as realized
// weights (rows = hidden configs, columns = observed configs); the loader
// recovers pre-parameters of positivity-constrained functions by log.
void save_model(const RegionGraph& graph, const ParameterSet& params, std::ostream& os);
void load_model(std::istream& is, RegionGraph& graph, ParameterSet& params);

// File variants; saving writes to a temporary name and renames on success,
// so no partial model file is ever left behind.
void save_model_file(const RegionGraph& graph, const ParameterSet& params,
                     const std::string& path);
std::pair<RegionGraph, ParameterSet> load_model_file(const std::string& path);

}  // namespace cvi
