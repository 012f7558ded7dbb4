#pragma once

#include <string>
#include <vector>

namespace cvi {

// One scalar convex function on (0,1) with its first two derivatives.
// Members whose weights must stay positive are reparametrized elsewhere as
// w = exp(rho), so the outer optimization stays unconstrained.
struct ConvexFunction {
  std::string name;
  double (*value)(double);
  double (*deriv1)(double);
  double (*deriv2)(double);
  bool positive_weights;
};

using ConvexFunctionFamily = std::vector<ConvexFunction>;

// Indices of the shipped members in standard_family().
inline constexpr int kLinearFunction = 0;
inline constexpr int kEntropyFunction = 1;

// The shipped family {b, b log b}. Further convex functions can be appended
// by callers; all downstream code iterates the family generically.
const ConvexFunctionFamily& standard_family();

}  // namespace cvi
