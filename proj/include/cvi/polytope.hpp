#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "cvi/model.hpp"

namespace cvi {

enum class RowKind { clique_norm, singleton_norm, marginalization };

// Provenance of one retained constraint row.
struct RowTag {
  RowKind kind = RowKind::clique_norm;
  int region = 0;        // clique or singleton region index
  int member_hidden = -1;  // marginalization only: hidden variable i
  int member_state = -1;   // marginalization only: state x_i
};

// Full-row-rank linear equality system A b = d encoding local consistency.
// Entries of A are in {-1, 0, +1}. Immutable after construction.
struct ConstraintSystem {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd d;
  std::vector<RowTag> row_tags;

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
};

// Builds the local-consistency system: one normalization row per clique and
// per singleton, and per (clique, member) marginalization rows for all but
// the last state of the member (the dropped row is implied by the retained
// rows plus the two normalizations). Row order: clique norms, singleton
// norms, then marginalization rows in region order. Full row rank is
// verified numerically at construction.
ConstraintSystem build_constraints(const RegionGraph& graph);

// Max-abs residual of the equality system at b.
double consistency_residual(const ConstraintSystem& system, const BeliefVector& b);

// Uniform distribution on every region's block; strictly positive and
// exactly locally consistent, used as the interior start point.
BeliefVector uniform_beliefs(const RegionGraph& graph);

}  // namespace cvi
