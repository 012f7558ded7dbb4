#include "cvi/polytope.hpp"

#include <Eigen/QR>
#include <stdexcept>
#include <vector>

namespace cvi {

namespace {

constexpr double kPivotTol = 1e-10;

// Numerical full-row-rank check behind the analytic pruning rule:
// orthogonal-triangular factorization of A^T, smallest retained pivot must
// clear kPivotTol.
void verify_full_row_rank(const Eigen::SparseMatrix<double>& A) {
  const int m = static_cast<int>(A.rows());
  if (m == 0) return;
  Eigen::MatrixXd At = Eigen::MatrixXd(A).transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(At);
  const Eigen::MatrixXd& R = qr.matrixR();
  double smallest = std::abs(R(0, 0));
  for (int i = 0; i < m; ++i) smallest = std::min(smallest, std::abs(R(i, i)));
  if (smallest < kPivotTol)
    throw std::runtime_error("constraint system lost full row rank (internal construction error)");
}

}  // namespace

ConstraintSystem build_constraints(const RegionGraph& graph) {
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<RowTag> tags;
  std::vector<double> rhs;
  int row = 0;

  for (int r = 0; r < graph.num_regions(); ++r) {
    if (graph.regions[r].kind != RegionKind::clique) continue;
    const int off = graph.belief_offsets[r];
    for (int xc = 0; xc < graph.region_configs(r); ++xc) trip.emplace_back(row, off + xc, 1.0);
    tags.push_back({RowKind::clique_norm, r, -1, -1});
    rhs.push_back(1.0);
    ++row;
  }
  for (int r = 0; r < graph.num_regions(); ++r) {
    if (graph.regions[r].kind != RegionKind::singleton) continue;
    const int off = graph.belief_offsets[r];
    for (int xi = 0; xi < graph.hidden_arity; ++xi) trip.emplace_back(row, off + xi, 1.0);
    tags.push_back({RowKind::singleton_norm, r, -1, -1});
    rhs.push_back(1.0);
    ++row;
  }
  // Marginalization: sum_{x_c : x_c[i] = x_i} b_c(x_c) - b_i(x_i) = 0, kept
  // for all but the last state of each member.
  for (int r = 0; r < graph.num_regions(); ++r) {
    const Region& reg = graph.regions[r];
    if (reg.kind != RegionKind::clique) continue;
    const int off = graph.belief_offsets[r];
    const int nx = graph.region_configs(r);
    for (int p = 0; p < static_cast<int>(reg.hidden.size()); ++p) {
      const int i = reg.hidden[p];
      const int si = graph.singleton_of_hidden[i];
      if (si < 0)
        throw std::invalid_argument("clique member lacks a singleton region");
      for (int xi = 0; xi + 1 < graph.hidden_arity; ++xi) {
        for (int xc = 0; xc < nx; ++xc)
          if (graph.config_state(r, xc, p) == xi) trip.emplace_back(row, off + xc, 1.0);
        trip.emplace_back(row, graph.belief_offsets[si] + xi, -1.0);
        tags.push_back({RowKind::marginalization, r, i, xi});
        rhs.push_back(0.0);
        ++row;
      }
    }
  }

  ConstraintSystem sys;
  sys.A.resize(row, graph.total_beliefs);
  sys.A.setFromTriplets(trip.begin(), trip.end());
  sys.A.makeCompressed();
  sys.d = Eigen::Map<const Eigen::VectorXd>(rhs.data(), row);
  sys.row_tags = std::move(tags);
  verify_full_row_rank(sys.A);
  return sys;
}

double consistency_residual(const ConstraintSystem& system, const BeliefVector& b) {
  if (b.size() != system.cols())
    throw std::invalid_argument("belief length does not match constraint system");
  if (system.rows() == 0) return 0.0;
  return (system.A * b - system.d).cwiseAbs().maxCoeff();
}

BeliefVector uniform_beliefs(const RegionGraph& graph) {
  BeliefVector b(graph.total_beliefs);
  for (int r = 0; r < graph.num_regions(); ++r) {
    const int nx = graph.region_configs(r);
    b.segment(graph.belief_offsets[r], nx).setConstant(1.0 / nx);
  }
  return b;
}

}  // namespace cvi
