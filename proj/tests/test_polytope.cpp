#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cvi/model.hpp"
#include "cvi/polytope.hpp"
#include "cvi/rng.hpp"

using namespace cvi;

namespace {

// Independent construction of the *unpruned* local-consistency system:
// all normalizations plus marginalization rows for every member state.
Eigen::MatrixXd unpruned_system(const RegionGraph& g, Eigen::VectorXd* rhs = nullptr) {
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> d;
  for (int r = 0; r < g.num_regions(); ++r) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(g.total_beliefs);
    for (int xc = 0; xc < g.region_configs(r); ++xc) row[g.belief_offsets[r] + xc] = 1.0;
    rows.push_back(row);
    d.push_back(1.0);
  }
  for (int r = 0; r < g.num_regions(); ++r) {
    const Region& reg = g.regions[r];
    if (reg.kind != RegionKind::clique) continue;
    for (int p = 0; p < static_cast<int>(reg.hidden.size()); ++p) {
      const int si = g.singleton_of_hidden[reg.hidden[p]];
      for (int xi = 0; xi < g.hidden_arity; ++xi) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(g.total_beliefs);
        for (int xc = 0; xc < g.region_configs(r); ++xc)
          if (g.config_state(r, xc, p) == xi) row[g.belief_offsets[r] + xc] = 1.0;
        row[g.belief_offsets[si] + xi] -= 1.0;
        rows.push_back(row);
        d.push_back(0.0);
      }
    }
  }
  Eigen::MatrixXd M(rows.size(), g.total_beliefs);
  for (size_t i = 0; i < rows.size(); ++i) M.row(i) = rows[i];
  if (rhs) *rhs = Eigen::Map<Eigen::VectorXd>(d.data(), d.size());
  return M;
}

// Brute-force Gaussian-elimination rank with partial pivoting.
int elimination_rank(Eigen::MatrixXd M, double tol = 1e-9) {
  int rank = 0;
  for (int col = 0; col < M.cols() && rank < M.rows(); ++col) {
    int piv = -1;
    double best = tol;
    for (int r = rank; r < M.rows(); ++r)
      if (std::abs(M(r, col)) > best) {
        best = std::abs(M(r, col));
        piv = r;
      }
    if (piv < 0) continue;
    M.row(piv).swap(M.row(rank));
    for (int r = rank + 1; r < M.rows(); ++r) M.row(r) -= M(r, col) / M(rank, col) * M.row(rank);
    ++rank;
  }
  return rank;
}

// Locally consistent beliefs obtained by marginalizing an explicit joint
// distribution over the hidden variables.
BeliefVector beliefs_from_joint(const RegionGraph& g, const Eigen::VectorXd& joint) {
  BeliefVector b = BeliefVector::Zero(g.total_beliefs);
  for (int s = 0; s < joint.size(); ++s) {
    // decode joint state, first variable most significant
    std::vector<int> x(g.num_hidden);
    int rem = s;
    for (int v = g.num_hidden - 1; v >= 0; --v) {
      x[v] = rem % g.hidden_arity;
      rem /= g.hidden_arity;
    }
    for (int r = 0; r < g.num_regions(); ++r) {
      int xc = 0;
      for (int v : g.regions[r].hidden) xc = xc * g.hidden_arity + x[v];
      b[g.belief_offsets[r] + xc] += joint[s];
    }
  }
  return b;
}

}  // namespace

TEST_CASE("1x1 model: the lone singleton normalization") {
  RegionGraph g = build_grid_model(1, 1, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  REQUIRE(sys.rows() == 1);
  CHECK(sys.d[0] == 1.0);
  Eigen::MatrixXd A(sys.A);
  CHECK(A(0, 0) == 1.0);
  CHECK(A(0, 1) == 1.0);
  CHECK(sys.row_tags[0].kind == RowKind::singleton_norm);
}

TEST_CASE("single-edge model: retained rows and unpruned rank agree") {
  RegionGraph g = build_grid_model(1, 2, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  CHECK(sys.rows() == 5);  // 1 clique norm + 2 singleton norms + 2 marginalizations

  Eigen::MatrixXd unpruned = unpruned_system(g);
  CHECK(unpruned.rows() == 7);
  CHECK(elimination_rank(unpruned) == 5);

  CHECK(consistency_residual(sys, uniform_beliefs(g)) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("2x2 grid: 16 retained rows, full rank, matches unpruned rank") {
  RegionGraph g = build_grid_model(2, 2, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  CHECK(sys.rows() == 16);
  CHECK(elimination_rank(unpruned_system(g)) == 16);
  CHECK(elimination_rank(Eigen::MatrixXd(sys.A)) == 16);
}

TEST_CASE("all A entries are in {-1, 0, +1} and rows match their tags") {
  RegionGraph g = build_grid_model(2, 3, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  Eigen::MatrixXd A(sys.A);
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      CHECK((A(i, j) == 0.0 || A(i, j) == 1.0 || A(i, j) == -1.0));

  for (int i = 0; i < sys.rows(); ++i) {
    const RowTag& tag = sys.row_tags[i];
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(g.total_beliefs);
    double rhs = 0.0;
    if (tag.kind == RowKind::clique_norm || tag.kind == RowKind::singleton_norm) {
      for (int xc = 0; xc < g.region_configs(tag.region); ++xc)
        expected[g.belief_offsets[tag.region] + xc] = 1.0;
      rhs = 1.0;
    } else {
      const Region& reg = g.regions[tag.region];
      int p = -1;
      for (int q = 0; q < static_cast<int>(reg.hidden.size()); ++q)
        if (reg.hidden[q] == tag.member_hidden) p = q;
      REQUIRE(p >= 0);
      for (int xc = 0; xc < g.region_configs(tag.region); ++xc)
        if (g.config_state(tag.region, xc, p) == tag.member_state)
          expected[g.belief_offsets[tag.region] + xc] = 1.0;
      expected[g.belief_offsets[g.singleton_of_hidden[tag.member_hidden]] + tag.member_state] -=
          1.0;
      rhs = 0.0;
    }
    CHECK((A.row(i).transpose() - expected).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sys.d[i] == rhs);
  }
}

TEST_CASE("consistency residual: hand-checked single-edge beliefs") {
  RegionGraph g = build_grid_model(1, 2, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  BeliefVector b(8);
  b << 1.0, 0.0,      // node 0
      0.5, 0.5,       // node 1
      0.5, 0.5, 0.0, 0.0;  // edge (x0,x1) row-major
  CHECK(consistency_residual(sys, b) == doctest::Approx(0.0).epsilon(1e-15));

  BeliefVector zeros = BeliefVector::Zero(8);
  CHECK(consistency_residual(sys, zeros) == 1.0);

  CHECK_THROWS_AS(consistency_residual(sys, BeliefVector::Zero(7)), std::invalid_argument);
}

TEST_CASE("uniform beliefs") {
  RegionGraph one = build_grid_model(1, 1, 2, 2);
  BeliefVector b1 = uniform_beliefs(one);
  CHECK(b1[0] == 0.5);
  CHECK(b1[1] == 0.5);

  RegionGraph edge = build_grid_model(1, 2, 2, 2);
  BeliefVector b2 = uniform_beliefs(edge);
  for (int k = 4; k < 8; ++k) CHECK(b2[k] == 0.25);

  RegionGraph tern = build_grid_model(1, 1, 3, 2);
  BeliefVector b3 = uniform_beliefs(tern);
  for (int k = 0; k < 3; ++k) CHECK(b3[k] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  CHECK(consistency_residual(build_constraints(edge), b2) == 0.0);
}

TEST_CASE("marginalized random joints are locally consistent") {
  RegionGraph g = build_grid_model(2, 2, 2, 2);  // 4 binary variables
  ConstraintSystem sys = build_constraints(g);
  SeededRng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd joint(16);
    for (int s = 0; s < 16; ++s) joint[s] = rng.uniform01() + 1e-3;
    joint /= joint.sum();
    CHECK(consistency_residual(sys, beliefs_from_joint(g, joint)) <= 1e-12);
  }
}

TEST_CASE("pruning soundness: pruned solutions satisfy every unpruned row") {
  RegionGraph g = build_grid_model(2, 2, 2, 2);
  ConstraintSystem sys = build_constraints(g);
  Eigen::MatrixXd A(sys.A);
  Eigen::VectorXd d_unpruned;
  Eigen::MatrixXd U = unpruned_system(g, &d_unpruned);

  // particular solution + random kernel directions of the pruned system
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  Eigen::VectorXd particular = lu.solve(sys.d);
  Eigen::MatrixXd kernel = lu.kernel();
  SeededRng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd z(kernel.cols());
    for (int k = 0; k < z.size(); ++k) z[k] = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd b = particular + kernel * z;
    REQUIRE((A * b - sys.d).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((U * b - d_unpruned).cwiseAbs().maxCoeff() <= 1e-10);
  }
}
