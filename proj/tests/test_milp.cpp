#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "loadattack/milp.hpp"
#include "oracles.hpp"

using namespace loadattack;
using namespace loadattack::milp;

namespace {

LinearProgram empty_lp(int n) {
  LinearProgram lp;
  lp.c = Eigen::VectorXd::Zero(n);
  lp.a_eq = Eigen::MatrixXd(0, n);
  lp.b_eq = Eigen::VectorXd(0);
  lp.a_ub = Eigen::MatrixXd(0, n);
  lp.b_ub = Eigen::VectorXd(0);
  lp.lower = Eigen::VectorXd::Zero(n);
  lp.upper = Eigen::VectorXd::Constant(n, kInf);
  return lp;
}

void expect_certified(const LinearProgram& lp, const LPSolution& s) {
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_LE(max_row_violation(lp, s.x), Tol::row);
  EXPECT_LE(max_bound_violation(lp, s.x), Tol::bound);
  EXPECT_NEAR(s.objective, lp.c.dot(s.x), 1e-9 * (1.0 + std::abs(s.objective)));
}

}  // namespace

TEST(Simplex, TextbookMaximization) {
  // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
  auto lp = empty_lp(2);
  lp.c << -3, -5;
  lp.a_ub.resize(3, 2);
  lp.a_ub << 1, 0, 0, 2, 3, 2;
  lp.b_ub.resize(3);
  lp.b_ub << 4, 12, 18;
  const auto s = solve_lp(lp);
  expect_certified(lp, s);
  EXPECT_NEAR(s.objective, -36.0, 1e-9);
  EXPECT_NEAR(s.x(0), 2.0, 1e-9);
  EXPECT_NEAR(s.x(1), 6.0, 1e-9);
}

TEST(Simplex, EqualityAndNegativeRhsNeedPhaseOne) {
  // min x + y  s.t. x + y = 3, x - y >= 1 (written as -x + y <= -1)
  auto lp = empty_lp(2);
  lp.c << 1, 2;
  lp.a_eq.resize(1, 2);
  lp.a_eq << 1, 1;
  lp.b_eq.resize(1);
  lp.b_eq << 3;
  lp.a_ub.resize(1, 2);
  lp.a_ub << -1, 1;
  lp.b_ub.resize(1);
  lp.b_ub << -1;
  const auto s = solve_lp(lp);
  expect_certified(lp, s);
  EXPECT_NEAR(s.x(0), 3.0, 1e-9);
  EXPECT_NEAR(s.x(1), 0.0, 1e-9);
}

TEST(Simplex, DetectsInfeasible) {
  auto lp = empty_lp(1);
  lp.c << 1;
  lp.upper << 2;
  lp.a_ub.resize(1, 1);
  lp.a_ub << -1;
  lp.b_ub.resize(1);
  lp.b_ub << -5;  // x >= 5
  EXPECT_EQ(solve_lp(lp).status, Status::Infeasible);
}

TEST(Simplex, DetectsUnbounded) {
  auto lp = empty_lp(2);
  lp.c << -1, 0;
  lp.a_ub.resize(1, 2);
  lp.a_ub << 1, -1;
  lp.b_ub.resize(1);
  lp.b_ub << 1;
  EXPECT_EQ(solve_lp(lp).status, Status::Unbounded);
}

TEST(Simplex, FreeVariablesAndNegativeBounds) {
  // min |x - 2| style: min t s.t. t >= x - 2, t >= 2 - x, x free, t free
  auto lp = empty_lp(2);
  lp.c << 0, 1;
  lp.lower << -kInf, -kInf;
  lp.a_ub.resize(2, 2);
  lp.a_ub << 1, -1, -1, -1;
  lp.b_ub.resize(2);
  lp.b_ub << 2, -2;
  const auto s = solve_lp(lp);
  expect_certified(lp, s);
  EXPECT_NEAR(s.objective, 0.0, 1e-9);
  EXPECT_NEAR(s.x(0), 2.0, 1e-9);
}

TEST(Simplex, BealeCyclingExampleTerminates) {
  // Classic instance that cycles under naive Dantzig pricing without safeguards.
  auto lp = empty_lp(4);
  lp.c << -0.75, 150, -0.02, 6;
  lp.a_ub.resize(3, 4);
  lp.a_ub << 0.25, -60, -0.04, 9, 0.5, -90, -0.02, 3, 0, 0, 1, 0;
  lp.b_ub.resize(3);
  lp.b_ub << 0, 0, 1;
  const auto s = solve_lp(lp);
  expect_certified(lp, s);
  EXPECT_NEAR(s.objective, -0.05, 1e-9);
}

TEST(Simplex, ReducedCostsCertifyOptimality) {
  auto lp = empty_lp(3);
  lp.c << 2, 3, 1;
  lp.upper << 10, 10, 1;
  lp.a_ub.resize(1, 3);
  lp.a_ub << -1, -1, -1;
  lp.b_ub.resize(1);
  lp.b_ub << -4;
  const auto s = solve_lp(lp);
  expect_certified(lp, s);
  EXPECT_NEAR(s.objective, 1.0 + 3 * 2.0, 1e-9);
  ASSERT_EQ(s.reduced_costs.size(), 3);
  // x2 sits at its upper bound with a negative reduced cost; x1 at lower with positive.
  EXPECT_LT(s.reduced_costs(2), 0.0);
  EXPECT_GT(s.reduced_costs(1), 0.0);
}

TEST(Simplex, RejectsMalformedInput) {
  auto lp = empty_lp(2);
  lp.lower << 1, 0;
  lp.upper << 0, 1;
  try {
    solve_lp(lp);
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
  }
  auto bad = empty_lp(2);
  bad.b_ub = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(solve_lp(bad), Error);
}

TEST(Simplex, MatchesVertexEnumerationOnRandomLPs) {
  std::mt19937_64 rng(20240611);
  int checked = 0;
  while (checked < 60) {
    std::uniform_int_distribution<int> nd(2, 7), md(0, 2), ud(1, 5);
    const int n = nd(rng);
    const int meq = std::min(md(rng), n - 1);
    auto lp = oracle::random_feasible_lp(rng, n, meq, ud(rng));
    if (meq > 0 && Eigen::FullPivLU<Eigen::MatrixXd>(lp.a_eq).rank() < meq) continue;
    const auto ref = oracle::vertex_enumeration(lp);
    ASSERT_TRUE(ref.feasible);
    const auto s = solve_lp(lp);
    expect_certified(lp, s);
    EXPECT_NEAR(s.objective, ref.objective, 1e-7) << "instance " << checked;
    ++checked;
  }
}

TEST(BranchAndBound, KnapsackSmall) {
  // max 10a + 13b + 7c  s.t. 4a + 6b + 3c <= 9
  ModelBuilder mb;
  auto a = mb.add_var(0, 1, -10, true);
  auto b = mb.add_var(0, 1, -13, true);
  auto c = mb.add_var(0, 1, -7, true);
  mb.add_le({{a, 4}, {b, 6}, {c, 3}}, 9);
  const auto mip = mb.build();
  const auto s = solve_milp(mip);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective, -20.0, 1e-9);
  EXPECT_EQ(std::round(s.x(b)), 1.0);
  EXPECT_EQ(std::round(s.x(c)), 1.0);
}

TEST(BranchAndBound, InfeasibleIntegerProblem) {
  // a + b = 1.5 has LP solutions but no binary ones.
  ModelBuilder mb;
  auto a = mb.add_var(0, 1, 1, true);
  auto b = mb.add_var(0, 1, 1, true);
  mb.add_eq({{a, 1}, {b, 1}}, 1.5);
  EXPECT_EQ(solve_milp(mb.build()).status, Status::Infeasible);
}

TEST(BranchAndBound, AllBinariesFixedReducesToLP) {
  ModelBuilder mb;
  auto a = mb.add_var(1, 1, 5, true);
  auto x = mb.add_var(0, 10, 1);
  mb.add_ge({{x, 1}, {a, -3}}, 0);
  const auto mip = mb.build();
  const auto s = solve_milp(mip);
  const auto l = solve_lp(mip.lp);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective, l.objective, 1e-12);
  EXPECT_NEAR(s.x(x), 3.0, 1e-9);
}

TEST(BranchAndBound, NodeLimitReturnsIncumbentFlag) {
  std::mt19937_64 rng(7);
  auto mip = oracle::random_feasible_mip(rng, 10, 2, 6);
  BnBConfig cfg;
  cfg.node_limit = 1;
  const auto s = solve_milp(mip, cfg);
  EXPECT_TRUE(s.status == Status::NodeLimit || s.status == Status::Optimal);
  if (s.status == Status::NodeLimit) EXPECT_TRUE(s.node_limit_hit);
}

TEST(BranchAndBound, MatchesBinaryEnumeration) {
  std::mt19937_64 rng(99);
  for (int inst = 0; inst < 30; ++inst) {
    std::uniform_int_distribution<int> bd(2, 8), cd(0, 3), md(1, 6);
    const auto mip = oracle::random_feasible_mip(rng, bd(rng), cd(rng), md(rng));
    const auto ref = oracle::binary_enumeration(mip);
    ASSERT_TRUE(ref.feasible);
    const auto s = solve_milp(mip);
    ASSERT_EQ(s.status, Status::Optimal) << inst;
    EXPECT_NEAR(s.objective, ref.objective, 1e-6) << inst;
    for (auto j : mip.binaries) {
      const double v = s.x(static_cast<Eigen::Index>(j));
      EXPECT_TRUE(v == 0.0 || v == 1.0);
    }
    EXPECT_LE(max_row_violation(mip.lp, s.x), Tol::row);
  }
}

TEST(Mps, RoundTripPreservesInstance) {
  std::mt19937_64 rng(3);
  auto mip = oracle::random_feasible_mip(rng, 4, 2, 3);
  mip.lp.lower(5) = -kInf;
  mip.lp.a_eq = Eigen::MatrixXd::Zero(1, 6);
  mip.lp.a_eq(0, 4) = 1.0;
  mip.lp.a_eq(0, 5) = 1.0;
  mip.lp.b_eq = Eigen::VectorXd::Constant(1, 0.5);
  std::stringstream ss;
  write_mps(ss, mip);
  const auto back = read_mps(ss);
  EXPECT_EQ(back.binaries, mip.binaries);
  EXPECT_TRUE(back.lp.c.isApprox(mip.lp.c));
  EXPECT_TRUE(back.lp.a_ub.isApprox(mip.lp.a_ub));
  EXPECT_TRUE(back.lp.a_eq.isApprox(mip.lp.a_eq));
  EXPECT_TRUE(back.lp.b_ub.isApprox(mip.lp.b_ub));
  EXPECT_EQ(back.lp.lower(5), -kInf);
  EXPECT_EQ(back.lp.upper(5), 4.0);
  EXPECT_NEAR(solve_milp(back).objective, solve_milp(mip).objective, 1e-9);
}
