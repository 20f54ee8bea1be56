#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "opf/ipm.hpp"

using namespace opf;
using P = Polynomial;
constexpr double kInf = std::numeric_limits<double>::infinity();

TEST_CASE("active-bound QP: min x^2 s.t. x >= 1") {
  PolyProblem prob;
  prob.add_var("x", 1.0, kInf, 2.0);
  prob.objective = P::term(1.0, {0, 0});
  SolveResult res = solve(prob);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.z_lower[0] == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("degenerate LP: min x+y s.t. x+y = 2") {
  PolyProblem prob;
  prob.add_var("x", 0.0, 2.0, 0.5);
  prob.add_var("y", 0.0, 2.0, 0.5);
  prob.objective = P::variable(0) + P::variable(1);
  prob.add_constraint(P::variable(0) + P::variable(1), 2.0, 2.0, "sum");
  SolveResult res = solve(prob);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.objective == doctest::Approx(2.0).epsilon(1e-8));
  REQUIRE(res.eq_multipliers.size() == 1);
  CHECK(res.eq_multipliers[0] == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("equality-constrained quadratic with an inequality") {
  // min (x-2)^2 + (y-1)^2  s.t. x + y <= 2, x - y = 0  ->  x = y = 1
  PolyProblem prob;
  prob.add_var("x", -10, 10, 0);
  prob.add_var("y", -10, 10, 0);
  prob.objective = P::term(1, {0, 0}) + P::term(-4, {0}) + P::constant(4) + P::term(1, {1, 1}) +
                   P::term(-2, {1}) + P::constant(1);
  prob.add_constraint(P::variable(0) + P::variable(1), -kInf, 2.0, "cap");
  prob.add_constraint(P::variable(0) - P::variable(1), 0.0, 0.0, "tie");
  SolveResult res = solve(prob);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("returned kkt record matches independent recomputation") {
  PolyProblem prob;
  prob.add_var("x", 0.0, 5.0, 1.0);
  prob.add_var("y", 0.0, 5.0, 1.0);
  prob.objective = P::term(1, {0, 0}) + P::term(0.5, {1, 1}) + P::term(0.25, {0, 1});
  prob.add_constraint(P::variable(0) + P::variable(1), 1.0, kInf, "floor");
  SolveResult res = solve(prob);
  REQUIRE(res.status == SolveStatus::Optimal);
  KktResiduals again =
      kkt_residuals(prob, res.x, res.con_multipliers, res.z_lower, res.z_upper);
  CHECK(std::abs(again.stationarity - res.kkt.stationarity) <= 1e-12);
  CHECK(std::abs(again.feasibility - res.kkt.feasibility) <= 1e-12);
  CHECK(std::abs(again.complementarity - res.kkt.complementarity) <= 1e-12);
  CHECK(res.kkt.stationarity <= 1e-6);
  CHECK(res.kkt.feasibility <= 1e-6);
  CHECK(res.kkt.complementarity <= 1e-6);
}

TEST_CASE("kkt_residuals flags a perturbed point") {
  PolyProblem prob;
  prob.add_var("x", 1.0, kInf, 2.0);
  prob.objective = P::term(1.0, {0, 0});
  SolveResult res = solve(prob);
  REQUIRE(res.status == SolveStatus::Optimal);
  std::vector<double> x = res.x;
  x[0] += 0.1;
  KktResiduals r = kkt_residuals(prob, x, res.con_multipliers, res.z_lower, res.z_upper);
  CHECK(std::max(r.stationarity, r.feasibility) > 1e-3);
}

TEST_CASE("identical inputs give identical iterate history") {
  PolyProblem prob;
  prob.add_var("x", -2.0, 3.0, 0.3);
  prob.add_var("y", -2.0, 3.0, -0.4);
  prob.objective = P::term(1, {0, 0}) + P::term(1, {1, 1}) + P::term(0.7, {0});
  prob.add_constraint(P::term(1, {0, 0}) + P::variable(1), -kInf, 1.0);
  SolveResult a = solve(prob);
  SolveResult b = solve(prob);
  REQUIRE(a.status == b.status);
  CHECK(a.iterations == b.iterations);
  CHECK(a.x == b.x);  // bitwise
  CHECK(a.objective == b.objective);
}

TEST_CASE("infeasible problem is not reported optimal") {
  PolyProblem prob;
  prob.add_var("x", 0.0, 1.0, 0.5);
  prob.add_constraint(P::variable(0), 2.0, 3.0, "impossible");
  prob.objective = P::variable(0);
  IpmOptions opts;
  opts.max_iter = 200;
  SolveResult res = solve(prob, opts);
  CHECK(res.status != SolveStatus::Optimal);
}

TEST_CASE("iteration limit is respected and reported") {
  PolyProblem prob;
  prob.add_var("x", -5, 5, 4.0);
  prob.objective = P::term(1, {0, 0});
  IpmOptions opts;
  opts.max_iter = 1;
  SolveResult res = solve(prob, opts);
  CHECK((res.status == SolveStatus::IterLimit || res.status == SolveStatus::Optimal));
  CHECK(res.iterations <= 2);
}
