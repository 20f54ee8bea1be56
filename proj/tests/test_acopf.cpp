#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opf/acopf.hpp"
#include "opf/ipm.hpp"
#include "opf/matpower.hpp"

using namespace opf;

namespace {

std::string pglib(const std::string& name) {
  return std::string(OPFBOUND_PGLIB_DIR) + "/" + name;
}

// lossless two-bus toy: one generator, one unit load over a pure reactance
Network two_bus_toy() {
  RawCase c;
  c.name = "toy";
  c.base_mva = 100.0;
  c.bus_rows = {{1, 3, 0, 0, 0, 0, 1, 1, 0, 230, 1, 1.1, 0.9},
                {2, 1, 100, 0, 0, 0, 1, 1, 0, 230, 1, 1.1, 0.9}};
  c.gen_rows = {{1, 0, 0, 100, -100, 1, 100, 1, 300, 0}};
  c.gencost_rows = {{2, 0, 0, 3, 0, 10, 0}};
  c.branch_rows = {{1, 2, 0, 0.1, 0, 0, 0, 0, 0, 0, 1, -30, 30}};
  return build_network(c);
}

}  // namespace

TEST_CASE("two-bus lossless toy balances") {
  Network net = two_bus_toy();
  auto [prob, map] = build_acopf(net);
  SolveResult res = solve(prob);
  REQUIRE(res.status == SolveStatus::Optimal);
  AcopfSolution sol = extract_solution(net, map, res.x);
  CHECK(sol.pg[0] == doctest::Approx(1.0).epsilon(1e-6));  // no real losses on r = 0
  CHECK(sol.objective == doctest::Approx(1000.0).epsilon(1e-4));
  FeasibilityReport rep = check_feasibility(net, map, res.x);
  CHECK(rep.max_violation() < 1e-6);
}

TEST_CASE("flat start values") {
  Network net = two_bus_toy();
  auto [prob, map] = build_acopf(net);
  std::vector<double> x = flat_start(net, map);
  CHECK(x[static_cast<size_t>(map.vr[0])] == doctest::Approx(1.0));  // midpoint of [0.9, 1.1]
  CHECK(x[static_cast<size_t>(map.vi[0])] == 0.0);
  CHECK(x[static_cast<size_t>(map.pg[0])] == doctest::Approx(1.5));  // midpoint of [0, 3]
  // equal voltages, no angle: every flow starts at zero
  CHECK(x[static_cast<size_t>(map.p_from[0])] == doctest::Approx(0.0));
  CHECK(x[static_cast<size_t>(map.q_from[0])] == doctest::Approx(0.0));
}

TEST_CASE("flat start violates KCL on a loaded case") {
  Network net = build_network(read_case(pglib("pglib_opf_case5_pjm.m")));
  auto [prob, map] = build_acopf(net);
  FeasibilityReport rep = check_feasibility(net, map, flat_start(net, map));
  CHECK(rep.kcl > 0.1);
  CHECK(rep.flow_def < 1e-12);  // flows are evaluated from the flat profile
}

TEST_CASE("converged case14 satisfies the independent checker") {
  Network net = build_network(read_case(pglib("pglib_opf_case14_ieee.m")));
  auto [prob, map] = build_acopf(net);
  SolveResult res = solve(prob);
  REQUIRE(res.status == SolveStatus::Optimal);
  FeasibilityReport rep = check_feasibility(net, map, res.x);
  CHECK(rep.max_violation() <= 1e-6);

  // checker agrees with the polynomial residuals
  ProblemDerivatives der(prob);
  Eigen::VectorXd cval;
  der.constraint_values(res.x, cval);
  double poly_viol = 0.0;
  for (size_t i = 0; i < prob.constraints.size(); ++i) {
    const auto& con = prob.constraints[i];
    poly_viol = std::max(poly_viol, con.lower - cval[static_cast<int>(i)]);
    poly_viol = std::max(poly_viol, cval[static_cast<int>(i)] - con.upper);
  }
  poly_viol = std::max(poly_viol, 0.0);
  CHECK(std::abs(poly_viol - rep.max_violation()) < 1e-6);
  // flow-definition rows agree to tighter precision
  CHECK(rep.flow_def <= 1e-10 + poly_viol);
}

TEST_CASE("every constraint in the model has degree at most 2") {
  Network net = build_network(read_case(pglib("pglib_opf_case14_ieee.m")));
  auto [prob, map] = build_acopf(net);
  for (const auto& con : prob.constraints) CHECK(con.poly.degree() <= 2);
}

TEST_CASE("empty single-bus network is trivially feasible at zero") {
  RawCase c;
  c.name = "null";
  c.base_mva = 100.0;
  c.bus_rows = {{1, 3, 0, 0, 0, 0, 1, 1, 0, 230, 1, 1.1, 0.9}};
  c.gen_rows = {{1, 0, 0, 100, -100, 1, 100, 1, 100, 0}};
  c.gencost_rows = {{2, 0, 0, 3, 0, 10, 0}};
  Network net = build_network(c);
  auto [prob, map] = build_acopf(net);
  std::vector<double> x(static_cast<size_t>(map.n_vars), 0.0);
  x[static_cast<size_t>(map.vr[0])] = 1.0;
  FeasibilityReport rep = check_feasibility(net, map, x);
  CHECK(rep.max_violation() == 0.0);
}

TEST_CASE("branch loss is nonnegative for positive conductance") {
  Network net = build_network(read_case(pglib("pglib_opf_case5_pjm.m")));
  auto [prob, map] = build_acopf(net);
  SolveResult res = solve(prob);
  REQUIRE(res.status == SolveStatus::Optimal);
  AcopfSolution sol = extract_solution(net, map, res.x);
  for (size_t e = 0; e < net.branches.size(); ++e) {
    if (net.branches[e].y.real() >= 0) {
      CHECK(sol.p_from[e] + sol.p_to[e] >= -1e-8);
    }
  }
}

TEST_CASE("scaling invariance on case5") {
  Network net = build_network(read_case(pglib("pglib_opf_case5_pjm.m")));
  auto [p1, m1] = build_acopf(net, 1.0);
  auto [p2, m2] = build_acopf(net, 1e-3);
  SolveResult r1 = solve(p1);
  SolveResult r2 = solve(p2);
  REQUIRE(r1.status == SolveStatus::Optimal);
  REQUIRE(r2.status == SolveStatus::Optimal);
  CHECK(r1.objective == doctest::Approx(r2.objective / 1e-3).epsilon(1e-4));
  AcopfSolution s1 = extract_solution(net, m1, r1.x);
  AcopfSolution s2 = extract_solution(net, m2, r2.x);
  for (size_t b = 0; b < net.buses.size(); ++b) {
    CHECK(std::abs(s1.voltage[b] - s2.voltage[b]) < 1e-5);
  }
}
