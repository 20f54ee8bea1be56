#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "opf/matpower.hpp"
#include "opf/network.hpp"

using namespace opf;

namespace {
std::string pglib(const std::string& name) {
  return std::string(OPFBOUND_PGLIB_DIR) + "/" + name;
}
RawCase case5() { return read_case(pglib("pglib_opf_case5_pjm.m")); }
}  // namespace

TEST_CASE("per-unit conversion formulas") {
  RawCase c = case5();
  Network net = build_network(c);

  SUBCASE("pure reactance branch") {
    c.branch_rows[0][col::BR_R] = 0.0;
    c.branch_rows[0][col::BR_X] = 0.1;
    Network n2 = build_network(c);
    CHECK(n2.branches[0].y.real() == doctest::Approx(0.0));
    CHECK(n2.branches[0].y.imag() == doctest::Approx(-10.0));
  }

  SUBCASE("thermal limit is the squared per-unit rating") {
    // RATE_A = 400 on a 100 MVA base
    CHECK(net.branches[0].t_limit == doctest::Approx(16.0));
  }

  SUBCASE("case5 branch (1,2) admittances by hand") {
    // r = 0.00281, x = 0.0281, b = 0.00712
    Complex y = 1.0 / Complex(0.00281, 0.0281);
    CHECK(net.branches[0].y.real() == doctest::Approx(y.real()).epsilon(1e-12));
    CHECK(net.branches[0].y.imag() == doctest::Approx(y.imag()).epsilon(1e-12));
    CHECK(net.branches[0].y_charge.imag() == doctest::Approx(0.00712 / 2));
    CHECK(net.branches[0].y_charge.real() == 0.0);
  }

  SUBCASE("demand and shunt are divided by the base") {
    CHECK(net.buses[1].demand.real() == doctest::Approx(3.0));
    CHECK(net.buses[1].demand.imag() == doctest::Approx(0.9861));
  }
}

TEST_CASE("(r + jx) * y recovers one for every built branch") {
  for (const char* name : {"pglib_opf_case5_pjm.m", "pglib_opf_case118_ieee.m"}) {
    RawCase c = read_case(pglib(name));
    Network net = build_network(c);
    size_t e = 0;
    for (const auto& row : c.branch_rows) {
      if (row[col::BR_STATUS] <= 0) continue;
      Complex z(row[col::BR_R], row[col::BR_X]);
      Complex unit = z * net.branches[e].y;
      CHECK(std::abs(unit - Complex(1.0, 0.0)) < 1e-12);
      ++e;
    }
  }
}

TEST_CASE("build_network is deterministic") {
  RawCase c = case5();
  Network a = build_network(c);
  Network b = build_network(c);
  REQUIRE(a.branches.size() == b.branches.size());
  for (size_t e = 0; e < a.branches.size(); ++e) {
    CHECK(a.branches[e].y == b.branches[e].y);
    CHECK(a.branches[e].t_ratio == b.branches[e].t_ratio);
  }
}

TEST_CASE("cost_value") {
  Generator g;
  g.cost_c0 = 0;
  g.cost_c1 = 14;
  g.cost_c2 = 0;
  CHECK(cost_value(g, 1.0, 100.0) == doctest::Approx(1400.0));
  g.cost_c1 = 0;
  g.cost_c2 = 0.01;
  CHECK(cost_value(g, 0.5, 100.0) == doctest::Approx(25.0));
}

TEST_CASE("angle bounds clamp to the half-pi window") {
  RawCase c = case5();
  c.branch_rows[0][col::ANGMIN] = -60.0;
  c.branch_rows[0][col::ANGMAX] = 95.0;  // beyond 90 degrees
  Network net = build_network(c);
  CHECK(net.branches[0].theta_min == doctest::Approx(-60.0 * M_PI / 180));
  CHECK(net.branches[0].theta_max == doctest::Approx(M_PI / 2));

  // MATPOWER treats 0/0 as unconstrained
  c.branch_rows[0][col::ANGMIN] = 0.0;
  c.branch_rows[0][col::ANGMAX] = 0.0;
  Network n2 = build_network(c);
  CHECK(n2.branches[0].theta_min == doctest::Approx(-M_PI / 2));
  CHECK(n2.branches[0].theta_max == doctest::Approx(M_PI / 2));
}

TEST_CASE("error paths") {
  SUBCASE("zero impedance") {
    RawCase c = case5();
    c.branch_rows[0][col::BR_R] = 0.0;
    c.branch_rows[0][col::BR_X] = 0.0;
    CHECK_THROWS_AS(build_network(c), ZeroImpedance);
  }
  SUBCASE("disconnected graph") {
    RawCase c = case5();
    for (auto& row : c.branch_rows) {
      if (row[col::F_BUS] == 4 || row[col::T_BUS] == 4) row[col::BR_STATUS] = 0;
    }
    CHECK_THROWS_AS(build_network(c), Disconnected);
  }
  SUBCASE("no in-service generators") {
    RawCase c = case5();
    for (auto& row : c.gen_rows) row[col::GEN_STATUS] = 0;
    CHECK_THROWS_AS(build_network(c), NoReferenceCost);
  }
}

TEST_CASE("out-of-service elements are dropped") {
  RawCase c = case5();
  c.gen_rows[1][col::GEN_STATUS] = 0;
  Network net = build_network(c);
  CHECK(net.generators.size() == 4);
  CHECK(net.branches.size() == 6);
  CHECK(net.ref_bus == 4);
}
