#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "opf/matpower.hpp"

using namespace opf;

namespace {

std::string pglib(const std::string& name) {
  return std::string(OPFBOUND_PGLIB_DIR) + "/" + name;
}

const char* kTwoBus = R"(function mpc = two_bus
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0   0  0 0 1 1 0 230 1 1.1 0.9;
  2 1 100 30 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 100 -100 1 100 1 200 0;
];
mpc.gencost = [
  2 0 0 3 0.0 10.0 0.0;
];
mpc.branch = [
  1 2 0.01 0.1 0.02 250 250 250 0 0 1 -30 30;
];
)";

}  // namespace

TEST_CASE("minimal two-bus case parses with expected row counts") {
  RawCase c = parse_matpower(std::string(kTwoBus));
  CHECK(c.name == "two_bus");
  CHECK(c.base_mva == 100.0);
  CHECK(c.bus_rows.size() == 2);
  CHECK(c.gen_rows.size() == 1);
  CHECK(c.branch_rows.size() == 1);
  CHECK(c.gencost_rows.size() == 1);
  CHECK(c.branch_rows[0][col::BR_X] == 0.1);
}

TEST_CASE("pglib case5 row counts") {
  RawCase c = read_case(pglib("pglib_opf_case5_pjm.m"));
  CHECK(c.bus_rows.size() == 5);
  CHECK(c.gen_rows.size() == 5);
  CHECK(c.branch_rows.size() == 6);
  CHECK(c.gencost_rows.size() == 5);
}

TEST_CASE("missing gencost block raises MissingField") {
  std::string text(kTwoBus);
  auto pos = text.find("mpc.gencost");
  text.erase(pos, text.find("];", pos) + 2 - pos);
  CHECK_THROWS_AS(parse_matpower(text), MissingField);
}

TEST_CASE("ragged matrix raises MalformedMatrix") {
  std::string text(kTwoBus);
  text.replace(text.find("2 1 100 30 0 0 1 1 0 230 1 1.1 0.9;"), 35, "2 1 100 30 0 0 1;");
  CHECK_THROWS_AS(parse_matpower(text), MalformedMatrix);
}

TEST_CASE("non-numeric token raises NumericParse") {
  std::string text(kTwoBus);
  text.replace(text.find("0.01"), 4, "zzzz");
  CHECK_THROWS_AS(parse_matpower(text), NumericParse);
}

TEST_CASE("comments and whitespace do not change the parse") {
  RawCase base = parse_matpower(std::string(kTwoBus));
  std::string noisy(kTwoBus);
  noisy.insert(noisy.find("  2 1 100"), "% a comment between rows\n   \n");
  noisy.insert(noisy.find("mpc.gen = ["), "% another comment\n");
  RawCase c = parse_matpower(noisy);
  CHECK(c.bus_rows == base.bus_rows);
  CHECK(c.gen_rows == base.gen_rows);
  CHECK(c.branch_rows == base.branch_rows);
  CHECK(c.gencost_rows == base.gencost_rows);
}

TEST_CASE("serialize and reparse reproduces all tables bit-exactly") {
  RawCase a = read_case(pglib("pglib_opf_case5_pjm.m"));
  RawCase b = parse_matpower(write_matpower(a));
  CHECK(a.base_mva == b.base_mva);
  CHECK(a.bus_rows == b.bus_rows);
  CHECK(a.gen_rows == b.gen_rows);
  CHECK(a.branch_rows == b.branch_rows);
  CHECK(a.gencost_rows == b.gencost_rows);
}

TEST_CASE("validate_raw") {
  RawCase c = read_case(pglib("pglib_opf_case5_pjm.m"));

  SUBCASE("valid case gives no diagnostics") { CHECK(validate_raw(c).empty()); }

  SUBCASE("branch endpoint must exist") {
    c.branch_rows[0][col::T_BUS] = 99;
    auto diags = validate_raw(c);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].table == "branch");
    CHECK(diags[0].row == 0);
    CHECK(diags[0].rule == "endpoint exists");
  }

  SUBCASE("gencost count must match gen count") {
    c.gencost_rows.pop_back();
    auto diags = validate_raw(c);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].rule == "gencost count");
  }

  SUBCASE("piecewise-linear costs are rejected") {
    c.gencost_rows[0][col::MODEL] = 1;
    auto diags = validate_raw(c);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].rule == "cost model polynomial");
  }

  SUBCASE("nonpositive baseMVA") {
    c.base_mva = 0.0;
    auto diags = validate_raw(c);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].rule == "base_mva positive");
  }
}

TEST_CASE("unknown mpc fields are preserved as extras") {
  std::string text(kTwoBus);
  text += "mpc.bus_name = { 'alpha'; 'beta' };\nmpc.custom = 42;\n";
  RawCase c = parse_matpower(text);
  REQUIRE(c.extras.size() == 3);  // version, bus_name, custom
  CHECK(c.extras[1].find("bus_name") != std::string::npos);
}
