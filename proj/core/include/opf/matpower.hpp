#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace opf {

/// Column positions in the raw MATPOWER tables (MATPOWER manual order).
namespace col {
enum bus_col { BUS_I, BUS_TYPE, PD, QD, GS, BS, AREA, VM, VA, BASE_KV, ZONE, VMAX, VMIN };
enum gen_col { GEN_BUS, PG, QG, QMAX, QMIN, VG, MBASE, GEN_STATUS, PMAX, PMIN };
enum branch_col { F_BUS, T_BUS, BR_R, BR_X, BR_B, RATE_A, RATE_B, RATE_C, TAP, SHIFT,
                  BR_STATUS, ANGMIN, ANGMAX };
enum cost_col { MODEL, STARTUP, SHUTDOWN, NCOST, COST };
}  // namespace col

/// Faithful tabular image of a MATPOWER case file. Rows keep every column
/// found in the file, so trailing extensions survive a round trip.
struct RawCase {
  std::string name;
  double base_mva = 0.0;
  std::vector<std::vector<double>> bus_rows;
  std::vector<std::vector<double>> gen_rows;
  std::vector<std::vector<double>> branch_rows;
  std::vector<std::vector<double>> gencost_rows;
  /// Unrecognized `mpc.*` assignments, kept verbatim and otherwise ignored.
  std::vector<std::string> extras;
};

struct Diagnostic {
  std::string table;  // "bus", "gen", "branch", "gencost" or "case"
  int row = -1;       // -1 for table-level issues
  std::string rule;
  std::string message;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedMatrix : ParseError {
  using ParseError::ParseError;
};
struct MissingField : ParseError {
  using ParseError::ParseError;
};
struct NumericParse : ParseError {
  using ParseError::ParseError;
};

RawCase parse_matpower(std::istream& in);
RawCase parse_matpower(const std::string& text);
RawCase read_case(const std::string& path);

/// Empty iff every RawCase invariant holds. Diagnostics name the table, row
/// and violated rule; the case itself is never modified.
std::vector<Diagnostic> validate_raw(const RawCase& c);

/// Serialize back to MATPOWER text. Reals are printed with enough digits
/// that re-parsing reproduces them bit-exactly.
std::string write_matpower(const RawCase& c);

}  // namespace opf
