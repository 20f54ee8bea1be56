#pragma once

#include <string>
#include <vector>

#include "opf/dsdp.hpp"
#include "opf/ipm.hpp"
#include "opf/network.hpp"

namespace opf {

enum class RunMode { Acopf, Dsdp, DsdpRlt, Gap, Obbt };

const char* to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

struct BenchOptions {
  RunMode mode = RunMode::Gap;
  double acopf_scale = 1.0;   // upper-bound solves run unscaled
  double relax_scale = 1e-3;  // relaxations use the 1e-3 scaling
  double tol = 1e-6;
  int max_iter = 3000;
  double time_limit = 5400.0;  // seconds per relaxation solve (1.5 h)
  bool rlt = false;            // adds the RLT family to a plain dsdp run
  int minor_cap = 30000;
  bool warm_start = true;
  double obbt_threshold = 1.0;      // percent gap that triggers tightening
  double obbt_min_improve = 0.1;    // stop when a sweep gains less than this
};

struct InstanceTimes {
  double build_s = 0.0;
  double init_s = 0.0;
  double solve_s = 0.0;
};

struct ModelRun {
  bool ran = false;
  SolveStatus status = SolveStatus::Failed;
  double objective = 0.0;  // physical units (unscaled)
  InstanceTimes times;
  int iterations = 0;
  std::string error;
};

struct GapReport {
  std::string instance;
  RunMode mode = RunMode::Gap;
  double ub = 0.0;
  double lb_dsdp = 0.0;
  double lb_dsdp_rlt = 0.0;
  double gap_dsdp = 0.0;      // percent
  double gap_dsdp_rlt = 0.0;  // percent
  bool has_ub = false, has_lb_dsdp = false, has_lb_dsdp_rlt = false;
  ModelRun acopf, dsdp, dsdp_rlt;
  std::string error;  // instance-level failure (parse, validation, ...)
};

struct NonPositiveUb : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// 100 (ub - lb)/ub. Throws NonPositiveUb when ub <= 0.
double compute_gap(double ub, double lb);

/// Parse, validate, convert and run the requested pipeline. Errors end up in
/// the report's status/error fields; the call itself never throws.
GapReport run_instance(const std::string& path, const BenchOptions& opts);

struct ProfileResult {
  std::string instance;
  double solve_time = 0.0;
  SolveStatus status = SolveStatus::Failed;
};
struct ProfileEntry {
  double solve_time = 0.0;
  int num_problems_solved = 0;
};
/// Cumulative step function over successful solves, ascending in time.
std::vector<ProfileEntry> performance_profile(const std::vector<ProfileResult>& results);

std::string report_csv_header();
/// One CSV row per executed model run of the report.
std::string report_csv_rows(const GapReport& rep);
std::string profile_csv(const std::vector<ProfileEntry>& entries);

struct ObbtResult {
  Network tightened;
  WBoxes boxes;
  GapReport report;
  int sweeps = 0;
  bool hit_time_limit = false;
};

/// Sequential optimization-based bound tightening on the DSDP-RLT
/// relaxation. Minimizes and maximizes each W_ii and each branch-pair
/// Re/Im under an objective cut at the ACOPF upper bound, rebuilding between
/// sweeps until the gap improvement drops below obbt_min_improve or the time
/// budget runs out.
ObbtResult obbt(const Network& net, const BenchOptions& opts, double time_limit);

}  // namespace opf
