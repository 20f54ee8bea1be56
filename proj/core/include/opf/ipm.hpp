#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "opf/poly.hpp"

namespace opf {

struct IpmOptions {
  double tol = 1e-6;           // optimality and constraint satisfaction
  double bound_relax = 1e-8;   // bounds widened by this * max(1, |bound|)
  int max_iter = 500;
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  double mu_init = 0.1;
  double fraction_to_boundary = 0.99995;
};

enum class SolveStatus { Optimal, Infeasible, IterLimit, TimeLimit, Failed };

const char* to_string(SolveStatus s);

/// Sup-norm KKT residuals at mu = 0.
struct KktResiduals {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;
  double max() const;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Failed;
  std::vector<double> x;
  double objective = 0.0;
  /// Multipliers for every constraint in problem order; eq_multipliers and
  /// ineq_multipliers are the same values split by constraint kind.
  std::vector<double> con_multipliers;
  std::vector<double> eq_multipliers;
  std::vector<double> ineq_multipliers;
  /// Per-variable bound multipliers, both sides plus the net z_L - z_U.
  std::vector<double> z_lower;
  std::vector<double> z_upper;
  std::vector<double> bound_multipliers;
  int iterations = 0;
  KktResiduals kkt;
  double build_time = 0.0;  // seconds spent preparing derivative structures
  double solve_time = 0.0;  // seconds in the iteration loop
  std::string message;
};

/// Primal-dual interior-point solve. Slacks on inequalities, log barrier on
/// slack and variable bounds, Newton steps on the perturbed KKT system with
/// fraction-to-boundary clipping and a monotone barrier parameter.
SolveResult solve(const PolyProblem& problem, const IpmOptions& options = {});

/// Independent KKT check: stationarity ||grad f + J^T lambda - zL + zU||_inf,
/// feasibility as the largest bound/constraint violation, complementarity as
/// the largest |slack * multiplier| with slacks clamped at zero. Pure
/// function of its arguments.
KktResiduals kkt_residuals(const PolyProblem& problem, std::span<const double> x,
                           std::span<const double> con_multipliers,
                           std::span<const double> z_lower, std::span<const double> z_upper);

}  // namespace opf
