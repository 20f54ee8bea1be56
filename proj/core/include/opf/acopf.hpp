#pragma once

#include <span>
#include <vector>

#include "opf/network.hpp"
#include "opf/poly.hpp"

namespace opf {

/// Variable layout of the rectangular-coordinate ACOPF with explicit branch
/// flows. Flow variables are stored in sqrt(scale) units so the thermal rows
/// and the objective can be scaled without losing the physical solution.
struct AcopfVarMap {
  int n_vars = 0;
  double scale = 1.0;
  std::vector<int> vr, vi;      // per bus
  std::vector<int> pg, qg;      // per generator
  std::vector<int> p_from, q_from, p_to, q_to;  // per branch
};

/// Model: minimize generation cost subject to flow definitions, KCL,
/// voltage magnitude range, angle-difference cone, generation bounds and
/// thermal limits. scale multiplies the objective and thermal rows.
std::pair<PolyProblem, AcopfVarMap> build_acopf(const Network& net, double scale = 1.0);

/// Midpoint voltages at zero angle, generation at bound midpoints, flows
/// evaluated from the flat voltage profile.
std::vector<double> flat_start(const Network& net, const AcopfVarMap& map);

/// Physical (unscaled) quantities recovered from a solver point.
struct AcopfSolution {
  std::vector<Complex> voltage;             // per bus
  std::vector<double> pg, qg;               // per generator, p.u.
  std::vector<double> p_from, q_from;       // per branch, p.u.
  std::vector<double> p_to, q_to;
  double objective = 0.0;                   // $/h, unscaled
};
AcopfSolution extract_solution(const Network& net, const AcopfVarMap& map,
                               std::span<const double> x);

/// Direct recomputation of every model constraint in complex arithmetic,
/// independent of the polynomial path.
struct FeasibilityReport {
  double flow_def = 0.0;
  double kcl = 0.0;
  double voltage = 0.0;
  double angle = 0.0;
  double thermal = 0.0;
  double gen_bounds = 0.0;
  double max_violation() const;
};
FeasibilityReport check_feasibility(const Network& net, const AcopfVarMap& map,
                                    std::span<const double> x);

}  // namespace opf
