#pragma once

#include <array>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "opf/acopf.hpp"
#include "opf/chordal.hpp"
#include "opf/network.hpp"
#include "opf/poly.hpp"

namespace opf {

struct RelaxOptions {
  bool with_rlt = true;
  int minor_cap = 30000;
  double admittance_threshold = 1e3;  // E' filter on |g|, |b|
  double scale = 1e-3;
  bool warm_start = true;
};

/// Variable layout of the lifted model. Pair variables are canonical with
/// bus index i < j and W_ij = V_i V_j^*; a branch running against the
/// canonical direction uses the conjugate (negated imaginary part). Flow-like
/// variables are in sqrt(scale) units and squared ones in scale units.
struct DsdpVarMap {
  int n_vars = 0;
  double scale = 1.0;
  std::vector<int> w_diag;                    // per bus
  std::vector<std::pair<int, int>> pairs;     // bus-index pairs, i < j
  std::vector<int> w_re, w_im;                // per pair
  std::vector<int> pg, qg;                    // per generator
  std::vector<int> p_from, q_from, p_to, q_to;          // per branch
  std::vector<int> p_hat_from, q_hat_from, p_hat_to, q_hat_to;
  std::vector<int> l_from, l_to;              // -1 unless RLT applies
  std::vector<int> lw_from, lw_to;

  std::unordered_map<long long, int> pair_index;  // key(i, j) -> pairs position
  static long long pair_key(int i, int j) {
    return static_cast<long long>(i) * 1000000 + j;
  }
  int find_pair(int i, int j) const;  // throws MissingLiftedPair
};

struct MissingLiftedPair : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnboundedInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Optional variable-box overrides produced by bound tightening; keys are
/// canonical bus-index pairs, diag boxes ride on Network voltage bounds.
struct WBoxes {
  std::unordered_map<long long, std::pair<double, double>> re, im;
};

/// Branch indices whose series conductance and susceptance magnitudes both
/// stay within the threshold.
std::vector<int> edge_filter(const Network& net, double threshold);

/// One McCormick inequality: z >= or <= cx*x + cy*y + c0.
struct McRow {
  double cx, cy, c0;
  bool lower;  // true: z >= ..., false: z <= ...
};
std::array<McRow, 4> mccormick(double xl, double xu, double yl, double yu);

std::pair<PolyProblem, DsdpVarMap> build_dsdp(const Network& net, const CliqueTree& tree,
                                              const RelaxOptions& opts,
                                              const WBoxes* boxes = nullptr);

/// Lifted initial point from an ACOPF solution: W from voltage products,
/// flows and currents recomputed from the voltages, squared-flow and product
/// variables from their defining identities, everything clipped into bounds.
std::vector<double> warm_start_from_acopf(const Network& net, const PolyProblem& prob,
                                          const DsdpVarMap& map, const AcopfSolution& sol);

/// Move a solved relaxation point onto another variable layout of the same
/// network (typically a plain DSDP solution starting the RLT variant);
/// variables absent from the source are filled from their identities.
std::vector<double> transfer_start(const Network& net, const PolyProblem& to_prob,
                                   const DsdpVarMap& to_map, const DsdpVarMap& from_map,
                                   std::span<const double> x_from);

}  // namespace opf
