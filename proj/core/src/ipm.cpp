#include "opf/ipm.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "opf/log.hpp"

namespace opf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double relax_amount(double bound, double factor) {
  return factor * std::max(1.0, std::abs(bound));
}
}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::IterLimit: return "iter_limit";
    case SolveStatus::TimeLimit: return "time_limit";
    case SolveStatus::Failed: return "failed";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max({stationarity, feasibility, complementarity});
}

KktResiduals kkt_residuals(const PolyProblem& problem, std::span<const double> x,
                           std::span<const double> con_multipliers,
                           std::span<const double> z_lower, std::span<const double> z_upper) {
  const int n = problem.n_vars;
  const size_t m = problem.constraints.size();
  if (static_cast<int>(x.size()) != n || con_multipliers.size() != m ||
      static_cast<int>(z_lower.size()) != n || static_cast<int>(z_upper.size()) != n) {
    throw std::invalid_argument("kkt_residuals: dimension mismatch");
  }

  KktResiduals r;

  // stationarity: grad f + J^T lambda - zL + zU over the x block
  Eigen::VectorXd stat = Eigen::VectorXd::Zero(n);
  for (auto& [v, d] : gradient(problem.objective)) stat[v] += d.eval(x);
  for (size_t i = 0; i < m; ++i) {
    if (con_multipliers[i] == 0.0) continue;
    for (auto& [v, d] : gradient(problem.constraints[i].poly)) {
      stat[v] += con_multipliers[i] * d.eval(x);
    }
  }
  for (int j = 0; j < n; ++j) stat[j] += z_upper[static_cast<size_t>(j)] - z_lower[static_cast<size_t>(j)];
  r.stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;

  // feasibility: worst constraint or bound violation
  double feas = 0.0;
  for (size_t i = 0; i < m; ++i) {
    double c = problem.constraints[i].poly.eval(x);
    feas = std::max(feas, problem.constraints[i].lower - c);
    feas = std::max(feas, c - problem.constraints[i].upper);
  }
  for (int j = 0; j < n; ++j) {
    feas = std::max(feas, problem.var_lower[static_cast<size_t>(j)] - x[static_cast<size_t>(j)]);
    feas = std::max(feas, x[static_cast<size_t>(j)] - problem.var_upper[static_cast<size_t>(j)]);
  }
  r.feasibility = std::max(feas, 0.0);

  // complementarity at mu = 0, slacks clamped at zero
  double comp = 0.0;
  for (size_t i = 0; i < m; ++i) {
    double c = problem.constraints[i].poly.eval(x);
    const auto& con = problem.constraints[i];
    if (con.is_equality()) continue;
    double lam = con_multipliers[i];
    if (lam < 0.0 && std::isfinite(con.lower)) {
      comp = std::max(comp, -lam * std::max(0.0, c - con.lower));
    }
    if (lam > 0.0 && std::isfinite(con.upper)) {
      comp = std::max(comp, lam * std::max(0.0, con.upper - c));
    }
  }
  for (int j = 0; j < n; ++j) {
    size_t sj = static_cast<size_t>(j);
    if (std::isfinite(problem.var_lower[sj])) {
      comp = std::max(comp, z_lower[sj] * std::max(0.0, x[sj] - problem.var_lower[sj]));
    }
    if (std::isfinite(problem.var_upper[sj])) {
      comp = std::max(comp, z_upper[sj] * std::max(0.0, problem.var_upper[sj] - x[sj]));
    }
  }
  r.complementarity = comp;
  return r;
}

namespace {

class IpmSolver {
 public:
  IpmSolver(const PolyProblem& p, const IpmOptions& o) : prob_(p), opts_(o) {}

  SolveResult run();

  /// Extra per-row scale multipliers applied on top of the gradient-based
  /// scaling; used by the rescale-restart when multipliers come out badly
  /// proportioned.
  std::vector<double> row_scale_boost;
  const std::vector<double>* start_point = nullptr;

 private:
  const PolyProblem& prob_;
  const IpmOptions& opts_;

  int n_ = 0;        // decision variables
  int m_ = 0;        // constraints
  int mi_ = 0;       // inequalities (slack count)
  int nv_ = 0;       // n + mi
  std::vector<int> slack_of_;  // constraint -> slack position or -1

  Eigen::VectorXd v_;          // (x, s)
  Eigen::VectorXd vl_, vu_;    // relaxed, scaled bounds on v
  std::vector<char> has_lo_, has_up_;
  Eigen::VectorXd zl_, zu_;    // bound multipliers on v (scaled space)
  Eigen::VectorXd lam_;        // constraint multipliers (scaled space)

  double fs_ = 1.0;            // objective scale
  Eigen::VectorXd cs_;         // per-constraint row scales

  std::unique_ptr<ProblemDerivatives> der_;

  // caches at the current iterate
  double fval_ = 0.0;                  // unscaled objective
  Eigen::VectorXd grad_;               // unscaled objective gradient
  Eigen::VectorXd cval_;               // unscaled constraint values
  Eigen::VectorXd resid_;              // scaled equality residuals (length m)
  double mu_ = 0.1;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool analyzed_ = false;
  double delta_primal_last_ = 0.0;
  double last_alpha_p_ = 0.0, last_alpha_d_ = 0.0;
  double last_e_full_ = 0.0, last_e_cur_ = 0.0;
  double last_nu_ = 0.0;
  double e_mu_prev_ = std::numeric_limits<double>::infinity();
  double dual_relax_ = 1.0;
  int iters_at_mu_ = 0;
  double mu_at_last_change_ = -1.0;

  void setup();
  void eval_point(std::span<const double> x);
  double kkt_error_mu(std::span<const double> x, const Eigen::VectorXd& v,
                      const Eigen::VectorXd& lam, const Eigen::VectorXd& zl,
                      const Eigen::VectorXd& zu, const Eigen::VectorXd& cval);
  void compute_residuals();
  KktResiduals unscaled_kkt() const;
  bool assemble_and_factor(const Eigen::SparseMatrix<double>& H,
                           const Eigen::SparseMatrix<double>& J, double delta_p, double delta_d,
                           Eigen::SparseMatrix<double>& K, Eigen::SparseMatrix<double>& K0);
  Eigen::VectorXd solve_kkt(const Eigen::SparseMatrix<double>& K0, const Eigen::VectorXd& rhs);
  double barrier_value(const Eigen::VectorXd& v, double fx_scaled) const;
  double constraint_l1(const Eigen::VectorXd& v, const Eigen::VectorXd& c_scaled) const;

  SolveResult finish(SolveStatus st, int iters, const std::string& msg, double build_s,
                     double solve_s);
  /// Least-squares recomputation of the dual certificate at the final
  /// primal point. The interior-point multipliers can stay noisy on
  /// degenerate constraint blocks long after the primal has converged.
  bool polish_duals(SolveResult& res);
};

void IpmSolver::setup() {
  prob_.check();
  n_ = prob_.n_vars;
  m_ = static_cast<int>(prob_.constraints.size());
  slack_of_.assign(static_cast<size_t>(m_), -1);
  mi_ = 0;
  for (int i = 0; i < m_; ++i) {
    if (!prob_.constraints[static_cast<size_t>(i)].is_equality()) {
      slack_of_[static_cast<size_t>(i)] = mi_++;
    }
  }
  nv_ = n_ + mi_;

  der_ = std::make_unique<ProblemDerivatives>(prob_);

  // gradient-based scaling at the clipped initial point
  std::vector<double> x0(prob_.initial_point);
  for (int j = 0; j < n_; ++j) {
    size_t sj = static_cast<size_t>(j);
    x0[sj] = std::clamp(x0[sj], prob_.var_lower[sj], prob_.var_upper[sj]);
  }
  Eigen::VectorXd g0;
  der_->objective_gradient(x0, g0);
  double gmax = g0.size() ? g0.cwiseAbs().maxCoeff() : 0.0;
  fs_ = gmax > 100.0 ? 100.0 / gmax : 1.0;
  cs_.setOnes(m_);
  {
    const auto& J0 = der_->jacobian_at(x0);
    Eigen::VectorXd rowmax = Eigen::VectorXd::Zero(m_);
    for (int k = 0; k < J0.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(J0, k); it; ++it) {
        rowmax[it.row()] = std::max(rowmax[it.row()], std::abs(it.value()));
      }
    }
    for (int i = 0; i < m_; ++i) {
      if (rowmax[i] > 100.0) cs_[i] = 100.0 / rowmax[i];
    }
  }
  if (!row_scale_boost.empty()) {
    for (int i = 0; i < m_; ++i) cs_[i] *= row_scale_boost[static_cast<size_t>(i)];
  }
  if (start_point) x0 = *start_point;

  // merged bounds on v = (x, s); slack bounds live in scaled constraint units
  vl_.setConstant(nv_, -kInf);
  vu_.setConstant(nv_, kInf);
  has_lo_.assign(static_cast<size_t>(nv_), 0);
  has_up_.assign(static_cast<size_t>(nv_), 0);
  for (int j = 0; j < n_; ++j) {
    size_t sj = static_cast<size_t>(j);
    double l = prob_.var_lower[sj], u = prob_.var_upper[sj];
    if (std::isfinite(l)) {
      vl_[j] = l - relax_amount(l, opts_.bound_relax);
      has_lo_[sj] = 1;
    }
    if (std::isfinite(u)) {
      vu_[j] = u + relax_amount(u, opts_.bound_relax);
      has_up_[sj] = 1;
    }
  }
  for (int i = 0; i < m_; ++i) {
    int k = slack_of_[static_cast<size_t>(i)];
    if (k < 0) continue;
    const auto& con = prob_.constraints[static_cast<size_t>(i)];
    int idx = n_ + k;
    if (std::isfinite(con.lower)) {
      vl_[idx] = cs_[i] * (con.lower - relax_amount(con.lower, opts_.bound_relax));
      has_lo_[static_cast<size_t>(idx)] = 1;
    }
    if (std::isfinite(con.upper)) {
      vu_[idx] = cs_[i] * (con.upper + relax_amount(con.upper, opts_.bound_relax));
      has_up_[static_cast<size_t>(idx)] = 1;
    }
  }

  // strict interior start
  v_.resize(nv_);
  for (int j = 0; j < n_; ++j) v_[j] = x0[static_cast<size_t>(j)];
  eval_point(x0);
  for (int i = 0; i < m_; ++i) {
    int k = slack_of_[static_cast<size_t>(i)];
    if (k >= 0) v_[n_ + k] = cs_[i] * cval_[i];
  }
  for (int j = 0; j < nv_; ++j) {
    size_t sj = static_cast<size_t>(j);
    bool lo = has_lo_[sj], up = has_up_[sj];
    if (lo && up) {
      double w = vu_[j] - vl_[j];
      double push = std::min(1e-2 * std::max(1.0, std::abs(vl_[j])), 0.25 * w);
      double push_u = std::min(1e-2 * std::max(1.0, std::abs(vu_[j])), 0.25 * w);
      v_[j] = std::clamp(v_[j], vl_[j] + push, vu_[j] - push_u);
    } else if (lo) {
      v_[j] = std::max(v_[j], vl_[j] + 1e-2 * std::max(1.0, std::abs(vl_[j])));
    } else if (up) {
      v_[j] = std::min(v_[j], vu_[j] - 1e-2 * std::max(1.0, std::abs(vu_[j])));
    }
  }

  mu_ = opts_.mu_init;
  zl_.setZero(nv_);
  zu_.setZero(nv_);
  for (int j = 0; j < nv_; ++j) {
    size_t sj = static_cast<size_t>(j);
    if (has_lo_[sj]) zl_[j] = std::min(mu_ / (v_[j] - vl_[j]), 1e6);
    if (has_up_[sj]) zu_[j] = std::min(mu_ / (vu_[j] - v_[j]), 1e6);
  }
  lam_.setZero(m_);
  for (int i = 0; i < m_; ++i) {
    int k = slack_of_[static_cast<size_t>(i)];
    if (k >= 0) lam_[i] = zu_[n_ + k] - zl_[n_ + k];
  }
}

void IpmSolver::eval_point(std::span<const double> x) {
  fval_ = der_->objective_value(x);
  der_->constraint_values(x, cval_);
}

void IpmSolver::compute_residuals() {
  resid_.resize(m_);
  for (int i = 0; i < m_; ++i) {
    const auto& con = prob_.constraints[static_cast<size_t>(i)];
    int k = slack_of_[static_cast<size_t>(i)];
    if (k < 0) {
      resid_[i] = cs_[i] * (cval_[i] - con.lower);
    } else {
      resid_[i] = cs_[i] * cval_[i] - v_[n_ + k];
    }
  }
}

KktResiduals IpmSolver::unscaled_kkt() const {
  std::vector<double> lam_orig(static_cast<size_t>(m_));
  for (int i = 0; i < m_; ++i) lam_orig[static_cast<size_t>(i)] = lam_[i] * cs_[i] / fs_;
  std::vector<double> zl(static_cast<size_t>(n_)), zu(static_cast<size_t>(n_));
  for (int j = 0; j < n_; ++j) {
    zl[static_cast<size_t>(j)] = zl_[j] / fs_;
    zu[static_cast<size_t>(j)] = zu_[j] / fs_;
  }
  std::vector<double> x(static_cast<size_t>(n_));
  for (int j = 0; j < n_; ++j) x[static_cast<size_t>(j)] = v_[j];
  return kkt_residuals(prob_, x, lam_orig, zl, zu);
}

// Factors K(delta_p, delta_d) with a static dual regularization; K0 is the
// same matrix without the dual shift, used as refinement target so the
// returned steps solve the unshifted system.
bool IpmSolver::assemble_and_factor(const Eigen::SparseMatrix<double>& H,
                                    const Eigen::SparseMatrix<double>& J, double delta_p,
                                    double delta_d, Eigen::SparseMatrix<double>& K,
                                    Eigen::SparseMatrix<double>& K0) {
  const int N = nv_ + m_;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(H.nonZeros() + J.nonZeros() + N + mi_));

  for (int k = 0; k < H.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(H, k); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (int j = 0; j < nv_; ++j) {
    size_t sj = static_cast<size_t>(j);
    double sigma = 0.0;
    if (has_lo_[sj]) sigma += zl_[j] / (v_[j] - vl_[j]);
    if (has_up_[sj]) sigma += zu_[j] / (vu_[j] - v_[j]);
    trips.emplace_back(j, j, sigma + delta_p);
  }
  for (int k = 0; k < J.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(J, k); it; ++it) {
      int row = nv_ + static_cast<int>(it.row());
      trips.emplace_back(row, static_cast<int>(it.col()),
                         cs_[it.row()] * it.value());
    }
  }
  for (int i = 0; i < m_; ++i) {
    int k = slack_of_[static_cast<size_t>(i)];
    if (k >= 0) trips.emplace_back(nv_ + i, n_ + k, -1.0);
    trips.emplace_back(nv_ + i, nv_ + i, 0.0);
  }

  K0.resize(N, N);
  K0.setFromTriplets(trips.begin(), trips.end());
  if (!Eigen::Map<const Eigen::VectorXd>(K0.valuePtr(), K0.nonZeros()).allFinite()) return false;
  K = K0;
  for (int i = 0; i < m_; ++i) K.coeffRef(nv_ + i, nv_ + i) -= delta_d;

  if (!analyzed_) {
    ldlt_.analyzePattern(K);
    analyzed_ = true;
  }
  ldlt_.factorize(K);
  if (ldlt_.info() != Eigen::Success) return false;

  // pivot signs are unreliable once the barrier terms dominate the scale,
  // so only structural breakdown is rejected here; directional curvature is
  // checked on the computed step instead
  const auto& D = ldlt_.vectorD();
  for (int i = 0; i < D.size(); ++i) {
    if (!std::isfinite(D[i]) || D[i] == 0.0) return false;
  }
  return true;
}

// Refine the factored (regularized) solve against the unshifted matrix,
// keeping the best iterate; with dependent constraint rows K0 can be
// singular and plain refinement would diverge.
Eigen::VectorXd IpmSolver::solve_kkt(const Eigen::SparseMatrix<double>& K0,
                                     const Eigen::VectorXd& rhs) {
  Eigen::VectorXd sol = ldlt_.solve(rhs);
  double rhs_norm = 1.0 + rhs.cwiseAbs().maxCoeff();
  Eigen::VectorXd best = sol;
  double best_res = std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 6; ++pass) {
    Eigen::VectorXd r = K0.selfadjointView<Eigen::Lower>() * sol - rhs;
    if (!r.allFinite()) break;
    double rn = r.cwiseAbs().maxCoeff();
    if (rn < best_res) {
      best_res = rn;
      best = sol;
    }
    if (rn <= 1e-12 * rhs_norm || rn > 2.0 * best_res) break;
    sol -= ldlt_.solve(r);
  }
  return best;
}

// scaled sup-norm of the mu-perturbed KKT system at an arbitrary point
double IpmSolver::kkt_error_mu(std::span<const double> x, const Eigen::VectorXd& v,
                               const Eigen::VectorXd& lam, const Eigen::VectorXd& zl,
                               const Eigen::VectorXd& zu, const Eigen::VectorXd& cval) {
  Eigen::VectorXd gf;
  der_->objective_gradient(x, gf);
  const auto& J = der_->jacobian_at(x);
  Eigen::VectorXd dual = Eigen::VectorXd::Zero(nv_);
  dual.head(n_) = fs_ * gf + J.transpose() * (cs_.cwiseProduct(lam)).matrix();
  for (int i = 0; i < m_; ++i) {
    int k = slack_of_[static_cast<size_t>(i)];
    if (k >= 0) dual[n_ + k] -= lam[i];
  }
  dual -= zl;
  dual += zu;
  double err = dual.cwiseAbs().maxCoeff();
  for (int i = 0; i < m_; ++i) {
    const auto& con = prob_.constraints[static_cast<size_t>(i)];
    int k = slack_of_[static_cast<size_t>(i)];
    double r = k < 0 ? cs_[i] * (cval[i] - con.lower) : cs_[i] * cval[i] - v[n_ + k];
    err = std::max(err, std::abs(r));
  }
  for (int j = 0; j < nv_; ++j) {
    size_t sj = static_cast<size_t>(j);
    if (has_lo_[sj]) err = std::max(err, std::abs(zl[j] * (v[j] - vl_[j]) - mu_));
    if (has_up_[sj]) err = std::max(err, std::abs(zu[j] * (vu_[j] - v[j]) - mu_));
  }
  return err;
}

double IpmSolver::barrier_value(const Eigen::VectorXd& v, double fx_scaled) const {
  double b = fx_scaled;
  for (int j = 0; j < nv_; ++j) {
    size_t sj = static_cast<size_t>(j);
    if (has_lo_[sj]) {
      double d = v[j] - vl_[j];
      if (d <= 0) return kInf;
      b -= mu_ * std::log(d);
    }
    if (has_up_[sj]) {
      double d = vu_[j] - v[j];
      if (d <= 0) return kInf;
      b -= mu_ * std::log(d);
    }
  }
  return b;
}

double IpmSolver::constraint_l1(const Eigen::VectorXd& v, const Eigen::VectorXd& c_scaled) const {
  double s = 0.0;
  for (int i = 0; i < m_; ++i) {
    const auto& con = prob_.constraints[static_cast<size_t>(i)];
    int k = slack_of_[static_cast<size_t>(i)];
    double r = k < 0 ? c_scaled[i] - cs_[i] * con.lower : c_scaled[i] - v[n_ + k];
    s += std::abs(r);
  }
  return s;
}

bool IpmSolver::polish_duals(SolveResult& res) {
  const double tol = opts_.tol;
  std::span<const double> x(res.x);

  Eigen::VectorXd gf;
  der_->objective_gradient(x, gf);

  // candidate columns: gradients of constraints and bounds whose slack is
  // small enough that a bounded multiplier keeps complementarity below
  // tolerance; equalities always participate
  struct Col {
    int source;   // constraint index or -(variable index + 1) for bounds
    bool upper;   // active side
    double slack; // clamped distance to the active side
  };
  std::vector<Col> cols;
  const double slack_cap = 1e-2;
  for (int i = 0; i < m_; ++i) {
    const auto& con = prob_.constraints[static_cast<size_t>(i)];
    double c = cval_[i];
    if (con.is_equality()) {
      cols.push_back({i, false, 0.0});
      continue;
    }
    double raw = res.con_multipliers[static_cast<size_t>(i)];
    double dlo = std::isfinite(con.lower) ? std::max(0.0, c - con.lower) : kInf;
    double dup = std::isfinite(con.upper) ? std::max(0.0, con.upper - c) : kInf;
    // the active side follows the raw multiplier when it says anything;
    // rows with negligible multipliers far from their bounds cannot affect
    // the certificate and are skipped
    if (raw > 1e-12 && std::isfinite(con.upper)) {
      cols.push_back({i, true, dup});
    } else if (raw < -1e-12 && std::isfinite(con.lower)) {
      cols.push_back({i, false, dlo});
    } else if (std::min(dlo, dup) <= slack_cap) {
      cols.push_back({i, dup < dlo, std::min(dlo, dup)});
    }
  }
  for (int j = 0; j < n_; ++j) {
    size_t sj = static_cast<size_t>(j);
    double xv = res.x[sj];
    double dlo = std::isfinite(prob_.var_lower[sj]) ? std::max(0.0, xv - prob_.var_lower[sj])
                                                    : kInf;
    double dup = std::isfinite(prob_.var_upper[sj]) ? std::max(0.0, prob_.var_upper[sj] - xv)
                                                    : kInf;
    if (res.z_upper[sj] > 1e-12 && std::isfinite(prob_.var_upper[sj])) {
      cols.push_back({-(j + 1), true, dup});
    }
    if (res.z_lower[sj] > 1e-12 && std::isfinite(prob_.var_lower[sj])) {
      cols.push_back({-(j + 1), false, dlo});
    }
    if (res.z_lower[sj] <= 1e-12 && res.z_upper[sj] <= 1e-12 &&
        std::min(dlo, dup) <= slack_cap) {
      cols.push_back({-(j + 1), dup < dlo, std::min(dlo, dup)});
    }
  }

  const int K = static_cast<int>(cols.size());
  if (K == 0) return false;

  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < K; ++k) {
    const Col& c = cols[static_cast<size_t>(k)];
    if (c.source >= 0) {
      for (auto& [v, d] : gradient(prob_.constraints[static_cast<size_t>(c.source)].poly)) {
        trips.emplace_back(v, k, d.eval(x));
      }
    } else {
      trips.emplace_back(-c.source - 1, k, c.upper ? 1.0 : -1.0);
    }
  }
  Eigen::SparseMatrix<double> G(n_, K);
  G.setFromTriplets(trips.begin(), trips.end());

  // start from the raw duals and refine them with damped least-squares
  // steps, projecting onto the sign cone and the complementarity budget
  // after every update; the damping keeps the near-dependent active
  // gradients from amplifying noise
  {
    Eigen::VectorXd y0(K);
    for (int k = 0; k < K; ++k) {
      const Col& c = cols[static_cast<size_t>(k)];
      if (c.source >= 0) {
        y0[k] = res.con_multipliers[static_cast<size_t>(c.source)];
      } else {
        int j = -c.source - 1;
        y0[k] = c.upper ? res.z_upper[static_cast<size_t>(j)]
                        : -res.z_lower[static_cast<size_t>(j)];
      }
    }
    Eigen::SparseMatrix<double> N = Eigen::SparseMatrix<double>(G.transpose()) * G;
    double diag_mean = 0.0;
    for (int k = 0; k < K; ++k) diag_mean += N.coeff(k, k);
    diag_mean = std::max(diag_mean / std::max(K, 1), 1e-12);
    auto project = [&](Eigen::VectorXd& y) {
      for (int k = 0; k < K; ++k) {
        const Col& c = cols[static_cast<size_t>(k)];
        bool is_eq = c.source >= 0 &&
                     prob_.constraints[static_cast<size_t>(c.source)].is_equality();
        if (!is_eq) {
          if (c.upper && y[k] < 0.0) y[k] = 0.0;
          if (!c.upper && y[k] > 0.0) y[k] = 0.0;
          if (c.slack > 0.0) {
            double cap = tol / c.slack;
            y[k] = std::clamp(y[k], -cap, cap);
          }
        }
      }
    };
    project(y0);
    for (double alpha_f : {1e-6, 1e-4, 1e-2}) {
      Eigen::SparseMatrix<double> Na = N;
      double alpha = alpha_f * diag_mean;
      for (int k = 0; k < K; ++k) Na.coeffRef(k, k) += alpha;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(Na);
      if (chol.info() != Eigen::Success) continue;
      Eigen::VectorXd y = y0;
      for (int it = 0; it < 8; ++it) {
        Eigen::VectorXd r = gf + G * y;
        Eigen::VectorXd dy = chol.solve(-G.transpose() * r);
        if (!dy.allFinite()) break;
        y += dy;
        project(y);
      }
      std::vector<double> lam_t(static_cast<size_t>(m_), 0.0);
      std::vector<double> zl_t(static_cast<size_t>(n_), 0.0), zu_t(static_cast<size_t>(n_), 0.0);
      for (int k = 0; k < K; ++k) {
        const Col& c = cols[static_cast<size_t>(k)];
        if (c.source >= 0) {
          lam_t[static_cast<size_t>(c.source)] = y[k];
        } else {
          int j = -c.source - 1;
          if (c.upper) {
            zu_t[static_cast<size_t>(j)] = y[k];
          } else {
            zl_t[static_cast<size_t>(j)] = -y[k];
          }
        }
      }
      KktResiduals cand = kkt_residuals(prob_, x, lam_t, zl_t, zu_t);
      if (log_enabled(LogLevel::Debug)) {
        log_line(LogLevel::Debug, "  polish ridge a" + std::to_string(alpha_f) + ": stat " +
                                      std::to_string(cand.stationarity) + " comp " +
                                      std::to_string(cand.complementarity));
      }
      if (cand.max() <= tol && cand.max() <= res.kkt.max()) {
        res.con_multipliers = std::move(lam_t);
        res.z_lower = std::move(zl_t);
        res.z_upper = std::move(zu_t);
        res.eq_multipliers.clear();
        res.ineq_multipliers.clear();
        for (int i = 0; i < m_; ++i) {
          size_t si = static_cast<size_t>(i);
          if (prob_.constraints[si].is_equality()) {
            res.eq_multipliers.push_back(res.con_multipliers[si]);
          } else {
            res.ineq_multipliers.push_back(res.con_multipliers[si]);
          }
        }
        for (int j = 0; j < n_; ++j) {
          size_t sj = static_cast<size_t>(j);
          res.bound_multipliers[sj] = res.z_lower[sj] - res.z_upper[sj];
        }
        res.kkt = cand;
        return true;
      }
    }
  }

  // fall back to the from-scratch weighted least squares
  KktResiduals polished;
  std::vector<double> lam, zl, zu;
  double best = std::numeric_limits<double>::infinity();
  for (double thr : {1e-9, 1e-7, 1e-5}) {
    Eigen::VectorXd weight(K);
    for (int k = 0; k < K; ++k) {
      const Col& c = cols[static_cast<size_t>(k)];
      weight[k] = c.slack <= thr ? 1e-6 : c.slack / (10.0 * tol);
    }
    Eigen::VectorXd y;
    std::vector<char> dropped(static_cast<size_t>(K), 0);
    for (int pass = 0; pass < 4; ++pass) {
      Eigen::SparseMatrix<double> Gk = G;
      for (int k = 0; k < K; ++k) {
        if (!dropped[static_cast<size_t>(k)]) continue;
        for (Eigen::SparseMatrix<double>::InnerIterator it(Gk, k); it; ++it) {
          it.valueRef() = 0.0;
        }
      }
      Eigen::SparseMatrix<double> N = Eigen::SparseMatrix<double>(Gk.transpose()) * Gk;
      for (int k = 0; k < K; ++k) {
        N.coeffRef(k, k) += weight[k] * weight[k] + 1e-14;
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(N);
      if (chol.info() != Eigen::Success) break;
      y = chol.solve(-Gk.transpose() * gf);
      if (!y.allFinite()) break;
      bool clean = true;
      for (int k = 0; k < K; ++k) {
        const Col& c = cols[static_cast<size_t>(k)];
        bool is_eq = c.source >= 0 &&
                     prob_.constraints[static_cast<size_t>(c.source)].is_equality();
        if (is_eq || dropped[static_cast<size_t>(k)]) continue;
        // convention: multiplier >= 0 on an active upper side, <= 0 on lower
        if ((c.upper && y[k] < 0.0) || (!c.upper && y[k] > 0.0)) {
          dropped[static_cast<size_t>(k)] = 1;
          clean = false;
        }
      }
      if (clean) break;
    }
    if (y.size() != K || !y.allFinite()) continue;

    std::vector<double> lam_t(static_cast<size_t>(m_), 0.0);
    std::vector<double> zl_t(static_cast<size_t>(n_), 0.0), zu_t(static_cast<size_t>(n_), 0.0);
    for (int k = 0; k < K; ++k) {
      if (dropped[static_cast<size_t>(k)]) continue;
      const Col& c = cols[static_cast<size_t>(k)];
      if (c.source >= 0) {
        lam_t[static_cast<size_t>(c.source)] = y[k];
      } else {
        int j = -c.source - 1;
        // stationarity uses -zl + zu, so a lower-side column carried -e_j
        if (c.upper) {
          zu_t[static_cast<size_t>(j)] = y[k];
        } else {
          zl_t[static_cast<size_t>(j)] = -y[k];
        }
      }
    }
    for (int j = 0; j < n_; ++j) {
      size_t sj = static_cast<size_t>(j);
      if (zl_t[sj] < 0.0) zl_t[sj] = 0.0;
      if (zu_t[sj] < 0.0) zu_t[sj] = 0.0;
    }
    KktResiduals cand = kkt_residuals(prob_, x, lam_t, zl_t, zu_t);
    if (log_enabled(LogLevel::Debug)) {
      log_line(LogLevel::Debug, "  polish thr " + std::to_string(thr) + ": stat " +
                                    std::to_string(cand.stationarity) + " comp " +
                                    std::to_string(cand.complementarity));
    }
    if (cand.max() < best) {
      best = cand.max();
      polished = cand;
      lam = std::move(lam_t);
      zl = std::move(zl_t);
      zu = std::move(zu_t);
    }
  }
  if (lam.empty()) return false;
  if (polished.max() <= tol && polished.max() <= res.kkt.max()) {
    res.con_multipliers = std::move(lam);
    res.z_lower = std::move(zl);
    res.z_upper = std::move(zu);
    res.eq_multipliers.clear();
    res.ineq_multipliers.clear();
    for (int i = 0; i < m_; ++i) {
      size_t si = static_cast<size_t>(i);
      res.bound_multipliers[si < res.bound_multipliers.size() ? si : 0] = 0;  // refreshed below
      if (prob_.constraints[si].is_equality()) {
        res.eq_multipliers.push_back(res.con_multipliers[si]);
      } else {
        res.ineq_multipliers.push_back(res.con_multipliers[si]);
      }
    }
    for (int j = 0; j < n_; ++j) {
      size_t sj = static_cast<size_t>(j);
      res.bound_multipliers[sj] = res.z_lower[sj] - res.z_upper[sj];
    }
    res.kkt = polished;
    return true;
  }
  return false;
}

SolveResult IpmSolver::finish(SolveStatus st, int iters, const std::string& msg, double build_s,
                              double solve_s) {
  SolveResult res;
  res.status = st;
  res.iterations = iters;
  res.message = msg;
  res.build_time = build_s;
  res.solve_time = solve_s;
  res.x.assign(static_cast<size_t>(n_), 0.0);
  for (int j = 0; j < n_; ++j) res.x[static_cast<size_t>(j)] = v_[j];
  res.objective = der_->objective_value(res.x);

  res.con_multipliers.resize(static_cast<size_t>(m_));
  for (int i = 0; i < m_; ++i) {
    res.con_multipliers[static_cast<size_t>(i)] = lam_[i] * cs_[i] / fs_;
  }
  res.z_lower.resize(static_cast<size_t>(n_));
  res.z_upper.resize(static_cast<size_t>(n_));
  res.bound_multipliers.resize(static_cast<size_t>(n_));
  for (int j = 0; j < n_; ++j) {
    size_t sj = static_cast<size_t>(j);
    res.z_lower[sj] = zl_[j] / fs_;
    res.z_upper[sj] = zu_[j] / fs_;
    res.bound_multipliers[sj] = res.z_lower[sj] - res.z_upper[sj];
  }
  for (int i = 0; i < m_; ++i) {
    if (prob_.constraints[static_cast<size_t>(i)].is_equality()) {
      res.eq_multipliers.push_back(res.con_multipliers[static_cast<size_t>(i)]);
    } else {
      res.ineq_multipliers.push_back(res.con_multipliers[static_cast<size_t>(i)]);
    }
  }
  res.kkt = kkt_residuals(prob_, res.x, res.con_multipliers, res.z_lower, res.z_upper);
  if (st != SolveStatus::Optimal && res.kkt.feasibility <= opts_.tol) {
    // the primal often converges long before the multipliers settle on
    // degenerate problems; a clean dual certificate may still exist
    eval_point(res.x);
    if (polish_duals(res) && res.kkt.stationarity <= opts_.tol &&
        res.kkt.feasibility <= opts_.tol && res.kkt.complementarity <= opts_.tol) {
      res.status = SolveStatus::Optimal;
      res.message = "dual certificate recovered by least-squares polish";
      st = SolveStatus::Optimal;
    }
  }
  if (log_enabled(LogLevel::Debug) && st != SolveStatus::Optimal) {
    log_line(LogLevel::Debug,
             "  finish: stat " + std::to_string(res.kkt.stationarity) + " feas " +
                 std::to_string(res.kkt.feasibility) + " comp " +
                 std::to_string(res.kkt.complementarity));
    // locate the worst stationarity rows to aid debugging
    Eigen::VectorXd stat = Eigen::VectorXd::Zero(n_);
    for (auto& [vv, d] : gradient(prob_.objective)) stat[vv] += d.eval(res.x);
    for (size_t i = 0; i < static_cast<size_t>(m_); ++i) {
      if (res.con_multipliers[i] == 0.0) continue;
      for (auto& [vv, d] : gradient(prob_.constraints[i].poly)) {
        stat[vv] += res.con_multipliers[i] * d.eval(res.x);
      }
    }
    for (int j = 0; j < n_; ++j) {
      stat[j] += res.z_upper[static_cast<size_t>(j)] - res.z_lower[static_cast<size_t>(j)];
    }
    std::vector<std::pair<double, size_t>> lam_rank;
    for (size_t i = 0; i < static_cast<size_t>(m_); ++i) {
      lam_rank.emplace_back(std::abs(res.con_multipliers[i]), i);
    }
    std::sort(lam_rank.rbegin(), lam_rank.rend());
    for (size_t k = 0; k < std::min<size_t>(5, lam_rank.size()); ++k) {
      size_t i = lam_rank[k].second;
      log_line(LogLevel::Debug,
               "  lam[" + prob_.constraints[i].name + "] = " +
                   std::to_string(res.con_multipliers[i]) +
                   " c = " + std::to_string(prob_.constraints[i].poly.eval(res.x)));
    }
    for (int k = 0; k < 5; ++k) {
      int jmax;
      stat.cwiseAbs().maxCoeff(&jmax);
      log_line(LogLevel::Debug, "  stat[" + prob_.var_names[static_cast<size_t>(jmax)] +
                                    "] = " + std::to_string(stat[jmax]) +
                                    " x = " + std::to_string(res.x[static_cast<size_t>(jmax)]) +
                                    " zl = " + std::to_string(res.z_lower[static_cast<size_t>(jmax)]) +
                                    " zu = " + std::to_string(res.z_upper[static_cast<size_t>(jmax)]));
      stat[jmax] = 0.0;
    }
  }
  return res;
}

SolveResult IpmSolver::run() {
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  setup();
  auto t1 = clock::now();
  double build_s = std::chrono::duration<double>(t1 - t0).count();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t1).count(); };

  double nu = 1.0;  // l1 penalty weight
  int stall = 0;
  Eigen::SparseMatrix<double> K;
  Eigen::VectorXd lam_for_hess(m_);
  std::vector<double> xcur(static_cast<size_t>(n_));

  int iter = 0;
  for (; iter <= opts_.max_iter; ++iter) {
    for (int j = 0; j < n_; ++j) xcur[static_cast<size_t>(j)] = v_[j];
    eval_point(xcur);
    compute_residuals();

    if (!std::isfinite(fval_) || !cval_.allFinite()) {
      return finish(SolveStatus::Failed, iter, "NonFiniteEval: model not finite at iterate",
                    build_s, elapsed());
    }

    KktResiduals kkt = unscaled_kkt();
    if (log_enabled(LogLevel::Debug)) {
      char line[200];
      std::snprintf(line, sizeof(line),
                    "ipm iter %3d obj %.8e feas %.2e stat %.2e comp %.2e mu %.2e ap %.2e ad %.2e "
                    "dp %.1e ef %.2e ec %.2e nu %.1e lam %.1e",
                    iter, fval_, kkt.feasibility, kkt.stationarity, kkt.complementarity, mu_,
                    last_alpha_p_, last_alpha_d_, delta_primal_last_, last_e_full_, last_e_cur_,
                    last_nu_, m_ > 0 ? lam_.cwiseAbs().maxCoeff() : 0.0);
      log_line(LogLevel::Debug, line);
    }
    if (kkt.stationarity <= opts_.tol && kkt.feasibility <= opts_.tol &&
        kkt.complementarity <= opts_.tol) {
      return finish(SolveStatus::Optimal, iter, "", build_s, elapsed());
    }
    if (iter == opts_.max_iter) break;
    if (elapsed() > opts_.time_limit) {
      return finish(SolveStatus::TimeLimit, iter, "time limit reached", build_s, elapsed());
    }

    const auto& J = der_->jacobian_at(xcur);
    // inequality multipliers racing along degenerate rays would otherwise
    // inject unbounded indefinite curvature; saturating their Hessian weight
    // is a Gauss-Newton-style approximation that leaves the residuals exact
    for (int i = 0; i < m_; ++i) {
      double w = lam_[i] * cs_[i];
      if (!prob_.constraints[static_cast<size_t>(i)].is_equality()) {
        w = std::clamp(w, -3e3, 3e3);
      }
      lam_for_hess[i] = w;
    }
    const auto& H = der_->hessian_at(
        xcur, fs_, std::span<const double>(lam_for_hess.data(), static_cast<size_t>(m_)));

    Eigen::VectorXd gf;
    der_->objective_gradient(xcur, gf);

    // scaled dual infeasibility with explicit bound multipliers
    Eigen::VectorXd dual_inf = Eigen::VectorXd::Zero(nv_);
    dual_inf.head(n_) = fs_ * gf + J.transpose() * (cs_.cwiseProduct(lam_)).matrix();
    for (int i = 0; i < m_; ++i) {
      int k = slack_of_[static_cast<size_t>(i)];
      if (k >= 0) dual_inf[n_ + k] -= lam_[i];
    }
    dual_inf -= zl_;
    dual_inf += zu_;

    // monotone Fiacco-McCormick barrier schedule: once the perturbed KKT
    // system is solved to within 10*mu, shrink mu toward its floor
    double e_mu_cur;
    {
      double comp_dev = 0.0;
      for (int j = 0; j < nv_; ++j) {
        size_t sj = static_cast<size_t>(j);
        if (has_lo_[sj]) comp_dev = std::max(comp_dev, std::abs(zl_[j] * (v_[j] - vl_[j]) - mu_));
        if (has_up_[sj]) comp_dev = std::max(comp_dev, std::abs(zu_[j] * (vu_[j] - v_[j]) - mu_));
      }
      double e_mu = std::max({comp_dev, dual_inf.cwiseAbs().maxCoeff(),
                              m_ > 0 ? resid_.cwiseAbs().maxCoeff() : 0.0});
      e_mu_cur = e_mu;
      // the complementarity target only needs mu ~ fs*tol/10 (the check is
      // unscaled); pushing the barrier further just explodes the
      // conditioning of the active slack blocks
      const double mu_min = std::max(fs_ * opts_.tol / 10.0, 1e-12);
      // degenerate geometries can hover just outside the reduction trigger;
      // force one reduction when mu has not moved for a while at primal
      // feasibility
      bool force = false;
      if (mu_ == mu_at_last_change_) {
        if (++iters_at_mu_ >= 15 && kkt.feasibility <= opts_.tol) {
          force = true;
          iters_at_mu_ = 0;
        }
      } else {
        iters_at_mu_ = 0;
        mu_at_last_change_ = mu_;
      }
      while ((force || e_mu <= 10.0 * mu_) && mu_ > mu_min) {
        force = false;
        double gap = 0.0;
        int nb = 0;
        for (int j = 0; j < nv_; ++j) {
          size_t sj = static_cast<size_t>(j);
          if (has_lo_[sj]) {
            gap += zl_[j] * (v_[j] - vl_[j]);
            ++nb;
          }
          if (has_up_[sj]) {
            gap += zu_[j] * (vu_[j] - v_[j]);
            ++nb;
          }
        }
        double sigma_mu = nb > 0 ? 0.1 * gap / nb : 0.1 * mu_;
        mu_ = std::max(mu_min, std::min(0.2 * mu_, sigma_mu));
        if (mu_ <= mu_min) break;
      }
    }

    // right-hand side of the condensed primal-dual system
    Eigen::VectorXd rhs(nv_ + m_);
    {
      Eigen::VectorXd gv = dual_inf + zl_ - zu_;
      for (int j = 0; j < nv_; ++j) {
        size_t sj = static_cast<size_t>(j);
        if (has_lo_[sj]) gv[j] -= mu_ / (v_[j] - vl_[j]);
        if (has_up_[sj]) gv[j] += mu_ / (vu_[j] - v_[j]);
      }
      rhs.head(nv_) = -gv;
      rhs.tail(m_) = -resid_;
    }

    // factor and solve; inertia failures escalate the primal shift, insane
    // step magnitudes (dependent active rows) escalate the dual shift
    double delta_p = 0.0;
    double delta_d = 1e-8;
    double dp_start = delta_primal_last_ > 1e-20 ? delta_primal_last_ / 10.0 : 0.0;
    Eigen::SparseMatrix<double> K0;
    Eigen::VectorXd sol;
    bool ok = false;
    int bad_steps = 0;
    const double sane = 1e9 * (1.0 + v_.cwiseAbs().maxCoeff() + lam_.cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 40; ++attempt) {
      if (!assemble_and_factor(H, J, attempt == 0 ? dp_start : delta_p, delta_d, K, K0)) {
        if (attempt > 0 || dp_start > 0.0) delta_p = delta_p == 0.0 ? 1e-8 : delta_p * 10.0;
        if (attempt == 0) delta_p = std::max(delta_p, dp_start == 0.0 ? 1e-8 : dp_start * 10.0);
        if (delta_p > 1e12) break;
        continue;
      }
      if (attempt == 0) delta_p = dp_start;
      sol = solve_kkt(K0, rhs);
      if (!sol.allFinite() || sol.cwiseAbs().maxCoeff() > sane) {
        if (log_enabled(LogLevel::Debug)) {
          log_line(LogLevel::Debug,
                   "  ladder: insane step norm " +
                       std::to_string(sol.allFinite() ? sol.cwiseAbs().maxCoeff() : -1.0) +
                       " sane " + std::to_string(sane) + " dd " + std::to_string(delta_d));
        }
        delta_d *= 100.0;
        if (++bad_steps > 5) break;
        continue;
      }
      // inertia-free test: directional curvature of the regularized
      // Hessian block along the step, by explicit product so an inexact
      // solve cannot fake the sign
      double curv;
      {
        Eigen::VectorXd dvh = sol.head(nv_);
        Eigen::VectorXd hdv = Eigen::VectorXd::Zero(nv_);
        hdv.head(n_) = H.selfadjointView<Eigen::Lower>() * dvh.head(n_);
        for (int j = 0; j < nv_; ++j) {
          size_t sj = static_cast<size_t>(j);
          double sigma = delta_p;
          if (has_lo_[sj]) sigma += zl_[j] / (v_[j] - vl_[j]);
          if (has_up_[sj]) sigma += zu_[j] / (vu_[j] - v_[j]);
          hdv[j] += sigma * dvh[j];
        }
        curv = dvh.dot(hdv);
        double noise = 1e-10 * dvh.cwiseAbs().dot(hdv.cwiseAbs());
        if (curv >= -noise) {
          ok = true;
          break;
        }
        if (log_enabled(LogLevel::Debug)) {
          log_line(LogLevel::Debug, "  ladder: negative curvature " + std::to_string(curv) +
                                        " dp " + std::to_string(delta_p));
        }
      }
      delta_p = delta_p == 0.0 ? 1e-8 : delta_p * 10.0;
      if (delta_p > 1e12) break;
    }
    if (!ok) {
      return finish(SolveStatus::Failed, iter,
                    "LinearSolveFailure: KKT factorization failed after regularization", build_s,
                    elapsed());
    }
    delta_primal_last_ = delta_p;

    Eigen::VectorXd dv = sol.head(nv_);
    Eigen::VectorXd dlam = sol.tail(m_);
    Eigen::VectorXd dzl = Eigen::VectorXd::Zero(nv_), dzu = Eigen::VectorXd::Zero(nv_);
    for (int j = 0; j < nv_; ++j) {
      size_t sj = static_cast<size_t>(j);
      if (has_lo_[sj]) {
        double d = v_[j] - vl_[j];
        dzl[j] = (mu_ - zl_[j] * dv[j]) / d - zl_[j];
      }
      if (has_up_[sj]) {
        double d = vu_[j] - v_[j];
        dzu[j] = (mu_ + zu_[j] * dv[j]) / d - zu_[j];
      }
    }

    // fraction-to-boundary, relaxed while the barrier is still large
    const double tau = std::min(opts_.fraction_to_boundary, std::max(0.99, 1.0 - mu_));
    double alpha_p = 1.0, alpha_d = 1.0;
    for (int j = 0; j < nv_; ++j) {
      size_t sj = static_cast<size_t>(j);
      if (has_lo_[sj] && dv[j] < 0.0) alpha_p = std::min(alpha_p, -tau * (v_[j] - vl_[j]) / dv[j]);
      if (has_up_[sj] && dv[j] > 0.0) alpha_p = std::min(alpha_p, tau * (vu_[j] - v_[j]) / dv[j]);
      if (has_lo_[sj] && dzl[j] < 0.0) alpha_d = std::min(alpha_d, -tau * zl_[j] / dzl[j]);
      if (has_up_[sj] && dzu[j] < 0.0) alpha_d = std::min(alpha_d, -tau * zu_[j] / dzu[j]);
    }

    if (log_enabled(LogLevel::Debug) && alpha_p < 1e-8) {
      for (int j = 0; j < nv_; ++j) {
        size_t sj = static_cast<size_t>(j);
        double a = 1.0;
        if (has_lo_[sj] && dv[j] < 0.0) a = std::min(a, -tau * (v_[j] - vl_[j]) / dv[j]);
        if (has_up_[sj] && dv[j] > 0.0) a = std::min(a, tau * (vu_[j] - v_[j]) / dv[j]);
        if (a <= alpha_p * 1.0000001) {
          std::string nm = j < n_ ? prob_.var_names[sj] : "slack" + std::to_string(j - n_);
          char buf[256];
          std::snprintf(buf, sizeof(buf),
                        "  block %s v %.6e lo %.6e up %.6e dv %.3e zl %.3e zu %.3e", nm.c_str(),
                        v_[j], vl_[j], vu_[j], dv[j], zl_[j], zu_[j]);
          log_line(LogLevel::Debug, buf);
        }
      }
    }

    // l1 merit line search; the penalty weight tracks the multiplier
    // estimates and may decay back toward them
    double lam_inf = 0.0;
    for (int i = 0; i < m_; ++i) lam_inf = std::max(lam_inf, std::abs(lam_[i] + dlam[i]));
    double nu_req = 1.01 * lam_inf + 1e-6;
    nu = nu_req > nu ? nu_req : std::max(nu_req, 0.95 * nu);
    last_nu_ = nu;

    double fx_scaled = fs_ * fval_;
    Eigen::VectorXd c_scaled = cs_.cwiseProduct(cval_);
    double phi0 = barrier_value(v_, fx_scaled) + nu * constraint_l1(v_, c_scaled);
    double dphi = 0.0;
    {
      // barrier gradient dot dv minus the penalty's worst-case decrease
      dphi += (fs_ * gf).dot(dv.head(n_));
      for (int j = 0; j < nv_; ++j) {
        size_t sj = static_cast<size_t>(j);
        if (has_lo_[sj]) dphi -= mu_ / (v_[j] - vl_[j]) * dv[j];
        if (has_up_[sj]) dphi += mu_ / (vu_[j] - v_[j]) * dv[j];
      }
      dphi -= nu * constraint_l1(v_, c_scaled);
    }

    // Step acceptance, in order: the plain Newton step under Armijo or
    // KKT-error contraction; a second-order correction when constraint
    // curvature rejects it (Maratos effect); merit backtracking last.
    double alpha = alpha_p;
    double alpha_d_used = alpha_d;
    Eigen::VectorXd v_trial;
    bool accepted = false;
    std::vector<double> x_trial(static_cast<size_t>(n_));
    Eigen::VectorXd c_trial;
    Eigen::VectorXd dlam_used = dlam, dzl_used = dzl, dzu_used = dzu;

    auto eval_trial = [&](const Eigen::VectorXd& vt, double& f_t) {
      for (int j = 0; j < n_; ++j) x_trial[static_cast<size_t>(j)] = vt[j];
      f_t = der_->objective_value(x_trial);
      der_->constraint_values(x_trial, c_trial);
      return std::isfinite(f_t) && c_trial.allFinite();
    };
    auto merit_ok = [&](const Eigen::VectorXd& vt, double f_t, double step) {
      double phi_t =
          barrier_value(vt, fs_ * f_t) + nu * constraint_l1(vt, cs_.cwiseProduct(c_trial));
      return std::isfinite(phi_t) && phi_t <= phi0 + 1e-4 * step * std::min(dphi, 0.0);
    };
    auto kkt_ok = [&](const Eigen::VectorXd& vt, double ad) {
      double e_trial = kkt_error_mu(x_trial, vt, lam_ + ad * dlam_used, zl_ + ad * dzl_used,
                                    zu_ + ad * dzu_used, c_trial);
      last_e_full_ = e_trial;
      return e_trial <= 0.99 * e_mu_cur;
    };
    // feasible-phase acceptance: once primal-feasible at tolerance, steps
    // that stay feasible and reduce the barrier objective are always
    // acceptable, no matter what the exact-penalty weight thinks of them
    auto feasible_descent_ok = [&](const Eigen::VectorXd& vt, double f_t) {
      if (kkt.feasibility > 0.5 * opts_.tol) return false;
      double feas_t = 0.0;
      for (int i = 0; i < m_; ++i) {
        const auto& con = prob_.constraints[static_cast<size_t>(i)];
        feas_t = std::max(feas_t, con.lower - c_trial[i]);
        feas_t = std::max(feas_t, c_trial[i] - con.upper);
      }
      if (feas_t > 0.5 * opts_.tol) return false;
      double phi_b0 = barrier_value(v_, fs_ * fval_);
      double phi_bt = barrier_value(vt, fs_ * f_t);
      return std::isfinite(phi_bt) && phi_bt <= phi_b0 - 1e-12 * (1.0 + std::abs(phi_b0));
    };
    last_e_cur_ = e_mu_cur;

    // 1) full Newton step
    {
      double f_t;
      v_trial = v_ + alpha * dv;
      if (eval_trial(v_trial, f_t) &&
          (merit_ok(v_trial, f_t, alpha) || kkt_ok(v_trial, alpha_d) ||
           feasible_descent_ok(v_trial, f_t))) {
        accepted = true;
      }
    }

    // 2) one second-order correction reusing the factorization
    if (!accepted) {
      Eigen::VectorXd rhs_soc = rhs;
      for (int i = 0; i < m_; ++i) {
        const auto& con = prob_.constraints[static_cast<size_t>(i)];
        int k = slack_of_[static_cast<size_t>(i)];
        double r_trial = k < 0 ? cs_[i] * (c_trial[i] - con.lower)
                               : cs_[i] * c_trial[i] - v_trial[n_ + k];
        rhs_soc[nv_ + i] = -(alpha * resid_[i] + r_trial);
      }
      Eigen::VectorXd sol_soc = solve_kkt(K0, rhs_soc);
      if (sol_soc.allFinite()) {
        Eigen::VectorXd dv2 = sol_soc.head(nv_);
        Eigen::VectorXd dlam2 = sol_soc.tail(m_);
        Eigen::VectorXd dzl2 = Eigen::VectorXd::Zero(nv_), dzu2 = Eigen::VectorXd::Zero(nv_);
        double a2 = 1.0, ad2 = 1.0;
        for (int j = 0; j < nv_; ++j) {
          size_t sj = static_cast<size_t>(j);
          if (has_lo_[sj]) {
            double d = v_[j] - vl_[j];
            dzl2[j] = (mu_ - zl_[j] * dv2[j]) / d - zl_[j];
            if (dv2[j] < 0.0) a2 = std::min(a2, -tau * d / dv2[j]);
            if (dzl2[j] < 0.0) ad2 = std::min(ad2, -tau * zl_[j] / dzl2[j]);
          }
          if (has_up_[sj]) {
            double d = vu_[j] - v_[j];
            dzu2[j] = (mu_ + zu_[j] * dv2[j]) / d - zu_[j];
            if (dv2[j] > 0.0) a2 = std::min(a2, tau * d / dv2[j]);
            if (dzu2[j] < 0.0) ad2 = std::min(ad2, -tau * zu_[j] / dzu2[j]);
          }
        }
        Eigen::VectorXd v_soc = v_ + a2 * dv2;
        double f_t;
        bool fin = eval_trial(v_soc, f_t);
        if (fin) {
          dlam_used = dlam2;
          dzl_used = dzl2;
          dzu_used = dzu2;
          if (merit_ok(v_soc, f_t, a2) || kkt_ok(v_soc, ad2) ||
              feasible_descent_ok(v_soc, f_t)) {
            accepted = true;
            v_trial = v_soc;
            alpha = a2;
            alpha_d_used = ad2;
          } else {
            dlam_used = dlam;
            dzl_used = dzl;
            dzu_used = dzu;
          }
        }
      }
    }

    // 3) merit backtracking on the original direction
    if (!accepted) {
      for (int ls = 0; ls < 40; ++ls) {
        alpha *= 0.5;
        v_trial = v_ + alpha * dv;
        double f_t;
        if (eval_trial(v_trial, f_t) && (merit_ok(v_trial, f_t, alpha) || ls == 39)) {
          accepted = std::isfinite(f_t);
          break;
        }
      }
    }
    if (!accepted) {
      return finish(SolveStatus::Failed, iter, "NonFiniteEval: line search failed", build_s,
                    elapsed());
    }
    {  // refresh cached constraint values at the accepted point
      double f_t;
      eval_trial(v_trial, f_t);
    }

    if (alpha < 1e-10 && kkt.feasibility > 100.0 * opts_.tol) {
      if (++stall >= 12) {
        return finish(SolveStatus::Infeasible, iter,
                      "no progress on infeasibility with vanishing steps", build_s, elapsed());
      }
    } else {
      stall = 0;
    }

    last_alpha_p_ = alpha;
    last_alpha_d_ = alpha_d_used;
    v_ = v_trial;
    lam_ += alpha_d_used * dlam_used;
    zl_ += alpha_d_used * dzl_used;
    zu_ += alpha_d_used * dzu_used;
    // keep bound multipliers within a large primal-dual corridor
    constexpr double kappa = 1e10;
    for (int j = 0; j < nv_; ++j) {
      size_t sj = static_cast<size_t>(j);
      if (has_lo_[sj]) {
        double d = v_[j] - vl_[j];
        zl_[j] = std::clamp(zl_[j], mu_ / (kappa * d), std::max(mu_ * kappa / d, 1e-40));
      }
      if (has_up_[sj]) {
        double d = vu_[j] - v_[j];
        zu_[j] = std::clamp(zu_[j], mu_ / (kappa * d), std::max(mu_ * kappa / d, 1e-40));
      }
    }
    // the inequality-row multiplier and the difference of its slack's bound
    // multipliers agree at any KKT point; reconcile them when they drift
    // apart (degenerate rows sustain a slow mutual race otherwise), leaving
    // small second-order mismatches to the Newton iteration itself
    for (int i = 0; i < m_; ++i) {
      int k = slack_of_[static_cast<size_t>(i)];
      if (k < 0) continue;
      double target = zu_[n_ + k] - zl_[n_ + k];
      if (std::abs(lam_[i] - target) > 0.1 * (1.0 + std::abs(target))) lam_[i] = target;
    }
    // slack correction: when c(x) sits deeper inside the box than the slack,
    // moving the slack onto c(x) improves both the residual and the barrier
    // distance, and unpins steps blocked by a slack at its bound; rescue
    // only, since it perturbs the dual residual
    if (alpha < 1e-6) {
      std::vector<double> xc(static_cast<size_t>(n_));
      for (int j = 0; j < n_; ++j) xc[static_cast<size_t>(j)] = v_[j];
      eval_point(xc);
      for (int i = 0; i < m_; ++i) {
        int k = slack_of_[static_cast<size_t>(i)];
        if (k < 0) continue;
        int idx = n_ + k;
        size_t sidx = static_cast<size_t>(idx);
        double target = cs_[i] * cval_[i];
        if (has_lo_[sidx] && target > v_[idx]) {
          v_[idx] = has_up_[sidx] ? std::min(target, 0.5 * (v_[idx] + vu_[idx])) : target;
        } else if (has_up_[sidx] && !has_lo_[sidx] && target < v_[idx]) {
          v_[idx] = target;
        }
      }
    }
  }

  return finish(SolveStatus::IterLimit, iter, "iteration limit reached", build_s, elapsed());
}

}  // namespace

SolveResult solve(const PolyProblem& problem, const IpmOptions& options) {
  IpmSolver solver(problem, options);
  SolveResult res = solver.run();
  // badly proportioned multipliers inflate the barrier blocks and set a
  // noise floor above the tolerance; rescaling those rows and restarting
  // from the reached point conditions the endgame system properly
  for (int round = 0; round < 2; ++round) {
    if (res.status != SolveStatus::IterLimit || res.kkt.feasibility > options.tol) {
      break;
    }
    double lam_max = 0.0;
    for (double l : res.con_multipliers) lam_max = std::max(lam_max, std::abs(l));
    if (lam_max < 300.0) break;
    IpmSolver retry(problem, options);
    retry.row_scale_boost.assign(problem.constraints.size(), 1.0);
    for (size_t i = 0; i < problem.constraints.size(); ++i) {
      double l = std::abs(res.con_multipliers[i]);
      if (l > 100.0) retry.row_scale_boost[i] = l / 100.0;
    }
    retry.start_point = &res.x;
    SolveResult res2 = retry.run();
    if (res2.status == SolveStatus::Optimal || res2.kkt.max() < res.kkt.max()) {
      res = std::move(res2);
    } else {
      break;
    }
  }
  return res;
}

}  // namespace opf
