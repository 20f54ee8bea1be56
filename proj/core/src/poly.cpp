#include "opf/poly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

namespace opf {

namespace {
constexpr int kMaxDegree = 4;

bool exps_less(const std::vector<std::pair<int, int>>& a,
               const std::vector<std::pair<int, int>>& b) {
  return a < b;  // lexicographic on (var, pow) pairs
}
}  // namespace

void Polynomial::canonicalize() {
  for (auto& t : terms_) {
    // merge repeated variables, sort by index
    std::sort(t.exps.begin(), t.exps.end());
    std::vector<std::pair<int, int>> merged;
    for (auto& [v, p] : t.exps) {
      if (p == 0) continue;
      if (p < 0) throw std::logic_error("negative exponent");
      if (!merged.empty() && merged.back().first == v) {
        merged.back().second += p;
      } else {
        merged.emplace_back(v, p);
      }
    }
    t.exps = std::move(merged);
  }
  std::sort(terms_.begin(), terms_.end(),
            [](const Monomial& a, const Monomial& b) { return exps_less(a.exps, b.exps); });
  std::vector<Monomial> out;
  for (auto& t : terms_) {
    if (!out.empty() && out.back().exps == t.exps) {
      out.back().coef += t.coef;
    } else {
      out.push_back(std::move(t));
    }
  }
  terms_.clear();
  for (auto& t : out) {
    if (t.coef != 0.0) {
      if (t.degree() > kMaxDegree) {
        throw std::logic_error("polynomial degree exceeds " + std::to_string(kMaxDegree));
      }
      terms_.push_back(std::move(t));
    }
  }
}

Polynomial Polynomial::constant(double c) {
  Polynomial p;
  if (c != 0.0) p.terms_.push_back({c, {}});
  return p;
}

Polynomial Polynomial::variable(int v) {
  Polynomial p;
  p.terms_.push_back({1.0, {{v, 1}}});
  return p;
}

Polynomial Polynomial::term(double coef, std::initializer_list<int> vars) {
  return term(coef, std::vector<int>(vars));
}

Polynomial Polynomial::term(double coef, const std::vector<int>& vars) {
  Monomial m;
  m.coef = coef;
  for (int v : vars) m.exps.emplace_back(v, 1);
  Polynomial p;
  p.terms_.push_back(std::move(m));
  p.canonicalize();
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& t : terms_) d = std::max(d, t.degree());
  return d;
}

double Polynomial::constant_part() const {
  for (const auto& t : terms_) {
    if (t.exps.empty()) return t.coef;
  }
  return 0.0;
}

double Polynomial::eval(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& t : terms_) {
    double v = t.coef;
    for (auto& [var, pow] : t.exps) {
      if (var < 0 || static_cast<size_t>(var) >= x.size()) {
        throw std::out_of_range("polynomial references variable " + std::to_string(var) +
                                " outside point of size " + std::to_string(x.size()));
      }
      double xv = x[static_cast<size_t>(var)];
      for (int k = 0; k < pow; ++k) v *= xv;
    }
    sum += v;
  }
  return sum;
}

Polynomial Polynomial::derivative(int var) const {
  std::vector<Monomial> out;
  for (const auto& t : terms_) {
    for (size_t k = 0; k < t.exps.size(); ++k) {
      if (t.exps[k].first != var) continue;
      Monomial d;
      d.coef = t.coef * t.exps[k].second;
      d.exps = t.exps;
      if (--d.exps[k].second == 0) d.exps.erase(d.exps.begin() + static_cast<long>(k));
      out.push_back(std::move(d));
      break;
    }
  }
  return Polynomial(std::move(out));
}

std::vector<int> Polynomial::variables() const {
  std::vector<int> vars;
  for (const auto& t : terms_) {
    for (auto& [v, p] : t.exps) vars.push_back(v);
  }
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return vars;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  canonicalize();
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  for (const auto& t : o.terms_) {
    Monomial neg = t;
    neg.coef = -neg.coef;
    terms_.push_back(std::move(neg));
  }
  canonicalize();
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& t : terms_) t.coef *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  std::vector<Monomial> out;
  out.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& ta : a.terms_) {
    for (const auto& tb : b.terms_) {
      Monomial m;
      m.coef = ta.coef * tb.coef;
      m.exps = ta.exps;
      m.exps.insert(m.exps.end(), tb.exps.begin(), tb.exps.end());
      out.push_back(std::move(m));
    }
  }
  return Polynomial(std::move(out));
}

int PolyProblem::add_var(const std::string& name, double lb, double ub, double x0) {
  var_names.push_back(name);
  var_lower.push_back(lb);
  var_upper.push_back(ub);
  initial_point.push_back(x0);
  return n_vars++;
}

void PolyProblem::add_constraint(Polynomial p, double lb, double ub, const std::string& name) {
  constraints.push_back({std::move(p), lb, ub, name});
}

void PolyProblem::check() const {
  if (static_cast<int>(var_lower.size()) != n_vars ||
      static_cast<int>(var_upper.size()) != n_vars ||
      static_cast<int>(initial_point.size()) != n_vars) {
    throw std::invalid_argument("inconsistent variable array sizes");
  }
  for (int i = 0; i < n_vars; ++i) {
    if (var_lower[i] > var_upper[i]) {
      throw std::invalid_argument("variable " + std::to_string(i) + " has lower > upper");
    }
    if (!std::isfinite(initial_point[i])) {
      throw std::invalid_argument("initial point not finite at " + std::to_string(i));
    }
  }
  for (const auto& c : constraints) {
    if (c.lower > c.upper) {
      throw std::invalid_argument("constraint '" + c.name + "' has lower > upper");
    }
  }
}

double eval(const Polynomial& p, std::span<const double> x) { return p.eval(x); }

std::vector<std::pair<int, Polynomial>> gradient(const Polynomial& p) {
  std::vector<std::pair<int, Polynomial>> g;
  for (int v : p.variables()) {
    Polynomial d = p.derivative(v);
    if (!d.is_zero()) g.emplace_back(v, std::move(d));
  }
  return g;
}

Eigen::SparseMatrix<double> jacobian(const PolyProblem& p, std::span<const double> x) {
  std::vector<Eigen::Triplet<double>> trips;
  for (size_t r = 0; r < p.constraints.size(); ++r) {
    for (auto& [v, d] : gradient(p.constraints[r].poly)) {
      trips.emplace_back(static_cast<int>(r), v, d.eval(x));
    }
  }
  Eigen::SparseMatrix<double> J(static_cast<int>(p.constraints.size()), p.n_vars);
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

namespace {

// lower-triangle (row >= col) second derivatives of one polynomial
std::vector<std::tuple<int, int, Polynomial>> hessian_entries(const Polynomial& p) {
  std::vector<std::tuple<int, int, Polynomial>> out;
  for (auto& [v, dv] : gradient(p)) {
    for (auto& [w, dvw] : gradient(dv)) {
      if (w > v) continue;
      out.emplace_back(v, w, dvw);
    }
  }
  return out;
}

}  // namespace

Eigen::SparseMatrix<double> hessian_lagrangian(const PolyProblem& p, std::span<const double> x,
                                               double obj_weight,
                                               std::span<const double> multipliers) {
  if (multipliers.size() != p.constraints.size()) {
    throw std::invalid_argument("multiplier count does not match constraints");
  }
  std::vector<Eigen::Triplet<double>> trips;
  auto emit = [&](const Polynomial& poly, double w) {
    if (w == 0.0) return;
    for (auto& [r, c, d] : hessian_entries(poly)) {
      double v = w * d.eval(x);
      trips.emplace_back(r, c, v);
      if (r != c) trips.emplace_back(c, r, v);
    }
  };
  emit(p.objective, obj_weight);
  for (size_t i = 0; i < p.constraints.size(); ++i) {
    emit(p.constraints[i].poly, multipliers[i]);
  }
  Eigen::SparseMatrix<double> H(p.n_vars, p.n_vars);
  H.setFromTriplets(trips.begin(), trips.end());
  return H;
}

void dump(const PolyProblem& p, std::ostream& os) {
  auto poly_str = [&](const Polynomial& poly) {
    std::string s;
    bool first = true;
    for (const auto& t : poly.terms()) {
      if (!first) s += " + ";
      first = false;
      s += std::to_string(t.coef);
      for (auto& [v, pw] : t.exps) {
        s += "*" + (v < static_cast<int>(p.var_names.size()) && !p.var_names[v].empty()
                        ? p.var_names[v]
                        : "x" + std::to_string(v));
        if (pw > 1) s += "^" + std::to_string(pw);
      }
    }
    return first ? std::string("0") : s;
  };
  os << "min " << poly_str(p.objective) << "\n";
  for (const auto& c : p.constraints) {
    os << c.lower << " <= " << poly_str(c.poly) << " <= " << c.upper;
    if (!c.name.empty()) os << "   # " << c.name;
    os << "\n";
  }
}

ProblemDerivatives::ProblemDerivatives(const PolyProblem& p)
    : n_(p.n_vars), m_(static_cast<int>(p.constraints.size())), obj_(p.objective) {
  obj_grad_ = gradient(p.objective);
  con_grad_.reserve(p.constraints.size());
  con_polys_.reserve(p.constraints.size());
  for (const auto& c : p.constraints) {
    con_polys_.push_back(c.poly);
    con_grad_.push_back(gradient(c.poly));
  }

  jac_trips_.clear();
  for (int r = 0; r < m_; ++r) {
    for (auto& [v, d] : con_grad_[static_cast<size_t>(r)]) {
      jac_trips_.emplace_back(r, v, 0.0);
    }
  }
  jac_.resize(m_, n_);
  jac_.setFromTriplets(jac_trips_.begin(), jac_trips_.end());

  for (auto& [r, c, d] : hessian_entries(p.objective)) {
    hess_.push_back({r, c, -1, d});
  }
  for (int k = 0; k < m_; ++k) {
    for (auto& [r, c, d] : hessian_entries(con_polys_[static_cast<size_t>(k)])) {
      hess_.push_back({r, c, k, d});
    }
  }
  hess_trips_.reserve(hess_.size());
  for (auto& e : hess_) hess_trips_.emplace_back(e.row, e.col, 0.0);
  hess_mat_.resize(n_, n_);
  hess_mat_.setFromTriplets(hess_trips_.begin(), hess_trips_.end());
}

double ProblemDerivatives::objective_value(std::span<const double> x) const {
  return obj_.eval(x);
}

void ProblemDerivatives::objective_gradient(std::span<const double> x,
                                            Eigen::VectorXd& grad) const {
  grad.setZero(n_);
  for (auto& [v, d] : obj_grad_) grad[v] = d.eval(x);
}

void ProblemDerivatives::constraint_values(std::span<const double> x, Eigen::VectorXd& c) const {
  c.resize(m_);
  for (int r = 0; r < m_; ++r) c[r] = con_polys_[static_cast<size_t>(r)].eval(x);
}

const Eigen::SparseMatrix<double>& ProblemDerivatives::jacobian_at(std::span<const double> x) {
  size_t k = 0;
  for (int r = 0; r < m_; ++r) {
    for (auto& [v, d] : con_grad_[static_cast<size_t>(r)]) {
      jac_trips_[k] = {r, v, d.eval(x)};
      ++k;
    }
  }
  jac_.setFromTriplets(jac_trips_.begin(), jac_trips_.end());
  return jac_;
}

const Eigen::SparseMatrix<double>& ProblemDerivatives::hessian_at(
    std::span<const double> x, double obj_weight, std::span<const double> multipliers) {
  for (size_t i = 0; i < hess_.size(); ++i) {
    const auto& e = hess_[i];
    double w = e.source < 0 ? obj_weight : multipliers[static_cast<size_t>(e.source)];
    hess_trips_[i] = {e.row, e.col, w == 0.0 ? 0.0 : w * e.poly.eval(x)};
  }
  hess_mat_.setFromTriplets(hess_trips_.begin(), hess_trips_.end());
  return hess_mat_;
}

}  // namespace opf
