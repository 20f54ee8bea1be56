#pragma once

#include <Eigen/SparseCore>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace opf {

/// coefficient * prod x_v^p, exponents sorted by variable index, powers >= 1.
struct Monomial {
  double coef = 0.0;
  std::vector<std::pair<int, int>> exps;

  int degree() const {
    int d = 0;
    for (auto& [v, p] : exps) d += p;
    return d;
  }
};

/// Canonical merged form: no two terms share an exponent map, no zero
/// coefficients, terms ordered lexicographically. Total degree capped at 4;
/// builders producing more are broken and get an exception.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<Monomial> terms) : terms_(std::move(terms)) { canonicalize(); }

  static Polynomial constant(double c);
  static Polynomial variable(int v);
  /// coef * product of the listed variables (repeats give powers).
  static Polynomial term(double coef, std::initializer_list<int> vars);
  static Polynomial term(double coef, const std::vector<int>& vars);

  const std::vector<Monomial>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;
  double constant_part() const;

  double eval(std::span<const double> x) const;
  Polynomial derivative(int var) const;
  /// Sorted distinct variables appearing in the polynomial.
  std::vector<int> variables() const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(double s, Polynomial p) { return p *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  bool operator==(const Polynomial& o) const = default;

 private:
  std::vector<Monomial> terms_;
  void canonicalize();
};

struct PolyConstraint {
  Polynomial poly;
  double lower = 0.0;  // -inf allowed
  double upper = 0.0;  // +inf allowed
  std::string name;
  bool is_equality() const { return lower == upper; }
};

/// Polynomial NLP: min objective s.t. lb <= g(x) <= ub, xl <= x <= xu.
struct PolyProblem {
  int n_vars = 0;
  std::vector<double> var_lower;
  std::vector<double> var_upper;
  std::vector<std::string> var_names;
  Polynomial objective;
  std::vector<PolyConstraint> constraints;
  std::vector<double> initial_point;

  int add_var(const std::string& name, double lb, double ub, double x0);
  void add_constraint(Polynomial p, double lb, double ub, const std::string& name = {});

  /// Throws std::invalid_argument when an invariant is broken.
  void check() const;
};

double eval(const Polynomial& p, std::span<const double> x);

/// Nonzero partial derivatives as (variable, polynomial) pairs, ascending.
std::vector<std::pair<int, Polynomial>> gradient(const Polynomial& p);

/// Jacobian of all constraints at x (rows follow constraint order).
Eigen::SparseMatrix<double> jacobian(const PolyProblem& p, std::span<const double> x);

/// obj_weight * hess(objective) + sum multipliers[i] * hess(constraint i),
/// returned as a full symmetric matrix with exactly mirrored entries.
Eigen::SparseMatrix<double> hessian_lagrangian(const PolyProblem& p, std::span<const double> x,
                                               double obj_weight,
                                               std::span<const double> multipliers);

/// One constraint per line, "lb <= poly <= ub".
void dump(const PolyProblem& p, std::ostream& os);

/// Precompiled evaluation workspace with sparsity patterns fixed at
/// construction. One instance per concurrent evaluation stream.
class ProblemDerivatives {
 public:
  explicit ProblemDerivatives(const PolyProblem& p);

  int n_vars() const { return n_; }
  int n_cons() const { return m_; }

  double objective_value(std::span<const double> x) const;
  void objective_gradient(std::span<const double> x, Eigen::VectorXd& grad) const;
  void constraint_values(std::span<const double> x, Eigen::VectorXd& c) const;
  /// Fixed-pattern m x n Jacobian.
  const Eigen::SparseMatrix<double>& jacobian_at(std::span<const double> x);
  /// Fixed-pattern lower-triangular Hessian of the Lagrangian.
  const Eigen::SparseMatrix<double>& hessian_at(std::span<const double> x, double obj_weight,
                                                std::span<const double> multipliers);

 private:
  int n_ = 0, m_ = 0;
  std::vector<std::pair<int, Polynomial>> obj_grad_;
  std::vector<std::vector<std::pair<int, Polynomial>>> con_grad_;
  // lower-triangle second derivatives: (row, col, source, poly); source -1 = objective
  struct HessEntry {
    int row, col, source;
    Polynomial poly;
  };
  std::vector<HessEntry> hess_;
  std::vector<Eigen::Triplet<double>> jac_trips_, hess_trips_;
  Eigen::SparseMatrix<double> jac_, hess_mat_;
  std::vector<Polynomial> con_polys_;
  Polynomial obj_;
};

}  // namespace opf
