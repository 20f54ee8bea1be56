#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "opf/poly.hpp"

using namespace opf;
using P = Polynomial;

TEST_CASE("eval") {
  P p = P::term(3.0, {0, 0, 1});  // 3 x0^2 x1
  std::vector<double> x{2.0, 5.0};
  CHECK(eval(p, x) == doctest::Approx(60.0));

  P zero;
  CHECK(eval(zero, x) == 0.0);

  CHECK_THROWS_AS(eval(P::variable(7), x), std::out_of_range);
}

TEST_CASE("canonical form merges and drops zeros") {
  P p = P::term(1.0, {0, 1}) + P::term(2.0, {1, 0});  // same monomial
  CHECK(p.terms().size() == 1);
  CHECK(p.terms()[0].coef == 3.0);
  P q = p - p;
  CHECK(q.is_zero());
}

TEST_CASE("degree cap rejects malformed builders") {
  P quartic = P::term(1.0, {0, 0, 1, 1});
  CHECK_THROWS_AS(quartic * P::variable(0), std::logic_error);
}

TEST_CASE("power rule") {
  P p = P::term(3.0, {0, 0, 1});
  P d = p.derivative(0);
  REQUIRE(d.terms().size() == 1);
  CHECK(d.terms()[0].coef == 6.0);
  std::vector<double> x{2.0, 5.0};
  CHECK(eval(d, x) == doctest::Approx(60.0));

  // gradient of a constant vanishes everywhere
  CHECK(gradient(P::constant(3.5)).empty());
}

TEST_CASE("hessian of a simple quadratic is twice the identity") {
  PolyProblem prob;
  prob.add_var("x0", -1, 1, 0);
  prob.add_var("x1", -1, 1, 0);
  prob.objective = P::term(1.0, {0, 0}) + P::term(1.0, {1, 1});
  std::vector<double> x{0.3, -0.4};
  auto H = hessian_lagrangian(prob, x, 1.0, {});
  CHECK(H.coeff(0, 0) == 2.0);
  CHECK(H.coeff(1, 1) == 2.0);
  CHECK(H.coeff(0, 1) == 0.0);
}

namespace {

P random_poly(std::mt19937& rng, int n_vars, int max_terms) {
  std::uniform_int_distribution<int> n_terms(1, max_terms);
  std::uniform_int_distribution<int> deg(0, 4);
  std::uniform_int_distribution<int> var(0, n_vars - 1);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::vector<Monomial> terms;
  int k = n_terms(rng);
  for (int t = 0; t < k; ++t) {
    Monomial m;
    m.coef = coef(rng);
    int d = deg(rng);
    for (int i = 0; i < d; ++i) m.exps.emplace_back(var(rng), 1);
    terms.push_back(std::move(m));
  }
  return P(std::move(terms));
}

}  // namespace

TEST_CASE("analytic derivatives match central finite differences") {
  std::mt19937 rng(20240811);
  std::uniform_real_distribution<double> point(-2.0, 2.0);
  const int n_vars = 10;
  const double h = 1e-6;

  for (int trial = 0; trial < 100; ++trial) {
    PolyProblem prob;
    for (int i = 0; i < n_vars; ++i) prob.add_var("x" + std::to_string(i), -10, 10, 0);
    prob.objective = random_poly(rng, n_vars, 6);
    for (int c = 0; c < 3; ++c) {
      prob.add_constraint(random_poly(rng, n_vars, 4), 0.0, 1.0);
    }
    std::vector<double> x(n_vars);
    for (auto& v : x) v = point(rng);

    auto J = jacobian(prob, x);
    for (int r = 0; r < static_cast<int>(prob.constraints.size()); ++r) {
      for (int j = 0; j < n_vars; ++j) {
        std::vector<double> xp = x, xm = x;
        xp[static_cast<size_t>(j)] += h;
        xm[static_cast<size_t>(j)] -= h;
        double fd =
            (prob.constraints[static_cast<size_t>(r)].poly.eval(xp) -
             prob.constraints[static_cast<size_t>(r)].poly.eval(xm)) /
            (2 * h);
        double an = J.coeff(r, j);
        CHECK(std::abs(an - fd) <= std::max(1e-5, 1e-5 * std::abs(an)));
      }
    }
  }
}

TEST_CASE("lagrangian hessian is exactly symmetric") {
  std::mt19937 rng(7);
  PolyProblem prob;
  for (int i = 0; i < 6; ++i) prob.add_var("x" + std::to_string(i), -10, 10, 0);
  prob.objective = random_poly(rng, 6, 8);
  std::vector<double> mult;
  for (int c = 0; c < 4; ++c) {
    prob.add_constraint(random_poly(rng, 6, 5), 0.0, 1.0);
    mult.push_back(c + 0.5);
  }
  std::vector<double> x{0.1, -0.7, 1.3, 0.4, -1.1, 0.9};
  auto H = hessian_lagrangian(prob, x, 2.0, mult);
  for (int k = 0; k < H.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(H, k); it; ++it) {
      CHECK(it.value() == H.coeff(it.col(), it.row()));  // identical, not approximate
    }
  }
}

TEST_CASE("ProblemDerivatives matches the free functions") {
  std::mt19937 rng(99);
  PolyProblem prob;
  for (int i = 0; i < 5; ++i) prob.add_var("x" + std::to_string(i), -10, 10, 0);
  prob.objective = random_poly(rng, 5, 6);
  for (int c = 0; c < 3; ++c) prob.add_constraint(random_poly(rng, 5, 4), 0.0, 1.0);
  std::vector<double> x{0.3, -0.2, 0.8, -1.4, 0.6};
  std::vector<double> mult{1.0, -2.0, 0.5};

  ProblemDerivatives der(prob);
  CHECK(der.objective_value(x) == doctest::Approx(prob.objective.eval(x)));
  auto Jref = jacobian(prob, x);
  const auto& J = der.jacobian_at(x);
  CHECK((Eigen::MatrixXd(J) - Eigen::MatrixXd(Jref)).cwiseAbs().maxCoeff() < 1e-15);
  auto Href = hessian_lagrangian(prob, x, 1.5, mult);
  const auto& H = der.hessian_at(x, 1.5, mult);
  Eigen::MatrixXd full = Eigen::MatrixXd(H);
  Eigen::MatrixXd sym = full + full.transpose();
  for (int i = 0; i < sym.rows(); ++i) sym(i, i) = full(i, i);
  CHECK((sym - Eigen::MatrixXd(Href)).cwiseAbs().maxCoeff() < 1e-12);
}
