#include "opf/acopf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace opf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfPi = std::numbers::pi / 2;

// coefficients of the from/to flow expressions:
//   S_from = A |V_i|^2 - B (V_i V_j^*)        A = (Y + Yc)^*/|T|^2, B = Y^*/T
//   S_to   = C |V_j|^2 - D (V_i V_j^*)^*      C = (Y + Yc)^*,       D = Y^*/T^*
struct FlowCoef {
  Complex A, B, C, D;
};

FlowCoef flow_coef(const Branch& br) {
  double t2 = std::norm(br.t_ratio);
  FlowCoef f;
  f.A = std::conj(br.y + br.y_charge) / t2;
  f.B = std::conj(br.y) / br.t_ratio;
  f.C = std::conj(br.y + br.y_charge);
  f.D = std::conj(br.y) / std::conj(br.t_ratio);
  return f;
}

}  // namespace

double FeasibilityReport::max_violation() const {
  return std::max({flow_def, kcl, voltage, angle, thermal, gen_bounds});
}

std::pair<PolyProblem, AcopfVarMap> build_acopf(const Network& net, double scale) {
  PolyProblem prob;
  AcopfVarMap map;
  map.scale = scale;
  const double sq = std::sqrt(scale);
  const size_t nb = net.buses.size();
  const size_t ng = net.generators.size();
  const size_t ne = net.branches.size();
  const int ref = net.bus_index(net.ref_bus);

  map.vr.resize(nb);
  map.vi.resize(nb);
  for (size_t b = 0; b < nb; ++b) {
    const Bus& bus = net.buses[b];
    std::string id = std::to_string(bus.id);
    bool is_ref = static_cast<int>(b) == ref;
    map.vr[b] = prob.add_var("vr_" + id, is_ref ? 0.0 : -bus.v_max, bus.v_max,
                             0.5 * (bus.v_min + bus.v_max));
    map.vi[b] = prob.add_var("vi_" + id, is_ref ? 0.0 : -bus.v_max, is_ref ? 0.0 : bus.v_max, 0.0);
  }
  map.pg.resize(ng);
  map.qg.resize(ng);
  for (size_t g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    std::string id = std::to_string(gen.bus) + "_" + std::to_string(g);
    map.pg[g] = prob.add_var("pg_" + id, gen.s_min.real(), gen.s_max.real(),
                             0.5 * (gen.s_min.real() + gen.s_max.real()));
    map.qg[g] = prob.add_var("qg_" + id, gen.s_min.imag(), gen.s_max.imag(),
                             0.5 * (gen.s_min.imag() + gen.s_max.imag()));
  }
  map.p_from.resize(ne);
  map.q_from.resize(ne);
  map.p_to.resize(ne);
  map.q_to.resize(ne);
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    std::string id = std::to_string(br.from) + "_" + std::to_string(br.to) + "_" +
                     std::to_string(e);
    double fb = br.unlimited ? kInf : std::sqrt(br.t_limit * scale);
    map.p_from[e] = prob.add_var("p_" + id, -fb, fb, 0.0);
    map.q_from[e] = prob.add_var("q_" + id, -fb, fb, 0.0);
    map.p_to[e] = prob.add_var("p_r" + id, -fb, fb, 0.0);
    map.q_to[e] = prob.add_var("q_r" + id, -fb, fb, 0.0);
  }
  map.n_vars = prob.n_vars;

  using P = Polynomial;
  auto sqmag = [&](size_t b) {
    return P::term(1.0, {map.vr[b], map.vr[b]}) + P::term(1.0, {map.vi[b], map.vi[b]});
  };
  // real/imag of V_i V_j^*
  auto w_re = [&](size_t i, size_t j) {
    return P::term(1.0, {map.vr[i], map.vr[j]}) + P::term(1.0, {map.vi[i], map.vi[j]});
  };
  auto w_im = [&](size_t i, size_t j) {
    return P::term(1.0, {map.vi[i], map.vr[j]}) + P::term(-1.0, {map.vr[i], map.vi[j]});
  };

  // flow definitions
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    size_t i = static_cast<size_t>(net.bus_index(br.from));
    size_t j = static_cast<size_t>(net.bus_index(br.to));
    FlowCoef fc = flow_coef(br);
    P wr = w_re(i, j), wi = w_im(i, j);
    std::string id = std::to_string(br.from) + "-" + std::to_string(br.to);

    P pf = P::variable(map.p_from[e]) - sq * fc.A.real() * sqmag(i) + sq * fc.B.real() * wr -
           sq * fc.B.imag() * wi;
    P qf = P::variable(map.q_from[e]) - sq * fc.A.imag() * sqmag(i) + sq * fc.B.imag() * wr +
           sq * fc.B.real() * wi;
    P pt = P::variable(map.p_to[e]) - sq * fc.C.real() * sqmag(j) + sq * fc.D.real() * wr +
           sq * fc.D.imag() * wi;
    P qt = P::variable(map.q_to[e]) - sq * fc.C.imag() * sqmag(j) + sq * fc.D.imag() * wr -
           sq * fc.D.real() * wi;
    prob.add_constraint(std::move(pf), 0.0, 0.0, "flow_p " + id);
    prob.add_constraint(std::move(qf), 0.0, 0.0, "flow_q " + id);
    prob.add_constraint(std::move(pt), 0.0, 0.0, "flow_p_r " + id);
    prob.add_constraint(std::move(qt), 0.0, 0.0, "flow_q_r " + id);
  }

  // KCL, with the shunt entering as -conj(Ys)|V|^2
  for (size_t b = 0; b < nb; ++b) {
    const Bus& bus = net.buses[b];
    P kp = P::constant(-sq * bus.demand.real()) - sq * bus.shunt.real() * sqmag(b);
    P kq = P::constant(-sq * bus.demand.imag()) + sq * bus.shunt.imag() * sqmag(b);
    for (size_t g = 0; g < ng; ++g) {
      if (net.generators[g].bus != bus.id) continue;
      kp += P::term(sq, {map.pg[g]});
      kq += P::term(sq, {map.qg[g]});
    }
    for (size_t e = 0; e < ne; ++e) {
      if (net.bus_index(net.branches[e].from) == static_cast<int>(b)) {
        kp -= P::variable(map.p_from[e]);
        kq -= P::variable(map.q_from[e]);
      }
      if (net.bus_index(net.branches[e].to) == static_cast<int>(b)) {
        kp -= P::variable(map.p_to[e]);
        kq -= P::variable(map.q_to[e]);
      }
    }
    std::string id = std::to_string(bus.id);
    prob.add_constraint(std::move(kp), 0.0, 0.0, "kcl_p " + id);
    prob.add_constraint(std::move(kq), 0.0, 0.0, "kcl_q " + id);
  }

  // voltage magnitude range
  for (size_t b = 0; b < nb; ++b) {
    const Bus& bus = net.buses[b];
    prob.add_constraint(sqmag(b), bus.v_min * bus.v_min, bus.v_max * bus.v_max,
                        "vm " + std::to_string(bus.id));
  }

  // angle-difference cone: tan(th_min) Re <= Im <= tan(th_max) Re
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    size_t i = static_cast<size_t>(net.bus_index(br.from));
    size_t j = static_cast<size_t>(net.bus_index(br.to));
    std::string id = std::to_string(br.from) + "-" + std::to_string(br.to);
    if (br.theta_max < kHalfPi * (1 - 1e-9)) {
      prob.add_constraint(w_im(i, j) - std::tan(br.theta_max) * w_re(i, j), -kInf, 0.0,
                          "angle_ub " + id);
    }
    if (br.theta_min > -kHalfPi * (1 - 1e-9)) {
      prob.add_constraint(w_im(i, j) - std::tan(br.theta_min) * w_re(i, j), 0.0, kInf,
                          "angle_lb " + id);
    }
  }

  // thermal limits on both directions
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    if (br.unlimited) continue;
    std::string id = std::to_string(br.from) + "-" + std::to_string(br.to);
    double cap = br.t_limit * scale;
    prob.add_constraint(
        P::term(1.0, {map.p_from[e], map.p_from[e]}) + P::term(1.0, {map.q_from[e], map.q_from[e]}),
        -kInf, cap, "thermal " + id);
    prob.add_constraint(
        P::term(1.0, {map.p_to[e], map.p_to[e]}) + P::term(1.0, {map.q_to[e], map.q_to[e]}), -kInf,
        cap, "thermal_r " + id);
  }

  // objective: sum of quadratic generation costs, in MW against baseMVA
  P obj;
  for (size_t g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    obj += P::constant(scale * gen.cost_c0);
    obj += P::term(scale * gen.cost_c1 * net.base_mva, {map.pg[g]});
    obj += P::term(scale * gen.cost_c2 * net.base_mva * net.base_mva, {map.pg[g], map.pg[g]});
  }
  prob.objective = std::move(obj);

  prob.initial_point = flat_start(net, map);
  return {std::move(prob), std::move(map)};
}

std::vector<double> flat_start(const Network& net, const AcopfVarMap& map) {
  std::vector<double> x(static_cast<size_t>(map.n_vars), 0.0);
  const double sq = std::sqrt(map.scale);
  for (size_t b = 0; b < net.buses.size(); ++b) {
    x[static_cast<size_t>(map.vr[b])] = 0.5 * (net.buses[b].v_min + net.buses[b].v_max);
    x[static_cast<size_t>(map.vi[b])] = 0.0;
  }
  auto mid = [](double lo, double hi) {
    if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
    if (std::isfinite(lo)) return lo;
    if (std::isfinite(hi)) return hi;
    return 0.0;
  };
  for (size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    x[static_cast<size_t>(map.pg[g])] = mid(gen.s_min.real(), gen.s_max.real());
    x[static_cast<size_t>(map.qg[g])] = mid(gen.s_min.imag(), gen.s_max.imag());
  }
  for (size_t e = 0; e < net.branches.size(); ++e) {
    const Branch& br = net.branches[e];
    size_t i = static_cast<size_t>(net.bus_index(br.from));
    size_t j = static_cast<size_t>(net.bus_index(br.to));
    Complex vi_c(x[static_cast<size_t>(map.vr[i])], x[static_cast<size_t>(map.vi[i])]);
    Complex vj_c(x[static_cast<size_t>(map.vr[j])], x[static_cast<size_t>(map.vi[j])]);
    FlowCoef fc = flow_coef(br);
    Complex sf = fc.A * std::norm(vi_c) - fc.B * (vi_c * std::conj(vj_c));
    Complex st = fc.C * std::norm(vj_c) - fc.D * std::conj(vi_c * std::conj(vj_c));
    x[static_cast<size_t>(map.p_from[e])] = sq * sf.real();
    x[static_cast<size_t>(map.q_from[e])] = sq * sf.imag();
    x[static_cast<size_t>(map.p_to[e])] = sq * st.real();
    x[static_cast<size_t>(map.q_to[e])] = sq * st.imag();
  }
  return x;
}

AcopfSolution extract_solution(const Network& net, const AcopfVarMap& map,
                               std::span<const double> x) {
  AcopfSolution sol;
  const double sq = std::sqrt(map.scale);
  for (size_t b = 0; b < net.buses.size(); ++b) {
    sol.voltage.emplace_back(x[static_cast<size_t>(map.vr[b])],
                             x[static_cast<size_t>(map.vi[b])]);
  }
  for (size_t g = 0; g < net.generators.size(); ++g) {
    sol.pg.push_back(x[static_cast<size_t>(map.pg[g])]);
    sol.qg.push_back(x[static_cast<size_t>(map.qg[g])]);
    sol.objective += cost_value(net.generators[g], sol.pg.back(), net.base_mva);
  }
  for (size_t e = 0; e < net.branches.size(); ++e) {
    sol.p_from.push_back(x[static_cast<size_t>(map.p_from[e])] / sq);
    sol.q_from.push_back(x[static_cast<size_t>(map.q_from[e])] / sq);
    sol.p_to.push_back(x[static_cast<size_t>(map.p_to[e])] / sq);
    sol.q_to.push_back(x[static_cast<size_t>(map.q_to[e])] / sq);
  }
  return sol;
}

FeasibilityReport check_feasibility(const Network& net, const AcopfVarMap& map,
                                    std::span<const double> x) {
  FeasibilityReport rep;
  AcopfSolution sol = extract_solution(net, map, x);
  const size_t nb = net.buses.size();

  std::vector<Complex> inj(nb, Complex(0, 0));  // sum of branch flows per bus
  for (size_t e = 0; e < net.branches.size(); ++e) {
    const Branch& br = net.branches[e];
    size_t i = static_cast<size_t>(net.bus_index(br.from));
    size_t j = static_cast<size_t>(net.bus_index(br.to));
    FlowCoef fc = flow_coef(br);
    Complex w = sol.voltage[i] * std::conj(sol.voltage[j]);
    Complex sf = fc.A * std::norm(sol.voltage[i]) - fc.B * w;
    Complex st = fc.C * std::norm(sol.voltage[j]) - fc.D * std::conj(w);
    rep.flow_def = std::max({rep.flow_def, std::abs(sf.real() - sol.p_from[e]),
                             std::abs(sf.imag() - sol.q_from[e]),
                             std::abs(st.real() - sol.p_to[e]),
                             std::abs(st.imag() - sol.q_to[e])});
    inj[i] += Complex(sol.p_from[e], sol.q_from[e]);
    inj[j] += Complex(sol.p_to[e], sol.q_to[e]);

    if (!br.unlimited) {
      double cap = br.t_limit;
      rep.thermal = std::max(rep.thermal,
                             std::max(sol.p_from[e] * sol.p_from[e] +
                                          sol.q_from[e] * sol.q_from[e] - cap,
                                      sol.p_to[e] * sol.p_to[e] + sol.q_to[e] * sol.q_to[e] - cap));
    }
    double wr = w.real(), wi = w.imag();
    if (br.theta_max < kHalfPi * (1 - 1e-9)) {
      rep.angle = std::max(rep.angle, wi - std::tan(br.theta_max) * wr);
    }
    if (br.theta_min > -kHalfPi * (1 - 1e-9)) {
      rep.angle = std::max(rep.angle, std::tan(br.theta_min) * wr - wi);
    }
  }
  rep.thermal = std::max(rep.thermal, 0.0);
  rep.angle = std::max(rep.angle, 0.0);

  for (size_t b = 0; b < nb; ++b) {
    const Bus& bus = net.buses[b];
    Complex gen_sum(0, 0);
    for (size_t g = 0; g < net.generators.size(); ++g) {
      if (net.generators[g].bus == bus.id) gen_sum += Complex(sol.pg[g], sol.qg[g]);
    }
    Complex mismatch =
        gen_sum - bus.demand - std::conj(bus.shunt) * std::norm(sol.voltage[b]) - inj[b];
    rep.kcl = std::max({rep.kcl, std::abs(mismatch.real()), std::abs(mismatch.imag())});

    double vm2 = std::norm(sol.voltage[b]);
    rep.voltage = std::max({rep.voltage, bus.v_min * bus.v_min - vm2,
                            vm2 - bus.v_max * bus.v_max, 0.0});
  }

  for (size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    rep.gen_bounds = std::max({rep.gen_bounds, gen.s_min.real() - sol.pg[g],
                               sol.pg[g] - gen.s_max.real(), gen.s_min.imag() - sol.qg[g],
                               sol.qg[g] - gen.s_max.imag(), 0.0});
  }
  return rep;
}

}  // namespace opf
