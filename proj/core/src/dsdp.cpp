#include "opf/dsdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace opf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfPi = std::numbers::pi / 2;

struct FlowCoef {
  Complex A, B, C, D;  // see acopf.cpp: S_f = A Wii - B W, S_t = C Wjj - D W^*
};

FlowCoef flow_coef(const Branch& br) {
  double t2 = std::norm(br.t_ratio);
  return {std::conj(br.y + br.y_charge) / t2, std::conj(br.y) / br.t_ratio,
          std::conj(br.y + br.y_charge), std::conj(br.y) / std::conj(br.t_ratio)};
}

}  // namespace

int DsdpVarMap::find_pair(int i, int j) const {
  if (i > j) std::swap(i, j);
  auto it = pair_index.find(pair_key(i, j));
  if (it == pair_index.end()) {
    throw MissingLiftedPair("no lifted variable for bus-index pair (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
  }
  return it->second;
}

std::vector<int> edge_filter(const Network& net, double threshold) {
  std::vector<int> keep;
  for (size_t e = 0; e < net.branches.size(); ++e) {
    const Branch& br = net.branches[e];
    if (std::abs(br.y.real()) <= threshold && std::abs(br.y.imag()) <= threshold) {
      keep.push_back(static_cast<int>(e));
    }
  }
  return keep;
}

std::array<McRow, 4> mccormick(double xl, double xu, double yl, double yu) {
  if (!std::isfinite(xl) || !std::isfinite(xu) || !std::isfinite(yl) || !std::isfinite(yu)) {
    throw UnboundedInput("mccormick needs finite bounds");
  }
  if (xl > xu || yl > yu) {
    throw UnboundedInput("mccormick needs lower <= upper");
  }
  return {McRow{yl, xl, -xl * yl, true},   // z >= xl*y + yl*x - xl*yl
          McRow{yu, xu, -xu * yu, true},   // z >= xu*y + yu*x - xu*yu
          McRow{yu, xl, -xl * yu, false},  // z <= xl*y + yu*x - xl*yu
          McRow{yl, xu, -xu * yl, false}}; // z <= xu*y + yl*x - xu*yl
}

std::pair<PolyProblem, DsdpVarMap> build_dsdp(const Network& net, const CliqueTree& tree,
                                              const RelaxOptions& opts, const WBoxes* boxes) {
  PolyProblem prob;
  DsdpVarMap map;
  map.scale = opts.scale;
  const double s = opts.scale;
  const double sq = std::sqrt(s);
  const size_t nb = net.buses.size();
  const size_t ng = net.generators.size();
  const size_t ne = net.branches.size();

  // lifted pair set: all pairs inside cliques (covers every branch and fill)
  MinorSet minors = enumerate_minors(tree, opts.minor_cap);

  // W_ii
  map.w_diag.resize(nb);
  for (size_t b = 0; b < nb; ++b) {
    const Bus& bus = net.buses[b];
    double lo = bus.v_min * bus.v_min, hi = bus.v_max * bus.v_max;
    map.w_diag[b] = prob.add_var("W_" + std::to_string(bus.id), lo, hi, 0.5 * (lo + hi));
  }

  // branch-pair angle data feeds the Re(W) lower bound
  struct PairBound {
    double re_lo, re_hi, im_lo, im_hi;
    bool has_branch = false;
  };
  std::unordered_map<long long, PairBound> pb;
  auto canon = [&](int bi, int bj) {
    int i = net.bus_index(bi), j = net.bus_index(bj);
    bool flip = i > j;
    if (flip) std::swap(i, j);
    return std::tuple<int, int, bool>(i, j, flip);
  };
  for (const auto& br : net.branches) {
    auto [i, j, flip] = canon(br.from, br.to);
    const Bus& bi = net.buses[static_cast<size_t>(i)];
    const Bus& bj = net.buses[static_cast<size_t>(j)];
    double vv_hi = bi.v_max * bj.v_max;
    double vv_lo = bi.v_min * bj.v_min;
    double re_lo = vv_lo * std::min(std::cos(br.theta_min), std::cos(br.theta_max));
    auto key = DsdpVarMap::pair_key(i, j);
    auto it = pb.find(key);
    if (it == pb.end()) {
      pb[key] = {re_lo, vv_hi, -vv_hi, vv_hi, true};
    } else {
      it->second.re_lo = std::max(it->second.re_lo, re_lo);  // parallel branches
      it->second.has_branch = true;
    }
  }

  for (const auto& [bi, bj] : minors.minors2) {
    int i = net.bus_index(bi), j = net.bus_index(bj);
    if (i > j) std::swap(i, j);
    const Bus& busi = net.buses[static_cast<size_t>(i)];
    const Bus& busj = net.buses[static_cast<size_t>(j)];
    double vv_hi = busi.v_max * busj.v_max;
    double re_lo = -vv_hi, re_hi = vv_hi, im_lo = -vv_hi, im_hi = vv_hi;
    auto key = DsdpVarMap::pair_key(i, j);
    if (auto it = pb.find(key); it != pb.end()) {
      re_lo = it->second.re_lo;
      re_hi = it->second.re_hi;
      im_lo = it->second.im_lo;
      im_hi = it->second.im_hi;
    }
    if (boxes) {
      if (auto it = boxes->re.find(key); it != boxes->re.end()) {
        re_lo = std::max(re_lo, it->second.first);
        re_hi = std::min(re_hi, it->second.second);
      }
      if (auto it = boxes->im.find(key); it != boxes->im.end()) {
        im_lo = std::max(im_lo, it->second.first);
        im_hi = std::min(im_hi, it->second.second);
      }
    }
    std::string id = std::to_string(busi.id) + "," + std::to_string(busj.id);
    map.pair_index[key] = static_cast<int>(map.pairs.size());
    map.pairs.emplace_back(i, j);
    map.w_re.push_back(prob.add_var("Wr_" + id, re_lo, re_hi, 0.5 * (re_lo + re_hi)));
    map.w_im.push_back(prob.add_var("Wi_" + id, im_lo, im_hi, 0.0));
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

  std::vector<int> rlt_edges = opts.with_rlt ? edge_filter(net, opts.admittance_threshold)
                                             : std::vector<int>{};
  std::vector<char> in_rlt(ne, 0);
  for (int e : rlt_edges) in_rlt[static_cast<size_t>(e)] = 1;

  map.p_from.resize(ne);
  map.q_from.resize(ne);
  map.p_to.resize(ne);
  map.q_to.resize(ne);
  map.p_hat_from.resize(ne);
  map.q_hat_from.resize(ne);
  map.p_hat_to.resize(ne);
  map.q_hat_to.resize(ne);
  map.l_from.assign(ne, -1);
  map.l_to.assign(ne, -1);
  map.lw_from.assign(ne, -1);
  map.lw_to.assign(ne, -1);
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    std::string id = std::to_string(br.from) + "_" + std::to_string(br.to) + "_" +
                     std::to_string(e);
    double fb = br.unlimited ? kInf : std::sqrt(br.t_limit * s);
    double hb = br.unlimited ? kInf : br.t_limit * s;
    map.p_from[e] = prob.add_var("p_" + id, -fb, fb, 0.0);
    map.q_from[e] = prob.add_var("q_" + id, -fb, fb, 0.0);
    map.p_to[e] = prob.add_var("p_r" + id, -fb, fb, 0.0);
    map.q_to[e] = prob.add_var("q_r" + id, -fb, fb, 0.0);
    map.p_hat_from[e] = prob.add_var("ph_" + id, 0.0, hb, 0.0);
    map.q_hat_from[e] = prob.add_var("qh_" + id, 0.0, hb, 0.0);
    map.p_hat_to[e] = prob.add_var("ph_r" + id, 0.0, hb, 0.0);
    map.q_hat_to[e] = prob.add_var("qh_r" + id, 0.0, hb, 0.0);
    if (in_rlt[e]) {
      const Bus& bi = net.buses[static_cast<size_t>(net.bus_index(br.from))];
      const Bus& bj = net.buses[static_cast<size_t>(net.bus_index(br.to))];
      double t2 = std::norm(br.t_ratio);
      double lf_hi = br.unlimited ? kInf : s * t2 * br.t_limit / (bi.v_min * bi.v_min);
      double lt_hi = br.unlimited ? kInf : s * br.t_limit / (bj.v_min * bj.v_min);
      map.l_from[e] = prob.add_var("l_" + id, 0.0, lf_hi, 0.0);
      map.l_to[e] = prob.add_var("l_r" + id, 0.0, lt_hi, 0.0);
      map.lw_from[e] = prob.add_var("lW_" + id, 0.0, br.unlimited ? kInf : t2 * s * br.t_limit,
                                    0.0);
      map.lw_to[e] = prob.add_var("lW_r" + id, 0.0, br.unlimited ? kInf : s * br.t_limit, 0.0);
    }
  }
  map.n_vars = prob.n_vars;

  using P = Polynomial;
  // oriented Re/Im of W_{f,t} for a branch, as linear polys over pair vars
  auto w_oriented = [&](const Branch& br) {
    auto [i, j, flip] = canon(br.from, br.to);
    int p = map.find_pair(i, j);
    P re = P::variable(map.w_re[static_cast<size_t>(p)]);
    P im = P::term(flip ? -1.0 : 1.0, {map.w_im[static_cast<size_t>(p)]});
    return std::pair<P, P>(std::move(re), std::move(im));
  };

  // linear flow definitions
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    size_t i = static_cast<size_t>(net.bus_index(br.from));
    size_t j = static_cast<size_t>(net.bus_index(br.to));
    FlowCoef fc = flow_coef(br);
    auto [wr, wi] = w_oriented(br);
    std::string id = std::to_string(br.from) + "-" + std::to_string(br.to);
    P wii = P::variable(map.w_diag[i]);
    P wjj = P::variable(map.w_diag[j]);

    P pf = P::variable(map.p_from[e]) - sq * fc.A.real() * wii + sq * fc.B.real() * wr -
           sq * fc.B.imag() * wi;
    P qf = P::variable(map.q_from[e]) - sq * fc.A.imag() * wii + sq * fc.B.imag() * wr +
           sq * fc.B.real() * wi;
    P pt = P::variable(map.p_to[e]) - sq * fc.C.real() * wjj + sq * fc.D.real() * wr +
           sq * fc.D.imag() * wi;
    P qt = P::variable(map.q_to[e]) - sq * fc.C.imag() * wjj + sq * fc.D.imag() * wr -
           sq * fc.D.real() * wi;
    prob.add_constraint(std::move(pf), 0.0, 0.0, "flow_p " + id);
    prob.add_constraint(std::move(qf), 0.0, 0.0, "flow_q " + id);
    prob.add_constraint(std::move(pt), 0.0, 0.0, "flow_p_r " + id);
    prob.add_constraint(std::move(qt), 0.0, 0.0, "flow_q_r " + id);
  }

  // KCL, linear in W_ii and the flows
  for (size_t b = 0; b < nb; ++b) {
    const Bus& bus = net.buses[b];
    P kp = P::constant(-sq * bus.demand.real()) +
           P::term(-sq * bus.shunt.real(), {map.w_diag[b]});
    P kq = P::constant(-sq * bus.demand.imag()) +
           P::term(sq * bus.shunt.imag(), {map.w_diag[b]});
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

  // angle cone on branch pairs
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    auto [wr, wi] = w_oriented(br);
    std::string id = std::to_string(br.from) + "-" + std::to_string(br.to);
    if (br.theta_max < kHalfPi * (1 - 1e-9)) {
      prob.add_constraint(wi - std::tan(br.theta_max) * wr, -kInf, 0.0, "angle_ub " + id);
    }
    if (br.theta_min > -kHalfPi * (1 - 1e-9)) {
      prob.add_constraint(wi - std::tan(br.theta_min) * wr, 0.0, kInf, "angle_lb " + id);
    }
  }

  // lifted thermal limits
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    if (br.unlimited) continue;
    std::string id = std::to_string(br.from) + "-" + std::to_string(br.to);
    double cap = br.t_limit * s;
    prob.add_constraint(P::variable(map.p_hat_from[e]) + P::variable(map.q_hat_from[e]), -kInf,
                        cap, "thermal " + id);
    prob.add_constraint(P::variable(map.p_hat_to[e]) + P::variable(map.q_hat_to[e]), -kInf, cap,
                        "thermal_r " + id);
  }

  // RLT current identities, product links and McCormick sets on E'
  for (size_t e = 0; e < ne; ++e) {
    if (!in_rlt[e]) continue;
    const Branch& br = net.branches[e];
    size_t i = static_cast<size_t>(net.bus_index(br.from));
    size_t j = static_cast<size_t>(net.bus_index(br.to));
    auto [wr, wi] = w_oriented(br);
    std::string id = std::to_string(br.from) + "-" + std::to_string(br.to);
    double t2 = std::norm(br.t_ratio);
    Complex ypc = br.y + br.y_charge;

    // l_f |T|^2 = |Y+Yc|^2 Wii - 2 Re(Kf W) + |Y T|^2 Wjj, Kf = Y^*(Y+Yc)T^*
    Complex kf = std::conj(br.y) * ypc * std::conj(br.t_ratio);
    P lf = P::term(t2, {map.l_from[e]}) + P::term(-s * std::norm(ypc), {map.w_diag[i]}) +
           (2 * s * kf.real()) * wr - (2 * s * kf.imag()) * wi +
           P::term(-s * std::norm(br.y) * t2, {map.w_diag[j]});
    prob.add_constraint(std::move(lf), 0.0, 0.0, "current " + id);

    // l_t |T|^2 = |(Y+Yc)T|^2 Wjj - 2 Re(Kt W) + |Y|^2 Wii, Kt = Y(Y+Yc)^*T^*
    Complex kt = br.y * std::conj(ypc) * std::conj(br.t_ratio);
    P lt = P::term(t2, {map.l_to[e]}) + P::term(-s * std::norm(ypc) * t2, {map.w_diag[j]}) +
           (2 * s * kt.real()) * wr - (2 * s * kt.imag()) * wi +
           P::term(-s * std::norm(br.y), {map.w_diag[i]});
    prob.add_constraint(std::move(lt), 0.0, 0.0, "current_r " + id);

    // product links
    prob.add_constraint(P::variable(map.lw_from[e]) + P::term(-t2, {map.p_hat_from[e]}) +
                            P::term(-t2, {map.q_hat_from[e]}),
                        0.0, 0.0, "lw_link " + id);
    prob.add_constraint(P::variable(map.lw_to[e]) - P::variable(map.p_hat_to[e]) -
                            P::variable(map.q_hat_to[e]),
                        0.0, 0.0, "lw_link_r " + id);

    // McCormick needs finite current bounds, so unlimited branches skip it
    if (!br.unlimited) {
      auto add_mc = [&](int xv, int yv, int zv, double xl, double xu, double yl, double yu,
                        const std::string& tag) {
        for (const auto& row : mccormick(xl, xu, yl, yu)) {
          P poly = P::variable(zv) + P::term(-row.cx, {xv}) + P::term(-row.cy, {yv}) +
                   P::constant(-row.c0);
          if (row.lower) {
            prob.add_constraint(std::move(poly), 0.0, kInf, tag);
          } else {
            prob.add_constraint(std::move(poly), -kInf, 0.0, tag);
          }
        }
      };
      const Bus& bi = net.buses[i];
      const Bus& bj = net.buses[j];
      add_mc(map.l_from[e], map.w_diag[i], map.lw_from[e], 0.0,
             s * t2 * br.t_limit / (bi.v_min * bi.v_min), bi.v_min * bi.v_min,
             bi.v_max * bi.v_max, "mc " + id);
      add_mc(map.l_to[e], map.w_diag[j], map.lw_to[e], 0.0,
             s * br.t_limit / (bj.v_min * bj.v_min), bj.v_min * bj.v_min, bj.v_max * bj.v_max,
             "mc_r " + id);
    }
  }

  // determinant cuts
  for (const auto& [bi, bj] : minors.minors2) {
    int i = net.bus_index(bi), j = net.bus_index(bj);
    if (i > j) std::swap(i, j);
    int p = map.find_pair(i, j);
    int wr = map.w_re[static_cast<size_t>(p)], wi = map.w_im[static_cast<size_t>(p)];
    P det = P::term(1.0, {map.w_diag[static_cast<size_t>(i)], map.w_diag[static_cast<size_t>(j)]}) +
            P::term(-1.0, {wr, wr}) + P::term(-1.0, {wi, wi});
    prob.add_constraint(std::move(det), 0.0, kInf,
                        "det2 " + std::to_string(bi) + "," + std::to_string(bj));
  }
  for (const auto& t : minors.minors3) {
    int i = net.bus_index(t[0]), j = net.bus_index(t[1]), k = net.bus_index(t[2]);
    int idx[3] = {i, j, k};
    std::sort(idx, idx + 3);
    i = idx[0]; j = idx[1]; k = idx[2];
    int dii = map.w_diag[static_cast<size_t>(i)];
    int djj = map.w_diag[static_cast<size_t>(j)];
    int dkk = map.w_diag[static_cast<size_t>(k)];
    size_t pij = static_cast<size_t>(map.find_pair(i, j));
    size_t pik = static_cast<size_t>(map.find_pair(i, k));
    size_t pjk = static_cast<size_t>(map.find_pair(j, k));
    int rd = map.w_re[pij], id_ = map.w_im[pij];   // d = W_ij
    int re = map.w_re[pik], ie = map.w_im[pik];    // e = W_ik
    int rf = map.w_re[pjk], if_ = map.w_im[pjk];   // f = W_jk
    // det = a b c - a|f|^2 - b|e|^2 - c|d|^2 + 2 Re(d f e^*)
    P det = P::term(1.0, {dii, djj, dkk});
    det += P::term(-1.0, {dii, rf, rf}) + P::term(-1.0, {dii, if_, if_});
    det += P::term(-1.0, {djj, re, re}) + P::term(-1.0, {djj, ie, ie});
    det += P::term(-1.0, {dkk, rd, rd}) + P::term(-1.0, {dkk, id_, id_});
    det += P::term(2.0, {re, rd, rf}) + P::term(-2.0, {re, id_, if_});
    det += P::term(2.0, {ie, rd, if_}) + P::term(2.0, {ie, id_, rf});
    prob.add_constraint(std::move(det), 0.0, kInf,
                        "det3 " + std::to_string(t[0]) + "," + std::to_string(t[1]) + "," +
                            std::to_string(t[2]));
  }

  // convex envelopes: p_hat >= p^2 (the concave secants stay out)
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    std::string id = std::to_string(br.from) + "-" + std::to_string(br.to);
    auto sec = [&](int hat, int flow, const std::string& tag) {
      prob.add_constraint(P::variable(hat) + P::term(-1.0, {flow, flow}), 0.0, kInf, tag);
    };
    sec(map.p_hat_from[e], map.p_from[e], "sec_p " + id);
    sec(map.q_hat_from[e], map.q_from[e], "sec_q " + id);
    sec(map.p_hat_to[e], map.p_to[e], "sec_p_r " + id);
    sec(map.q_hat_to[e], map.q_to[e], "sec_q_r " + id);
  }

  // objective identical to the ACOPF one, times scale
  P obj;
  for (size_t g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    obj += P::constant(s * gen.cost_c0);
    obj += P::term(s * gen.cost_c1 * net.base_mva, {map.pg[g]});
    obj += P::term(s * gen.cost_c2 * net.base_mva * net.base_mva, {map.pg[g], map.pg[g]});
  }
  prob.objective = std::move(obj);

  // flat start consistent with the lifted identities
  {
    std::vector<double>& x = prob.initial_point;
    for (size_t b = 0; b < nb; ++b) {
      const Bus& bus = net.buses[b];
      double vm = 0.5 * (bus.v_min + bus.v_max);
      x[static_cast<size_t>(map.w_diag[b])] = vm * vm;
    }
    for (size_t p = 0; p < map.pairs.size(); ++p) {
      auto [i, j] = map.pairs[p];
      double vi = std::sqrt(x[static_cast<size_t>(map.w_diag[static_cast<size_t>(i)])]);
      double vj = std::sqrt(x[static_cast<size_t>(map.w_diag[static_cast<size_t>(j)])]);
      double re = std::clamp(0.999 * vi * vj, prob.var_lower[static_cast<size_t>(map.w_re[p])],
                             prob.var_upper[static_cast<size_t>(map.w_re[p])]);
      x[static_cast<size_t>(map.w_re[p])] = re;
      x[static_cast<size_t>(map.w_im[p])] = 0.0;
    }
    for (size_t e = 0; e < ne; ++e) {
      const Branch& br = net.branches[e];
      size_t i = static_cast<size_t>(net.bus_index(br.from));
      size_t j = static_cast<size_t>(net.bus_index(br.to));
      auto [ci, cj, flip] = canon(br.from, br.to);
      size_t p = static_cast<size_t>(map.find_pair(ci, cj));
      double wii = x[static_cast<size_t>(map.w_diag[i])];
      double wjj = x[static_cast<size_t>(map.w_diag[j])];
      Complex w(x[static_cast<size_t>(map.w_re[p])],
                (flip ? -1.0 : 1.0) * x[static_cast<size_t>(map.w_im[p])]);
      FlowCoef fc = flow_coef(br);
      Complex sf = fc.A * wii - fc.B * w;
      Complex st = fc.C * wjj - fc.D * std::conj(w);
      x[static_cast<size_t>(map.p_from[e])] = sq * sf.real();
      x[static_cast<size_t>(map.q_from[e])] = sq * sf.imag();
      x[static_cast<size_t>(map.p_to[e])] = sq * st.real();
      x[static_cast<size_t>(map.q_to[e])] = sq * st.imag();
      x[static_cast<size_t>(map.p_hat_from[e])] = sq * sf.real() * sq * sf.real();
      x[static_cast<size_t>(map.q_hat_from[e])] = sq * sf.imag() * sq * sf.imag();
      x[static_cast<size_t>(map.p_hat_to[e])] = sq * st.real() * sq * st.real();
      x[static_cast<size_t>(map.q_hat_to[e])] = sq * st.imag() * sq * st.imag();
      if (map.l_from[e] >= 0) {
        double t2 = std::norm(br.t_ratio);
        Complex ypc = br.y + br.y_charge;
        Complex kf = std::conj(br.y) * ypc * std::conj(br.t_ratio);
        Complex kt = br.y * std::conj(ypc) * std::conj(br.t_ratio);
        x[static_cast<size_t>(map.l_from[e])] =
            s * (std::norm(ypc) * wii - 2 * (kf * w).real() + std::norm(br.y) * t2 * wjj) / t2;
        x[static_cast<size_t>(map.l_to[e])] =
            s * (std::norm(ypc) * t2 * wjj - 2 * (kt * w).real() + std::norm(br.y) * wii) / t2;
        x[static_cast<size_t>(map.lw_from[e])] =
            t2 * (x[static_cast<size_t>(map.p_hat_from[e])] +
                  x[static_cast<size_t>(map.q_hat_from[e])]);
        x[static_cast<size_t>(map.lw_to[e])] = x[static_cast<size_t>(map.p_hat_to[e])] +
                                               x[static_cast<size_t>(map.q_hat_to[e])];
      }
    }
    for (int v = 0; v < prob.n_vars; ++v) {
      size_t sv = static_cast<size_t>(v);
      x[sv] = std::clamp(x[sv], prob.var_lower[sv], prob.var_upper[sv]);
    }
  }

  return {std::move(prob), std::move(map)};
}

std::vector<double> warm_start_from_acopf(const Network& net, const PolyProblem& prob,
                                          const DsdpVarMap& map, const AcopfSolution& sol) {
  std::vector<double> x(static_cast<size_t>(map.n_vars), 0.0);
  const double s = map.scale;
  const double sq = std::sqrt(s);
  const size_t nb = net.buses.size();
  const size_t ne = net.branches.size();

  // clamp voltage magnitudes into their bounds before lifting; the
  // off-diagonal entries then shrink slightly so every clique submatrix is
  // strictly positive definite, which keeps the determinant-cut multipliers
  // bounded from the first iteration
  const double shrink = 1.0 - 1e-3;
  std::vector<Complex> V = sol.voltage;
  for (size_t b = 0; b < nb; ++b) {
    const Bus& bus = net.buses[b];
    double vm = std::abs(V[b]);
    double clamped = std::clamp(vm, bus.v_min, bus.v_max);
    if (vm > 0 && clamped != vm) V[b] *= clamped / vm;
    x[static_cast<size_t>(map.w_diag[b])] = std::norm(V[b]);
  }
  for (size_t p = 0; p < map.pairs.size(); ++p) {
    auto [i, j] = map.pairs[p];
    Complex w = shrink * V[static_cast<size_t>(i)] * std::conj(V[static_cast<size_t>(j)]);
    x[static_cast<size_t>(map.w_re[p])] = w.real();
    x[static_cast<size_t>(map.w_im[p])] = w.imag();
  }

  // flows and currents recomputed from the lifted variables
  std::vector<Complex> flow_from(ne), flow_to(ne);
  for (size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branches[e];
    size_t i = static_cast<size_t>(net.bus_index(br.from));
    size_t j = static_cast<size_t>(net.bus_index(br.to));
    FlowCoef fc = flow_coef(br);
    Complex w = shrink * (V[i] * std::conj(V[j]));
    flow_from[e] = fc.A * std::norm(V[i]) - fc.B * w;
    flow_to[e] = fc.C * std::norm(V[j]) - fc.D * std::conj(w);
    double pf = sq * flow_from[e].real(), qf = sq * flow_from[e].imag();
    double pt = sq * flow_to[e].real(), qt = sq * flow_to[e].imag();
    x[static_cast<size_t>(map.p_from[e])] = pf;
    x[static_cast<size_t>(map.q_from[e])] = qf;
    x[static_cast<size_t>(map.p_to[e])] = pt;
    x[static_cast<size_t>(map.q_to[e])] = qt;
    x[static_cast<size_t>(map.p_hat_from[e])] = pf * pf;
    x[static_cast<size_t>(map.q_hat_from[e])] = qf * qf;
    x[static_cast<size_t>(map.p_hat_to[e])] = pt * pt;
    x[static_cast<size_t>(map.q_hat_to[e])] = qt * qt;
    if (map.l_from[e] >= 0) {
      double t2 = std::norm(br.t_ratio);
      // the same identities the model rows encode, evaluated at W = VV^*
      Complex ypc = br.y + br.y_charge;
      Complex kf = std::conj(br.y) * ypc * std::conj(br.t_ratio);
      Complex kt = br.y * std::conj(ypc) * std::conj(br.t_ratio);
      double wii = std::norm(V[i]), wjj = std::norm(V[j]);
      x[static_cast<size_t>(map.l_from[e])] =
          s * (std::norm(ypc) * wii - 2 * (kf * w).real() + std::norm(br.y) * t2 * wjj) / t2;
      x[static_cast<size_t>(map.l_to[e])] =
          s * (std::norm(ypc) * t2 * wjj - 2 * (kt * w).real() + std::norm(br.y) * wii) / t2;
      x[static_cast<size_t>(map.lw_from[e])] = t2 * (pf * pf + qf * qf);
      x[static_cast<size_t>(map.lw_to[e])] = pt * pt + qt * qt;
    }
  }

  // generators: start from the ACOPF dispatch, then absorb the exact KCL
  // residual into the first generator at each bus
  for (size_t g = 0; g < net.generators.size(); ++g) {
    x[static_cast<size_t>(map.pg[g])] = sol.pg[g];
    x[static_cast<size_t>(map.qg[g])] = sol.qg[g];
  }
  for (size_t b = 0; b < nb; ++b) {
    const Bus& bus = net.buses[b];
    int first = -1;
    Complex gen_sum(0, 0);
    for (size_t g = 0; g < net.generators.size(); ++g) {
      if (net.generators[g].bus != bus.id) continue;
      if (first < 0) first = static_cast<int>(g);
      gen_sum += Complex(x[static_cast<size_t>(map.pg[g])], x[static_cast<size_t>(map.qg[g])]);
    }
    if (first < 0) continue;
    Complex inj(0, 0);
    for (size_t e = 0; e < ne; ++e) {
      if (net.bus_index(net.branches[e].from) == static_cast<int>(b)) inj += flow_from[e];
      if (net.bus_index(net.branches[e].to) == static_cast<int>(b)) inj += flow_to[e];
    }
    Complex target = bus.demand + std::conj(bus.shunt) * std::norm(V[b]) + inj;
    Complex resid = gen_sum - target;
    x[static_cast<size_t>(map.pg[static_cast<size_t>(first)])] -= resid.real();
    x[static_cast<size_t>(map.qg[static_cast<size_t>(first)])] -= resid.imag();
  }

  for (int v = 0; v < map.n_vars; ++v) {
    size_t sv = static_cast<size_t>(v);
    x[sv] = std::clamp(x[sv], prob.var_lower[sv], prob.var_upper[sv]);
  }
  return x;
}

std::vector<double> transfer_start(const Network& net, const PolyProblem& to_prob,
                                   const DsdpVarMap& to_map, const DsdpVarMap& from_map,
                                   std::span<const double> x_from) {
  std::vector<double> x(static_cast<size_t>(to_map.n_vars), 0.0);
  const size_t nb = net.buses.size();
  const size_t ne = net.branches.size();
  auto get = [&](int idx) { return x_from[static_cast<size_t>(idx)]; };
  auto put = [&](int idx, double v) { x[static_cast<size_t>(idx)] = v; };

  for (size_t b = 0; b < nb; ++b) put(to_map.w_diag[b], get(from_map.w_diag[b]));
  for (size_t p = 0; p < to_map.pairs.size(); ++p) {
    auto [i, j] = to_map.pairs[p];
    int q = from_map.find_pair(i, j);
    put(to_map.w_re[p], get(from_map.w_re[static_cast<size_t>(q)]));
    put(to_map.w_im[p], get(from_map.w_im[static_cast<size_t>(q)]));
  }
  for (size_t g = 0; g < net.generators.size(); ++g) {
    put(to_map.pg[g], get(from_map.pg[g]));
    put(to_map.qg[g], get(from_map.qg[g]));
  }
  for (size_t e = 0; e < ne; ++e) {
    put(to_map.p_from[e], get(from_map.p_from[e]));
    put(to_map.q_from[e], get(from_map.q_from[e]));
    put(to_map.p_to[e], get(from_map.p_to[e]));
    put(to_map.q_to[e], get(from_map.q_to[e]));
    put(to_map.p_hat_from[e], get(from_map.p_hat_from[e]));
    put(to_map.q_hat_from[e], get(from_map.q_hat_from[e]));
    put(to_map.p_hat_to[e], get(from_map.p_hat_to[e]));
    put(to_map.q_hat_to[e], get(from_map.q_hat_to[e]));
    if (to_map.l_from[e] >= 0) {
      const Branch& br = net.branches[e];
      size_t i = static_cast<size_t>(net.bus_index(br.from));
      size_t j = static_cast<size_t>(net.bus_index(br.to));
      int ci = std::min(static_cast<int>(i), static_cast<int>(j));
      int cj = std::max(static_cast<int>(i), static_cast<int>(j));
      size_t p = static_cast<size_t>(to_map.find_pair(ci, cj));
      bool flip = static_cast<int>(i) > static_cast<int>(j);
      Complex w(x[static_cast<size_t>(to_map.w_re[p])],
                (flip ? -1.0 : 1.0) * x[static_cast<size_t>(to_map.w_im[p])]);
      double wii = x[static_cast<size_t>(to_map.w_diag[i])];
      double wjj = x[static_cast<size_t>(to_map.w_diag[j])];
      double t2 = std::norm(br.t_ratio);
      double s = to_map.scale;
      Complex ypc = br.y + br.y_charge;
      Complex kf = std::conj(br.y) * ypc * std::conj(br.t_ratio);
      Complex kt = br.y * std::conj(ypc) * std::conj(br.t_ratio);
      put(to_map.l_from[e],
          s * (std::norm(ypc) * wii - 2 * (kf * w).real() + std::norm(br.y) * t2 * wjj) / t2);
      put(to_map.l_to[e],
          s * (std::norm(ypc) * t2 * wjj - 2 * (kt * w).real() + std::norm(br.y) * wii) / t2);
      put(to_map.lw_from[e], t2 * (x[static_cast<size_t>(to_map.p_hat_from[e])] +
                                   x[static_cast<size_t>(to_map.q_hat_from[e])]));
      put(to_map.lw_to[e], x[static_cast<size_t>(to_map.p_hat_to[e])] +
                               x[static_cast<size_t>(to_map.q_hat_to[e])]);
    }
  }
  for (int v = 0; v < to_map.n_vars; ++v) {
    size_t sv = static_cast<size_t>(v);
    x[sv] = std::clamp(x[sv], to_prob.var_lower[sv], to_prob.var_upper[sv]);
  }
  return x;
}

}  // namespace opf
