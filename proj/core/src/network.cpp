#include "opf/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

namespace opf {

namespace {

constexpr double kPi = std::numbers::pi;

// ANGMIN/ANGMAX come in degrees. Zero-zero (and |bound| >= 360) means
// unconstrained in MATPOWER; everything is clamped to the +-pi/2 window the
// models assume.
std::pair<double, double> angle_bounds(double angmin_deg, double angmax_deg) {
  if ((angmin_deg == 0.0 && angmax_deg == 0.0) || angmin_deg <= -360.0 || angmax_deg >= 360.0) {
    return {-kPi / 2, kPi / 2};
  }
  double lo = std::clamp(angmin_deg * kPi / 180.0, -kPi / 2, kPi / 2);
  double hi = std::clamp(angmax_deg * kPi / 180.0, -kPi / 2, kPi / 2);
  return {lo, hi};
}

}  // namespace

// Per-unit conversion, MATPOWER conventions:
//   demand   = (PD + j QD)/baseMVA
//   shunt    = (GS + j BS)/baseMVA
//   y        = 1/(r + j x)
//   y_charge = j BR_B/2 per side
//   t_ratio  = tau * e^{j shift}, tau = TAP or 1 when TAP = 0
//   t_limit  = (RATE_A/baseMVA)^2, RATE_A <= 0 means unlimited
// Out-of-service generators/branches (status <= 0) and isolated buses
// (type 4) are dropped; parallel branches stay distinct.
Network build_network(const RawCase& c) {
  Network net;
  net.name = c.name;
  net.base_mva = c.base_mva;
  const double base = c.base_mva;

  for (const auto& row : c.bus_rows) {
    if (static_cast<int>(row[col::BUS_TYPE]) == 4) continue;  // isolated
    Bus b;
    b.id = static_cast<int>(row[col::BUS_I]);
    b.demand = Complex(row[col::PD], row[col::QD]) / base;
    b.shunt = Complex(row[col::GS], row[col::BS]) / base;
    b.v_max = row[col::VMAX];
    b.v_min = row[col::VMIN];
    if (net.bus_pos.count(b.id)) {
      throw NetworkError("duplicate bus id " + std::to_string(b.id));
    }
    net.bus_pos[b.id] = static_cast<int>(net.buses.size());
    net.buses.push_back(b);
  }

  for (size_t i = 0; i < c.gen_rows.size(); ++i) {
    const auto& row = c.gen_rows[i];
    if (row[col::GEN_STATUS] <= 0) continue;
    int bus_id = static_cast<int>(row[col::GEN_BUS]);
    if (!net.bus_pos.count(bus_id)) continue;  // attached to a dropped bus
    Generator g;
    g.bus = bus_id;
    g.s_min = Complex(row[col::PMIN], row[col::QMIN]) / base;
    g.s_max = Complex(row[col::PMAX], row[col::QMAX]) / base;
    const auto& cost = c.gencost_rows[i];
    int ncost = static_cast<int>(cost[col::NCOST]);
    // coefficients listed highest degree first
    double coef[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
    for (int k = 0; k < ncost && k < 3; ++k) {
      coef[3 - ncost + k] = cost[col::COST + k];
    }
    g.cost_c2 = coef[0];
    g.cost_c1 = coef[1];
    g.cost_c0 = coef[2];
    net.generators.push_back(g);
  }
  if (net.generators.empty()) {
    throw NoReferenceCost("no in-service generators");
  }

  for (const auto& row : c.branch_rows) {
    if (row[col::BR_STATUS] <= 0) continue;
    Branch br;
    br.from = static_cast<int>(row[col::F_BUS]);
    br.to = static_cast<int>(row[col::T_BUS]);
    if (!net.bus_pos.count(br.from) || !net.bus_pos.count(br.to)) continue;
    double r = row[col::BR_R], x = row[col::BR_X];
    if (r == 0.0 && x == 0.0) {
      throw ZeroImpedance("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                          " has r = x = 0");
    }
    br.y = 1.0 / Complex(r, x);
    br.y_charge = Complex(0.0, row[col::BR_B] / 2.0);
    double tau = row[col::TAP] != 0.0 ? row[col::TAP] : 1.0;
    double shift = row[col::SHIFT] * kPi / 180.0;
    br.t_ratio = std::polar(tau, shift);
    double rate = row[col::RATE_A];
    br.unlimited = rate <= 0.0;
    br.t_limit = br.unlimited ? 0.0 : (rate / base) * (rate / base);
    std::tie(br.theta_min, br.theta_max) = angle_bounds(row[col::ANGMIN], row[col::ANGMAX]);
    net.branches.push_back(br);
  }

  // connectivity over in-service branches
  if (!net.buses.empty()) {
    std::vector<std::vector<int>> adj(net.buses.size());
    for (const auto& br : net.branches) {
      int u = net.bus_index(br.from), v = net.bus_index(br.to);
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    std::vector<char> seen(net.buses.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    size_t reached = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++reached;
          q.push(v);
        }
      }
    }
    if (reached != net.buses.size()) {
      throw Disconnected("network graph is not connected (" + std::to_string(reached) + " of " +
                         std::to_string(net.buses.size()) + " buses reachable)");
    }
  }

  // reference: the type-3 bus with the lowest id, else lowest generator bus
  int ref = -1;
  for (const auto& row : c.bus_rows) {
    if (static_cast<int>(row[col::BUS_TYPE]) == 3) {
      int id = static_cast<int>(row[col::BUS_I]);
      if (net.bus_pos.count(id) && (ref < 0 || id < ref)) ref = id;
    }
  }
  if (ref < 0) {
    for (const auto& g : net.generators) {
      if (ref < 0 || g.bus < ref) ref = g.bus;
    }
  }
  net.ref_bus = ref;
  return net;
}

double cost_value(const Generator& g, double p_gen, double base_mva) {
  double p_mw = p_gen * base_mva;
  return g.cost_c0 + g.cost_c1 * p_mw + g.cost_c2 * p_mw * p_mw;
}

}  // namespace opf
