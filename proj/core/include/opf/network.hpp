#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "opf/matpower.hpp"

namespace opf {

using Complex = std::complex<double>;

struct Bus {
  int id = 0;           // original MATPOWER bus number
  Complex demand;       // S^d, p.u.
  Complex shunt;        // Y^s, p.u. admittance
  double v_min = 0.0;   // p.u.
  double v_max = 0.0;   // p.u.
};

struct Generator {
  int bus = 0;          // original bus number
  Complex s_min;        // p.u.
  Complex s_max;        // p.u.
  double cost_c0 = 0.0;  // $/h
  double cost_c1 = 0.0;  // $/MWh
  double cost_c2 = 0.0;  // $/MW^2h
};

struct Branch {
  int from = 0;          // original bus numbers
  int to = 0;
  Complex y;             // series admittance g + jb, p.u.
  Complex y_charge;      // line charging per side, j*b_c/2
  Complex t_ratio;       // tap magnitude and phase shift, |T| > 0
  double t_limit = 0.0;  // squared apparent-power limit (RATE_A/base)^2
  bool unlimited = false;
  double theta_min = 0.0;  // rad, within [-pi/2, pi/2]
  double theta_max = 0.0;
};

/// Per-unit electrical model. Out-of-service generators and branches are
/// already dropped; bus/generator/branch order follows the case file.
struct Network {
  std::string name;
  double base_mva = 0.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;
  int ref_bus = -1;  // original bus number of the angle reference

  std::unordered_map<int, int> bus_pos;  // bus id -> index into buses

  int bus_index(int id) const {
    auto it = bus_pos.find(id);
    if (it == bus_pos.end()) throw std::out_of_range("unknown bus id " + std::to_string(id));
    return it->second;
  }
  const Bus& bus(int id) const { return buses[static_cast<size_t>(bus_index(id))]; }
};

struct NetworkError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroImpedance : NetworkError {
  using NetworkError::NetworkError;
};
struct Disconnected : NetworkError {
  using NetworkError::NetworkError;
};
struct NoReferenceCost : NetworkError {
  using NetworkError::NetworkError;
};

/// Convert a validated RawCase to per-unit. See the op contract in the
/// header comment of build_network in network.cpp for the formulas.
Network build_network(const RawCase& c);

/// Generation cost in $/h for a dispatch of p_gen p.u. on the given base.
double cost_value(const Generator& g, double p_gen, double base_mva);

}  // namespace opf
