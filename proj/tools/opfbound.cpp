// opfbound: upper bounds, determinant-based relaxation lower bounds and
// optimality gaps for MATPOWER/PGLIB cases.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "opf/acopf.hpp"
#include "opf/bench.hpp"
#include "opf/chordal.hpp"
#include "opf/ipm.hpp"
#include "opf/log.hpp"
#include "opf/matpower.hpp"
#include "opf/network.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ACOPF upper bounds, DSDP/DSDP-RLT lower bounds and optimality gaps"};

  std::vector<std::string> cases;
  std::string mode = "gap";
  double scale = -1.0;
  double tol = 1e-6;
  int max_iter = 3000;
  double time_limit = 5400.0;
  std::string rlt = "off";
  int minor_cap = 30000;
  std::string out_path, profile_path;

  app.add_option("cases", cases, "MATPOWER/PGLIB case files (.m)")->required();
  app.add_option("--mode", mode, "acopf|dsdp|dsdp-rlt|gap|obbt")
      ->check(CLI::IsMember({"acopf", "dsdp", "dsdp-rlt", "gap", "obbt"}));
  app.add_option("--scale", scale,
                 "objective/thermal scaling (default: 1 for acopf, 1e-3 for relaxations)");
  app.add_option("--tol", tol, "solver tolerance");
  app.add_option("--max-iter", max_iter, "iteration limit");
  app.add_option("--time-limit", time_limit, "seconds per solve");
  app.add_option("--rlt", rlt, "on|off: add RLT constraints to a dsdp run")
      ->check(CLI::IsMember({"on", "off"}));
  app.add_option("--minor-cap", minor_cap, "cap on 3x3 determinant cuts");
  bool no_warm = false;
  app.add_flag("--no-warm-start", no_warm, "start relaxations from the flat lifted point");
  std::string solution_path;
  app.add_option("--solution", solution_path,
                 "dump the ACOPF solution (buses, dispatch, branch flows) to this file");
  app.add_option("--out", out_path, "write the report CSV here (default: stdout)");
  app.add_option("--profile", profile_path, "write performance-profile CSV here");

  CLI11_PARSE(app, argc, argv);

  opf::BenchOptions opts;
  opts.mode = opf::run_mode_from_string(mode);
  opts.tol = tol;
  opts.max_iter = max_iter;
  opts.time_limit = time_limit;
  opts.rlt = rlt == "on";
  opts.minor_cap = minor_cap;
  opts.warm_start = !no_warm;
  if (scale > 0) {
    opts.acopf_scale = scale;
    opts.relax_scale = scale;
  }

  if (!solution_path.empty() && cases.size() == 1) {
    try {
      opf::RawCase raw = opf::read_case(cases[0]);
      opf::Network net = opf::build_network(raw);
      auto [prob, map] = opf::build_acopf(net, scale > 0 ? scale : 1.0);
      opf::IpmOptions io;
      io.tol = tol;
      io.max_iter = max_iter;
      opf::SolveResult res = opf::solve(prob, io);
      opf::AcopfSolution sol = opf::extract_solution(net, map, res.x);
      std::ofstream f(solution_path);
      f << "status " << opf::to_string(res.status) << " objective " << sol.objective << "\n";
      f << "bus,vm,va_deg\n";
      for (size_t b = 0; b < net.buses.size(); ++b) {
        f << net.buses[b].id << ',' << std::abs(sol.voltage[b]) << ','
          << std::arg(sol.voltage[b]) * 180 / 3.14159265358979 << "\n";
      }
      f << "gen_bus,pg_mw,qg_mvar\n";
      for (size_t g = 0; g < net.generators.size(); ++g) {
        f << net.generators[g].bus << ',' << sol.pg[g] * net.base_mva << ','
          << sol.qg[g] * net.base_mva << "\n";
      }
      f << "from,to,p_from_mw,p_to_mw,loss_mw\n";
      double total_loss = 0;
      for (size_t e = 0; e < net.branches.size(); ++e) {
        double loss = (sol.p_from[e] + sol.p_to[e]) * net.base_mva;
        total_loss += loss;
        f << net.branches[e].from << ',' << net.branches[e].to << ','
          << sol.p_from[e] * net.base_mva << ',' << sol.p_to[e] * net.base_mva << ',' << loss
          << "\n";
      }
      f << "total_loss_mw," << total_loss << "\n";
    } catch (const std::exception& e) {
      std::cerr << "solution dump failed: " << e.what() << "\n";
      return 2;
    }
    return 0;
  }

  std::string csv = opf::report_csv_header();
  std::vector<opf::ProfileResult> profile;
  bool any_failed = false;
  for (const auto& path : cases) {
    opf::log_line(opf::LogLevel::Info, "running " + path + " in mode " + mode);
    opf::GapReport rep = opf::run_instance(path, opts);
    csv += opf::report_csv_rows(rep);
    if (!rep.error.empty()) {
      any_failed = true;
      opf::log_line(opf::LogLevel::Info, rep.instance + " failed: " + rep.error);
    }
    const opf::ModelRun* profiled = nullptr;
    switch (opts.mode) {
      case opf::RunMode::Acopf: profiled = &rep.acopf; break;
      case opf::RunMode::Dsdp: profiled = &rep.dsdp; break;
      default: profiled = &rep.dsdp_rlt; break;
    }
    if (profiled->ran) {
      profile.push_back({rep.instance, profiled->times.solve_s, profiled->status});
    }
  }

  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(out_path);
    if (!f) {
      std::cerr << "cannot open " << out_path << "\n";
      return 2;
    }
    f << csv;
  }
  if (!profile_path.empty()) {
    std::ofstream f(profile_path);
    if (!f) {
      std::cerr << "cannot open " << profile_path << "\n";
      return 2;
    }
    f << opf::profile_csv(opf::performance_profile(profile));
  }
  return any_failed ? 1 : 0;
}
