#include "opf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "opf/acopf.hpp"
#include "opf/log.hpp"
#include "opf/matpower.hpp"

namespace opf {

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::Acopf: return "acopf";
    case RunMode::Dsdp: return "dsdp";
    case RunMode::DsdpRlt: return "dsdp-rlt";
    case RunMode::Gap: return "gap";
    case RunMode::Obbt: return "obbt";
  }
  return "unknown";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "acopf") return RunMode::Acopf;
  if (s == "dsdp") return RunMode::Dsdp;
  if (s == "dsdp-rlt") return RunMode::DsdpRlt;
  if (s == "gap") return RunMode::Gap;
  if (s == "obbt") return RunMode::Obbt;
  throw std::invalid_argument("unknown mode: " + s);
}

double compute_gap(double ub, double lb) {
  if (!(ub > 0.0)) throw NonPositiveUb("upper bound must be positive");
  return 100.0 * (ub - lb) / ub;
}

namespace {

IpmOptions ipm_options(const BenchOptions& o) {
  IpmOptions io;
  io.tol = o.tol;
  io.max_iter = o.max_iter;
  io.time_limit = o.time_limit;
  return io;
}

/// Upper-bound solve; fills run and returns the solution when optimal.
std::optional<AcopfSolution> run_acopf(const Network& net, const BenchOptions& opts,
                                       ModelRun& run, GapReport& rep) {
  auto t0 = clock_t_::now();
  auto [prob, map] = build_acopf(net, opts.acopf_scale);
  run.times.build_s = seconds_since(t0);
  SolveResult res = solve(prob, ipm_options(opts));
  run.ran = true;
  run.status = res.status;
  run.iterations = res.iterations;
  run.times.build_s += res.build_time;
  run.times.solve_s = res.solve_time;
  run.error = res.message;
  run.objective = res.objective / opts.acopf_scale;
  if (res.status != SolveStatus::Optimal) return std::nullopt;
  rep.ub = run.objective;
  rep.has_ub = true;
  return extract_solution(net, map, res.x);
}

void run_relaxation(const Network& net, const CliqueTree& tree, const BenchOptions& opts,
                    bool with_rlt, const std::optional<AcopfSolution>& warm, ModelRun& run,
                    double& lb, bool& has_lb, const SolveResult* plain_dsdp = nullptr,
                    const DsdpVarMap* plain_map = nullptr) {
  RelaxOptions ro;
  ro.with_rlt = with_rlt;
  ro.minor_cap = opts.minor_cap;
  ro.scale = opts.relax_scale;
  ro.warm_start = opts.warm_start && warm.has_value();

  auto t0 = clock_t_::now();
  auto [prob, map] = build_dsdp(net, tree, ro);
  run.times.build_s = seconds_since(t0);

  auto t1 = clock_t_::now();
  if (ro.warm_start) {
    prob.initial_point = warm_start_from_acopf(net, prob, map, *warm);
  }
  run.times.init_s = seconds_since(t1);

  SolveResult res = solve(prob, ipm_options(opts));
  if (res.status != SolveStatus::Optimal && plain_dsdp && plain_map &&
      plain_dsdp->status == SolveStatus::Optimal) {
    // retry from the plain relaxation's solution, which sits strictly
    // inside the determinant cones where the cuts are well behaved
    auto t2 = clock_t_::now();
    prob.initial_point = transfer_start(net, prob, map, *plain_map, plain_dsdp->x);
    run.times.init_s += seconds_since(t2);
    SolveResult retry = solve(prob, ipm_options(opts));
    if (retry.status == SolveStatus::Optimal || retry.objective < res.objective) {
      res = std::move(retry);
    }
  }
  run.ran = true;
  run.status = res.status;
  run.iterations = res.iterations;
  run.times.build_s += res.build_time;
  run.times.solve_s = res.solve_time;
  run.error = res.message;
  run.objective = res.objective / ro.scale;
  if (res.status == SolveStatus::Optimal) {
    lb = run.objective;
    has_lb = true;
  }
}

}  // namespace

GapReport run_instance(const std::string& path, const BenchOptions& opts) {
  GapReport rep;
  rep.mode = opts.mode;
  rep.instance = path;
  {
    size_t slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    if (base.size() > 2 && base.substr(base.size() - 2) == ".m") {
      base = base.substr(0, base.size() - 2);
    }
    rep.instance = base;
  }

  try {
    RawCase raw = read_case(path);
    auto diags = validate_raw(raw);
    if (!diags.empty()) {
      std::string msg = "validation failed:";
      for (const auto& d : diags) msg += " [" + d.table + ":" + d.rule + "]";
      rep.error = msg;
      return rep;
    }
    Network net = build_network(raw);

    if (opts.mode == RunMode::Obbt) {
      ObbtResult r = obbt(net, opts, opts.time_limit);
      r.report.instance = rep.instance;
      return r.report;
    }

    std::optional<AcopfSolution> warm;
    if (opts.mode == RunMode::Acopf || opts.mode == RunMode::Gap ||
        ((opts.mode == RunMode::Dsdp || opts.mode == RunMode::DsdpRlt) && opts.warm_start)) {
      warm = run_acopf(net, opts, rep.acopf, rep);
    }
    if (opts.mode == RunMode::Acopf) return rep;

    Graph g = network_graph(net);
    auto [order, fill] = chordal_completion(g);
    CliqueTree tree = clique_tree(g, order, fill);

    SolveResult plain_res;
    std::optional<DsdpVarMap> plain_map;
    if (opts.mode == RunMode::Dsdp || opts.mode == RunMode::Gap) {
      bool with_rlt = opts.mode == RunMode::Dsdp && opts.rlt;
      run_relaxation(net, tree, opts, with_rlt, warm, rep.dsdp, rep.lb_dsdp, rep.has_lb_dsdp);
    }
    if (opts.mode == RunMode::DsdpRlt || opts.mode == RunMode::Gap) {
      if (opts.mode == RunMode::Gap && rep.dsdp.ran &&
          rep.dsdp.status == SolveStatus::Optimal) {
        // re-solve the plain relaxation cheaply to obtain a point for the
        // fallback start (the run above does not keep its iterates)
        RelaxOptions ro;
        ro.with_rlt = false;
        ro.minor_cap = opts.minor_cap;
        ro.scale = opts.relax_scale;
        auto [pprob, pmap] = build_dsdp(net, tree, ro);
        if (warm) pprob.initial_point = warm_start_from_acopf(net, pprob, pmap, *warm);
        plain_res = solve(pprob, ipm_options(opts));
        plain_map = std::move(pmap);
      }
      run_relaxation(net, tree, opts, /*with_rlt=*/true, warm, rep.dsdp_rlt, rep.lb_dsdp_rlt,
                     rep.has_lb_dsdp_rlt,
                     plain_map ? &plain_res : nullptr, plain_map ? &*plain_map : nullptr);
    }
    if (rep.has_ub && rep.has_lb_dsdp) rep.gap_dsdp = compute_gap(rep.ub, rep.lb_dsdp);
    if (rep.has_ub && rep.has_lb_dsdp_rlt) {
      rep.gap_dsdp_rlt = compute_gap(rep.ub, rep.lb_dsdp_rlt);
    }
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  return rep;
}

std::vector<ProfileEntry> performance_profile(const std::vector<ProfileResult>& results) {
  std::vector<double> times;
  for (const auto& r : results) {
    if (r.status == SolveStatus::Optimal) times.push_back(r.solve_time);
  }
  std::sort(times.begin(), times.end());
  std::vector<ProfileEntry> out;
  for (size_t i = 0; i < times.size(); ++i) {
    if (!out.empty() && out.back().solve_time == times[i]) {
      out.back().num_problems_solved = static_cast<int>(i + 1);
    } else {
      out.push_back({times[i], static_cast<int>(i + 1)});
    }
  }
  return out;
}

std::string report_csv_header() {
  return "instance,mode,status,objective,ub,lb,gap_percent,build_s,init_s,solve_s,iterations\n";
}

namespace {

void csv_row(std::ostringstream& os, const GapReport& rep, const char* mode, const ModelRun& run,
             bool has_lb, double lb, bool has_gap, double gap) {
  os << rep.instance << ',' << mode << ',';
  os << to_string(run.status) << ',' << fmt(run.objective, "%.8g") << ',';
  if (rep.has_ub) os << fmt(rep.ub, "%.8g");
  os << ',';
  if (has_lb) os << fmt(lb, "%.8g");
  os << ',';
  if (has_gap) os << fmt(gap, "%.4f");
  os << ',' << fmt(run.times.build_s, "%.3f") << ',' << fmt(run.times.init_s, "%.3f") << ','
     << fmt(run.times.solve_s, "%.3f") << ',' << run.iterations << '\n';
}

}  // namespace

std::string report_csv_rows(const GapReport& rep) {
  std::ostringstream os;
  if (!rep.error.empty()) {
    os << rep.instance << ',' << to_string(rep.mode) << ',' << "failed,,,,,,,,\n";
    return os.str();
  }
  if (rep.acopf.ran) csv_row(os, rep, "acopf", rep.acopf, false, 0, false, 0);
  if (rep.dsdp.ran) {
    csv_row(os, rep, "dsdp", rep.dsdp, rep.has_lb_dsdp, rep.lb_dsdp,
            rep.has_ub && rep.has_lb_dsdp, rep.gap_dsdp);
  }
  if (rep.dsdp_rlt.ran) {
    csv_row(os, rep, "dsdp-rlt", rep.dsdp_rlt, rep.has_lb_dsdp_rlt, rep.lb_dsdp_rlt,
            rep.has_ub && rep.has_lb_dsdp_rlt, rep.gap_dsdp_rlt);
  }
  return os.str();
}

std::string profile_csv(const std::vector<ProfileEntry>& entries) {
  std::ostringstream os;
  os << "solve_time,num_problems_solved\n";
  for (const auto& e : entries) {
    os << fmt(e.solve_time, "%.6g") << ',' << e.num_problems_solved << '\n';
  }
  return os.str();
}

ObbtResult obbt(const Network& net, const BenchOptions& opts, double time_limit) {
  ObbtResult out;
  out.tightened = net;
  out.report.mode = RunMode::Obbt;
  out.report.instance = net.name;
  auto t0 = clock_t_::now();

  std::optional<AcopfSolution> warm = run_acopf(net, opts, out.report.acopf, out.report);
  if (!warm) {
    out.report.error = "upper-bound solve did not reach optimality";
    return out;
  }
  const double ub = out.report.ub;

  RelaxOptions ro;
  ro.with_rlt = true;
  ro.minor_cap = opts.minor_cap;
  ro.scale = opts.relax_scale;

  auto solve_relaxation = [&](const Network& n, ModelRun& run, std::vector<double>* point_out)
      -> std::optional<double> {
    Graph g = network_graph(n);
    auto [order, fill] = chordal_completion(g);
    CliqueTree tree = clique_tree(g, order, fill);
    auto t_build = clock_t_::now();
    auto [prob, map] = build_dsdp(n, tree, ro, &out.boxes);
    run.times.build_s = seconds_since(t_build);
    prob.initial_point = warm_start_from_acopf(n, prob, map, *warm);
    SolveResult res = solve(prob, ipm_options(opts));
    run.ran = true;
    run.status = res.status;
    run.iterations = res.iterations;
    run.times.solve_s = res.solve_time;
    run.objective = res.objective / ro.scale;
    if (point_out) *point_out = res.x;
    if (res.status != SolveStatus::Optimal) return std::nullopt;
    return run.objective;
  };

  std::vector<double> point;
  auto lb0 = solve_relaxation(out.tightened, out.report.dsdp_rlt, &point);
  if (!lb0) {
    out.report.error = "initial relaxation did not reach optimality";
    return out;
  }
  out.report.lb_dsdp_rlt = *lb0;
  out.report.has_lb_dsdp_rlt = true;
  out.report.gap_dsdp_rlt = compute_gap(ub, *lb0);
  double gap = out.report.gap_dsdp_rlt;
  if (gap <= opts.obbt_threshold) return out;  // nothing to tighten

  // bound subproblems share the relaxation with the objective swapped and an
  // upper-bound cut added
  Graph g = network_graph(out.tightened);
  auto [order, fill] = chordal_completion(g);
  CliqueTree tree = clique_tree(g, order, fill);

  while (true) {
    auto [prob, map] = build_dsdp(out.tightened, tree, ro, &out.boxes);
    Polynomial obj_cut = prob.objective;
    prob.add_constraint(std::move(obj_cut), -std::numeric_limits<double>::infinity(),
                        ub * (1 + 1e-6) * ro.scale, "objective_cut");
    std::vector<double> start = warm_start_from_acopf(out.tightened, prob, map, *warm);

    auto tighten = [&](int var, bool minimize) -> std::optional<double> {
      if (seconds_since(t0) > time_limit) return std::nullopt;
      PolyProblem sub = prob;
      sub.objective = minimize ? Polynomial::variable(var)
                               : -1.0 * Polynomial::variable(var);
      sub.initial_point = start;
      IpmOptions io = ipm_options(opts);
      SolveResult res = solve(sub, io);
      if (res.status != SolveStatus::Optimal) return std::nullopt;
      return minimize ? res.objective : -res.objective;
    };

    bool timed_out = false;
    for (size_t b = 0; b < out.tightened.buses.size() && !timed_out; ++b) {
      Bus& bus = out.tightened.buses[b];
      if (auto lo = tighten(map.w_diag[b], true)) {
        bus.v_min = std::max(bus.v_min, std::sqrt(std::max(*lo - 1e-8, 0.0)));
      } else if (seconds_since(t0) > time_limit) {
        timed_out = true;
      }
      if (timed_out) break;
      if (auto hi = tighten(map.w_diag[b], false)) {
        bus.v_max = std::min(bus.v_max, std::sqrt(std::max(*hi + 1e-8, 0.0)));
      } else if (seconds_since(t0) > time_limit) {
        timed_out = true;
      }
      bus.v_max = std::max(bus.v_max, bus.v_min);
    }
    for (size_t p = 0; p < map.pairs.size() && !timed_out; ++p) {
      auto key = DsdpVarMap::pair_key(map.pairs[p].first, map.pairs[p].second);
      auto& re_box = out.boxes.re[key];
      auto& im_box = out.boxes.im[key];
      size_t sre = static_cast<size_t>(map.w_re[p]);
      size_t sim = static_cast<size_t>(map.w_im[p]);
      re_box = {prob.var_lower[sre], prob.var_upper[sre]};
      im_box = {prob.var_lower[sim], prob.var_upper[sim]};
      if (auto lo = tighten(map.w_re[p], true)) re_box.first = std::max(re_box.first, *lo - 1e-8);
      if (auto hi = tighten(map.w_re[p], false)) {
        re_box.second = std::min(re_box.second, *hi + 1e-8);
      }
      if (auto lo = tighten(map.w_im[p], true)) im_box.first = std::max(im_box.first, *lo - 1e-8);
      if (auto hi = tighten(map.w_im[p], false)) {
        im_box.second = std::min(im_box.second, *hi + 1e-8);
      }
      re_box.second = std::max(re_box.second, re_box.first);
      im_box.second = std::max(im_box.second, im_box.first);
      if (seconds_since(t0) > time_limit) timed_out = true;
    }
    ++out.sweeps;

    ModelRun rerun;
    auto lb = solve_relaxation(out.tightened, rerun, nullptr);
    if (lb) {
      out.report.dsdp_rlt = rerun;
      out.report.lb_dsdp_rlt = *lb;
      out.report.gap_dsdp_rlt = compute_gap(ub, *lb);
    }
    double new_gap = out.report.gap_dsdp_rlt;
    if (timed_out) {
      out.hit_time_limit = true;
      break;
    }
    if (gap - new_gap < opts.obbt_min_improve) {
      gap = std::min(gap, new_gap);
      break;
    }
    gap = new_gap;
    if (gap <= opts.obbt_threshold) break;
  }
  return out;
}

}  // namespace opf
