#pragma once

// The lcpkit command-line front end. Exit codes: 0 success, 1 a check
// failed, 2 bad configuration or arguments.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcpkit/config.hpp"
#include "lcpkit/coupling.hpp"
#include "lcpkit/experiments.hpp"
#include "lcpkit/measure.hpp"
#include "lcpkit/report.hpp"
#include "lcpkit/tvkit.hpp"

namespace lcpkit {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfigError = 2 };

struct CommandOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool svg = false;
  bool trace = false;
};

namespace cli_detail {

inline std::string describe(const LevyMeasure& m) {
  if (m.is_zero()) {
    return "zero measure";
  }
  std::string out;
  auto add = [&](const std::string& s) { out += (out.empty() ? "" : " + ") + s; };
  for (const auto& c : m.components()) {
    if (const auto* p = std::get_if<PowerLaw>(&c)) {
      add("power_law(alpha=" + fmt(p->alpha) + ", c_plus=" + fmt(p->c_plus) +
          ", c_minus=" + fmt(p->c_minus) + ")");
    } else if (const auto* a = std::get_if<Atoms>(&c)) {
      std::string s = "atoms{";
      for (std::size_t i = 0; i < a->atoms.size(); ++i) {
        s += (i ? ", " : "") + fmt(a->atoms[i].x) + ":" + fmt(a->atoms[i].mass);
      }
      add(s + "}");
    } else if (const auto* t = std::get_if<Tabulated>(&c)) {
      add("tabulated(" + std::to_string(t->plus.values.size()) + "+" +
          std::to_string(t->minus.values.size()) + " cells)");
    } else if (const auto* b = std::get_if<BigJumps>(&c)) {
      add("big_jumps(" + std::to_string(b->atoms.size()) + " atoms)");
    }
  }
  return out;
}

struct Context {
  RunConfig rc;
  RunStamp prov;
  std::filesystem::path out;

  std::string path(const std::string& name) const { return (out / name).string(); }
};

inline Context make_context(const CommandOptions& o) {
  Context c;
  c.rc = load_config(o.config_path, Overrides{o.seed, o.workers});
  c.prov = {c.rc.sim.master_seed, config_hash(c.rc.raw)};
  c.out = o.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec || !std::filesystem::is_directory(c.out)) {
    throw ConfigError("output directory " + o.out_dir + " is not writable");
  }
  return c;
}

inline nlohmann::json report_header(const Context& c, const std::string& command) {
  return {{"command", command},
          {"version", kVersion},
          {"seed", c.prov.seed},
          {"config_hash", c.prov.config_hash},
          {"checks", nlohmann::json::array()}};
}

inline int cmd_check(const CommandOptions& o) {
  const Context c = make_context(o);
  const LevyMeasure& nu = c.rc.require_measure();
  const RhoProfile profile(nu);
  const LcpVerdict& v = profile.verdict();
  std::cout << "nu:      " << describe(nu) << "\n"
            << "rho:     " << describe(profile.rho()) << "\n"
            << "eta(1):  " << fmt(profile.eta(1.0)) << "\n"
            << "verdict: " << to_string(v.kind);
  if (v.holds()) {
    std::cout << " value=" << fmt(v.value);
  } else if (!v.reason.empty()) {
    std::cout << " reason=\"" << v.reason << "\"";
  }
  std::cout << "\n";

  CsvWriter csv(c.path("eta_g.csv"), c.prov, {"r", "eta", "g", "g_prime"});
  std::vector<double> grid;
  for (int k = -40; k <= 0; ++k) {
    grid.push_back(std::pow(10.0, k / 10.0));
  }
  for (double x : {1.25, 1.5, 1.75, 2.0}) {
    grid.push_back(x);
  }
  std::optional<Potential> g;
  if (v.holds()) {
    g = profile.potential(1.0);
  }
  for (double r : grid) {
    csv.row({fmt(r), fmt(profile.eta(std::min(r, 1.0))), g ? fmt((*g)(r)) : "nan",
             g ? fmt(g->derivative(r)) : "nan"});
  }
  auto report = report_header(c, "check");
  nlohmann::json values = {{"verdict", to_string(v.kind)}, {"reason", v.reason}};
  values["value"] = v.holds() ? nlohmann::json(v.value) : nlohmann::json(nullptr);
  report["checks"].push_back(check_entry("condition", v.holds(), values));
  write_json(c.path("report.json"), report);
  return kExitOk;
}

inline int cmd_simulate(const CommandOptions& o) {
  const Context c = make_context(o);
  const LevyMeasure& nu = c.rc.require_measure();
  const auto r = sampler_law_check(nu, c.rc.xi_grid, c.rc.sim, c.rc.n_paths);
  CsvWriter csv(c.path("cf.csv"), c.prov,
                {"xi", "re_hat", "im_hat", "re_exact", "im_exact", "deviation", "tolerance", "pass"});
  for (const auto& row : r.cf) {
    csv.row({fmt(row.xi), fmt(row.phi_x.real()), fmt(row.phi_x.imag()), fmt(row.exact.real()),
             fmt(row.exact.imag()), fmt(row.dev_x), fmt(r.tolerance),
             fmt(row.dev_x <= r.tolerance)});
  }
  if (o.trace) {
    const EventLog log = sample_path(nu, c.rc.sim, 0);
    CsvWriter ev(c.path("events.csv"), c.prov, {"time", "size", "stream"});
    for (const auto& e : log.events) {
      ev.row({fmt(e.time), fmt(e.u), std::string(1, to_char(e.stream))});
    }
  }
  auto report = report_header(c, "simulate");
  report["checks"].push_back(check_entry("characteristic_function", r.cf_pass,
                                         {{"n", r.n}, {"t", r.t}, {"tolerance", r.tolerance}}));
  report["checks"].push_back(check_entry("martingale_mean", r.mean_pass,
                                         {{"mean", r.mean.mean},
                                          {"std_error", r.mean.std_error},
                                          {"expected", r.expected_mean}}));
  report["checks"].push_back(check_entry("event_rate", r.rate_pass,
                                         {{"observed", r.event_rate},
                                          {"expected", r.expected_rate},
                                          {"tolerance", r.rate_tolerance}}));
  write_json(c.path("report.json"), report);
  std::cout << "sampler law checks over " << r.n << " paths: " << (r.pass ? "pass" : "FAIL") << "\n";
  return (c.rc.checks.law && !r.pass) ? kExitCheckFailed : kExitOk;
}

inline int cmd_couple(const CommandOptions& o) {
  const Context c = make_context(o);
  const RunConfig& rc = c.rc;
  const LevyMeasure& nu = rc.require_measure();
  if (rc.a_grid.empty() || rc.eps_grid.empty()) {
    throw ConfigError("config: couple needs \"a_grid\" and \"eps_grid\"");
  }
  const CouplingModel model(nu, rc.sim.epsilon);
  const bool holds = model.profile().verdict().holds();
  SimConfig sim = rc.sim;
  sim.horizon = std::max(sim.horizon, *std::max_element(rc.eps_grid.begin(), rc.eps_grid.end()));

  CsvWriter summary(c.path("summary.csv"), c.prov,
                    {"a", "epsilon", "delta", "n_paths", "p_coupled", "p_exceeded", "p_stalled",
                     "p_censored", "mean_tau_bar", "stderr_tau_bar", "p_T_gt_eps", "stderr",
                     "eps_time"});
  CsvWriter tail(c.path("tail_bound.csv"), c.prov,
                 {"a", "eps_time", "p_hat", "mean_tau_bar", "bound", "pass"});
  std::optional<CsvWriter> tau_csv;
  if (holds) {
    tau_csv.emplace(c.path("tau_bar_bound.csv"), c.prov,
                    std::vector<std::string>{"a", "lhs", "rhs", "stderr", "C", "pass"});
  }

  auto report = report_header(c, "couple");
  report["verdict"] = to_string(model.profile().verdict().kind);
  bool all_pass = true;
  auto record = [&](bool enabled, const std::string& name, bool pass, nlohmann::json values) {
    values["enabled"] = enabled;
    report["checks"].push_back(check_entry(name, pass, std::move(values)));
    if (enabled && !pass) {
      all_pass = false;
      std::cout << "check failed: " << name << "\n";
    }
  };

  std::vector<BatchSummary> sums;
  std::vector<std::vector<LcpCell>> cells;
  for (double a : rc.a_grid) {
    const PathBatch batch = simulate_batch(model, a, sim, rc.n_paths, coupling_run_options());
    const BatchSummary s = summarize(batch);
    sums.push_back(s);
    cells.emplace_back();
    for (double e : rc.eps_grid) {
      const LcpCell cell = lcp_cell(batch, e);
      cells.back().push_back(cell);
      summary.row({fmt(a), fmt(sim.epsilon), fmt(sim.delta_couple), std::to_string(s.n),
                   fmt(s.p_coupled), fmt(s.p_exceeded), fmt(s.p_stalled), fmt(s.p_censored),
                   fmt(s.tau_bar.mean), fmt(s.tau_bar.std_error), fmt(cell.p_late.mean),
                   fmt(cell.p_late.std_error), fmt(e)});
      const TailBound tb = tail_bound_check(batch, e);
      tail.row({fmt(a), fmt(e), fmt(tb.p_hat), fmt(tb.mean_tau_bar), fmt(tb.bound), fmt(tb.pass)});
      record(rc.checks.tail_bound, "tail_bound", tb.pass,
             {{"a", a}, {"eps_time", e}, {"p_hat", tb.p_hat}, {"bound", tb.bound}});
    }
    if (holds) {
      const TauBarBound tbb = tau_bar_bound_check(batch, model.profile());
      tau_csv->row({fmt(a), fmt(tbb.lhs), fmt(tbb.rhs), fmt(tbb.std_error), fmt(kTauBarConstant),
                    fmt(tbb.pass)});
      record(rc.checks.tau_bar_bound, "tau_bar_bound", tbb.pass,
             {{"a", a}, {"lhs", tbb.lhs}, {"rhs", tbb.rhs}});
    }
  }

  // Decay, potential-bound and criterion checks assume the condition holds.
  std::vector<std::size_t> order(rc.a_grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return rc.a_grid[i] > rc.a_grid[j]; });
  if (holds && order.size() >= 2) {
    bool decreasing = true;
    for (std::size_t k = 1; k < order.size(); ++k) {
      decreasing = decreasing && sums[order[k]].tau_bar.mean < sums[order[k - 1]].tau_bar.mean;
    }
    const Estimate& hi = sums[order.front()].tau_bar;
    const Estimate& lo = sums[order.back()].tau_bar;
    record(rc.checks.tau_bar_decay, "tau_bar_decay", decreasing && !hi.overlaps(lo),
           {{"largest_a_mean", hi.mean}, {"smallest_a_mean", lo.mean}, {"strict", decreasing}});
  }
  if (holds) {
    for (const LcpCell& cell : cells[order.back()]) {
      record(rc.checks.lcp, "lcp_criterion", cell.below,
             {{"a", cell.a}, {"eps_time", cell.eps_time}, {"p_hat", cell.p_late.mean}});
    }
  }
  report["pass"] = all_pass;
  write_json(c.path("report.json"), report);

  if (o.svg) {
    std::vector<double> as;
    std::vector<double> taus;
    for (std::size_t k : order) {
      as.push_back(rc.a_grid[k]);
      taus.push_back(sums[k].tau_bar.mean);
    }
    write_line_chart(c.path("tau_bar.svg"), "mean exit time vs starting gap", "a", "E tau_bar",
                     {{"E tau_bar", as, taus}}, true);
    std::vector<Series> late;
    for (std::size_t e = 0; e < rc.eps_grid.size(); ++e) {
      Series s{"eps=" + fmt(rc.eps_grid[e]), as, {}};
      for (std::size_t k : order) {
        s.y.push_back(cells[k][e].p_late.mean);
      }
      late.push_back(std::move(s));
    }
    write_line_chart(c.path("p_late.svg"), "P(T > eps) vs starting gap", "a", "P(T > eps)", late,
                     true);
  }
  if (o.trace) {
    CoupleOptions opts;
    opts.record_trace = true;
    SimConfig one = rc.sim;
    const CoupledPath p = simulate_coupled(model, rc.a_grid.front(), one, 0, opts);
    CsvWriter tr(c.path("trace.csv"), c.prov, {"time", "u", "stream", "flipped", "Z"});
    std::size_t f = 0;
    for (std::size_t i = 0; i < p.events.events.size(); ++i) {
      const bool flipped = f < p.flips.size() && p.flips[f] == i;
      f += flipped ? 1 : 0;
      const auto& e = p.events.events[i];
      tr.row({fmt(e.time), fmt(e.u), std::string(1, to_char(e.stream)), fmt(flipped),
              fmt(p.z_after[i])});
    }
  }
  std::cout << "couple: " << rc.a_grid.size() << " starting gaps x " << rc.n_paths
            << " paths, verdict " << to_string(model.profile().verdict().kind) << ", checks "
            << (all_pass ? "pass" : "FAIL") << "\n";
  return all_pass ? kExitOk : kExitCheckFailed;
}

inline int cmd_tv(const CommandOptions& o) {
  const Context c = make_context(o);
  if (!c.rc.tv) {
    throw ConfigError("config: tv needs a \"tv\" section");
  }
  const TvConfig& tv = *c.rc.tv;
  const bool enabled = c.rc.checks.tv;
  auto report = report_header(c, "tv");
  bool all_pass = true;
  auto record = [&](const std::string& name, bool pass, nlohmann::json values) {
    report["checks"].push_back(check_entry(name, pass, std::move(values)));
    if (enabled && !pass) {
      all_pass = false;
      std::cout << "check failed: " << name << "\n";
    }
  };

  if (!tv.profiles.empty()) {
    CsvWriter csv(c.path("profile.csv"), c.prov, {"name", "a", "tv"});
    std::vector<Series> series;
    for (const auto& spec : tv.profiles) {
      const auto prof = translation_profile(spec.target, tv.a_grid);
      Series s{spec.name, {}, {}};
      for (const auto& pt : prof) {
        csv.row({spec.name, fmt(pt.a), fmt(pt.tv)});
        s.x.push_back(pt.a);
        s.y.push_back(pt.tv);
      }
      series.push_back(s);
      if (std::holds_alternative<DensityFn>(spec.target)) {
        // An absolutely continuous law: the curve must shrink as |a| does.
        auto sorted = prof;
        std::sort(sorted.begin(), sorted.end(), [](const ProfilePoint& x, const ProfilePoint& y) {
          return std::abs(x.a) < std::abs(y.a);
        });
        bool monotone = true;
        for (std::size_t k = 1; k < sorted.size(); ++k) {
          monotone = monotone && sorted[k - 1].tv <= sorted[k].tv + 1e-9;
        }
        record("translation_profile_monotone", monotone, {{"name", spec.name}});
      }
    }
    if (o.svg) {
      write_line_chart(c.path("profile.svg"), "translation profile", "a", "||mu_a - mu||", series);
    }
  }
  if (tv.contraction_p) {
    const auto seq =
        kernel_contraction(*tv.contraction_p, *tv.contraction_q, tv.contraction_matrix,
                           tv.contraction_steps);
    CsvWriter csv(c.path("contraction.csv"), c.prov, {"step", "tv"});
    bool monotone = true;
    for (std::size_t k = 0; k < seq.size(); ++k) {
      csv.row({std::to_string(k), fmt(seq[k])});
      monotone = monotone && (k == 0 || seq[k] <= seq[k - 1] + 1e-12);
    }
    record("kernel_contraction", monotone, {{"steps", tv.contraction_steps}});
  }
  if (tv.coupling_p) {
    const MaximalCoupling mc(*tv.coupling_p, *tv.coupling_q);
    CounterRng rng(c.rc.sim.master_seed, 0, 3);
    std::size_t same = 0;
    for (std::size_t i = 0; i < tv.coupling_draws; ++i) {
      const auto [x, y] = mc(rng);
      same += x == y ? 1 : 0;
    }
    const Interval w = wilson_interval(same, tv.coupling_draws, 4.0);
    const double exact = 1.0 - 0.5 * tv_discrete(*tv.coupling_p, *tv.coupling_q);
    const double hat = static_cast<double>(same) / static_cast<double>(tv.coupling_draws);
    const bool pass = w.contains(exact);
    CsvWriter csv(c.path("coupling.csv"), c.prov,
                  {"draws", "meet_hat", "meet_exact", "wilson_lo", "wilson_hi", "pass"});
    csv.row({std::to_string(tv.coupling_draws), fmt(hat), fmt(exact), fmt(w.lo), fmt(w.hi),
             fmt(pass)});
    record("maximal_coupling", pass, {{"meet_hat", hat}, {"meet_exact", exact}});
  }
  report["pass"] = all_pass;
  write_json(c.path("report.json"), report);
  std::cout << "tv: checks " << (all_pass ? "pass" : "FAIL") << "\n";
  return all_pass ? kExitOk : kExitCheckFailed;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Mirror coupling of pure-jump Levy processes: measure calculus, simulation and "
               "total-variation checks"};
  app.require_subcommand(1);
  CommandOptions o;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration")->required();
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_flag("--svg", o.svg, "also write SVG charts");
  };
  auto* check = app.add_subcommand("check", "evaluate the sufficiency condition");
  auto* simulate = app.add_subcommand("simulate", "sampler law checks");
  auto* couple = app.add_subcommand("couple", "coupling experiments over the a/eps grids");
  auto* tv = app.add_subcommand("tv", "total-variation profiles and couplings");
  for (auto* s : {check, simulate, couple, tv}) {
    add_common(s);
  }
  simulate->add_flag("--trace", o.trace, "dump the event log of path 0 to events.csv");
  couple->add_flag("--trace", o.trace, "dump the coupled trace of path 0 to trace.csv");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  for (auto* s : {check, simulate, couple, tv}) {
    if (s->parsed()) {
      if (s->count("--seed")) {
        o.seed = seed;
      }
      if (s->count("--workers")) {
        o.workers = workers;
      }
    }
  }
  try {
    if (check->parsed()) {
      return cli_detail::cmd_check(o);
    }
    if (simulate->parsed()) {
      return cli_detail::cmd_simulate(o);
    }
    if (couple->parsed()) {
      return cli_detail::cmd_couple(o);
    }
    return cli_detail::cmd_tv(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace lcpkit
