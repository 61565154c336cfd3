// afcrag: command-line front end for the simulator and experiment harness.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "afcrag/harness/config.hpp"
#include "afcrag/harness/experiments.hpp"
#include "afcrag/harness/metrics.hpp"
#include "afcrag/harness/records.hpp"
#include "afcrag/harness/swarm_run.hpp"

namespace fs = std::filesystem;
using namespace afcrag;
using namespace afcrag::harness;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> seeds;
  std::string out;
  unsigned workers = default_workers();
  bool check = false;
};

void add_common(CLI::App& app, Common& c, bool ensemble) {
  app.add_option("--config", c.config_path, "JSON config file (defaults are used for missing keys)");
  app.add_option("--set", c.overrides, "override a config key, e.g. --set e1.seeds=500");
  app.add_option("--seed", c.seed, "master seed");
  app.add_option("--out", c.out, "output directory");
  if (ensemble) {
    app.add_option("--seeds", c.seeds, "ensemble size (overrides the config block)");
    app.add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--check", c.check, "exit nonzero if any gated metric fails");
  }
}

HarnessConfig load(const Common& c) {
  HarnessConfig cfg = c.config_path.empty() ? HarnessConfig{} : load_config(c.config_path);
  if (!c.overrides.empty()) cfg = apply_overrides(cfg, c.overrides);
  cfg.validate();
  return cfg;
}

void print_metrics(const std::vector<Metric>& metrics) {
  for (const auto& m : metrics) {
    std::string bounds;
    if (m.gated())
      bounds = "[" + (m.lower ? format_number(*m.lower) : std::string("-inf")) + ", " +
               (m.upper ? format_number(*m.upper) : std::string("inf")) + "]";
    std::printf("  %-4s %-12s %-36s %-14s %s%s\n", m.verdict().c_str(), m.experiment.c_str(), m.name.c_str(),
                format_number(m.value).c_str(), bounds.c_str(),
                m.reference ? ("  ref " + format_number(*m.reference)).c_str() : "");
  }
}

int run_experiments(const std::vector<std::string>& ids, const Common& c) {
  const HarnessConfig cfg = load(c);
  RunOptions opts;
  opts.master_seed = c.seed;
  opts.workers = c.workers;
  opts.seeds = c.seeds;
  if (!c.out.empty()) opts.out_dir = c.out;

  std::size_t failures = 0;
  for (const auto& id : ids) {
    const auto result = run_experiment(id, cfg, opts);
    std::printf("%s: %s\n", id.c_str(), result.headline.c_str());
    print_metrics(result.metrics);
    for (const auto& e : result.errors) std::fprintf(stderr, "%s: %s\n", id.c_str(), e.c_str());
    failures += result.failures();
  }
  if (failures > 0) std::printf("%zu gated metric(s) failed\n", failures);
  return c.check && failures > 0 ? 1 : 0;
}

int run_simulate(const Common& c, std::uint64_t every) {
  const HarnessConfig cfg = load(c);
  const auto result = run_swarm(cfg, c.seed, true);
  const auto& rows = result.record.rows;
  std::printf("%8s %2s %9s %9s %10s %10s %10s %2s  %s\n", "t", "m", "b", "lambda", "log_e", "s", "u_t", "g",
              "actions");
  for (const auto& r : rows) {
    if (r.t % every != 0 && r.actions.empty() && r.t != 1 && r.t != rows.size()) continue;
    std::string acts;
    for (const auto& a : r.actions) acts += a + " ";
    std::printf("%8llu %2d %9.5f %9.5f %10.4f %10.4f %10.4f %2d  %s\n", static_cast<unsigned long long>(r.t), r.m,
                r.b, r.lambda, r.log_e, r.s, r.u_t, r.g, acts.c_str());
  }
  const auto& s = result.record.summary;
  std::printf("alarmed=%s alarm_step=%s onset=%llu sup_log_e=%.4f breach=%s total_cost=%.0f audit_violations=%llu\n",
              s.alarmed ? "yes" : "no", s.alarm_step ? std::to_string(*s.alarm_step).c_str() : "-",
              static_cast<unsigned long long>(result.onset), s.sup_log_e, s.breach ? "yes" : "no", s.total_cost,
              static_cast<unsigned long long>(result.audit.violations));
  if (!c.out.empty()) {
    const fs::path dir = fs::path(c.out) / "simulate";
    JsonlWriter steps(dir / "steps.jsonl", Granularity::step);
    for (const auto& r : rows) steps.write(to_json(r));
    auto rec = result.record;
    rec.rows.clear();
    rec.regime = "swarm";
    JsonlWriter summary(dir / "trajectory.jsonl", Granularity::trajectory);
    summary.write(rec);
  }
  return 0;
}

int run_report(const std::string& out, bool check) {
  const auto report = build_report(out);
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& f : report.inputs) std::printf("read %s\n", f.c_str());
  print_metrics(report.metrics);
  if (fs::is_directory(out)) write_summary_csv(fs::path(out) / "report.csv", report.metrics);
  std::printf("%zu metrics, %zu failed\n", report.metrics.size(), report.failures());
  return check && report.failures() > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"afcrag: anytime-valid monitoring simulator for federated conformal RAG swarms"};
  app.require_subcommand(1);

  Common sim;
  std::uint64_t every = 250;
  auto* simulate = app.add_subcommand("simulate", "run one end-to-end swarm trajectory and print it");
  add_common(*simulate, sim, false);
  simulate->add_option("--every", every, "print every n-th step (plus steps with actions)")->check(CLI::PositiveNumber);

  Common exp;
  std::string id;
  auto* experiment = app.add_subcommand("experiment", "run a seeded experiment ensemble");
  experiment->add_option("id", id, "experiment id, or 'all'")->required();
  add_common(*experiment, exp, true);

  Common swp;
  auto* sweep = app.add_subcommand("sweep", "one-at-a-time sweep over alpha, delta_e and the betting cap");
  add_common(*sweep, swp, true);

  std::string report_dir;
  bool report_check = false;
  auto* report = app.add_subcommand("report", "merge summary CSVs under an output directory");
  report->add_option("--out", report_dir, "output directory")->required();
  report->add_flag("--check", report_check, "exit nonzero if any gated metric fails");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return run_simulate(sim, every);
    if (*experiment) {
      if (id == "all") return run_experiments(experiment_ids(), exp);
      if (!known_experiment(id)) {
        std::string known;
        for (const auto& k : experiment_ids()) known += " " + k;
        std::fprintf(stderr, "unknown experiment '%s'; known:%s all\n", id.c_str(), known.c_str());
        return 2;
      }
      return run_experiments({id}, exp);
    }
    if (*sweep) return run_experiments({"e12"}, swp);
    if (*report) return run_report(report_dir, report_check);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
