// Acceptance run: every criterion at full ensemble size and stated tolerance.
// Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "afcrag/harness/config.hpp"
#include "afcrag/harness/ensemble.hpp"
#include "afcrag/harness/experiments.hpp"
#include "afcrag/harness/metrics.hpp"

namespace fs = std::filesystem;
using namespace afcrag::harness;

namespace {

struct Criterion {
  int number;
  std::string title;
  std::string experiment;
  std::vector<std::string> required;  // gated metrics that must exist and pass
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string show(const ExperimentResult& r, const std::string& name) {
  for (const auto& m : r.metrics)
    if (m.name == name) return name + "=" + format_number(m.value);
  return name + "=missing";
}

// Every gated metric of the run passes and every required one is present
// and gated.
bool judge(const ExperimentResult& r, const std::vector<std::string>& required, std::string& detail) {
  bool ok = r.failures() == 0 && r.failed_trajectories == 0;
  for (const auto& name : required) {
    bool found = false;
    for (const auto& m : r.metrics)
      if (m.name == name) {
        found = m.gated();
        ok = ok && m.pass();
      }
    ok = ok && found;
    if (!detail.empty()) detail += " ";
    detail += show(r, name);
  }
  for (const auto& m : r.metrics)
    if (m.gated() && !m.pass()) detail += " [failed " + m.name + "=" + format_number(m.value) + "]";
  return ok;
}

// Runs `id` twice with different worker counts and compares every CSV the
// runs wrote, byte for byte.
bool same_bytes(const std::string& id, std::uint64_t seeds, const fs::path& root, std::string& detail) {
  std::map<std::string, std::string> files[2];
  const unsigned workers[2] = {1, 4};
  for (int k = 0; k < 2; ++k) {
    RunOptions opts;
    opts.master_seed = 20240;
    opts.workers = workers[k];
    opts.seeds = seeds;
    opts.out_dir = root / (id + "_w" + std::to_string(workers[k]));
    fs::remove_all(opts.out_dir);
    run_experiment(id, HarnessConfig{}, opts);
    for (const auto& e : fs::recursive_directory_iterator(opts.out_dir))
      if (e.is_regular_file() && (e.path().extension() == ".csv" || e.path().extension() == ".jsonl"))
        files[k][fs::relative(e.path(), opts.out_dir).string()] = slurp(e.path());
  }
  const bool ok = !files[0].empty() && files[0] == files[1];
  detail += " " + id + ":" + std::to_string(files[0].size()) + (ok ? " files identical" : " files DIFFER");
  return ok;
}

}  // namespace

int main() {
  const HarnessConfig cfg;
  RunOptions opts;
  opts.master_seed = 1;
  opts.workers = default_workers();

  const std::vector<Criterion> criteria{
      {1, "E1 Type-I", "e1", {"type1_boundary", "type1_boundary_hard_bound", "interior_minus_boundary"}},
      {2, "E2 delay", "e2", {"detected_d0.04", "median_delay_d0.04", "median_delay_d0.1", "median_delay_monotone"}},
      {3, "E4 adaptive cost", "e4",
       {"alarm_rate_low_only", "alarm_rate_high_only", "alarm_rate_adaptive", "cost_adaptive",
        "adaptive_over_high_seeds"}},
      {4, "E7 slope", "e7", {"slope"}},
      {5, "E8 overhead", "e8", {"overhead_t1", "overhead_t1e4", "overhead_t1e5"}},
      {6, "E10 conditional validity", "e10", {"violation_fraction", "mean_conditional_miscoverage"}},
      {7, "Envelope breach", "envelope", {"trajectories", "breach_fraction", "breach_fraction_hard_bound"}},
      {8, "Supermartingale MC", "supermartingale", {"excess_in_se_T10", "excess_in_se_T100", "excess_in_se_T1000"}},
      {9, "E11 bettor", "e11", {"small_drift_ratio", "ci_overlap_null_nominal", "ci_overlap_large_drift"}},
      {10, "E12 sweep", "e12", {"configs_passing"}},
      {11, "Necessity ablation", "necessity", {"type1_peeking", "type1_predictable"}},
      {13, "E5 two-term bound", "e5", {"fraction_ratio_le_1", "max_ratio", "mean_ratio"}},
  };

  std::map<int, std::pair<bool, std::string>> verdicts;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      const auto r = run_experiment(c.experiment, cfg, opts);
      ok = judge(r, c.required, detail);
      if (c.number == 10) {
        const bool twelve = r.metric("configs").value == 12.0;
        ok = ok && twelve;
        detail += " " + show(r, "configs");
      }
    } catch (const std::exception& e) {
      detail = std::string("error: ") + e.what();
    }
    verdicts[c.number] = {ok, c.title + ": " + detail};
  }

  {
    std::string detail;
    bool ok = true;
    const auto root = fs::temp_directory_path() / "afcrag_acceptance_determinism";
    try {
      ok = same_bytes("e1", 300, root, detail) && ok;
      ok = same_bytes("e4", 40, root, detail) && ok;
      ok = same_bytes("e11", 60, root, detail) && ok;
      ok = same_bytes("end_to_end", 6, root, detail) && ok;
    } catch (const std::exception& e) {
      ok = false;
      detail += std::string(" error: ") + e.what();
    }
    fs::remove_all(root);
    verdicts[12] = {ok, "Determinism across worker counts:" + detail};
  }

  int failed = 0;
  for (const auto& [n, v] : verdicts) {
    std::printf("%s criterion %d: %s\n", v.first ? "PASS" : "FAIL", n, v.second.c_str());
    failed += v.first ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(verdicts.size()) - failed, verdicts.size());
  return failed == 0 ? 0 : 1;
}
