// Acceptance gate: runs every criterion at its stated scale and tolerance and
// prints one PASS/FAIL line each. Usage: hmt_acceptance [report-dir]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "hmt/experiments.hpp"
#include "hmt/model.hpp"
#include "hmt/stats.hpp"
#include "oracle/checks.hpp"

namespace xp = hmt::exp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double time_limit;  // seconds, 0 when unbounded
  std::function<Outcome()> run;
};

std::string report_dir;

std::string num(double v) { return hmt::stats::format_double(v); }

void save(const std::string& name, const xp::VerificationReport& r) {
  if (report_dir.empty()) return;
  std::ofstream out(report_dir + "/" + name + ".csv", std::ios::binary);
  xp::write_csv(out, r);
  std::ofstream summary(report_dir + "/" + name + ".summary.json");
  summary << hmt::model::dump_json(xp::summary_json(r), 2) << "\n";
}

xp::VerificationReport bounds(const std::string& suite) {
  auto cfg = xp::default_config("bounds");
  cfg.seed = 101;
  cfg.knobs["suite"] = suite;
  auto r = xp::run_bounds(cfg);
  save("bounds-" + suite, r);
  return r;
}

xp::VerificationReport experiment(const std::string& kind, std::uint64_t seed) {
  auto cfg = xp::default_config(kind);
  cfg.seed = seed;
  auto r = xp::run(cfg);
  save(kind, r);
  return r;
}

// Passes when every listed suite has at least `min_cases` rows and no violations.
Outcome suites_clean(const xp::VerificationReport& r, const std::vector<std::string>& suites, std::size_t min_cases) {
  Outcome o{true, ""};
  for (const auto& s : suites) {
    std::size_t n = r.cases(s), bad = r.violations(s);
    if (n < min_cases || bad > 0) o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + s + " " + std::to_string(bad) + "/" + std::to_string(n) + " violations";
  }
  return o;
}

// Lists the failing rows of the given suites (all suites when empty).
std::string failures(const xp::VerificationReport& r, const std::vector<std::string>& suites = {}, std::size_t limit = 6) {
  std::string out;
  std::size_t shown = 0, total = 0;
  for (const auto& row : r.rows) {
    if (row.pass) continue;
    if (!suites.empty() && std::find(suites.begin(), suites.end(), row.suite) == suites.end()) continue;
    ++total;
    if (shown++ < limit) out += "\n      " + row.suite + ": " + row.case_id + " measured " + num(row.measured) + " vs " + num(row.bound);
  }
  if (total > limit) out += "\n      ... " + std::to_string(total - limit) + " more";
  return out;
}

std::vector<std::string> suites_with_prefix(const xp::VerificationReport& r, const std::string& prefix) {
  std::vector<std::string> out;
  for (const auto& row : r.rows) {
    if (row.suite.rfind(prefix, 0) == 0 && std::find(out.begin(), out.end(), row.suite) == out.end()) out.push_back(row.suite);
  }
  return out;
}

Outcome gate(const xp::VerificationReport& r, const std::vector<std::string>& suites) {
  Outcome o{true, ""};
  std::size_t cases = 0, bad = 0;
  for (const auto& s : suites) {
    cases += r.cases(s);
    bad += r.violations(s);
  }
  o.pass = bad == 0 && cases > 0;
  o.detail = std::to_string(bad) + " of " + std::to_string(cases) + " checks failed" + failures(r, suites);
  return o;
}

std::vector<Criterion> criteria() {
  return {
      {1, "exact oracle equivalence (n <= 3, S <= 3, abs err < 1e-9)", 30,
       [] {
         auto e = oracle::compare_inference(200, 1);
         return Outcome{e.cases == 200 && e.worst() < 1e-9,
                        std::to_string(e.cases) + " cases, " + std::to_string(e.comparisons) + " comparisons, max abs err loglik " +
                            num(e.log_likelihood) + " marginal " + num(e.marginal) + " pair " + num(e.pair) + " increment " + num(e.increment)};
       }},
      {2, "telescoping sums of increments, plain and block (200 cases, 1e-9)", 60,
       [] {
         auto t = bounds("telescoping");
         auto b = bounds("block");
         auto o = suites_clean(t, {"telescoping", "score-telescoping"}, 200);
         auto ob = suites_clean(b, {"block-telescoping"}, 200);
         return Outcome{o.pass && ob.pass, o.detail + "; " + ob.detail};
       }},
      {3, "forgetting bound TV <= rho^h(u) (>= 1000 cases)", 60, [] { return suites_clean(bounds("forgetting"), {"forgetting"}, 1000); }},
      {4, "uniform Cauchy and boundedness bounds on increments (>= 500 cases)", 0,
       [] { return suites_clean(bounds("cauchy"), {"cauchy", "cauchy-bounded"}, 500); }},
      {5, "backward and two-vertex bounds (>= 500 cases each)", 0,
       [] {
         auto b = bounds("backward");
         auto t = bounds("two-vertex");
         auto ob = suites_clean(b, {"backward"}, 500);
         auto ot = suites_clean(t, {"two-vertex-forward", "two-vertex-backward"}, 500);
         return Outcome{ob.pass && ot.pass, ob.detail + "; " + ot.detail};
       }},
      {6, "Dobrushin submultiplicativity (10^4 pairs) and Doeblin bound", 0,
       [] { return suites_clean(bounds("dobrushin"), {"dobrushin", "doeblin"}, 10000); }},
      {7, "score vs central differences (< 1e-6, 100 cases); Louis vs second differences (< 1e-4, 50 cases)", 0,
       [] {
         auto s = oracle::compare_score(100, 7);
         auto l = oracle::compare_louis(50, 8, 3);
         return Outcome{s.cases == 100 && l.cases == 50 && s.worst < 1e-6 && l.worst < 1e-4,
                        "score max rel err " + num(s.worst) + " over " + std::to_string(s.cases) + "; louis max rel err " + num(l.worst) + " over " +
                            std::to_string(l.cases)};
       }},
      {8, "stationarity |pi Q - pi|_1 < 1e-12 for every tested Q", 0,
       [] {
         auto r = bounds("dobrushin");
         double worst = 0;
         std::size_t count = r.cases("stationary");
         for (const auto& row : r.rows)
           if (row.suite == "stationary") worst = std::max(worst, row.measured);
         for (const auto& kind : xp::experiment_kinds()) {
           auto q = xp::default_config(kind).theta.transition;
           auto pi = hmt::model::stationary_distribution(q);
           worst = std::max(worst, (pi * q - pi).lpNorm<1>());
           ++count;
         }
         return Outcome{worst < 1e-12 && r.violations("stationary") == 0, std::to_string(count) + " kernels, max residual " + num(worst)};
       }},
      {9, "consistency: median error decreasing, RMSE ratios in [0.35, 0.75], both root laws", 0,
       [] {
         auto r = experiment("consistency", 202);
         auto suites = suites_with_prefix(r, "consistency-");
         auto o = gate(r, suites);
         for (const auto& [law, rows] : r.summary["per_root_law"].items()) {
           o.detail += "\n      " + law + " rmse:";
           for (const auto& row : rows) o.detail += " n=" + std::to_string(row["depth"].get<int>()) + " " + num(row["rmse"].get<double>());
         }
         return o;
       }},
      {10, "score CLT at n = 8: means within 4 SE, covariance within 15%, whitened KS p > 0.01", 0,
       [] {
         auto r = experiment("score-clt", 303);
         return gate(r, {"score-mean", "score-covariance", "score-normality"});
       }},
      {11, "MLE CLT at n = 8: Wald coverage in [0.91, 0.98], observed information within 10% + MC error, Fisher identity within 3 SE", 0,
       [] {
         auto r = experiment("mle-clt", 404);
         auto suites = suites_with_prefix(r, "coverage-");
         suites.push_back("observed-information");
         suites.push_back("fisher-identity");
         auto o = gate(r, suites);
         auto info = experiment("observed-info", 505);
         auto oi = gate(info, suites_with_prefix(info, ""));
         o.pass = o.pass && oi.pass;
         o.detail += "\n      observed-info sweep: " + oi.detail;
         std::vector<std::string> extra = suites_with_prefix(r, "mle-");
         o.detail += "\n      not gated (standardized-error diagnostics): " + std::to_string([&] {
                       std::size_t bad = 0;
                       for (const auto& s : extra) bad += r.violations(s);
                       return bad;
                     }()) + " failing rows" + failures(r, extra, 3);
         return o;
       }},
      {12, "contrast maximized at the truth over a 20-point grid; relabelings tie", 0,
       [] {
         auto r = experiment("contrast", 606);
         return gate(r, suites_with_prefix(r, ""));
       }},
      {13, "coupling at sigma- = 0.8: offspring mean and histogram, finite coupling fraction", 0,
       [] {
         auto r = experiment("coupling", 707);
         return gate(r, suites_with_prefix(r, ""));
       }},
      {14, "shape histograms exactly uniform; geometric L2 rate envelopes", 0,
       [] {
         auto r = experiment("ergodic", 808);
         return gate(r, suites_with_prefix(r, ""));
       }},
  };
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) {
    report_dir = argv[1];
    std::filesystem::create_directories(report_dir);
  }
  int failed = 0;
  auto start_all = std::chrono::steady_clock::now();
  for (const auto& c : criteria()) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0 && seconds > c.time_limit) {
      o.pass = false;
      o.detail += "; runtime " + num(seconds) + " s exceeds " + num(c.time_limit) + " s";
    }
    if (!o.pass) ++failed;
    std::printf("[%s] criterion %2d: %s (%.1f s)\n      %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(), seconds, o.detail.c_str());
    std::fflush(stdout);
  }
  double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_all).count();
  std::printf("%d of 14 criteria passed (%.0f s)\n", 14 - failed, total);
  return failed == 0 ? 0 : 1;
}
