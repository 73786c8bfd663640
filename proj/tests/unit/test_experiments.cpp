#include <doctest.h>

#include <sstream>

#include "hmt/error.hpp"
#include "hmt/experiments.hpp"

namespace xp = hmt::exp;
using nlohmann::json;

TEST_CASE("every kind has a valid default config that round-trips") {
  for (const auto& kind : xp::experiment_kinds()) {
    auto cfg = xp::default_config(kind);
    CHECK(cfg.kind == kind);
    auto back = xp::config_from_json(xp::to_json(cfg));
    CHECK(xp::to_json(back) == xp::to_json(cfg));
  }
}

TEST_CASE("config overrides merge into the defaults") {
  json j = {{"schema", xp::kConfigSchema}, {"kind", "coupling"}, {"replicates", 50}, {"thresholds", {{"finite_fraction", 0.5}}}};
  auto cfg = xp::config_from_json(j);
  CHECK(cfg.replicates == 50);
  CHECK(cfg.threshold("finite_fraction") == 0.5);
  CHECK(cfg.threshold("chi2_alpha") == xp::default_config("coupling").threshold("chi2_alpha"));
}

TEST_CASE("malformed configs are rejected") {
  auto rejects = [](json j) { CHECK_THROWS_AS(xp::config_from_json(j), hmt::Error); };
  rejects({{"kind", "coupling"}});
  rejects({{"schema", xp::kConfigSchema}, {"kind", "nonsense"}});
  rejects({{"schema", xp::kConfigSchema}, {"kind", "coupling"}, {"bogus", 1}});
  rejects({{"schema", xp::kConfigSchema}, {"kind", "coupling"}, {"thresholds", {{"bogus", 1}}}});
  rejects({{"schema", xp::kConfigSchema}, {"kind", "coupling"}, {"knobs", {{"bogus", 1}}}});
  rejects({{"schema", xp::kConfigSchema}, {"kind", "coupling"}, {"thresholds", {{"finite_fraction", -1}}}});
  rejects({{"schema", xp::kConfigSchema}, {"kind", "coupling"}, {"replicates", 0}});
}

TEST_CASE("report bookkeeping") {
  xp::VerificationReport r;
  r.kind = "test";
  r.add_upper("a", "x", 1.0, 2.0);
  r.add_upper("a", "y", 3.0, 2.0);
  r.add_lower("b", "z", 1.0, 2.0, 1.5);
  r.add_range("b", "w", 0.5, 0.0, 1.0);
  r.finalize(0.1);
  CHECK(r.violations() == 1);
  CHECK(r.violations("a") == 1);
  CHECK(r.cases("b") == 2);
  REQUIRE(r.find("b", "w") != nullptr);
  CHECK(r.find("b", "w")->case_id == "w in [0,1]");
  std::ostringstream out;
  xp::write_csv(out, r);
  CHECK(out.str().rfind("suite,case,measured,bound_or_reference,margin,pass\r\n", 0) == 0);
  CHECK(xp::summary_json(r)["violations"] == 1);
}

TEST_CASE("bound suites run clean and do not depend on the thread count") {
  for (const char* suite : {"forgetting", "dobrushin", "telescoping"}) {
    auto cfg = xp::default_config("bounds");
    cfg.knobs["suite"] = suite;
    cfg.knobs["forgetting_cases"] = 60;
    cfg.knobs["kernel_pairs"] = 300;
    cfg.knobs["telescoping_cases"] = 20;
    cfg.seed = 5;
    auto one = xp::run_bounds(cfg);
    cfg.threads = 3;
    auto three = xp::run_bounds(cfg);
    CHECK(one.violations() == 0);
    REQUIRE(one.rows.size() == three.rows.size());
    for (std::size_t i = 0; i < one.rows.size(); ++i) {
      CHECK(one.rows[i].case_id == three.rows[i].case_id);
      CHECK(one.rows[i].measured == three.rows[i].measured);
    }
  }
}

TEST_CASE("a small coupling batch matches the branching prediction") {
  auto cfg = xp::default_config("coupling");
  cfg.replicates = 2000;
  cfg.seed = 9;
  auto r = xp::run_coupling(cfg);
  CHECK(r.violations() == 0);
}
