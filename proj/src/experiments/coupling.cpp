#include <array>
#include <cmath>

#include "common.hpp"
#include "hmt/parallel.hpp"
#include "hmt/stats.hpp"

namespace hmt::exp {

namespace {

struct CouplingStats {
  std::array<double, 3> offspring{0, 0, 0};
  double finite = 0;
  double runs = 0;
  std::vector<double> times;

  double total() const { return offspring[0] + offspring[1] + offspring[2]; }
  double mean() const { return (offspring[1] + 2 * offspring[2]) / total(); }
};

CouplingStats simulate_runs(const ExperimentConfig& cfg, const model::Theta& theta, const sim::RootLaw& zeta, std::size_t depth,
                            sim::RootCoupling coupling, std::uint64_t seed) {
  std::vector<sim::CouplingTrace> traces(cfg.replicates);
  parallel_for(cfg.replicates, cfg.threads,
               [&](std::size_t r) { traces[r] = sim::trace_coupling(cfg.spec, theta, zeta, depth, derive_seed(seed, r), coupling); });
  CouplingStats out;
  for (const auto& t : traces) {
    for (int c : t.special_offspring) out.offspring[static_cast<std::size_t>(c)] += 1;
    if (t.coupling_time) {
      out.finite += 1;
      out.times.push_back(static_cast<double>(*t.coupling_time));
    }
    out.runs += 1;
  }
  return out;
}

}  // namespace

VerificationReport run_coupling(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  VerificationReport report;
  report.kind = "coupling";
  if (cfg.depths.size() != 1) throw Error(ErrorCode::invalid_argument, "coupling takes exactly one depth");
  const std::size_t depth = cfg.depths[0];
  const sim::RootLaw zeta = detail::parse_root_law(cfg.knob<std::string>("zeta"), cfg.spec.states);
  const std::string rc = cfg.knob<std::string>("root_coupling");
  if (rc != "maximal" && rc != "independent") throw Error(ErrorCode::invalid_argument, "root_coupling must be maximal or independent");
  const auto coupling = rc == "maximal" ? sim::RootCoupling::maximal : sim::RootCoupling::independent;

  const double sm = model::mixing_profile(cfg.theta.transition).sigma_minus;
  const std::array<double, 3> law{sm * sm, 2 * sm * (1 - sm), (1 - sm) * (1 - sm)};
  CouplingStats main = simulate_runs(cfg, cfg.theta, zeta, depth, coupling, derive_seed(cfg.seed, "main"));

  report.add_upper("coupling-offspring", "mean offspring of special vertices vs 2(1-sigma-)=" + detail::fmt(2 * (1 - sm)), std::abs(main.mean() - 2 * (1 - sm)),
                   cfg.threshold("offspring_mean_tolerance"));
  double chi2 = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    double expected = law[c] * main.total();
    chi2 += (main.offspring[c] - expected) * (main.offspring[c] - expected) / expected;
  }
  report.add_lower("coupling-offspring", "offspring histogram chi2 p (df=2)", stats::chi2_sf(chi2, 2.0), cfg.threshold("chi2_alpha"));
  const double finite = main.finite / main.runs;
  report.add_lower("coupling-finite", "finite coupling time fraction at depth " + std::to_string(depth), finite, cfg.threshold("finite_fraction"));

  // A kernel with sigma- < 1/2 makes the special-vertex tree supercritical.
  model::Theta other = cfg.theta;
  const auto& rows = cfg.knobs.at("contrast_transition");
  other.transition.resize(cfg.spec.states, cfg.spec.states);
  for (int a = 0; a < cfg.spec.states; ++a)
    for (int b = 0; b < cfg.spec.states; ++b) other.transition(a, b) = rows.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(b)).get<double>();
  model::validate_theta(cfg.spec, other);
  const double sm_other = model::mixing_profile(other.transition).sigma_minus;
  CouplingStats contrast = simulate_runs(cfg, other, zeta, depth, coupling, derive_seed(cfg.seed, "contrast"));
  const double finite_other = contrast.finite / contrast.runs;
  report.add_flag("coupling-regime", "finite fraction with sigma-=" + detail::fmt(sm_other) + " below sigma-=" + detail::fmt(sm) + " run",
                  (sm_other < 0.5) == (sm >= 0.5) ? finite_other < finite : true, finite_other, finite);

  report.finalize(clock.seconds());
  report.summary["sigma_minus"] = sm;
  report.summary["offspring_counts"] = main.offspring;
  report.summary["offspring_law"] = law;
  report.summary["offspring_mean"] = main.mean();
  report.summary["finite_fraction"] = finite;
  report.summary["coupling_time_mean"] = stats::mean_se(main.times).mean;
  report.summary["contrast_sigma_minus"] = sm_other;
  report.summary["contrast_finite_fraction"] = finite_other;
  report.summary["contrast_offspring_mean"] = contrast.total() > 0 ? contrast.mean() : 0.0;
  return report;
}

}  // namespace hmt::exp
