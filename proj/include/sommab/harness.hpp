#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sommab/analysis.hpp"
#include "sommab/core.hpp"
#include "sommab/policies.hpp"

namespace sommab {

/// Two-sided score interval for a binomial proportion.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval; z = 1.959964 gives 95 %.
Interval wilson_interval(std::int64_t successes, std::int64_t trials,
                         double z = 1.959963984540054);

/// How a policy's exploration parameter is chosen for a given horizon.
struct ExplorationRule {
  enum class Mode { Fixed, TheoremCap, PropositionCap };
  Mode mode = Mode::Fixed;
  double value = 1.0;  ///< used when mode == Fixed

  static ExplorationRule fixed(double a) { return {Mode::Fixed, a}; }
  static ExplorationRule theorem_cap() { return {Mode::TheoremCap, 0.0}; }
  static ExplorationRule proposition_cap() { return {Mode::PropositionCap, 0.0}; }
};

struct PolicySpec {
  std::string label;  ///< defaults to the kind name
  PolicyKind kind = PolicyKind::GapE;
  ExplorationRule a;
  int l = 1;

  std::string name() const;
};

/// Concrete config for horizon n; cap rules use the instance's H and order.
PolicyConfig resolve(const PolicySpec& spec, const SommabInstance& instance, std::int64_t n);

struct DiagnosticsFlags {
  bool event_e = false;
  bool induction = false;
  bool terminal = false;

  bool any() const noexcept { return event_e || induction || terminal; }
};

/// Instance sizes above which the quadratic induction check is skipped.
inline constexpr std::size_t kMaxInductionPairs = 64;

/// Runtime evidence for the GapE error analysis within one run, in units
/// normalized by b.
struct DiagnosticsRecord {
  /// |muHat - mu| < c sqrt(a/T) held for every arm after every pull.
  bool event_e_held = true;
  /// Ordered pairs (m,k) != (q,j) and rounds t >= end of initialization with
  /// -D_mk + (1+2c) sqrt(a/max(T_mk-1,1)) < -D_qj + (1-c)/2 sqrt(a/T_qj).
  std::int64_t induction_violations = 0;
  bool induction_checked = false;
  /// T_mk(n) >= 4 a c^2 / D_mk^2 for every arm.
  bool terminal_ok = true;

  std::vector<double> empirical_best_mean;
  std::vector<int> empirical_best_arm;
  std::vector<double> empirical_second_mean;
  std::vector<int> empirical_second_arm;
  std::vector<double> true_second_mean;
  std::vector<int> true_second_arm;
};

struct RunResult {
  Recommendation recommendation;
  std::vector<bool> wrong;       ///< per bandit, J_m != k*_m
  std::vector<double> regret;    ///< per bandit, mu*_m - mu_{m,J_m}
  double mean_regret = 0.0;
  std::vector<std::int64_t> pulls;
  std::vector<double> final_means;
  std::int64_t total_pulls = 0;
  std::int64_t init_rounds = 0;
  std::optional<DiagnosticsRecord> diagnostics;
};

using GroupTrace = std::function<void(std::int64_t round, GroupId group)>;

/// One run: initialization, then selections until exactly n budget units
/// are spent. Diagnostics need a GapE config.
RunResult run_once(const SommabInstance& instance, const PolicyConfig& config,
                   std::uint64_t run_key, const DiagnosticsFlags& flags = {},
                   const GroupTrace& trace = {}, bool correlated = false);

struct ExperimentConfig {
  std::vector<PolicySpec> policies;
  std::vector<std::int64_t> horizons;
  std::int64_t runs = 1;
  std::uint64_t base_seed = 0;
  DiagnosticsFlags diagnostics;
  int workers = 1;
  bool correlated_rewards = false;
};

struct RunDiagnostics {
  std::int64_t run_index = 0;
  DiagnosticsRecord record;
  bool correct = false;
};

/// Aggregates of one (policy, horizon) cell.
struct CellMetrics {
  std::string policy;
  std::int64_t n = 0;
  std::int64_t runs = 0;
  PolicyConfig config;

  std::vector<std::int64_t> errors;  ///< per bandit
  std::vector<Interval> error_ci;
  std::int64_t union_errors = 0;

  double l_hat = 0.0;
  Interval l_ci;
  double e_hat = 0.0;
  double r_hat = 0.0;
  double union_hat = 0.0;
  Interval union_ci;
  double bound = 0.0;  ///< strategy's closed-form guarantee; NaN if undefined

  std::int64_t total_pulls = 0;  ///< summed over runs
  std::vector<std::vector<std::int64_t>> votes;  ///< per bandit, per arm
  std::vector<double> mean_final_means;          ///< per arm, averaged over runs

  // diagnostics
  std::int64_t event_e_runs = 0;
  std::int64_t induction_violations = 0;
  std::int64_t terminal_ok_runs = 0;
  std::int64_t soundness_failures = 0;  ///< E held, a <= cap, wrong answer
  std::vector<RunDiagnostics> per_run;
};

struct MetricsReport {
  int bandits = 0;
  double b = 1.0;
  double delta_min = 0.0;
  std::vector<CellMetrics> cells;
};

/// Monte Carlo over runs x policies x horizons. Deterministic in the config
/// regardless of worker count.
MetricsReport run_experiment(const SommabInstance& instance, const ExperimentConfig& config);

/// Worker count: SOMMAB_WORKERS if set, else `configured`.
int effective_workers(int configured);

/// Closed-form guarantee matching the policy kind (theorem at cap for GapE).
double strategy_bound(const SommabInstance& instance, const PolicyConfig& config);

struct CurvePoint {
  std::string policy;
  std::int64_t n = 0;
  double l_hat = 0.0;
  Interval l_ci;
  double bound = 0.0;  ///< theorem bound at cap, NaN when the premise fails
  bool exceeds_bound = false;
};

/// Curve points of an existing report.
std::vector<CurvePoint> error_curves(const SommabInstance& instance, const MetricsReport& report);

/// lHat per horizon with the theorem bound at cap next to it. Needs at
/// least two horizons.
std::vector<CurvePoint> estimate_error_curves(const SommabInstance& instance,
                                              const ExperimentConfig& config);

struct EventERate {
  std::int64_t failures = 0;
  std::int64_t runs = 0;
  double rate = 0.0;
  Interval ci;
  BoundValue bound;  ///< 2 MK n exp(-2 a c^2)
  bool vacuous = false;
  bool consistent = true;  ///< ci.lo <= bound
};

/// Frequency of runs in which the concentration event fails, next to its
/// union bound.
EventERate check_event_e_rate(const SommabInstance& instance, const PolicyConfig& gape,
                              std::int64_t runs, std::uint64_t base_seed, int workers = 1);

/// `header` lines are written first, each prefixed by "# ".
void write_metrics_csv(std::ostream& out, const MetricsReport& report,
                       const std::vector<std::string>& header = {});
void write_diagnostics_csv(std::ostream& out, const MetricsReport& report,
                           const std::vector<std::string>& header = {});
void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& curves,
                      const std::vector<std::string>& header = {});

/// Per bandit, the most frequently recommended arm of a cell (lowest index on ties).
Recommendation majority_vote(const CellMetrics& cell);

}  // namespace sommab
