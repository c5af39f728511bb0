#include "sommab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>

namespace sommab {

Interval wilson_interval(std::int64_t successes, std::int64_t trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // the bounds are exact at the extremes; avoid rounding residue there
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half),
          successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

std::string PolicySpec::name() const {
  return label.empty() ? std::string(to_string(kind)) : label;
}

PolicyConfig resolve(const PolicySpec& spec, const SommabInstance& instance, std::int64_t n) {
  PolicyConfig config;
  config.kind = spec.kind;
  config.l = spec.l;
  config.b = instance.b();
  config.n = n;
  const Shape shape = Shape::of(instance);
  switch (spec.a.mode) {
    case ExplorationRule::Mode::Fixed: config.a = spec.a.value; break;
    case ExplorationRule::Mode::TheoremCap: {
      const double H = complexity(instance.gaps(), instance.b()).H;
      config.a = theorem_cap(shape, n, H, spec.l, order_of(instance));
      break;
    }
    case ExplorationRule::Mode::PropositionCap: {
      const double H = complexity(instance.gaps(), instance.b()).H;
      config.a = proposition_cap(shape, n, H);
      break;
    }
  }
  return config;
}

namespace {

// Step-1/2/3 quantities of the GapE analysis, checked online.
class DiagnosticsTracker {
 public:
  DiagnosticsTracker(const SommabInstance& instance, const PolicyConfig& config,
                     const DiagnosticsFlags& flags)
      : instance_(instance),
        flags_(flags),
        a_(config.a),
        c_(exponent_constants(config.l).c) {
    const auto& gaps = instance.gaps();
    for (const auto& row : gaps.delta)
      for (const double d : row) delta_.push_back(d / instance.b());
    record_.induction_checked =
        flags.induction && instance.total_arms() <= kMaxInductionPairs;
  }

  void after_pull(const RunState& state, GroupId group, bool initialized) {
    if (flags_.event_e && record_.event_e_held) {
      for (const auto& id : instance_.groups()[group]) {
        const std::size_t f = instance_.flat(id);
        const double t = static_cast<double>(state.pull_counts()[f]);
        const double deviation =
            std::abs(state.empirical_means()[f] - instance_.means()[f]) / instance_.b();
        if (!(deviation < c_ * std::sqrt(a_ / t))) {
          record_.event_e_held = false;
          break;
        }
      }
    }
    if (initialized) check_induction(state);
  }

  void check_induction(const RunState& state) {
    if (record_.induction_checked) count_induction(state);
  }

  void finish(const RunState& state) {
    const auto counts = state.pull_counts();
    if (flags_.terminal) {
      for (std::size_t f = 0; f < counts.size(); ++f) {
        const double need = 4.0 * a_ * c_ * c_ / (delta_[f] * delta_[f]);
        if (static_cast<double>(counts[f]) < need) record_.terminal_ok = false;
      }
    }
    const auto means = state.empirical_means();
    const auto& gaps = instance_.gaps();
    for (int m = 0; m < instance_.bandits(); ++m) {
      const std::size_t begin = instance_.bandit_offset(m);
      const int arms = instance_.arms(m);
      int best = 0;
      for (int k = 1; k < arms; ++k)
        if (means[begin + k] > means[begin + best]) best = k;
      int second = best == 0 ? 1 : 0;
      for (int k = 0; k < arms; ++k)
        if (k != best && means[begin + k] > means[begin + second]) second = k;
      record_.empirical_best_arm.push_back(best);
      record_.empirical_best_mean.push_back(means[begin + best]);
      record_.empirical_second_arm.push_back(second);
      record_.empirical_second_mean.push_back(means[begin + second]);

      const int true_best = gaps.best_arm[m];
      int true_second = true_best == 0 ? 1 : 0;
      for (int k = 0; k < arms; ++k)
        if (k != true_best && instance_.mean({m, k}) > instance_.mean({m, true_second}))
          true_second = k;
      record_.true_second_arm.push_back(true_second);
      record_.true_second_mean.push_back(instance_.mean({m, true_second}));
    }
  }

  const DiagnosticsRecord& record() const noexcept { return record_; }

 private:
  void count_induction(const RunState& state) {
    const auto counts = state.pull_counts();
    const std::size_t arms = counts.size();
    lhs_.resize(arms);
    rhs_.resize(arms);
    for (std::size_t f = 0; f < arms; ++f) {
      const auto t = counts[f];
      const double reduced = static_cast<double>(std::max<std::int64_t>(t - 1, 1));
      lhs_[f] = -delta_[f] + (1.0 + 2.0 * c_) * std::sqrt(a_ / reduced);
      rhs_[f] = -delta_[f] + 0.5 * (1.0 - c_) * std::sqrt(a_ / static_cast<double>(t));
    }
    for (std::size_t f = 0; f < arms; ++f)
      for (std::size_t g = 0; g < arms; ++g)
        if (f != g && lhs_[f] < rhs_[g]) ++record_.induction_violations;
  }

  const SommabInstance& instance_;
  DiagnosticsFlags flags_;
  double a_;
  double c_;
  std::vector<double> delta_;
  std::vector<double> lhs_;
  std::vector<double> rhs_;
  DiagnosticsRecord record_;
};

template <class Body>
void parallel_for(std::int64_t count, int workers, Body&& body) {
  if (workers <= 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  const auto threads = static_cast<std::int64_t>(std::min<std::int64_t>(workers, count));
  for (std::int64_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::int64_t i = next++; i < count; i = next++) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& thread : pool) thread.join();
  if (failure) std::rethrow_exception(failure);
}

double theorem_cap_or_nan(const SommabInstance& instance, std::int64_t n, int l, double H) {
  try {
    return theorem_cap(Shape::of(instance), n, H, l, order_of(instance));
  } catch (const ValidationError&) {
    return std::nan("");
  }
}

}  // namespace

RunResult run_once(const SommabInstance& instance, const PolicyConfig& config,
                   std::uint64_t run_key, const DiagnosticsFlags& flags,
                   const GroupTrace& trace, bool correlated) {
  auto policy = make_policy(instance, config);
  RunState state(instance);
  const RewardStream stream(run_key, correlated);

  std::optional<DiagnosticsTracker> tracker;
  if (flags.any()) {
    if (config.kind != PolicyKind::GapE)
      throw ValidationError("proof diagnostics are defined for GapE only");
    tracker.emplace(instance, config, flags);
  }

  policy->initialize(state, stream, [&](GroupId g) {
    if (trace) trace(state.t() - 1, g);
    if (tracker) tracker->after_pull(state, g, false);
  });
  const std::int64_t init_rounds = state.t();
  if (tracker) tracker->check_induction(state);

  while (state.t() < config.n) {
    const GroupId g = policy->select(state);
    pull_group(instance, state, g, stream);
    if (trace) trace(state.t() - 1, g);
    if (tracker) tracker->after_pull(state, g, true);
  }

  RunResult result;
  result.recommendation = recommend(state);
  result.init_rounds = init_rounds;
  const auto& gaps = instance.gaps();
  for (int m = 0; m < instance.bandits(); ++m) {
    const int chosen = result.recommendation.best[m];
    const bool wrong = chosen != gaps.best_arm[m];
    const double regret = gaps.best_mean[m] - instance.mean({m, chosen});
    assert(regret <= instance.b() * (wrong ? 1.0 : 0.0) + 1e-12);
    assert(regret >= gaps.delta_min * (wrong ? 1.0 : 0.0) - 1e-12);
    result.wrong.push_back(wrong);
    result.regret.push_back(regret);
    result.mean_regret += regret;
  }
  result.mean_regret /= instance.bandits();
  if (!(state.min_reward() >= 0.0 && state.max_reward() <= instance.b()))
    throw ContractViolation("reward outside [0, b] observed");
  result.pulls.assign(state.pull_counts().begin(), state.pull_counts().end());
  result.final_means.assign(state.empirical_means().begin(), state.empirical_means().end());
  result.total_pulls = state.total_pulls();
  if (tracker) {
    tracker->finish(state);
    result.diagnostics = tracker->record();
  }
  return result;
}

int effective_workers(int configured) {
  if (const char* env = std::getenv("SOMMAB_WORKERS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value >= 1) return static_cast<int>(value);
  }
  return std::max(configured, 1);
}

double strategy_bound(const SommabInstance& instance, const PolicyConfig& config) {
  try {
    const Shape shape = Shape::of(instance);
    const auto cx = complexity(instance.gaps(), instance.b());
    switch (config.kind) {
      case PolicyKind::GapE:
        return theorem_bound(shape, config.n, cx.H, config.l, order_of(instance), config.a)
            .value;
      case PolicyKind::Uniform: return uniform_bound(shape, config.n, cx.max_arm()).value;
      case PolicyKind::UniformUcbE:
        return uniform_ucbe_bound(shape, config.n, cx.max_bandit()).value;
      case PolicyKind::Static: return static_bound(shape, config.n, cx.H).value;
    }
  } catch (const ValidationError&) {
  }
  return std::nan("");
}

MetricsReport run_experiment(const SommabInstance& instance, const ExperimentConfig& config) {
  if (config.runs < 1) throw ValidationError("experiment needs at least one run");
  if (config.policies.empty()) throw ValidationError("experiment needs at least one policy");
  if (config.horizons.empty()) throw ValidationError("experiment needs at least one horizon");

  MetricsReport report;
  report.bandits = instance.bandits();
  report.b = instance.b();
  report.delta_min = instance.gaps().delta_min;
  const int workers = effective_workers(config.workers);
  const double H = complexity(instance.gaps(), instance.b()).H;
  const auto bandits = static_cast<std::size_t>(instance.bandits());

  for (const auto& spec : config.policies) {
    for (const auto n : config.horizons) {
      const PolicyConfig policy = resolve(spec, instance, n);
      validate(policy, instance);
      const bool diagnose = config.diagnostics.any() && policy.kind == PolicyKind::GapE;
      const DiagnosticsFlags flags = diagnose ? config.diagnostics : DiagnosticsFlags{};

      std::vector<RunResult> runs(static_cast<std::size_t>(config.runs));
      parallel_for(config.runs, workers, [&](std::int64_t i) {
        runs[static_cast<std::size_t>(i)] =
            run_once(instance, policy, derive_run_key(config.base_seed, static_cast<std::uint64_t>(i)),
                     flags, {}, config.correlated_rewards);
      });

      CellMetrics cell;
      cell.policy = spec.name();
      cell.n = n;
      cell.runs = config.runs;
      cell.config = policy;
      cell.errors.assign(bandits, 0);
      cell.votes.resize(bandits);
      for (std::size_t m = 0; m < bandits; ++m)
        cell.votes[m].assign(static_cast<std::size_t>(instance.arms(static_cast<int>(m))), 0);
      cell.mean_final_means.assign(instance.total_arms(), 0.0);
      const double cap = theorem_cap_or_nan(instance, n, policy.l, H);

      double regret_sum = 0.0;
      for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& run = runs[i];
        bool any_wrong = false;
        for (std::size_t m = 0; m < bandits; ++m) {
          if (run.wrong[m]) {
            ++cell.errors[m];
            any_wrong = true;
          }
          ++cell.votes[m][static_cast<std::size_t>(run.recommendation.best[m])];
        }
        if (any_wrong) ++cell.union_errors;
        regret_sum += run.mean_regret;
        cell.total_pulls += run.total_pulls;
        for (std::size_t f = 0; f < run.final_means.size(); ++f)
          cell.mean_final_means[f] += run.final_means[f];
        if (run.diagnostics) {
          const auto& d = *run.diagnostics;
          if (d.event_e_held) ++cell.event_e_runs;
          cell.induction_violations += d.induction_violations;
          if (d.terminal_ok) ++cell.terminal_ok_runs;
          if (flags.event_e && d.event_e_held && policy.a <= cap && any_wrong)
            ++cell.soundness_failures;
          cell.per_run.push_back({static_cast<std::int64_t>(i), d, !any_wrong});
        }
      }
      const double r = static_cast<double>(config.runs);
      for (auto& mu : cell.mean_final_means) mu /= r;
      std::size_t worst = 0;
      double e_sum = 0.0;
      for (std::size_t m = 0; m < bandits; ++m) {
        cell.error_ci.push_back(wilson_interval(cell.errors[m], config.runs));
        if (cell.errors[m] > cell.errors[worst]) worst = m;
        e_sum += static_cast<double>(cell.errors[m]) / r;
      }
      cell.l_hat = static_cast<double>(cell.errors[worst]) / r;
      cell.l_ci = cell.error_ci[worst];
      cell.e_hat = e_sum / static_cast<double>(bandits);
      cell.r_hat = regret_sum / r;
      cell.union_hat = static_cast<double>(cell.union_errors) / r;
      cell.union_ci = wilson_interval(cell.union_errors, config.runs);
      cell.bound = strategy_bound(instance, policy);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::vector<CurvePoint> estimate_error_curves(const SommabInstance& instance,
                                              const ExperimentConfig& config) {
  if (config.horizons.size() < 2)
    throw ValidationError("error curves need at least two horizons");
  return error_curves(instance, run_experiment(instance, config));
}

std::vector<CurvePoint> error_curves(const SommabInstance& instance,
                                     const MetricsReport& report) {
  const Shape shape = Shape::of(instance);
  const double H = complexity(instance.gaps(), instance.b()).H;
  std::vector<CurvePoint> curves;
  for (const auto& cell : report.cells) {
    CurvePoint point;
    point.policy = cell.policy;
    point.n = cell.n;
    point.l_hat = cell.l_hat;
    point.l_ci = cell.l_ci;
    const int l = cell.config.kind == PolicyKind::GapE ? cell.config.l : 1;
    try {
      point.bound = theorem_bound_at_cap(shape, cell.n, H, l, order_of(instance)).value;
    } catch (const ValidationError&) {
      point.bound = std::nan("");
    }
    point.exceeds_bound = !std::isnan(point.bound) && point.l_ci.lo > point.bound;
    curves.push_back(std::move(point));
  }
  return curves;
}

EventERate check_event_e_rate(const SommabInstance& instance, const PolicyConfig& gape,
                              std::int64_t runs, std::uint64_t base_seed, int workers) {
  if (gape.kind != PolicyKind::GapE) throw ValidationError("event E is defined for GapE");
  if (runs < 1) throw ValidationError("event E check needs at least one run");
  validate(gape, instance);
  DiagnosticsFlags flags;
  flags.event_e = true;
  std::vector<char> failed(static_cast<std::size_t>(runs), 0);
  parallel_for(runs, effective_workers(workers), [&](std::int64_t i) {
    const auto result =
        run_once(instance, gape, derive_run_key(base_seed, static_cast<std::uint64_t>(i)), flags);
    failed[static_cast<std::size_t>(i)] = result.diagnostics->event_e_held ? 0 : 1;
  });
  EventERate out;
  out.runs = runs;
  for (const char f : failed) out.failures += f;
  out.rate = static_cast<double>(out.failures) / static_cast<double>(runs);
  out.ci = wilson_interval(out.failures, runs);
  const double c = exponent_constants(gape.l).c;
  out.bound = union_bound(Shape::of(instance), gape.n, 2.0 * gape.a * c * c);
  out.vacuous = out.bound.value >= 1.0;
  out.consistent = out.vacuous || out.ci.lo <= out.bound.value;
  return out;
}

namespace {

void write_header(std::ostream& out, const std::vector<std::string>& header) {
  for (const auto& line : header) out << "# " << line << '\n';
}

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricsReport& report,
                       const std::vector<std::string>& header) {
  write_header(out, header);
  out << "policy,n,lHat,lHat_lo,lHat_hi,eHat,rHat,unionHat,bound\n";
  for (const auto& cell : report.cells)
    out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                       cell.policy, cell.n, cell.l_hat, cell.l_ci.lo, cell.l_ci.hi, cell.e_hat,
                       cell.r_hat, cell.union_hat, cell.bound);
}

void write_diagnostics_csv(std::ostream& out, const MetricsReport& report,
                           const std::vector<std::string>& header) {
  write_header(out, header);
  out << "policy,n,runIndex,eventEHeld,inductionViolations,terminalOk\n";
  for (const auto& cell : report.cells)
    for (const auto& run : cell.per_run)
      out << fmt::format("{},{},{},{},{},{}\n", cell.policy, cell.n, run.run_index,
                         run.record.event_e_held ? 1 : 0, run.record.induction_violations,
                         run.record.terminal_ok ? 1 : 0);
}

void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& curves,
                      const std::vector<std::string>& header) {
  write_header(out, header);
  out << "policy,n,lHat,lHat_lo,lHat_hi,bound,exceedsBound\n";
  for (const auto& p : curves)
    out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", p.policy, p.n, p.l_hat,
                       p.l_ci.lo, p.l_ci.hi, p.bound, p.exceeds_bound ? 1 : 0);
}

Recommendation majority_vote(const CellMetrics& cell) {
  Recommendation rec;
  for (const auto& votes : cell.votes) {
    const auto it = std::max_element(votes.begin(), votes.end());
    rec.best.push_back(static_cast<int>(it - votes.begin()));
  }
  return rec;
}

}  // namespace sommab
