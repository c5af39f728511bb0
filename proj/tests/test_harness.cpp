#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "sommab/harness.hpp"

using namespace sommab;

namespace {

std::vector<std::vector<RewardModel>> point_masses(const std::vector<std::vector<double>>& means) {
  std::vector<std::vector<RewardModel>> out;
  for (const auto& row : means) {
    auto& models = out.emplace_back();
    for (const double v : row) models.emplace_back(PointMass{v});
  }
  return out;
}

std::vector<std::vector<RewardModel>> bernoullis(const std::vector<std::vector<double>>& ps) {
  std::vector<std::vector<RewardModel>> out;
  for (const auto& row : ps) {
    auto& models = out.emplace_back();
    for (const double p : row) models.emplace_back(ScaledBernoulli{p});
  }
  return out;
}

const std::vector<PolicyKind> kAllKinds{PolicyKind::GapE, PolicyKind::Uniform,
                                        PolicyKind::UniformUcbE, PolicyKind::Static};

std::vector<GroupId> trace_of(const SommabInstance& inst, const PolicyConfig& config,
                              std::uint64_t key) {
  std::vector<GroupId> out;
  run_once(inst, config, key, {}, [&](std::int64_t, GroupId g) { out.push_back(g); });
  return out;
}

}  // namespace

TEST_CASE("wilson interval") {
  const auto zero = wilson_interval(0, 10);
  CHECK(zero.lo == 0.0);
  CHECK(wilson_interval(7, 7).hi == 1.0);
  CHECK(zero.hi == doctest::Approx(0.2775327998628892));
  const auto half = wilson_interval(5, 10);
  CHECK(half.lo == doctest::Approx(0.236593090512564));
  CHECK(half.hi == doctest::Approx(0.7634069094874361));
  const auto few = wilson_interval(3, 100);
  CHECK(few.lo == doctest::Approx(0.010254524024038925));
  CHECK(few.hi == doctest::Approx(0.0845193642905276));
}

TEST_CASE("point mass instances are solved by every policy") {
  SommabInstance inst(point_masses({{0.2, 0.9, 0.5}, {0.7, 0.3}}), 1.0, {{{0, 0}, {1, 1}}});
  for (const auto kind : kAllKinds) {
    const auto run = run_once(inst, {kind, 3.0, 2, 1.0, 60}, 5);
    CHECK(run.recommendation.best == std::vector<int>{1, 0});
    CHECK(run.mean_regret == 0.0);
    CHECK(run.wrong == std::vector<bool>{false, false});
  }
}

TEST_CASE("runs are reproducible") {
  SommabInstance inst(bernoullis({{0.6, 0.5}, {0.55, 0.45}}), 1.0, {{{0, 0}, {1, 1}}});
  for (const auto kind : kAllKinds) {
    const PolicyConfig config{kind, 4.0, 1, 1.0, 300};
    CHECK(trace_of(inst, config, 77) == trace_of(inst, config, 77));
    CHECK(run_once(inst, config, 77).recommendation == run_once(inst, config, 77).recommendation);
  }
  CHECK(trace_of(inst, {PolicyKind::GapE, 4.0, 1, 1.0, 300}, 1) !=
        trace_of(inst, {PolicyKind::GapE, 4.0, 1, 1.0, 300}, 2));
}

TEST_CASE("experiment output does not depend on the worker count") {
  SommabInstance inst(bernoullis({{0.6, 0.5, 0.3}, {0.55, 0.45}}), 1.0, {{{0, 1}, {1, 0}}});
  ExperimentConfig config;
  config.policies = {{"", PolicyKind::GapE, ExplorationRule::fixed(2.0), 1},
                     {"", PolicyKind::Uniform, {}, 1}};
  config.horizons = {50, 200};
  config.runs = 300;
  config.base_seed = 99;
  config.diagnostics.event_e = true;
  config.diagnostics.induction = true;
  config.diagnostics.terminal = true;

  auto serialize = [&](int workers) {
    config.workers = workers;
    const auto report = run_experiment(inst, config);
    std::ostringstream out;
    write_metrics_csv(out, report);
    write_diagnostics_csv(out, report);
    write_curves_csv(out, error_curves(inst, report));
    return out.str();
  };
  const auto serial = serialize(1);
  CHECK(serial == serialize(4));
  CHECK(serial == serialize(3));
}

TEST_CASE("group size r spends r budget per round") {
  std::vector<Group> pairs{{{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}, {{0, 2}, {1, 2}}};
  SommabInstance inst(bernoullis({{0.6, 0.5, 0.4}, {0.3, 0.45, 0.2}}), 1.0, pairs);
  for (const auto kind : kAllKinds) {
    const auto run = run_once(inst, {kind, 2.0, 1, 1.0, 100}, 3);
    CHECK(run.total_pulls == 200);
    CHECK(std::accumulate(run.pulls.begin(), run.pulls.end(), std::int64_t{0}) == 200);
  }
}

TEST_CASE("scaling rewards by b leaves the allocation unchanged") {
  const auto models = bernoullis({{0.6, 0.5, 0.3}, {0.55, 0.45}});
  SommabInstance unit(models, 1.0, {{{0, 1}, {1, 0}}});
  SommabInstance doubled(models, 2.0, {{{0, 1}, {1, 0}}});
  for (const auto kind : kAllKinds) {
    const auto a = trace_of(unit, {kind, 3.0, 1, 1.0, 400}, 12);
    const auto b = trace_of(doubled, {kind, 3.0, 1, 2.0, 400}, 12);
    CHECK(a == b);
  }
}

TEST_CASE("uniform error matches the exact binomial computation") {
  // 12 rounds on two arms: 6 pulls each, wrong iff the worse arm's sum is larger.
  SommabInstance inst(bernoullis({{0.6, 0.4}}), 1.0);
  ExperimentConfig config;
  config.policies = {{"", PolicyKind::Uniform, {}, 1}};
  config.horizons = {12};
  config.runs = 40000;
  config.base_seed = 7;
  const auto report = run_experiment(inst, config);
  const double exact = 0.15821229260800007;
  const double sd = std::sqrt(exact * (1 - exact) / 40000.0);
  CHECK(std::abs(report.cells[0].l_hat - exact) < 4 * sd);
  CHECK(report.cells[0].l_ci.lo < exact);
  CHECK(report.cells[0].l_ci.hi > exact);
}

TEST_CASE("experiment metrics") {
  SommabInstance inst(point_masses({{0.2, 0.9}, {0.7, 0.3}}), 1.0);
  ExperimentConfig config;
  config.policies = {{"g", PolicyKind::GapE, ExplorationRule::theorem_cap(), 1},
                     {"", PolicyKind::Static, {}, 1}};
  config.horizons = {100, 400};
  config.runs = 5;
  config.diagnostics.event_e = true;
  config.diagnostics.terminal = true;
  const auto report = run_experiment(inst, config);
  REQUIRE(report.cells.size() == 4);
  CHECK(report.cells[0].policy == "g");
  CHECK(report.cells[2].policy == "static");
  for (const auto& cell : report.cells) {
    CHECK(cell.l_hat == 0.0);
    CHECK(cell.union_hat == 0.0);
    CHECK(majority_vote(cell).best == std::vector<int>{1, 0});
  }
  CHECK(report.cells[0].event_e_runs == 5);
  CHECK(report.cells[0].per_run.size() == 5);
  CHECK(report.cells[2].per_run.empty());
  CHECK_FALSE(std::isnan(report.cells[0].bound));

  const auto curves = estimate_error_curves(inst, config);
  CHECK(curves.size() == 4);
  for (const auto& p : curves) {
    CHECK(p.l_hat == 0.0);
    CHECK_FALSE(p.exceeds_bound);
  }
  config.horizons = {100};
  CHECK_THROWS_AS(estimate_error_curves(inst, config), ValidationError);

  std::ostringstream csv;
  write_metrics_csv(csv, report, {"sommab test", "seed 0"});
  CHECK(csv.str().rfind("# sommab test\n# seed 0\npolicy,n,lHat,lHat_lo,lHat_hi,eHat,rHat,"
                        "unionHat,bound\ng,100,0,",
                        0) == 0);
}

TEST_CASE("majority vote breaks ties toward the lowest arm") {
  CellMetrics cell;
  cell.votes = {{3, 3, 1}, {0, 2}};
  CHECK(majority_vote(cell).best == std::vector<int>{0, 1});
}

TEST_CASE("diagnostics") {
  SommabInstance points(point_masses({{0.2, 0.9}, {0.7, 0.3}}), 1.0);
  CHECK_THROWS_AS(run_once(points, {PolicyKind::Uniform, 1.0, 1, 1.0, 50}, 1, {true, false, false}),
                  ValidationError);

  const auto run = run_once(points, {PolicyKind::GapE, 2.0, 1, 1.0, 50}, 1, {true, true, true});
  REQUIRE(run.diagnostics);
  const auto& d = *run.diagnostics;
  CHECK(d.event_e_held);
  CHECK(d.induction_checked);
  CHECK(d.empirical_best_arm == std::vector<int>{1, 0});
  CHECK(d.empirical_second_arm == std::vector<int>{0, 1});
  CHECK(d.true_second_mean == std::vector<double>{0.2, 0.3});

  const auto rate = check_event_e_rate(points, {PolicyKind::GapE, 2.0, 1, 1.0, 50}, 20, 0);
  CHECK(rate.failures == 0);
  CHECK(rate.vacuous);

  // Step-2 relation on runs where the concentration event holds.
  SommabInstance coins(bernoullis({{0.7, 0.3}, {0.55, 0.45}}), 1.0);
  ExperimentConfig config;
  config.policies = {{"", PolicyKind::GapE, ExplorationRule::fixed(600.0), 1}};
  config.horizons = {1000};
  config.runs = 200;
  config.diagnostics = {true, true, false};
  const auto report = run_experiment(coins, config);
  const auto& cell = report.cells[0];
  CHECK(cell.event_e_runs > 100);
  for (const auto& r : cell.per_run)
    if (r.record.event_e_held) CHECK(r.record.induction_violations == 0);

  SommabInstance large(bernoullis(std::vector<std::vector<double>>(33, {0.6, 0.4})), 1.0);
  const auto big = run_once(large, {PolicyKind::GapE, 2.0, 1, 1.0, 100}, 1, {false, true, false});
  CHECK_FALSE(big.diagnostics->induction_checked);
}

TEST_CASE("event E rate against its bound") {
  SommabInstance coins(bernoullis({{0.7, 0.3}, {0.55, 0.45}}), 1.0);
  const auto rate = check_event_e_rate(coins, {PolicyKind::GapE, 500.0, 1, 1.0, 2000}, 300, 4);
  CHECK(rate.bound.value < 1.0);
  CHECK_FALSE(rate.vacuous);
  CHECK(rate.consistent);
  CHECK(rate.rate <= 1.0);
  CHECK_THROWS_AS(check_event_e_rate(coins, {PolicyKind::Uniform, 1.0, 1, 1.0, 100}, 10, 0),
                  ValidationError);
}

TEST_CASE("resolve and strategy bounds") {
  SommabInstance inst(bernoullis({{0.7, 0.3}, {0.55, 0.45}}), 1.0);
  const auto cap = resolve({"", PolicyKind::GapE, ExplorationRule::theorem_cap(), 1}, inst, 5000);
  const double H = 2 / 0.16 + 2 / 0.01;
  CHECK(cap.a == doctest::Approx(theorem_cap(Shape::uniform(2, 2), 5000, H, 1)));
  const auto prop =
      resolve({"", PolicyKind::GapE, ExplorationRule::proposition_cap(), 1}, inst, 5000);
  CHECK(prop.a == doctest::Approx(4.0 * 4996 / (9 * H)));
  CHECK(strategy_bound(inst, cap) ==
        doctest::Approx(theorem_bound_at_cap(Shape::uniform(2, 2), 5000, H, 1).value));
  CHECK(std::isnan(strategy_bound(inst, {PolicyKind::GapE, 1e6, 1, 1.0, 5000})));
  CHECK(strategy_bound(inst, {PolicyKind::Static, 1.0, 1, 1.0, 5000}) ==
        doctest::Approx(4 * std::exp(-5000 / H)));
}

TEST_CASE("worker count override") {
  ::setenv("SOMMAB_WORKERS", "3", 1);
  CHECK(effective_workers(1) == 3);
  ::setenv("SOMMAB_WORKERS", "zero", 1);
  CHECK(effective_workers(2) == 2);
  ::unsetenv("SOMMAB_WORKERS");
  CHECK(effective_workers(0) == 1);
}
