#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "sommab/core.hpp"

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

// Gaps of one bandit from scratch, for comparison with the incremental path.
std::vector<double> full_gaps(const std::vector<double>& means) {
  std::vector<double> out;
  for (std::size_t k = 0; k < means.size(); ++k) {
    double best_other = -1.0;
    for (std::size_t j = 0; j < means.size(); ++j)
      if (j != k) best_other = std::max(best_other, means[j]);
    out.push_back(std::abs(best_other - means[k]));
  }
  return out;
}

}  // namespace

TEST_CASE("group_of returns declared groups and implicit singletons") {
  SommabInstance inst(point_masses({{0.9, 0.1}, {0.4, 0.6}}), 1.0, {{{0, 0}, {1, 0}}});
  CHECK(group_of(inst, {0, 0}) == Group{{0, 0}, {1, 0}});
  CHECK(group_of(inst, {0, 1}) == Group{{0, 1}});
  CHECK(inst.groups().size() == 3);

  SommabInstance crossed(point_masses({{0.9, 0.1}, {0.4, 0.6}}), 1.0,
                         {{{0, 0}, {1, 1}}, {{0, 1}, {1, 0}}});
  CHECK(group_of(crossed, {1, 0}) == Group{{0, 1}, {1, 0}});
  CHECK_THROWS_AS(group_of(crossed, {2, 0}), DomainError);
  CHECK_THROWS_AS(group_of(crossed, {0, 2}), DomainError);
}

TEST_CASE("instance construction rejects malformed groups") {
  const auto models = point_masses({{0.9, 0.1}, {0.4, 0.6}});
  CHECK_THROWS_AS(SommabInstance(models, 1.0, {{{0, 0}, {0, 1}}}), DomainError);
  CHECK_THROWS_AS(SommabInstance(models, 1.0, {{{0, 0}, {1, 0}}, {{0, 0}, {1, 1}}}), DomainError);
  CHECK_THROWS_AS(SommabInstance(models, 1.0, {{}}), DomainError);
  CHECK_THROWS_AS(SommabInstance(models, 1.0, {{{0, 5}}}), DomainError);
  CHECK_THROWS_AS(SommabInstance(models, 0.0), DomainError);
  CHECK_THROWS_AS(SommabInstance(point_masses({{0.9}}), 1.0), DomainError);
  CHECK_THROWS_AS(SommabInstance(point_masses({{1.5, 0.1}}), 1.0), DomainError);
}

TEST_CASE("pull_group on point masses") {
  SommabInstance inst(point_masses({{0.9, 0.5}, {0.4, 0.6}}), 1.0, {{{0, 0}, {1, 0}}});
  RunState state(inst);
  const RewardStream stream(1);

  const Group pair{{0, 0}, {1, 0}};
  const auto rewards = pull_group(inst, state, pair, stream);
  REQUIRE(rewards.size() == 2);
  CHECK(rewards[0].value == 0.9);
  CHECK(rewards[1].value == 0.4);
  CHECK(state.pulls({0, 0}) == 1);
  CHECK(state.pulls({1, 0}) == 1);
  CHECK(state.t() == 1);

  const Group single{{0, 1}};
  for (int i = 0; i < 3; ++i) pull_group(inst, state, single, stream);
  CHECK(state.sum({0, 1}) == doctest::Approx(1.5));
  pull_group(inst, state, single, stream);
  CHECK(state.mean({0, 1}) == doctest::Approx(0.5));
  CHECK(state.t() == 5);

  const Group bogus{{0, 1}, {1, 1}};
  CHECK_THROWS_AS(pull_group(inst, state, bogus, stream), DomainError);
}

TEST_CASE("group of size three costs one round") {
  SommabInstance inst(point_masses({{0.9, 0.1}, {0.4, 0.6}, {0.2, 0.3}}), 1.0,
                      {{{0, 0}, {1, 0}, {2, 0}}});
  RunState state(inst);
  pull_group(inst, state, inst.group_index({0, 0}), RewardStream(3));
  CHECK(state.total_pulls() == 3);
  CHECK(state.t() == 1);
}

TEST_CASE("true_gaps") {
  SommabInstance a(point_masses({{0.5, 0.3, 0.2}, {0.9, 0.1}}), 1.0);
  const auto& g = a.gaps();
  CHECK(g.delta[0][0] == doctest::Approx(0.2));
  CHECK(g.delta[0][1] == doctest::Approx(0.2));
  CHECK(g.delta[0][2] == doctest::Approx(0.3));
  CHECK(g.best_arm[0] == 0);
  CHECK(g.delta[1][0] == doctest::Approx(0.8));
  CHECK(g.delta[1][1] == doctest::Approx(0.8));
  CHECK(g.delta_min == doctest::Approx(0.2));
  CHECK_THROWS_AS(SommabInstance(point_masses({{0.5, 0.5, 0.2}}), 1.0), DomainError);
}

TEST_CASE("order_of") {
  const auto models = point_masses({{0.9, 0.1}, {0.4, 0.6}});
  CHECK(order_of(SommabInstance(models, 1.0, {{{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}})) == 2);
  CHECK(order_of(SommabInstance(models, 1.0)) == 1);

  const auto three = point_masses({{0.9, 0.1}, {0.4, 0.6}, {0.3, 0.2}});
  CHECK(order_of(SommabInstance(three, 1.0, {{{0, 0}, {1, 0}, {2, 0}}})) == 1);

  std::vector<std::vector<double>> means(4, {0.6, 0.5, 0.4});
  std::vector<Group> columns(3);
  for (int k = 0; k < 3; ++k)
    for (int m = 0; m < 4; ++m) columns[k].push_back({m, k});
  CHECK(order_of(SommabInstance(point_masses(means), 1.0, columns)) == 4);
}

TEST_CASE("reward models") {
  CHECK(RewardModel(ScaledBernoulli{0.3}).mean(2.0) == doctest::Approx(0.6));
  CHECK(RewardModel(PointMass{0.25}).sample(0.7, 0.1, 1.0) == 0.25);
  CHECK(RewardModel(ScaledBernoulli{0.3}).sample(0.29, 0.5, 2.0) == 2.0);
  CHECK(RewardModel(ScaledBernoulli{0.3}).sample(0.31, 0.5, 2.0) == 0.0);
  CHECK_THROWS_AS(RewardModel(ScaledBernoulli{1.2}).validate(1.0), DomainError);
  CHECK_THROWS_AS(RewardModel(ClippedGaussian{0.5, -1.0}).validate(1.0), DomainError);

  // Clipped mean against midpoint quadrature of the clamped density.
  for (const auto [mu, sd, b] : {std::tuple{0.5, 0.1, 1.0}, std::tuple{0.9, 0.3, 1.0},
                                 std::tuple{-0.2, 0.5, 1.0}, std::tuple{1.5, 1.0, 2.0}}) {
    const int steps = 400000;
    double integral = 0.0;
    const double lo = mu - 12 * sd;
    const double hi = mu + 12 * sd;
    const double h = (hi - lo) / steps;
    for (int i = 0; i < steps; ++i) {
      const double x = lo + (i + 0.5) * h;
      const double pdf = std::exp(-0.5 * (x - mu) * (x - mu) / (sd * sd)) / (sd * std::sqrt(2 * M_PI));
      integral += std::clamp(x, 0.0, b) * pdf * h;
    }
    CHECK(clipped_gaussian_mean(mu, sd, b) == doctest::Approx(integral).epsilon(1e-9));
  }
  CHECK(clipped_gaussian_mean(0.3, 0.0, 1.0) == 0.3);
  CHECK(clipped_gaussian_mean(1.3, 0.0, 1.0) == 1.0);
}

TEST_CASE("clipped gaussian samples stay in range and match the clipped mean") {
  const RewardModel model(ClippedGaussian{0.9, 0.3});
  const CounterStream stream(17);
  double sum = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const double x = model.sample(stream.uniform(i, 0, 0), stream.uniform(i, 0, 1), 1.0);
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 1.0);
    sum += x;
  }
  CHECK(sum / draws == doctest::Approx(model.mean(1.0)).epsilon(0.005));
}

TEST_CASE("counter stream is a pure function of its coordinates") {
  const CounterStream s(42);
  CHECK(s.bits(3, 4, 0) == CounterStream(42).bits(3, 4, 0));
  CHECK(s.bits(3, 4, 0) != s.bits(4, 3, 0));
  CHECK(s.bits(3, 4, 0) != s.bits(3, 4, 1));
  CHECK(derive_run_key(1, 0) != derive_run_key(1, 1));
  CHECK(derive_run_key(1, 0) != derive_run_key(2, 0));
  for (int i = 0; i < 1000; ++i) {
    const double u = s.uniform(i, 0, 0);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("correlated stream shares draws within a group") {
  std::vector<std::vector<RewardModel>> models(2, {RewardModel(ScaledBernoulli{0.5}),
                                                   RewardModel(ScaledBernoulli{0.4})});
  SommabInstance inst(models, 1.0, {{{0, 0}, {1, 0}}});
  const RewardStream independent(9);
  const RewardStream correlated(9, true);
  int differ = 0;
  for (int t = 0; t < 200; ++t) {
    CHECK(correlated.draw(inst, t, inst.flat({0, 0})) == correlated.draw(inst, t, inst.flat({1, 0})));
    differ += independent.draw(inst, t, inst.flat({0, 0})) != independent.draw(inst, t, inst.flat({1, 0}));
  }
  CHECK(differ > 50);
}

TEST_CASE("incremental gaps match a full recompute") {
  std::mt19937_64 gen(5);
  std::vector<std::vector<RewardModel>> models;
  for (int m = 0; m < 4; ++m) {
    auto& row = models.emplace_back();
    for (int k = 0; k < 2 + m; ++k) row.emplace_back(ScaledBernoulli{0.1 + 0.15 * k + 0.01 * m});
  }
  SommabInstance inst(models, 1.0, {{{0, 0}, {1, 1}, {3, 2}}, {{1, 0}, {2, 3}}});
  RunState state(inst);
  const RewardStream stream(11);
  for (int t = 0; t < 500; ++t) {
    pull_group(inst, state, gen() % inst.groups().size(), stream);
    for (int m = 0; m < inst.bandits(); ++m) {
      std::vector<double> means;
      for (int k = 0; k < inst.arms(m); ++k) means.push_back(state.mean({m, k}));
      const auto expected = full_gaps(means);
      for (int k = 0; k < inst.arms(m); ++k) REQUIRE(state.gap({m, k}) == expected[k]);
    }
  }
}

TEST_CASE("run state rejects out-of-range rewards") {
  SommabInstance inst(point_masses({{0.9, 0.1}}), 1.0);
  RunState state(inst);
  CHECK_THROWS_AS(state.record(0, 1.5), ContractViolation);
  CHECK_THROWS_AS(state.record(0, -0.1), ContractViolation);
  CHECK_FALSE(state.all_pulled());
  state.record(0, 1.0);
  state.record(1, 0.0);
  CHECK(state.all_pulled());
  CHECK(state.min_reward() == 0.0);
  CHECK(state.max_reward() == 1.0);
}
