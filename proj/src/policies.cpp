#include "sommab/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace sommab {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::GapE: return "gape";
    case PolicyKind::Uniform: return "uniform";
    case PolicyKind::UniformUcbE: return "uniform-ucbe";
    case PolicyKind::Static: return "static";
  }
  return "unknown";
}

std::int64_t initialization_cost(const SommabInstance& instance, const PolicyConfig& config) {
  const auto groups = static_cast<std::int64_t>(instance.groups().size());
  switch (config.kind) {
    case PolicyKind::GapE: return static_cast<std::int64_t>(config.l) * groups;
    case PolicyKind::Uniform:
    case PolicyKind::Static: return groups;
    case PolicyKind::UniformUcbE:
      return static_cast<std::int64_t>(instance.max_arms()) * instance.bandits();
  }
  return groups;
}

void validate(const PolicyConfig& config, const SommabInstance& instance) {
  const auto kind = to_string(config.kind);
  if (config.b != instance.b())
    throw ValidationError(fmt::format("{}: range b={} differs from instance b={}", kind,
                                      config.b, instance.b()));
  if (config.kind == PolicyKind::GapE || config.kind == PolicyKind::UniformUcbE) {
    if (!(config.a > 0.0) || !std::isfinite(config.a))
      throw ValidationError(fmt::format("{}: exploration parameter a={} must be > 0", kind,
                                        config.a));
  }
  if (config.kind == PolicyKind::GapE && config.l < 1)
    throw ValidationError(fmt::format("gape: l={} must be >= 1", config.l));
  if (config.kind == PolicyKind::UniformUcbE) {
    const std::int64_t share = config.n / instance.bandits();
    if (share < instance.max_arms())
      throw ValidationError(fmt::format(
          "uniform-ucbe: per-bandit budget {} cannot pull each of {} arms once", share,
          instance.max_arms()));
    return;
  }
  const std::int64_t cost = initialization_cost(instance, config);
  if (config.n < cost)
    throw ValidationError(fmt::format("{}: horizon n={} below initialization cost {}", kind,
                                      config.n, cost));
}

void Policy::initialize(RunState&, const RewardStream&, const PullObserver&) {}

namespace {

class GapEPolicy final : public Policy {
 public:
  using Policy::Policy;

  void initialize(RunState& state, const RewardStream& stream,
                  const PullObserver& observer) override {
    gape_initialize(instance(), state, config().l, stream, config().n, observer);
  }

  GroupId select(const RunState& state) const override {
    return gape_select(state, instance(), config());
  }
};

class UniformPolicy final : public Policy {
 public:
  using Policy::Policy;

  GroupId select(const RunState& state) const override {
    return uniform_select(state, instance());
  }
};

class UniformUcbEPolicy final : public Policy {
 public:
  using Policy::Policy;

  GroupId select(const RunState& state) const override {
    return uniform_ucbe_select(state, instance(), config().a, config().b, config().n);
  }
};

class StaticPolicy final : public Policy {
 public:
  StaticPolicy(const SommabInstance& instance, const PolicyConfig& config)
      : Policy(instance, config), targets_(static_allocate(instance, config.n)) {}

  GroupId select(const RunState& state) const override {
    const auto counts = state.pull_counts();
    const auto unpulled = std::find(counts.begin(), counts.end(), 0);
    if (unpulled != counts.end())
      return instance().group_index_flat(static_cast<std::size_t>(unpulled - counts.begin()));
    // largest remaining deficit
    std::size_t chosen = 0;
    std::int64_t deficit = std::numeric_limits<std::int64_t>::min();
    std::size_t f = 0;
    for (const auto& row : targets_)
      for (const auto target : row) {
        if (target - counts[f] > deficit) {
          deficit = target - counts[f];
          chosen = f;
        }
        ++f;
      }
    return instance().group_index_flat(chosen);
  }

 private:
  Allocation targets_;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const SommabInstance& instance, const PolicyConfig& config) {
  validate(config, instance);
  switch (config.kind) {
    case PolicyKind::GapE: return std::make_unique<GapEPolicy>(instance, config);
    case PolicyKind::Uniform: return std::make_unique<UniformPolicy>(instance, config);
    case PolicyKind::UniformUcbE: return std::make_unique<UniformUcbEPolicy>(instance, config);
    case PolicyKind::Static: return std::make_unique<StaticPolicy>(instance, config);
  }
  throw ValidationError("unknown policy kind");
}

double gape_index(const RunState& state, const ArmId& arm, double a, double b) {
  const auto pulls = state.pulls(arm);
  if (pulls == 0)
    throw ContractViolation(fmt::format("GapE index of never-pulled arm {}", to_string(arm)));
  return -state.gap(arm) + b * std::sqrt(a / static_cast<double>(pulls));
}

GroupId gape_select(const RunState& state, const SommabInstance& instance,
                    const PolicyConfig& config) {
  const auto counts = state.pull_counts();
  const auto gaps = state.empirical_gaps();
  std::size_t chosen = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < counts.size(); ++f) {
    if (counts[f] == 0)
      throw ContractViolation(
          fmt::format("GapE selection before arm {} was initialized",
                      to_string(instance.arm_at(f))));
    const double index =
        -gaps[f] + config.b * std::sqrt(config.a / static_cast<double>(counts[f]));
    if (index > best) {
      best = index;
      chosen = f;
    }
  }
  return instance.group_index_flat(chosen);
}

void gape_initialize(const SommabInstance& instance, RunState& state, int l,
                     const RewardStream& stream, std::int64_t horizon,
                     const PullObserver& observer) {
  if (l < 1) throw ValidationError(fmt::format("l={} must be >= 1", l));
  const auto groups = instance.groups().size();
  const auto cost = static_cast<std::int64_t>(l) * static_cast<std::int64_t>(groups);
  if (horizon < state.t() + cost)
    throw ValidationError(fmt::format(
        "horizon {} cannot cover {} initialization pulls ({} groups x l={})", horizon, cost,
        groups, l));
  for (GroupId g = 0; g < groups; ++g)
    for (int i = 0; i < l; ++i) {
      pull_group(instance, state, g, stream);
      if (observer) observer(g);
    }
}

GroupId uniform_select(const RunState& state, const SommabInstance& instance) {
  const auto counts = state.pull_counts();
  GroupId chosen = 0;
  std::int64_t fewest = std::numeric_limits<std::int64_t>::max();
  const auto groups = instance.groups();
  for (GroupId g = 0; g < groups.size(); ++g) {
    std::int64_t least = std::numeric_limits<std::int64_t>::max();
    for (const auto& id : groups[g]) least = std::min(least, counts[instance.flat(id)]);
    if (least < fewest) {
      fewest = least;
      chosen = g;
    }
  }
  return chosen;
}

GroupId uniform_ucbe_select(const RunState& state, const SommabInstance& instance, double a,
                            double b, std::int64_t n) {
  const int bandits = instance.bandits();
  const std::int64_t share = std::max<std::int64_t>(n / bandits, 1);
  const int current = static_cast<int>(std::min<std::int64_t>(state.t() / share, bandits - 1));
  const auto counts = state.pull_counts();
  const auto means = state.empirical_means();
  const std::size_t begin = instance.bandit_offset(current);
  const std::size_t end = instance.bandit_offset(current + 1);
  for (std::size_t f = begin; f < end; ++f)
    if (counts[f] == 0) return instance.group_index_flat(f);
  std::size_t chosen = begin;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t f = begin; f < end; ++f) {
    const double index = means[f] + b * std::sqrt(a / static_cast<double>(counts[f]));
    if (index > best) {
      best = index;
      chosen = f;
    }
  }
  return instance.group_index_flat(chosen);
}

Allocation static_allocate(const GapTable& gaps, std::int64_t n) {
  if (n < 0) throw ValidationError("static allocation needs n >= 0");
  double total = 0.0;
  for (const auto& row : gaps.delta)
    for (const double d : row) {
      if (!(d > 0.0)) throw DomainError("static allocation needs strictly positive gaps");
      total += 1.0 / (d * d);
    }

  struct Share {
    double remainder;
    std::size_t bandit;
    std::size_t arm;
  };
  Allocation counts;
  std::vector<Share> shares;
  std::int64_t assigned = 0;
  for (std::size_t m = 0; m < gaps.delta.size(); ++m) {
    auto& row = counts.emplace_back();
    for (std::size_t k = 0; k < gaps.delta[m].size(); ++k) {
      const double d = gaps.delta[m][k];
      const double exact = static_cast<double>(n) * (1.0 / (d * d)) / total;
      const auto whole = static_cast<std::int64_t>(std::floor(exact));
      row.push_back(whole);
      assigned += whole;
      shares.push_back({exact - static_cast<double>(whole), m, k});
    }
  }
  std::stable_sort(shares.begin(), shares.end(),
                   [](const Share& x, const Share& y) { return x.remainder > y.remainder; });
  for (std::size_t i = 0; assigned < n && i < shares.size(); ++i, ++assigned)
    ++counts[shares[i].bandit][shares[i].arm];
  return counts;
}

Allocation static_allocate(const SommabInstance& instance, std::int64_t n) {
  return static_allocate(instance.gaps(), n);
}

Recommendation recommend(const RunState& state) {
  const auto& instance = state.instance();
  Recommendation rec;
  rec.best.reserve(instance.bandits());
  for (int m = 0; m < instance.bandits(); ++m) {
    int best = 0;
    for (int k = 0; k < instance.arms(m); ++k) {
      if (state.pulls({m, k}) == 0)
        throw ContractViolation(
            fmt::format("recommendation with never-pulled arm {}", to_string(ArmId{m, k})));
      if (state.mean({m, k}) > state.mean({m, best})) best = k;
    }
    rec.best.push_back(best);
  }
  return rec;
}

}  // namespace sommab
