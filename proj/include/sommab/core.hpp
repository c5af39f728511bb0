#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sommab/errors.hpp"
#include "sommab/rng.hpp"

namespace sommab {

/// A (bandit, arm) pair.
struct ArmId {
  int bandit = 0;
  int arm = 0;

  friend constexpr auto operator<=>(const ArmId&, const ArmId&) = default;
};

std::string to_string(const ArmId& id);

struct PointMass {
  double value = 0.0;
};

/// Emits b with probability p, else 0.
struct ScaledBernoulli {
  double p = 0.5;
};

/// Normal(mean, stddev) clamped to [0, b].
struct ClippedGaussian {
  double mean = 0.5;
  double stddev = 0.1;
};

/// Mean of Normal(mean, stddev) after clamping to [0, b].
double clipped_gaussian_mean(double mean, double stddev, double b);

/// Bounded reward distribution of one arm.
class RewardModel {
 public:
  using Kind = std::variant<PointMass, ScaledBernoulli, ClippedGaussian>;

  RewardModel() = default;
  RewardModel(Kind kind) : kind_(kind) {}  // NOLINT(google-explicit-constructor)

  const Kind& kind() const noexcept { return kind_; }

  /// Throws DomainError if the parameters cannot produce samples in [0, b].
  void validate(double b) const;

  /// Exact mean of the emitted (post-clipping) samples.
  double mean(double b) const;

  /// Transforms two independent uniforms in [0,1) into a sample in [0, b].
  double sample(double u1, double u2, double b) const;

  std::string describe() const;

 private:
  Kind kind_ = PointMass{0.0};
};

using Group = std::vector<ArmId>;
using GroupId = std::size_t;

struct GapTable {
  std::vector<std::vector<double>> delta;
  std::vector<int> best_arm;
  std::vector<double> best_mean;
  double delta_min = 0.0;
};

/// A semi-overlapping multi-bandit problem. Immutable once built.
///
/// Arms are addressed either by ArmId or by a flat index that enumerates
/// bandits in order and arms within each bandit. Every arm belongs to
/// exactly one maximal evaluation group; arms not listed in any declared
/// group form implicit singletons. Groups are stored sorted by member and
/// ordered by their smallest member.
class SommabInstance {
 public:
  SommabInstance(std::vector<std::vector<RewardModel>> models, double b,
                 std::vector<Group> declared_groups = {});

  int bandits() const noexcept { return static_cast<int>(offsets_.size()) - 1; }
  int arms(int bandit) const;
  int max_arms() const noexcept { return max_arms_; }
  std::size_t total_arms() const noexcept { return offsets_.back(); }
  double b() const noexcept { return b_; }

  bool contains(const ArmId& id) const noexcept;
  std::size_t flat(const ArmId& id) const;
  ArmId arm_at(std::size_t flat_index) const;
  std::size_t bandit_offset(int bandit) const { return offsets_.at(bandit); }

  const RewardModel& model(const ArmId& id) const { return models_[flat(id)]; }
  double mean(const ArmId& id) const { return means_[flat(id)]; }
  std::span<const double> means() const noexcept { return means_; }

  std::span<const Group> groups() const noexcept { return groups_; }
  GroupId group_index(const ArmId& id) const { return group_of_flat_[flat(id)]; }
  GroupId group_index_flat(std::size_t flat_index) const {
    return group_of_flat_[flat_index];
  }
  std::optional<GroupId> find_group(std::span<const ArmId> members) const;

  const GapTable& gaps() const noexcept { return gaps_; }

 private:
  double b_;
  std::vector<std::size_t> offsets_;
  std::vector<RewardModel> models_;
  std::vector<double> means_;
  std::vector<Group> groups_;
  std::vector<GroupId> group_of_flat_;
  GapTable gaps_;
  int max_arms_ = 0;
};

/// Unique maximal evaluation group containing `arm`.
const Group& group_of(const SommabInstance& instance, const ArmId& arm);

/// Gaps from the declared means. Throws DomainError on a tied best arm or
/// a bandit with fewer than two arms.
GapTable true_gaps(const SommabInstance& instance);

/// Smallest maximal group size.
int order_of(const SommabInstance& instance);

/// Smallest group size of an arbitrary partition.
int order_of(std::span<const Group> groups);

/// Per-run statistics: pull counts, reward sums, empirical means and gaps.
/// Arms that were never pulled report an empirical mean of 0.
class RunState {
 public:
  explicit RunState(const SommabInstance& instance);

  const SommabInstance& instance() const noexcept { return *instance_; }

  std::int64_t t() const noexcept { return t_; }
  std::int64_t pulls(const ArmId& id) const { return pulls_[instance_->flat(id)]; }
  double mean(const ArmId& id) const { return means_[instance_->flat(id)]; }
  double gap(const ArmId& id) const { return gaps_[instance_->flat(id)]; }
  double sum(const ArmId& id) const { return sums_[instance_->flat(id)]; }

  std::span<const std::int64_t> pull_counts() const noexcept { return pulls_; }
  std::span<const double> empirical_means() const noexcept { return means_; }
  std::span<const double> empirical_gaps() const noexcept { return gaps_; }
  std::span<const double> sums() const noexcept { return sums_; }

  std::int64_t total_pulls() const noexcept { return total_pulls_; }
  bool all_pulled() const noexcept { return unpulled_ == 0; }

  /// Smallest and largest reward observed so far.
  double min_reward() const noexcept { return min_reward_; }
  double max_reward() const noexcept { return max_reward_; }

  /// Adds one observation to an arm. Does not touch gaps or t.
  void record(std::size_t flat_index, double reward);

  /// Recomputes empirical gaps of one bandit from its empirical means.
  void refresh_gaps(int bandit);
  void refresh_all_gaps();

  void advance() noexcept { ++t_; }

 private:
  const SommabInstance* instance_;
  std::int64_t t_ = 0;
  std::int64_t total_pulls_ = 0;
  std::size_t unpulled_;
  std::vector<std::int64_t> pulls_;
  std::vector<double> sums_;
  std::vector<double> means_;
  std::vector<double> gaps_;
  double min_reward_;
  double max_reward_;
};

/// Per-run reward source. Member rewards of one group pull are drawn
/// independently from counters keyed by (round, arm). The correlated mode
/// keys every member of a group by the group's first member instead, so
/// members with equal models receive equal rewards.
class RewardStream {
 public:
  explicit RewardStream(std::uint64_t key, bool correlated = false)
      : counters_(key), correlated_(correlated) {}

  double draw(const SommabInstance& instance, std::int64_t round,
              std::size_t flat_index) const;

  bool correlated() const noexcept { return correlated_; }

 private:
  CounterStream counters_;
  bool correlated_;
};

struct Reward {
  ArmId arm;
  double value = 0.0;
};

/// Called after each group pull with the pulled group.
using PullObserver = std::function<void(GroupId)>;

/// One budget unit: every member of the group is sampled once, statistics
/// and the gaps of touched bandits are refreshed, and t advances by one.
std::vector<Reward> pull_group(const SommabInstance& instance, RunState& state,
                               GroupId group, const RewardStream& stream);

/// Same, addressed by member set. Throws DomainError for a set that is not
/// a maximal group of the instance.
std::vector<Reward> pull_group(const SommabInstance& instance, RunState& state,
                               std::span<const ArmId> group,
                               const RewardStream& stream);

}  // namespace sommab
