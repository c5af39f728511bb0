#include "sommab/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace sommab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

std::string to_string(const ArmId& id) {
  return fmt::format("({},{})", id.bandit, id.arm);
}

double clipped_gaussian_mean(double mean, double stddev, double b) {
  if (stddev == 0.0) return std::clamp(mean, 0.0, b);
  const double lo = (0.0 - mean) / stddev;
  const double hi = (b - mean) / stddev;
  // E[clamp(X,0,b)] = E[X; 0<X<b] + b P(X>=b)
  const double inside = mean * (normal_cdf(hi) - normal_cdf(lo)) +
                        stddev * (normal_pdf(lo) - normal_pdf(hi));
  return inside + b * normal_cdf(-hi);
}

void RewardModel::validate(double b) const {
  std::visit(
      Overloaded{
          [b](const PointMass& m) {
            if (!(m.value >= 0.0 && m.value <= b))
              throw DomainError(fmt::format("point mass {} outside [0, {}]", m.value, b));
          },
          [](const ScaledBernoulli& m) {
            if (!(m.p >= 0.0 && m.p <= 1.0))
              throw DomainError(fmt::format("bernoulli p={} outside [0, 1]", m.p));
          },
          [](const ClippedGaussian& m) {
            if (!std::isfinite(m.mean) || !(m.stddev >= 0.0) || !std::isfinite(m.stddev))
              throw DomainError("clipped gaussian needs finite mean and stddev >= 0");
          },
      },
      kind_);
}

double RewardModel::mean(double b) const {
  return std::visit(
      Overloaded{
          [](const PointMass& m) { return m.value; },
          [b](const ScaledBernoulli& m) { return b * m.p; },
          [b](const ClippedGaussian& m) {
            return clipped_gaussian_mean(m.mean, m.stddev, b);
          },
      },
      kind_);
}

double RewardModel::sample(double u1, double u2, double b) const {
  return std::visit(
      Overloaded{
          [](const PointMass& m) { return m.value; },
          [u1, b](const ScaledBernoulli& m) { return u1 < m.p ? b : 0.0; },
          [u1, u2, b](const ClippedGaussian& m) {
            // Box-Muller; 1 - u1 lies in (0, 1].
            const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
            const double z = radius * std::cos(2.0 * std::numbers::pi * u2);
            return std::clamp(m.mean + m.stddev * z, 0.0, b);
          },
      },
      kind_);
}

std::string RewardModel::describe() const {
  return std::visit(
      Overloaded{
          [](const PointMass& m) { return fmt::format("point({})", m.value); },
          [](const ScaledBernoulli& m) { return fmt::format("bernoulli({})", m.p); },
          [](const ClippedGaussian& m) {
            return fmt::format("clipped-gaussian({}, {})", m.mean, m.stddev);
          },
      },
      kind_);
}

SommabInstance::SommabInstance(std::vector<std::vector<RewardModel>> models, double b,
                               std::vector<Group> declared_groups)
    : b_(b) {
  if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("reward range b must be positive");
  if (models.empty()) throw DomainError("instance needs at least one bandit");

  offsets_.push_back(0);
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m].size() < 2)
      throw DomainError(fmt::format("bandit {} has {} arm(s); at least 2 required", m,
                                    models[m].size()));
    max_arms_ = std::max(max_arms_, static_cast<int>(models[m].size()));
    offsets_.push_back(offsets_.back() + models[m].size());
    for (auto& model : models[m]) {
      model.validate(b);
      means_.push_back(model.mean(b));
      models_.push_back(std::move(model));
    }
  }

  constexpr GroupId kUnassigned = std::numeric_limits<GroupId>::max();
  std::vector<GroupId> owner(total_arms(), kUnassigned);
  for (std::size_t g = 0; g < declared_groups.size(); ++g) {
    auto& group = declared_groups[g];
    if (group.empty()) throw DomainError(fmt::format("group {} is empty", g));
    std::sort(group.begin(), group.end());
    for (std::size_t i = 0; i < group.size(); ++i) {
      const ArmId& id = group[i];
      if (!contains(id))
        throw DomainError(fmt::format("group {} names unknown arm {}", g, to_string(id)));
      if (i > 0 && group[i - 1].bandit == id.bandit)
        throw DomainError(fmt::format("group {} holds two arms of bandit {}", g, id.bandit));
      auto& slot = owner[flat(id)];
      if (slot != kUnassigned)
        throw DomainError(fmt::format("arm {} appears in more than one group", to_string(id)));
      slot = g;
    }
  }
  groups_ = std::move(declared_groups);
  for (std::size_t f = 0; f < total_arms(); ++f)
    if (owner[f] == kUnassigned) groups_.push_back({arm_at(f)});
  std::sort(groups_.begin(), groups_.end(),
            [](const Group& x, const Group& y) { return x.front() < y.front(); });

  group_of_flat_.assign(total_arms(), 0);
  for (GroupId g = 0; g < groups_.size(); ++g)
    for (const auto& id : groups_[g]) group_of_flat_[flat(id)] = g;

  gaps_ = true_gaps(*this);
}

int SommabInstance::arms(int bandit) const {
  if (bandit < 0 || bandit >= bandits())
    throw DomainError(fmt::format("bandit {} out of range", bandit));
  return static_cast<int>(offsets_[bandit + 1] - offsets_[bandit]);
}

bool SommabInstance::contains(const ArmId& id) const noexcept {
  return id.bandit >= 0 && id.bandit < bandits() && id.arm >= 0 &&
         static_cast<std::size_t>(id.arm) < offsets_[id.bandit + 1] - offsets_[id.bandit];
}

std::size_t SommabInstance::flat(const ArmId& id) const {
  if (!contains(id)) throw DomainError(fmt::format("invalid arm {}", to_string(id)));
  return offsets_[id.bandit] + static_cast<std::size_t>(id.arm);
}

ArmId SommabInstance::arm_at(std::size_t flat_index) const {
  if (flat_index >= total_arms())
    throw DomainError(fmt::format("flat arm index {} out of range", flat_index));
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat_index);
  const auto bandit = static_cast<int>(it - offsets_.begin()) - 1;
  return {bandit, static_cast<int>(flat_index - offsets_[bandit])};
}

std::optional<GroupId> SommabInstance::find_group(std::span<const ArmId> members) const {
  if (members.empty() || !contains(members.front())) return std::nullopt;
  const GroupId g = group_index(members.front());
  Group sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted != groups_[g]) return std::nullopt;
  return g;
}

const Group& group_of(const SommabInstance& instance, const ArmId& arm) {
  return instance.groups()[instance.group_index(arm)];
}

GapTable true_gaps(const SommabInstance& instance) {
  GapTable table;
  table.delta_min = std::numeric_limits<double>::infinity();
  for (int m = 0; m < instance.bandits(); ++m) {
    const int k_count = instance.arms(m);
    if (k_count < 2) throw DomainError(fmt::format("bandit {} has fewer than 2 arms", m));
    int best = 0;
    for (int k = 1; k < k_count; ++k)
      if (instance.mean({m, k}) > instance.mean({m, best})) best = k;
    double second = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < k_count; ++k) {
      if (k == best) continue;
      const double mu = instance.mean({m, k});
      if (mu == instance.mean({m, best}))
        throw DomainError(fmt::format("bandit {} has no unique best arm (arms {} and {})", m,
                                      best, k));
      second = std::max(second, mu);
    }
    const double best_mean = instance.mean({m, best});
    std::vector<double> row(k_count);
    for (int k = 0; k < k_count; ++k)
      row[k] = k == best ? best_mean - second : best_mean - instance.mean({m, k});
    table.delta_min = std::min(table.delta_min, best_mean - second);
    table.delta.push_back(std::move(row));
    table.best_arm.push_back(best);
    table.best_mean.push_back(best_mean);
  }
  return table;
}

int order_of(std::span<const Group> groups) {
  std::size_t order = std::numeric_limits<std::size_t>::max();
  for (const auto& g : groups) order = std::min(order, g.size());
  return groups.empty() ? 0 : static_cast<int>(order);
}

int order_of(const SommabInstance& instance) { return order_of(instance.groups()); }

RunState::RunState(const SommabInstance& instance)
    : instance_(&instance),
      unpulled_(instance.total_arms()),
      pulls_(instance.total_arms(), 0),
      sums_(instance.total_arms(), 0.0),
      means_(instance.total_arms(), 0.0),
      gaps_(instance.total_arms(), 0.0),
      min_reward_(std::numeric_limits<double>::infinity()),
      max_reward_(-std::numeric_limits<double>::infinity()) {}

void RunState::record(std::size_t flat_index, double reward) {
  if (!(reward >= 0.0 && reward <= instance_->b()))
    throw ContractViolation(fmt::format("reward {} outside [0, {}]", reward, instance_->b()));
  if (pulls_[flat_index] == 0) --unpulled_;
  ++pulls_[flat_index];
  ++total_pulls_;
  sums_[flat_index] += reward;
  means_[flat_index] = sums_[flat_index] / static_cast<double>(pulls_[flat_index]);
  min_reward_ = std::min(min_reward_, reward);
  max_reward_ = std::max(max_reward_, reward);
}

void RunState::refresh_gaps(int bandit) {
  const std::size_t begin = instance_->bandit_offset(bandit);
  const std::size_t end = instance_->bandit_offset(bandit + 1);
  // best and runner-up, lowest index wins ties
  std::size_t best = begin;
  for (std::size_t f = begin + 1; f < end; ++f)
    if (means_[f] > means_[best]) best = f;
  std::size_t second = best == begin ? begin + 1 : begin;
  for (std::size_t f = begin; f < end; ++f)
    if (f != best && means_[f] > means_[second]) second = f;
  for (std::size_t f = begin; f < end; ++f) {
    const double rival = f == best ? means_[second] : means_[best];
    gaps_[f] = std::abs(rival - means_[f]);
  }
}

void RunState::refresh_all_gaps() {
  for (int m = 0; m < instance_->bandits(); ++m) refresh_gaps(m);
}

double RewardStream::draw(const SommabInstance& instance, std::int64_t round,
                          std::size_t flat_index) const {
  std::size_t key_arm = flat_index;
  if (correlated_)
    key_arm = instance.flat(instance.groups()[instance.group_index_flat(flat_index)].front());
  const auto r = static_cast<std::uint64_t>(round);
  const double u1 = counters_.uniform(r, key_arm, 0);
  const double u2 = counters_.uniform(r, key_arm, 1);
  return instance.model(instance.arm_at(flat_index)).sample(u1, u2, instance.b());
}

std::vector<Reward> pull_group(const SommabInstance& instance, RunState& state, GroupId group,
                               const RewardStream& stream) {
  if (group >= instance.groups().size())
    throw DomainError(fmt::format("group index {} out of range", group));
  const Group& members = instance.groups()[group];
  std::vector<Reward> rewards;
  rewards.reserve(members.size());
  for (const auto& id : members) {
    const std::size_t f = instance.flat(id);
    const double x = stream.draw(instance, state.t(), f);
    state.record(f, x);
    rewards.push_back({id, x});
  }
  // members belong to distinct bandits
  for (const auto& id : members) state.refresh_gaps(id.bandit);
  state.advance();
  return rewards;
}

std::vector<Reward> pull_group(const SommabInstance& instance, RunState& state,
                               std::span<const ArmId> group, const RewardStream& stream) {
  const auto g = instance.find_group(group);
  if (!g) throw DomainError("pulled set is not an evaluation group of the instance");
  return pull_group(instance, state, *g, stream);
}

}  // namespace sommab
