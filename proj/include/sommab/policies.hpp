#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "sommab/core.hpp"

namespace sommab {

enum class PolicyKind { GapE, Uniform, UniformUcbE, Static };

std::string_view to_string(PolicyKind kind);

/// Concrete parameters of one allocation strategy for one horizon.
struct PolicyConfig {
  PolicyKind kind = PolicyKind::GapE;
  double a = 1.0;  ///< exploration parameter (GapE, Uniform+UCB-E)
  int l = 1;       ///< initialization pulls per arm (GapE)
  double b = 1.0;  ///< reward range, copied from the instance
  std::int64_t n = 0;  ///< horizon in budget units (group pulls)
};

/// Budget spent before the strategy's adaptive phase.
std::int64_t initialization_cost(const SommabInstance& instance, const PolicyConfig& config);

/// Throws ValidationError when the configuration cannot run on `instance`.
void validate(const PolicyConfig& config, const SommabInstance& instance);

struct Recommendation {
  std::vector<int> best;  ///< J_m per bandit

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// Allocation strategy. `initialize` consumes the initialization budget;
/// afterwards `select` is a pure function of the run state.
class Policy {
 public:
  explicit Policy(const SommabInstance& instance, PolicyConfig config)
      : instance_(&instance), config_(config) {}
  virtual ~Policy() = default;

  const PolicyConfig& config() const noexcept { return config_; }
  const SommabInstance& instance() const noexcept { return *instance_; }

  virtual void initialize(RunState& state, const RewardStream& stream,
                          const PullObserver& observer = {});
  virtual GroupId select(const RunState& state) const = 0;

 private:
  const SommabInstance* instance_;
  PolicyConfig config_;
};

std::unique_ptr<Policy> make_policy(const SommabInstance& instance, const PolicyConfig& config);

/// B_mk = -deltaHat_mk + b sqrt(a / T_mk). Throws ContractViolation when T_mk = 0.
double gape_index(const RunState& state, const ArmId& arm, double a, double b);

/// Group of the arm with the largest GapE index.
GroupId gape_select(const RunState& state, const SommabInstance& instance,
                    const PolicyConfig& config);

/// Pulls every maximal group l times, leaving T_mk = l for every arm.
/// Throws ValidationError if the horizon cannot cover it.
void gape_initialize(const SommabInstance& instance, RunState& state, int l,
                     const RewardStream& stream, std::int64_t horizon,
                     const PullObserver& observer = {});

/// Round robin over groups: the group whose least-pulled member is smallest.
GroupId uniform_select(const RunState& state, const SommabInstance& instance);

/// UCB-E run bandit by bandit. Bandit m owns floor(n/M) budget units (the
/// last bandit also gets the remainder); within the current bandit every
/// arm is pulled once, then the arm maximizing muHat + b sqrt(a/T) is chosen.
GroupId uniform_ucbe_select(const RunState& state, const SommabInstance& instance, double a,
                            double b, std::int64_t n);

using Allocation = std::vector<std::vector<std::int64_t>>;

/// Oracle allocation proportional to H_mk, summing to n (largest remainder).
Allocation static_allocate(const GapTable& gaps, std::int64_t n);
Allocation static_allocate(const SommabInstance& instance, std::int64_t n);

/// Per-bandit empirical argmax, lowest index on ties.
Recommendation recommend(const RunState& state);

}  // namespace sommab
