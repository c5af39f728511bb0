#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sommab/analysis.hpp"
#include "sommab/core.hpp"
#include "sommab/policies.hpp"

namespace sommab {

/// Sorted list of entity indices.
using DonorSet = std::vector<int>;

/// Sequential support network learning problem: every entity picks one of
/// its candidate donor sets, and trialing a donor set evaluates all of its
/// participants together.
struct SsnlProblem {
  std::vector<std::string> entities;
  std::vector<std::vector<DonorSet>> candidates;  ///< per entity
  std::map<std::pair<int, DonorSet>, RewardModel> rewards;
  std::optional<RewardModel> fallback;  ///< for arms without an explicit model
  double b = 1.0;

  int index_of(std::string_view name) const;
  std::string describe(const DonorSet& set) const;

  /// Throws DomainError on unknown indices, self-donation or duplicates.
  void validate() const;
};

/// Least fixed point of the role swap: for each candidate S of entity a and
/// each b in S, S \ {b} + {a} becomes a candidate of b. Output lists are
/// sorted and duplicate-free.
SsnlProblem duality_closure(const SsnlProblem& problem);

/// True when every role-swapped sibling is present.
bool is_closed(const SsnlProblem& problem);

/// Entities that own no candidate set.
std::vector<int> duality_violations(const SsnlProblem& problem);

/// Group structure of a closed problem; one bandit per entity, one arm per
/// candidate set, arms keyed by participant set {e} + S.
struct SsnlLayout {
  std::vector<Group> groups;  ///< declared (multi-member) groups
  std::vector<int> arms_per_entity;
  int order = 0;
};

/// Throws DomainError naming the first missing sibling when the problem is
/// not closed, or the entity when it has no candidates.
SsnlLayout compile_layout(const SsnlProblem& closed);

struct CompiledSsnl {
  SsnlProblem problem;
  SsnlLayout layout;
  SommabInstance instance;
};

/// Builds the bandit instance. Arms without an explicit reward model use
/// the fallback; if there is none, throws DomainError.
CompiledSsnl compile_groups(const SsnlProblem& closed);

struct SupportNetwork {
  std::vector<DonorSet> chosen;             ///< per entity
  std::vector<std::pair<int, int>> edges;   ///< (donor, recipient)
  std::vector<double> labels;               ///< per recipient, chosen arm's mean estimate
};

/// Chosen donor set per entity and the donor -> recipient edges it induces.
/// `labels` default to the instance's true means of the chosen arms.
SupportNetwork extract_network(const CompiledSsnl& compiled, const Recommendation& rec,
                               std::optional<std::vector<double>> labels = std::nullopt);

/// DOT digraph, one node per entity and one labelled edge per donor.
/// `header` lines are written as // comments first.
void write_dot(std::ostream& out, const SsnlProblem& problem, const SupportNetwork& network,
               const std::vector<std::string>& header = {});

struct SsnlBound {
  Shape shape;
  int order = 1;
  double H = 0.0;
  BoundValue at_cap;      ///< exact theorem exponent for l
  BoundValue simplified;  ///< 41H - 36 form (NaN when n < 152 MK)
};

/// Theorem bound with K taken as the largest candidate count and r as the
/// instance order.
SsnlBound ssnl_bound(const CompiledSsnl& compiled, std::int64_t n, int l = 152);

}  // namespace sommab
