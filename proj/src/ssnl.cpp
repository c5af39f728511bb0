#include "sommab/ssnl.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <set>

#include <fmt/format.h>

namespace sommab {

int SsnlProblem::index_of(std::string_view name) const {
  const auto it = std::find(entities.begin(), entities.end(), name);
  if (it == entities.end()) throw DomainError(fmt::format("unknown entity '{}'", name));
  return static_cast<int>(it - entities.begin());
}

std::string SsnlProblem::describe(const DonorSet& set) const {
  std::string out = "{";
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i > 0) out += ",";
    out += entities.at(set[i]);
  }
  return out + "}";
}

void SsnlProblem::validate() const {
  const int count = static_cast<int>(entities.size());
  if (count == 0) throw DomainError("ssnl problem has no entities");
  if (candidates.size() != entities.size())
    throw DomainError("candidate lists do not match the entity list");
  std::set<std::string> names(entities.begin(), entities.end());
  if (names.size() != entities.size()) throw DomainError("entity names are not unique");
  for (int e = 0; e < count; ++e) {
    std::set<DonorSet> seen;
    for (const auto& set : candidates[e]) {
      DonorSet sorted = set;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DomainError(fmt::format("candidate of '{}' repeats a member", entities[e]));
      for (const int d : sorted) {
        if (d < 0 || d >= count)
          throw DomainError(fmt::format("candidate of '{}' names entity index {}", entities[e], d));
        if (d == e)
          throw DomainError(fmt::format("'{}' lists itself as a donor", entities[e]));
      }
      if (!seen.insert(sorted).second)
        throw DomainError(fmt::format("'{}' lists candidate {} twice", entities[e],
                                      describe(sorted)));
    }
  }
}

namespace {

DonorSet swap_role(const DonorSet& set, int member, int recipient) {
  DonorSet out;
  out.reserve(set.size());
  for (const int d : set)
    if (d != member) out.push_back(d);
  out.insert(std::upper_bound(out.begin(), out.end(), recipient), recipient);
  return out;
}

DonorSet participants(int entity, const DonorSet& set) {
  DonorSet out = set;
  out.insert(std::upper_bound(out.begin(), out.end(), entity), entity);
  return out;
}

}  // namespace

SsnlProblem duality_closure(const SsnlProblem& problem) {
  problem.validate();
  const std::size_t count = problem.entities.size();
  std::vector<std::set<DonorSet>> closed(count);
  std::deque<std::pair<int, DonorSet>> pending;
  for (std::size_t e = 0; e < count; ++e)
    for (DonorSet set : problem.candidates[e]) {
      std::sort(set.begin(), set.end());
      if (closed[e].insert(set).second) pending.emplace_back(static_cast<int>(e), set);
    }
  while (!pending.empty()) {
    auto [recipient, set] = std::move(pending.front());
    pending.pop_front();
    for (const int member : set) {
      DonorSet sibling = swap_role(set, member, recipient);
      if (closed[member].insert(sibling).second) pending.emplace_back(member, std::move(sibling));
    }
  }

  SsnlProblem out = problem;
  for (std::size_t e = 0; e < count; ++e)
    out.candidates[e].assign(closed[e].begin(), closed[e].end());
  // reward keys are canonical too
  out.rewards.clear();
  for (const auto& [key, model] : problem.rewards) {
    DonorSet sorted = key.second;
    std::sort(sorted.begin(), sorted.end());
    out.rewards.emplace(std::make_pair(key.first, std::move(sorted)), model);
  }
  return out;
}

bool is_closed(const SsnlProblem& problem) {
  std::vector<std::set<DonorSet>> lookup(problem.entities.size());
  for (std::size_t e = 0; e < problem.candidates.size(); ++e)
    for (DonorSet set : problem.candidates[e]) {
      std::sort(set.begin(), set.end());
      lookup[e].insert(std::move(set));
    }
  for (std::size_t e = 0; e < lookup.size(); ++e)
    for (const auto& set : lookup[e])
      for (const int member : set)
        if (!lookup[member].contains(swap_role(set, member, static_cast<int>(e)))) return false;
  return true;
}

std::vector<int> duality_violations(const SsnlProblem& problem) {
  std::vector<int> out;
  for (std::size_t e = 0; e < problem.candidates.size(); ++e)
    if (problem.candidates[e].empty()) out.push_back(static_cast<int>(e));
  return out;
}

SsnlLayout compile_layout(const SsnlProblem& closed) {
  closed.validate();
  if (const auto bad = duality_violations(closed); !bad.empty())
    throw DomainError(fmt::format("entity '{}' has no candidate donor set",
                                  closed.entities[bad.front()]));

  const int count = static_cast<int>(closed.entities.size());
  std::vector<std::map<DonorSet, int>> arm_of(count);
  for (int e = 0; e < count; ++e)
    for (std::size_t k = 0; k < closed.candidates[e].size(); ++k) {
      DonorSet sorted = closed.candidates[e][k];
      std::sort(sorted.begin(), sorted.end());
      arm_of[e].emplace(std::move(sorted), static_cast<int>(k));
    }

  SsnlLayout layout;
  std::map<DonorSet, Group> by_participants;
  for (int e = 0; e < count; ++e) {
    layout.arms_per_entity.push_back(static_cast<int>(closed.candidates[e].size()));
    for (const auto& [set, k] : arm_of[e]) {
      for (const int member : set) {
        const DonorSet sibling = swap_role(set, member, e);
        if (!arm_of[member].contains(sibling))
          throw DomainError(fmt::format(
              "closure incomplete: '{}' lacks candidate {} (role swap of {} for '{}')",
              closed.entities[member], closed.describe(sibling), closed.describe(set),
              closed.entities[e]));
      }
      if (!set.empty()) by_participants[participants(e, set)].push_back({e, k});
    }
  }
  int order = count > 0 ? std::numeric_limits<int>::max() : 0;
  for (int e = 0; e < count; ++e)
    for (const auto& [set, k] : arm_of[e]) order = std::min(order, static_cast<int>(set.size()) + 1);
  for (auto& [key, group] : by_participants) {
    std::sort(group.begin(), group.end());
    layout.groups.push_back(std::move(group));
  }
  layout.order = order;
  return layout;
}

CompiledSsnl compile_groups(const SsnlProblem& closed) {
  SsnlLayout layout = compile_layout(closed);
  std::vector<std::vector<RewardModel>> models(closed.entities.size());
  for (std::size_t e = 0; e < closed.entities.size(); ++e)
    for (const auto& set : closed.candidates[e]) {
      DonorSet sorted = set;
      std::sort(sorted.begin(), sorted.end());
      const auto it = closed.rewards.find({static_cast<int>(e), sorted});
      if (it != closed.rewards.end()) {
        models[e].push_back(it->second);
      } else if (closed.fallback) {
        models[e].push_back(*closed.fallback);
      } else {
        throw DomainError(fmt::format("no reward model for '{}' with donors {} and no fallback",
                                      closed.entities[e], closed.describe(sorted)));
      }
    }
  SommabInstance instance(std::move(models), closed.b, layout.groups);
  return {closed, std::move(layout), std::move(instance)};
}

SupportNetwork extract_network(const CompiledSsnl& compiled, const Recommendation& rec,
                               std::optional<std::vector<double>> labels) {
  const auto& problem = compiled.problem;
  const auto count = problem.entities.size();
  if (rec.best.size() != count)
    throw ContractViolation("recommendation does not cover every entity");
  SupportNetwork net;
  for (std::size_t e = 0; e < count; ++e) {
    const int k = rec.best[e];
    if (k < 0 || static_cast<std::size_t>(k) >= problem.candidates[e].size())
      throw ContractViolation(fmt::format("recommended arm {} of '{}' out of range", k,
                                          problem.entities[e]));
    DonorSet chosen = problem.candidates[e][k];
    std::sort(chosen.begin(), chosen.end());
    for (const int d : chosen) net.edges.emplace_back(d, static_cast<int>(e));
    net.chosen.push_back(std::move(chosen));
    net.labels.push_back(compiled.instance.mean({static_cast<int>(e), k}));
  }
  if (labels) {
    if (labels->size() != count) throw ContractViolation("one label per entity required");
    net.labels = std::move(*labels);
  }
  return net;
}

void write_dot(std::ostream& out, const SsnlProblem& problem, const SupportNetwork& network,
               const std::vector<std::string>& header) {
  for (const auto& line : header) out << "// " << line << '\n';
  out << "digraph support_network {\n";
  for (const auto& name : problem.entities) out << fmt::format("  \"{}\";\n", name);
  for (const auto& [donor, recipient] : network.edges)
    out << fmt::format("  \"{}\" -> \"{}\" [label=\"{:.4f}\"];\n", problem.entities[donor],
                       problem.entities[recipient], network.labels[recipient]);
  out << "}\n";
}

SsnlBound ssnl_bound(const CompiledSsnl& compiled, std::int64_t n, int l) {
  const auto& instance = compiled.instance;
  SsnlBound out;
  out.shape = Shape::uniform(instance.bandits(), instance.max_arms());
  out.order = order_of(instance);
  out.H = complexity(instance.gaps(), instance.b()).H;
  out.at_cap = theorem_bound_at_cap(out.shape, n, out.H, l, out.order);
  if (n >= 152 * out.shape.pairs)
    out.simplified = simplified_bound_l152(out.shape, n, out.H, out.order);
  else
    out.simplified = {std::nan(""), std::nan("")};
  return out;
}

}  // namespace sommab
