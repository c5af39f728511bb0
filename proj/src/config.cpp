#include "sommab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

namespace sommab {

using nlohmann::json;

namespace {

std::string at_key(const std::string& path, std::string_view key) {
  return fmt::format("{}/{}", path, key);
}

std::string at_index(const std::string& path, std::size_t i) {
  return fmt::format("{}/{}", path, i);
}

const json& object(const json& node, const std::string& path) {
  if (!node.is_object()) throw ConfigError(path.empty() ? "/" : path, "expected an object");
  return node;
}

const json& array(const json& node, const std::string& path) {
  if (!node.is_array()) throw ConfigError(path, "expected an array");
  return node;
}

void only_keys(const json& node, std::initializer_list<std::string_view> allowed,
               const std::string& path) {
  for (const auto& [key, value] : node.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(at_key(path, key), "unknown field");
}

const json& require(const json& node, std::string_view key, const std::string& path) {
  const auto it = node.find(std::string(key));
  if (it == node.end()) throw ConfigError(at_key(path, key), "required field missing");
  return *it;
}

double number(const json& node, const std::string& path) {
  if (!node.is_number()) throw ConfigError(path, "expected a number");
  const double x = node.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "expected a finite number");
  return x;
}

std::int64_t integer(const json& node, const std::string& path) {
  if (!node.is_number_integer()) throw ConfigError(path, "expected an integer");
  return node.get<std::int64_t>();
}

std::uint64_t unsigned_integer(const json& node, const std::string& path) {
  if (node.is_number_unsigned()) return node.get<std::uint64_t>();
  if (node.is_number_integer() && node.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(node.get<std::int64_t>());
  throw ConfigError(path, "expected a non-negative integer");
}

bool boolean(const json& node, const std::string& path) {
  if (!node.is_boolean()) throw ConfigError(path, "expected true or false");
  return node.get<bool>();
}

std::string text(const json& node, const std::string& path) {
  if (!node.is_string()) throw ConfigError(path, "expected a string");
  return node.get<std::string>();
}

double positive_b(const json& node, const std::string& path) {
  const double b = number(node, path);
  if (!(b > 0.0)) throw ConfigError(path, "reward range b must be > 0");
  return b;
}

SommabInstance parse_instance(const json& node, const std::string& path) {
  object(node, path);
  only_keys(node, {"b", "bandits", "groups"}, path);
  const double b = positive_b(require(node, "b", path), at_key(path, "b"));

  const auto bandits_path = at_key(path, "bandits");
  const auto& bandits = array(require(node, "bandits", path), bandits_path);
  std::vector<std::vector<RewardModel>> models;
  for (std::size_t m = 0; m < bandits.size(); ++m) {
    const auto arm_path = at_index(bandits_path, m);
    const auto& arms = array(bandits[m], arm_path);
    auto& row = models.emplace_back();
    for (std::size_t k = 0; k < arms.size(); ++k) {
      const auto model_path = at_index(arm_path, k);
      row.push_back(parse_reward_model(arms[k], model_path));
      try {
        row.back().validate(b);
      } catch (const DomainError& e) {
        throw ConfigError(model_path, e.what());
      }
    }
  }

  std::vector<Group> groups;
  if (const auto it = node.find("groups"); it != node.end()) {
    const auto groups_path = at_key(path, "groups");
    array(*it, groups_path);
    for (std::size_t g = 0; g < it->size(); ++g) {
      const auto group_path = at_index(groups_path, g);
      const auto& members = array((*it)[g], group_path);
      auto& group = groups.emplace_back();
      for (std::size_t i = 0; i < members.size(); ++i) {
        const auto member_path = at_index(group_path, i);
        const auto& pair = array(members[i], member_path);
        if (pair.size() != 2) throw ConfigError(member_path, "expected [bandit, arm]");
        group.push_back({static_cast<int>(integer(pair[0], at_index(member_path, 0))),
                         static_cast<int>(integer(pair[1], at_index(member_path, 1)))});
      }
    }
  }
  try {
    return SommabInstance(std::move(models), b, std::move(groups));
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
}

DonorSet parse_donors(const json& node, const std::vector<std::string>& entities,
                      const std::string& path) {
  array(node, path);
  DonorSet set;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const auto name = text(node[i], at_index(path, i));
    const auto it = std::find(entities.begin(), entities.end(), name);
    if (it == entities.end())
      throw ConfigError(at_index(path, i), fmt::format("unknown entity '{}'", name));
    set.push_back(static_cast<int>(it - entities.begin()));
  }
  std::sort(set.begin(), set.end());
  return set;
}

SsnlProblem parse_ssnl(const json& node, const std::string& path) {
  object(node, path);
  only_keys(node, {"b", "entities", "candidates", "rewards", "fallback"}, path);
  SsnlProblem problem;
  problem.b = positive_b(require(node, "b", path), at_key(path, "b"));

  const auto entities_path = at_key(path, "entities");
  const auto& entities = array(require(node, "entities", path), entities_path);
  for (std::size_t i = 0; i < entities.size(); ++i)
    problem.entities.push_back(text(entities[i], at_index(entities_path, i)));
  if (problem.entities.empty()) throw ConfigError(entities_path, "at least one entity required");
  problem.candidates.resize(problem.entities.size());

  const auto cand_path = at_key(path, "candidates");
  const auto& candidates = object(require(node, "candidates", path), cand_path);
  for (const auto& [name, lists] : candidates.items()) {
    const auto entity_path = at_key(cand_path, name);
    const auto it = std::find(problem.entities.begin(), problem.entities.end(), name);
    if (it == problem.entities.end())
      throw ConfigError(entity_path, fmt::format("unknown entity '{}'", name));
    const auto e = static_cast<std::size_t>(it - problem.entities.begin());
    array(lists, entity_path);
    for (std::size_t i = 0; i < lists.size(); ++i)
      problem.candidates[e].push_back(
          parse_donors(lists[i], problem.entities, at_index(entity_path, i)));
  }

  if (const auto it = node.find("rewards"); it != node.end()) {
    const auto rewards_path = at_key(path, "rewards");
    array(*it, rewards_path);
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto entry_path = at_index(rewards_path, i);
      const auto& entry = object((*it)[i], entry_path);
      only_keys(entry, {"entity", "donors", "model"}, entry_path);
      const auto name = text(require(entry, "entity", entry_path), at_key(entry_path, "entity"));
      const auto e = std::find(problem.entities.begin(), problem.entities.end(), name);
      if (e == problem.entities.end())
        throw ConfigError(at_key(entry_path, "entity"), fmt::format("unknown entity '{}'", name));
      auto donors = parse_donors(require(entry, "donors", entry_path), problem.entities,
                                 at_key(entry_path, "donors"));
      auto model = parse_reward_model(require(entry, "model", entry_path),
                                      at_key(entry_path, "model"));
      const auto key = std::make_pair(static_cast<int>(e - problem.entities.begin()), donors);
      if (!problem.rewards.emplace(key, model).second)
        throw ConfigError(entry_path, "duplicate reward entry");
    }
  }
  if (const auto it = node.find("fallback"); it != node.end())
    problem.fallback = parse_reward_model(*it, at_key(path, "fallback"));

  try {
    problem.validate();
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
  return problem;
}

PolicySpec parse_policy(const json& node, const std::string& path) {
  object(node, path);
  only_keys(node, {"kind", "a", "l", "label"}, path);
  PolicySpec spec;
  const auto kind_path = at_key(path, "kind");
  const auto kind = text(require(node, "kind", path), kind_path);
  if (kind == "gape") spec.kind = PolicyKind::GapE;
  else if (kind == "uniform") spec.kind = PolicyKind::Uniform;
  else if (kind == "uniform-ucbe") spec.kind = PolicyKind::UniformUcbE;
  else if (kind == "static") spec.kind = PolicyKind::Static;
  else throw ConfigError(kind_path, fmt::format("unknown policy kind '{}'", kind));

  if (const auto it = node.find("a"); it != node.end()) {
    const auto a_path = at_key(path, "a");
    if (it->is_string()) {
      const auto rule = it->get<std::string>();
      if (rule == "theorem-cap") spec.a = ExplorationRule::theorem_cap();
      else if (rule == "proposition-cap") spec.a = ExplorationRule::proposition_cap();
      else throw ConfigError(a_path, "expected a number, \"theorem-cap\" or \"proposition-cap\"");
    } else {
      const double a = number(*it, a_path);
      if (!(a > 0.0)) throw ConfigError(a_path, "exploration parameter must be > 0");
      spec.a = ExplorationRule::fixed(a);
    }
  } else if (spec.kind == PolicyKind::GapE) {
    spec.a = ExplorationRule::theorem_cap();
  }
  if (const auto it = node.find("l"); it != node.end()) {
    const auto l = integer(*it, at_key(path, "l"));
    if (l < 1 || l > std::numeric_limits<int>::max())
      throw ConfigError(at_key(path, "l"), "l must be >= 1");
    spec.l = static_cast<int>(l);
  }
  if (const auto it = node.find("label"); it != node.end())
    spec.label = text(*it, at_key(path, "label"));
  return spec;
}

void parse_experiment(const json& node, const std::string& path, ExperimentConfig& out) {
  object(node, path);
  only_keys(node, {"horizons", "runs", "seed", "diagnostics", "workers", "correlatedRewards"},
            path);
  const auto horizons_path = at_key(path, "horizons");
  const auto& horizons = array(require(node, "horizons", path), horizons_path);
  if (horizons.empty()) throw ConfigError(horizons_path, "at least one horizon required");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    const auto n = integer(horizons[i], at_index(horizons_path, i));
    if (n < 1) throw ConfigError(at_index(horizons_path, i), "horizon must be >= 1");
    out.horizons.push_back(n);
  }
  if (const auto it = node.find("runs"); it != node.end()) {
    out.runs = integer(*it, at_key(path, "runs"));
    if (out.runs < 1) throw ConfigError(at_key(path, "runs"), "runs must be >= 1");
  }
  if (const auto it = node.find("seed"); it != node.end())
    out.base_seed = unsigned_integer(*it, at_key(path, "seed"));
  if (const auto it = node.find("workers"); it != node.end()) {
    const auto w = integer(*it, at_key(path, "workers"));
    if (w < 1 || w > 4096) throw ConfigError(at_key(path, "workers"), "workers must be in [1, 4096]");
    out.workers = static_cast<int>(w);
  }
  if (const auto it = node.find("correlatedRewards"); it != node.end())
    out.correlated_rewards = boolean(*it, at_key(path, "correlatedRewards"));
  if (const auto it = node.find("diagnostics"); it != node.end()) {
    const auto diag_path = at_key(path, "diagnostics");
    object(*it, diag_path);
    only_keys(*it, {"eventE", "induction", "terminal"}, diag_path);
    if (const auto f = it->find("eventE"); f != it->end())
      out.diagnostics.event_e = boolean(*f, at_key(diag_path, "eventE"));
    if (const auto f = it->find("induction"); f != it->end())
      out.diagnostics.induction = boolean(*f, at_key(diag_path, "induction"));
    if (const auto f = it->find("terminal"); f != it->end())
      out.diagnostics.terminal = boolean(*f, at_key(diag_path, "terminal"));
  }
}

}  // namespace

RewardModel parse_reward_model(const json& node, const std::string& path) {
  object(node, path);
  const auto kind = text(require(node, "kind", path), at_key(path, "kind"));
  if (kind == "point") {
    only_keys(node, {"kind", "value"}, path);
    return RewardModel(PointMass{number(require(node, "value", path), at_key(path, "value"))});
  }
  if (kind == "bernoulli") {
    only_keys(node, {"kind", "p"}, path);
    const double p = number(require(node, "p", path), at_key(path, "p"));
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(at_key(path, "p"), "p must lie in [0, 1]");
    return RewardModel(ScaledBernoulli{p});
  }
  if (kind == "clipped-gaussian") {
    only_keys(node, {"kind", "mean", "stddev"}, path);
    const double sd = number(require(node, "stddev", path), at_key(path, "stddev"));
    if (!(sd >= 0.0)) throw ConfigError(at_key(path, "stddev"), "stddev must be >= 0");
    return RewardModel(ClippedGaussian{number(require(node, "mean", path), at_key(path, "mean")), sd});
  }
  throw ConfigError(at_key(path, "kind"), fmt::format("unknown reward model '{}'", kind));
}

json to_json(const RewardModel& model) {
  if (const auto* p = std::get_if<PointMass>(&model.kind()))
    return {{"kind", "point"}, {"value", p->value}};
  if (const auto* p = std::get_if<ScaledBernoulli>(&model.kind()))
    return {{"kind", "bernoulli"}, {"p", p->p}};
  const auto& g = std::get<ClippedGaussian>(model.kind());
  return {{"kind", "clipped-gaussian"}, {"mean", g.mean}, {"stddev", g.stddev}};
}

json instance_to_json(const SommabInstance& instance) {
  json bandits = json::array();
  for (int m = 0; m < instance.bandits(); ++m) {
    json arms = json::array();
    for (int k = 0; k < instance.arms(m); ++k) arms.push_back(to_json(instance.model({m, k})));
    bandits.push_back(std::move(arms));
  }
  json groups = json::array();
  for (const auto& group : instance.groups()) {
    if (group.size() < 2) continue;
    json members = json::array();
    for (const auto& id : group) members.push_back({id.bandit, id.arm});
    groups.push_back(std::move(members));
  }
  return {{"b", instance.b()}, {"bandits", std::move(bandits)}, {"groups", std::move(groups)}};
}

std::string canonical_hash(const json& document) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : document.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

RunConfig parse_config(const json& document) {
  object(document, "");
  only_keys(document, {"instance", "ssnl", "policies", "experiment", "output"}, "");
  const bool has_instance = document.contains("instance");
  const bool has_ssnl = document.contains("ssnl");
  if (has_instance == has_ssnl)
    throw ConfigError("/", "exactly one of 'instance' and 'ssnl' must be present");

  RunConfig config;
  config.hash = canonical_hash(document);
  if (has_instance) config.instance = parse_instance(document["instance"], "/instance");
  else config.ssnl = parse_ssnl(document["ssnl"], "/ssnl");

  if (const auto it = document.find("policies"); it != document.end()) {
    array(*it, "/policies");
    for (std::size_t i = 0; i < it->size(); ++i)
      config.experiment.policies.push_back(parse_policy((*it)[i], at_index("/policies", i)));
  }
  if (const auto it = document.find("experiment"); it != document.end())
    parse_experiment(*it, "/experiment", config.experiment);
  if (const auto it = document.find("output"); it != document.end()) {
    object(*it, "/output");
    only_keys(*it, {"directory"}, "/output");
    if (const auto d = it->find("directory"); d != it->end())
      config.output_directory = text(*d, "/output/directory");
  }
  return config;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str(), nullptr, true, false);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, fmt::format("parse error at byte {}: {}", e.byte, e.what()));
  }
}

RunConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

}  // namespace sommab
