#include "sommab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "sommab/analysis.hpp"
#include "sommab/config.hpp"
#include "sommab/errors.hpp"
#include "sommab/harness.hpp"
#include "sommab/ssnl.hpp"

namespace sommab::cli {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> provenance(const std::string& hash, std::uint64_t seed) {
  return {fmt::format("sommab {}", kVersion), fmt::format("config {}", hash),
          fmt::format("seed {}", seed)};
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  return file;
}

std::string fmt_bound(const BoundValue& v) {
  if (std::isnan(v.value)) return "n/a";
  return fmt::format("{:.5g}  ({:.17g}, log {:.6f})", v.value, v.value, v.log_value);
}

// Instance of the config: explicit, or compiled from the closed SSNL problem.
struct Built {
  SommabInstance instance;
  std::optional<CompiledSsnl> ssnl;
};

Built build(const RunConfig& config) {
  if (config.instance) return {*config.instance, std::nullopt};
  auto compiled = compile_groups(duality_closure(*config.ssnl));
  auto instance = compiled.instance;
  return {std::move(instance), std::move(compiled)};
}

// ---------------------------------------------------------------- run

struct RunOptions {
  std::string config;
  std::string out_dir;
};

int cmd_run(const RunOptions& opt, std::ostream& out) {
  const RunConfig config = load_config(opt.config);
  if (config.experiment.horizons.empty())
    throw ConfigError("/experiment", "required field missing");
  if (config.experiment.policies.empty())
    throw ConfigError("/policies", "at least one policy required");
  const Built built = build(config);

  const MetricsReport report = run_experiment(built.instance, config.experiment);
  const fs::path dir = opt.out_dir.empty() ? fs::path(config.output_directory) : fs::path(opt.out_dir);
  fs::create_directories(dir);
  const auto header = provenance(config.hash, config.experiment.base_seed);

  {
    auto file = open_output(dir / "metrics.csv");
    write_metrics_csv(file, report, header);
  }
  if (config.experiment.diagnostics.any()) {
    auto file = open_output(dir / "diagnostics.csv");
    write_diagnostics_csv(file, report, header);
  }
  if (config.experiment.horizons.size() >= 2) {
    auto file = open_output(dir / "curves.csv");
    write_curves_csv(file, error_curves(built.instance, report), header);
  }

  out << fmt::format("{:<16} {:>8} {:>10} {:>10} {:>10} {:>12}\n", "policy", "n", "lHat", "eHat",
                     "rHat", "bound");
  for (const auto& cell : report.cells)
    out << fmt::format("{:<16} {:>8} {:>10.4f} {:>10.4f} {:>10.5f} {:>12.6g}\n", cell.policy,
                       cell.n, cell.l_hat, cell.e_hat, cell.r_hat, cell.bound);

  if (built.ssnl) {
    // Network of the first policy at its largest horizon.
    const auto& first = config.experiment.policies.front().name();
    const auto n = *std::max_element(config.experiment.horizons.begin(),
                                     config.experiment.horizons.end());
    const auto cell = std::find_if(report.cells.begin(), report.cells.end(),
                                   [&](const CellMetrics& c) { return c.policy == first && c.n == n; });
    const Recommendation vote = majority_vote(*cell);
    std::vector<double> labels;
    for (int e = 0; e < built.instance.bandits(); ++e)
      labels.push_back(cell->mean_final_means[built.instance.flat({e, vote.best[e]})]);
    const auto network = extract_network(*built.ssnl, vote, labels);
    auto dot_header = header;
    dot_header.push_back(fmt::format("majority vote of {} at n={} over {} runs", first, n,
                                     cell->runs));
    auto file = open_output(dir / "network.dot");
    write_dot(file, built.ssnl->problem, network, dot_header);
  }
  out << fmt::format("artifacts written to {}\n", dir.string());
  return kOk;
}

// ---------------------------------------------------------------- bounds

struct BoundsOptions {
  std::string config;
  BoundInputs inputs;
  std::optional<double> a;
  std::optional<double> max_hm;
  std::optional<double> max_hmk;
  std::string out;
};

int cmd_bounds(BoundsOptions opt, std::ostream& out) {
  BoundInputs in = opt.inputs;
  std::string source = "inline";
  if (!opt.config.empty()) {
    const RunConfig config = load_config(opt.config);
    const Built built = build(config);
    const auto cx = complexity(built.instance.gaps(), built.instance.b());
    in.bandits = built.instance.bandits();
    in.arms = built.instance.max_arms();
    in.r = order_of(built.instance);
    in.H = cx.H;
    in.b = built.instance.b();
    in.max_bandit_complexity = cx.max_bandit();
    in.max_arm_complexity = cx.max_arm();
    source = config.hash;
  }
  in.a = opt.a;
  if (opt.max_hm) in.max_bandit_complexity = opt.max_hm;
  if (opt.max_hmk) in.max_arm_complexity = opt.max_hmk;

  const BoundReport r = bound_report(in);
  const auto& k = r.constants;
  out << fmt::format("M={} K={} n={} H={:.6g} l={} r={}\n", in.bandits, in.arms, in.n, in.H, in.l,
                     in.r);
  out << fmt::format("rho={:.12f} c={:.12f} Qc={:.12f}\n", k.rho, k.c, k.qc);
  out << fmt::format("{:<28} {:.6f}\n", "a", r.a);
  out << fmt::format("{:<28} {:.6f}\n", "proposition cap", r.proposition_cap);
  out << fmt::format("{:<28} {}\n", "proposition bound at cap", fmt_bound(r.proposition_bound));
  out << fmt::format("{:<28} {:.6f}\n", "theorem cap", r.theorem_cap);
  out << fmt::format("{:<28} {:.6f}\n", "theorem cap (rn)", r.r_order_cap);
  out << fmt::format("{:<28} {}\n", "theorem bound at a", fmt_bound(r.theorem_bound));
  out << fmt::format("{:<28} {}\n", "theorem bound at cap", fmt_bound(r.theorem_bound_at_cap));
  out << fmt::format("{:<28} {}\n", "theorem bound at cap (rn)", fmt_bound(r.r_order_bound_at_cap));
  out << fmt::format("{:<28} {}\n", "simplified l=1 (59H-50)", fmt_bound(r.simplified_l1));
  out << fmt::format("{:<28} {}\n", "simplified l=152 (41H-36)", fmt_bound(r.simplified_l152));
  out << "\n";
  out << fmt::format("{:<28} {:>18} {:>14} {:>12} {:>14}\n", "strategy", "form", "denominator",
                     "bound", "log bound");
  for (const auto& row : r.table)
    out << fmt::format("{:<28} {:>18} {:>14.6g} {:>12.5g} {:>14.6f}\n", row.strategy, row.form,
                       row.denominator, row.bound.value, row.bound.log_value);

  if (!opt.out.empty()) {
    auto file = open_output(opt.out);
    file << fmt::format("# sommab {}\n# config {}\n# seed none\n", kVersion, source);
    write_exponent_csv(file, r.table);
  }
  return kOk;
}

// ---------------------------------------------------------------- build-ssnl

int cmd_build_ssnl(const std::string& path, bool closure_only, std::ostream& out,
                   std::ostream& err) {
  const RunConfig config = load_config(path);
  if (!config.ssnl) throw ConfigError("/ssnl", "required field missing");
  const SsnlProblem closed = duality_closure(*config.ssnl);

  out << "closed candidates\n";
  for (std::size_t e = 0; e < closed.entities.size(); ++e) {
    out << fmt::format("  {}:", closed.entities[e]);
    for (const auto& set : closed.candidates[e]) out << " " << closed.describe(set);
    out << (closed.candidates[e].empty() ? " (none)\n" : "\n");
  }
  if (const auto bad = duality_violations(closed); !bad.empty()) {
    for (const int e : bad)
      err << fmt::format("error: entity '{}' has no candidate donor set\n", closed.entities[e]);
    return kInvalidInput;
  }

  const SsnlLayout layout = closure_only ? compile_layout(closed) : compile_groups(closed).layout;
  out << "arms per entity\n";
  for (std::size_t e = 0; e < closed.entities.size(); ++e)
    out << fmt::format("  {}: {}\n", closed.entities[e], layout.arms_per_entity[e]);
  out << fmt::format("order r = {}\n", layout.order);
  std::map<std::size_t, int> census;
  std::size_t grouped = 0;
  for (const auto& g : layout.groups) {
    ++census[g.size()];
    grouped += g.size();
  }
  std::size_t arms = 0;
  for (const int k : layout.arms_per_entity) arms += static_cast<std::size_t>(k);
  if (arms > grouped) census[1] += static_cast<int>(arms - grouped);
  out << "group census\n";
  for (const auto& [size, count] : census) out << fmt::format("  size {}: {}\n", size, count);
  return kOk;
}

// ---------------------------------------------------------------- export

int cmd_export(const std::string& path, const std::string& format, const std::string& target,
               std::ostream& out) {
  const RunConfig config = load_config(path);
  const Built built = build(config);
  std::ofstream file;
  if (!target.empty()) file = open_output(target);
  std::ostream& sink = target.empty() ? out : file;

  if (format == "json") {
    sink << nlohmann::json{{"instance", instance_to_json(built.instance)}}.dump(2) << "\n";
    return kOk;
  }
  if (!built.ssnl) throw ValidationError("dot export needs an ssnl config");
  Recommendation best;
  for (const int k : built.instance.gaps().best_arm) best.best.push_back(k);
  const auto network = extract_network(*built.ssnl, best);
  auto header = provenance(config.hash, config.experiment.base_seed);
  header.emplace_back("true best network");
  write_dot(sink, built.ssnl->problem, network, header);
  return kOk;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Best-arm identification for semi-overlapping multi-bandits", "sommab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "Run a Monte Carlo experiment from a config file");
  run->add_option("config", run_opt.config, "JSON config")->required();
  run->add_option("--out", run_opt.out_dir, "Output directory (overrides /output/directory)");

  BoundsOptions bounds_opt;
  auto* bounds = app.add_subcommand("bounds", "Print closed-form error bounds");
  bounds->add_option("--config", bounds_opt.config, "Take M, K, H, r and b from a config");
  bounds->add_option("--M", bounds_opt.inputs.bandits, "Bandits")->check(CLI::PositiveNumber);
  bounds->add_option("--K", bounds_opt.inputs.arms, "Arms per bandit")->check(CLI::Range(2, 1 << 30));
  bounds->add_option("--n", bounds_opt.inputs.n, "Budget")->required();
  bounds->add_option("--H", bounds_opt.inputs.H, "Complexity H");
  bounds->add_option("--l", bounds_opt.inputs.l, "Initialization pulls");
  bounds->add_option("--r", bounds_opt.inputs.r, "Instance order");
  bounds->add_option("--b", bounds_opt.inputs.b, "Reward range");
  bounds->add_option("--a", bounds_opt.a, "Exploration parameter (default: theorem cap)");
  bounds->add_option("--max-hm", bounds_opt.max_hm, "max_m H_m");
  bounds->add_option("--max-hmk", bounds_opt.max_hmk, "max_mk H_mk");
  bounds->add_option("--out", bounds_opt.out, "Write the exponent table as CSV");

  std::string ssnl_path;
  bool closure_only = false;
  auto* ssnl = app.add_subcommand("build-ssnl", "Close and compile an SSNL problem");
  ssnl->add_option("config", ssnl_path, "JSON config with an ssnl section")->required();
  ssnl->add_flag("--closure-only", closure_only, "Skip reward model validation");

  std::string export_path;
  std::string export_format = "json";
  std::string export_out;
  auto* exp = app.add_subcommand("export", "Export the built instance or its best network");
  exp->add_option("config", export_path, "JSON config")->required();
  exp->add_option("--format", export_format, "json or dot")
      ->check(CLI::IsMember({"json", "dot"}));
  exp->add_option("--out", export_out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    if (run->parsed()) return cmd_run(run_opt, out);
    if (bounds->parsed()) return cmd_bounds(bounds_opt, out);
    if (ssnl->parsed()) return cmd_build_ssnl(ssnl_path, closure_only, out, err);
    return cmd_export(export_path, export_format, export_out, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const ContractViolation& e) {
    err << "contract violation: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace sommab::cli
