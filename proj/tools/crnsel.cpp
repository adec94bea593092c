// Command-line front end: simulate, select, reduce, compare, gen-testnet.
//
// Exit codes: 0 success, 1 unexpected failure, 2 invalid input, 3 integration
// failure, 4 infeasible selection chunk, 5 comparison failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "crnsel/error.hpp"
#include "crnsel/io.hpp"
#include "crnsel/kinetics.hpp"
#include "crnsel/mechanism.hpp"
#include "crnsel/reduction.hpp"
#include "crnsel/selection.hpp"
#include "crnsel/study.hpp"
#include "crnsel/testnet.hpp"

namespace fs = std::filesystem;
using namespace crnsel;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kInvalid = 2, kIntegration = 3, kInfeasible = 4, kCompare = 5 };

struct SimulateArgs {
  std::string mechanism;
  std::string x0;
  std::string schedule;
  std::string conditions;
  std::string label = "run";
  std::optional<double> temperature;
  std::string elements;
  bool exact_euler = false;
  std::string out_dir = ".";
  int jobs = 1;
};

struct SelectArgs {
  std::string mechanism;
  std::string trajectory;
  std::string rates;
  std::string conditions;
  std::string label = "run";
  std::optional<double> temperature;
  bool exact_euler = false;
  SelectionConfig config = SelectionConfig::small_network();
  std::string mode = "relaxed";
  std::string dump_dir;
  std::string out_dir = ".";
  int jobs = 1;
};

struct ReduceArgs {
  std::string mechanism;
  std::vector<std::string> masks;
  std::string out = "reduced.json";
};

struct CompareArgs {
  std::string parent;
  std::string reduced;
  std::string conditions;
  std::string progress_species;
  bool exact_euler = false;
  std::string out_dir = ".";
  int jobs = 1;
};

struct TestNetArgs {
  std::uint64_t seed = 1;
  TestNetOptions options;
  std::string out = "testnet.json";
};

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

Mechanism load_checked(const std::string& path, const std::string& elements) {
  auto mech = load_mechanism(path);
  if (!elements.empty()) {
    const auto table = parse_element_table(read_text_file(elements));
    for (const auto& warning : check_element_balance(mech, table)) std::cerr << "warning: " << warning << "\n";
  }
  return mech;
}

// The single-run flags describe one condition; a conditions file describes many.
std::vector<ConditionSpec> gather_conditions(const std::string& conditions_path, const std::string& label,
                                             std::optional<double> temperature, const std::string& x0,
                                             const std::string& schedule) {
  if (!conditions_path.empty()) return parse_conditions(read_text_file(conditions_path));
  if (x0.empty() || schedule.empty()) {
    throw ValidationError("either --conditions or both --x0 and --schedule are required");
  }
  ConditionSpec spec;
  spec.condition = Condition{label, temperature, std::nullopt, std::nullopt};
  spec.initial = parse_initial_state(x0);
  spec.schedule = parse_schedule(schedule);
  return {spec};
}

std::vector<SimulationResult> simulate_all(const Mechanism& mech, const std::vector<ConditionSpec>& specs,
                                           bool exact_euler, int jobs) {
  SimulateOptions opts;
  opts.exact_euler = exact_euler;
  std::vector<std::optional<SimulationResult>> slots(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  const auto n = static_cast<long>(specs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
  for (long c = 0; c < n; ++c) {
    const auto& spec = specs[static_cast<std::size_t>(c)];
    try {
      slots[static_cast<std::size_t>(c)] =
          simulate(mech, spec.initial_state(mech), spec.condition, spec.schedule.sample_times(), opts);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  std::vector<SimulationResult> out;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    if (errors[c]) std::rethrow_exception(errors[c]);
    out.push_back(std::move(*slots[c]));
  }
  return out;
}

int run_simulate(const SimulateArgs& a) {
  const auto mech = load_checked(a.mechanism, a.elements);
  const auto specs = gather_conditions(a.conditions, a.label, a.temperature, a.x0, a.schedule);
  const auto results = simulate_all(mech, specs, a.exact_euler, a.jobs);
  ensure_dir(a.out_dir);
  for (std::size_t c = 0; c < specs.size(); ++c) {
    const auto& label = specs[c].condition.label;
    const auto& traj = results[c].trajectory;
    write_text_file(in_dir(a.out_dir, label + "_trajectory.csv"), format_trajectory_csv(traj, mech));
    write_text_file(in_dir(a.out_dir, label + "_rates.csv"), format_rates_csv(traj, mech));
    std::cout << fmt::format("{}: {} species, {} reactions, {} samples, {} clamps\n", label, mech.num_species(),
                             mech.num_reactions(), traj.num_samples(), results[c].clamps.size());
    for (const auto& ev : results[c].clamps) {
      std::cout << fmt::format("  clamp: species {} in interval {} (value {})\n", mech.species()[ev.species],
                               ev.interval, ev.value);
    }
  }
  return kOk;
}

void dump_problems(const Trajectory& traj, const Mechanism& mech, const SelectionConfig& cfg,
                   const std::string& dir, const std::string& label) {
  ensure_dir(dir);
  const Eigen::MatrixXd M = stoich_matrix(mech).cast<double>();
  const auto chunks = chunk_ranges(traj.num_steps(), cfg.horizon);
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const auto problem = build_chunk_problem(traj, M, cfg, chunks[c]);
    write_text_file(in_dir(dir, fmt::format("{}_chunk{}.txt", label, c)), lp::format_tableau(problem.program));
  }
}

int select_one(const SelectArgs& a, const Mechanism& mech, const Trajectory& traj, const std::string& label) {
  if (!a.dump_dir.empty()) dump_problems(traj, mech, a.config, a.dump_dir, label);
  WeightMatrix W;
  try {
    W = run_selection(traj, mech, a.config, a.jobs);
  } catch (const InfeasibleChunkError& e) {
    const Eigen::MatrixXd M = stoich_matrix(mech).cast<double>();
    const StepRange range{e.first_step(), e.last_step() - e.first_step() + 1};
    std::cerr << fmt::format("error: {}: {}\n", label, e.what());
    try {
      const double eps = minimal_feasible_epsilon(traj, M, a.config, range);
      std::cerr << fmt::format("hint: chunk {} becomes feasible at epsilon >= {:.6g}\n", e.chunk_index(), eps);
    } catch (const std::exception& inner) {
      std::cerr << fmt::format("hint: no feasible epsilon found ({})\n", inner.what());
    }
    return kInfeasible;
  }
  const auto mask = threshold(W, a.config.alpha);
  const auto relevance = aggregate_relevance(W);
  write_text_file(in_dir(a.out_dir, label + "_weights.csv"), format_weights_csv(W, mech));
  write_text_file(in_dir(a.out_dir, label + "_mask.csv"), format_mask_csv(mask, mech));
  write_text_file(in_dir(a.out_dir, label + "_relevance.csv"), format_relevance_csv(relevance, mech));

  std::cout << fmt::format("{}: epsilon={} beta={} horizon={} alpha={} mode={}\n", label, a.config.epsilon,
                           a.config.beta, a.config.horizon, a.config.alpha, to_string(a.config.mode));
  for (std::size_t c = 0; c < W.chunks.size(); ++c) {
    std::cout << fmt::format("  chunk {} steps {}..{} objective {}\n", c, W.chunks[c].steps.first,
                             W.chunks[c].steps.last(), W.chunks[c].objective);
  }
  std::size_t ever = 0;
  for (Eigen::Index i = 0; i < mask.selected.rows(); ++i) ever += mask.selected.row(i).any() ? 1 : 0;
  std::cout << fmt::format("  total objective {}; {} of {} reactions selected at some step\n", W.total_objective(),
                           ever, mech.num_reactions());
  return kOk;
}

int run_select(SelectArgs a) {
  a.config.mode = parse_selection_mode(a.mode);
  a.config.validate();
  if (a.jobs < 1) throw ValidationError(fmt::format("--jobs must be at least 1, got {}", a.jobs));
  const auto mech = load_mechanism(a.mechanism);
  ensure_dir(a.out_dir);

  if (!a.trajectory.empty()) {
    const Condition condition{a.label, a.temperature, std::nullopt, std::nullopt};
    const std::optional<std::string> rates = a.rates.empty() ? std::nullopt : std::optional(a.rates);
    const auto traj = load_trajectory(a.trajectory, rates, mech, condition);
    return select_one(a, mech, traj, a.label);
  }
  if (a.conditions.empty()) throw ValidationError("select needs --trajectory or --conditions");
  const auto specs = parse_conditions(read_text_file(a.conditions));
  const auto results = simulate_all(mech, specs, a.exact_euler, a.jobs);
  int status = kOk;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    const int rc = select_one(a, mech, results[c].trajectory, specs[c].condition.label);
    if (rc != kOk && status == kOk) status = rc;
  }
  return status;
}

// "label=path" or a bare path whose stem (minus a trailing "_mask") is the label.
std::pair<std::string, std::string> split_mask_arg(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos) return {arg.substr(0, eq), arg.substr(eq + 1)};
  std::string stem = fs::path(arg).stem().string();
  const std::string suffix = "_mask";
  if (stem.size() > suffix.size() && stem.ends_with(suffix)) stem.resize(stem.size() - suffix.size());
  return {stem, arg};
}

int run_reduce(const ReduceArgs& a) {
  const auto mech = load_mechanism(a.mechanism);
  std::vector<LabeledMask> masks;
  for (const auto& arg : a.masks) {
    auto [label, path] = split_mask_arg(arg);
    try {
      masks.push_back({label, parse_mask_csv(read_text_file(path), mech.num_reactions())});
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: {}", path, e.what()));
    }
  }
  const auto u = union_influential(masks);
  const auto reduced = emit_reduced(mech, u.kept, u.provenance);
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_text_file(a.out, serialize_reduced(reduced, mech));
  std::cout << fmt::format("kept {} of {} reactions and {} of {} species from {} masks\n", u.kept.size(),
                           mech.num_reactions(), reduced.mechanism.num_species(), mech.num_species(),
                           masks.size());
  return kOk;
}

int run_compare(const CompareArgs& a) {
  const auto parent = load_mechanism(a.parent);
  const auto reduced = load_mechanism(a.reduced);
  const auto specs = parse_conditions(read_text_file(a.conditions));
  CompareOptions opts;
  opts.progress_species = a.progress_species;
  opts.simulate.exact_euler = a.exact_euler;
  opts.jobs = a.jobs;
  const auto report = compare(parent, reduced, specs, opts);
  ensure_dir(a.out_dir);
  write_text_file(in_dir(a.out_dir, "report.json"), format_report_json(report));
  const auto text = format_report_text(report);
  write_text_file(in_dir(a.out_dir, "report.txt"), text);
  std::cout << text;
  return kOk;
}

int run_testnet(const TestNetArgs& a) {
  const auto mech = random_network(a.seed, a.options);
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_text_file(a.out, serialize_mechanism(mech));
  const auto x0 = random_initial_state(a.seed, mech.num_species());
  std::string assignment;
  for (std::size_t j = 0; j < mech.num_species(); ++j) {
    if (j) assignment += ",";
    assignment += fmt::format("{}={}", mech.species()[j], x0(static_cast<Eigen::Index>(j)));
  }
  std::cout << assignment << "\n";
  return kOk;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const IntegrationError& e) {
    std::cerr << fmt::format("integration error on [{}, {}]: {}\n", e.t_begin(), e.t_end(), e.what());
    return kIntegration;
  } catch (const InfeasibleChunkError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ComparisonError& e) {
    std::cerr << "comparison failed: " << e.what() << "\n";
    return kCompare;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

void add_selection_flags(CLI::App* cmd, SelectArgs& a) {
  cmd->add_option("--epsilon", a.config.epsilon, "Per-step error tolerance (fraction of normalization)")
      ->capture_default_str();
  cmd->add_option("--beta", a.config.beta, "Drift multiplier over a horizon chunk")->capture_default_str();
  cmd->add_option("--horizon", a.config.horizon, "Steps per chunk")->capture_default_str();
  cmd->add_option("--alpha", a.config.alpha, "Mask threshold on weights")->capture_default_str();
  cmd->add_option("--mode", a.mode, "exact or relaxed")->capture_default_str();
  cmd->add_option("--zero-norm-floor", a.config.zero_norm_floor, "Absolute tolerance for vanishing normalizations")
      ->capture_default_str();
  cmd->add_flag("--prefix-drift", a.config.prefix_drift, "Also bound drift over every chunk prefix");
  cmd->add_option("--node-limit", a.config.node_limit, "Branch-and-bound node budget per chunk")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse reaction selection and mechanism reduction"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Integrate a mechanism and write trajectory CSVs");
  cmd_sim->add_option("--mechanism,-m", sim.mechanism, "Mechanism JSON")->required()->check(CLI::ExistingFile);
  cmd_sim->add_option("--x0", sim.x0, "Initial concentrations, e.g. A=1,B=0.5");
  cmd_sim->add_option("--schedule", sim.schedule, "uniform:t0:tf:n | geometric:t0:tf:n:ratio | list:t0,t1,...");
  cmd_sim->add_option("--conditions", sim.conditions, "Conditions JSON (overrides --x0/--schedule)")
      ->check(CLI::ExistingFile);
  cmd_sim->add_option("--label", sim.label, "Condition label for single runs")->capture_default_str();
  cmd_sim->add_option("--temperature,-T", sim.temperature, "Temperature in K for Arrhenius rates");
  cmd_sim->add_option("--check-balance", sim.elements, "Element table JSON; warn on unbalanced reactions")
      ->check(CLI::ExistingFile);
  cmd_sim->add_flag("--exact-euler", sim.exact_euler, "Record the explicit Euler recursion at the sample spacing");
  cmd_sim->add_option("--out-dir,-o", sim.out_dir, "Output directory")->capture_default_str();
  cmd_sim->add_option("--jobs,-j", sim.jobs, "Parallel conditions")->check(CLI::PositiveNumber);

  SelectArgs sel;
  auto* cmd_sel = app.add_subcommand("select", "Select influential reactions per horizon chunk");
  cmd_sel->add_option("--mechanism,-m", sel.mechanism, "Mechanism JSON")->required()->check(CLI::ExistingFile);
  cmd_sel->add_option("--trajectory", sel.trajectory, "Trajectory CSV")->check(CLI::ExistingFile);
  cmd_sel->add_option("--rates", sel.rates, "Rates CSV (recomputed from X when absent)")->check(CLI::ExistingFile);
  cmd_sel->add_option("--conditions", sel.conditions, "Conditions JSON: simulate then select each")
      ->check(CLI::ExistingFile);
  cmd_sel->add_option("--label", sel.label, "Output prefix for single trajectories")->capture_default_str();
  cmd_sel->add_option("--temperature,-T", sel.temperature, "Temperature in K for recomputed rates");
  cmd_sel->add_flag("--exact-euler", sel.exact_euler, "Simulate conditions with the explicit Euler recursion");
  cmd_sel->add_option("--dump-problems", sel.dump_dir, "Write each chunk's program to this directory");
  cmd_sel->add_option("--out-dir,-o", sel.out_dir, "Output directory")->capture_default_str();
  cmd_sel->add_option("--jobs,-j", sel.jobs, "Parallel chunks")->check(CLI::PositiveNumber);
  add_selection_flags(cmd_sel, sel);

  ReduceArgs red;
  auto* cmd_red = app.add_subcommand("reduce", "Union of selection masks into a reduced mechanism");
  cmd_red->add_option("--mechanism,-m", red.mechanism, "Parent mechanism JSON")->required()->check(CLI::ExistingFile);
  cmd_red->add_option("masks", red.masks, "Mask CSVs, optionally as label=path")->required();
  cmd_red->add_option("--out,-o", red.out, "Reduced mechanism JSON")->capture_default_str();

  CompareArgs cmp;
  auto* cmd_cmp = app.add_subcommand("compare", "Compare full and reduced mechanisms over conditions");
  cmd_cmp->add_option("--parent", cmp.parent, "Parent mechanism JSON")->required()->check(CLI::ExistingFile);
  cmd_cmp->add_option("--reduced", cmp.reduced, "Reduced mechanism JSON")->required()->check(CLI::ExistingFile);
  cmd_cmp->add_option("--conditions", cmp.conditions, "Conditions JSON")->required()->check(CLI::ExistingFile);
  cmd_cmp->add_option("--progress-species", cmp.progress_species,
                      "Species for the characteristic time (default: first reactant of reaction 1)");
  cmd_cmp->add_flag("--exact-euler", cmp.exact_euler, "Simulate with the explicit Euler recursion");
  cmd_cmp->add_option("--out-dir,-o", cmp.out_dir, "Output directory")->capture_default_str();
  cmd_cmp->add_option("--jobs,-j", cmp.jobs, "Parallel conditions")->check(CLI::PositiveNumber);

  TestNetArgs tn;
  auto* cmd_tn = app.add_subcommand("gen-testnet", "Write a seeded random mass-action network");
  cmd_tn->add_option("--seed", tn.seed, "Random seed")->capture_default_str();
  cmd_tn->add_option("--species", tn.options.species, "Number of species")->capture_default_str();
  cmd_tn->add_option("--reactions", tn.options.reactions, "Number of reactions")->capture_default_str();
  cmd_tn->add_option("--k-min", tn.options.k_min, "Smallest rate constant")->capture_default_str();
  cmd_tn->add_option("--k-max", tn.options.k_max, "Largest rate constant")->capture_default_str();
  cmd_tn->add_option("--max-side", tn.options.max_side, "Species per reaction side")->capture_default_str();
  cmd_tn->add_option("--out,-o", tn.out, "Mechanism JSON")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  if (cmd_sim->parsed()) return guarded([&] { return run_simulate(sim); });
  if (cmd_sel->parsed()) return guarded([&] { return run_select(sel); });
  if (cmd_red->parsed()) return guarded([&] { return run_reduce(red); });
  if (cmd_cmp->parsed()) return guarded([&] { return run_compare(cmp); });
  if (cmd_tn->parsed()) return guarded([&] { return run_testnet(tn); });
  return kFailure;
}
