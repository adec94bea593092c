#include "crnsel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include <omp.h>

#include <fmt/format.h>

#include "crnsel/error.hpp"
#include "crnsel/io.hpp"

namespace crnsel {

const char* to_string(SelectionMode mode) {
  return mode == SelectionMode::kExact ? "exact" : "relaxed";
}

SelectionMode parse_selection_mode(const std::string& text) {
  if (text == "exact") return SelectionMode::kExact;
  if (text == "relaxed") return SelectionMode::kRelaxed;
  throw ValidationError(fmt::format("unknown selection mode '{}' (expected exact or relaxed)", text));
}

void SelectionConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError(fmt::format("epsilon must be positive, got {}", epsilon));
  }
  if (!(beta >= 1.0) || !std::isfinite(beta)) {
    throw ValidationError(fmt::format("beta must be >= 1, got {}", beta));
  }
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ValidationError(fmt::format("alpha must lie in [0, 1), got {}", alpha));
  }
  if (!(zero_norm_floor > 0.0) || !std::isfinite(zero_norm_floor)) {
    throw ValidationError(fmt::format("zero_norm_floor must be positive, got {}", zero_norm_floor));
  }
  if (node_limit < 1) throw ValidationError("node_limit must be at least 1");
}

SelectionConfig SelectionConfig::small_network() {
  SelectionConfig c;
  c.epsilon = 0.21;
  c.beta = 3.0;
  c.alpha = 0.0;
  return c;
}

SelectionConfig SelectionConfig::large_network() {
  SelectionConfig c;
  c.epsilon = 0.5;
  c.beta = 3.0;
  c.alpha = 0.0;
  return c;
}

std::vector<StepRange> chunk_ranges(std::size_t num_steps, std::size_t horizon) {
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  std::vector<StepRange> chunks;
  for (std::size_t t = 0; t < num_steps; t += horizon) {
    chunks.push_back({t, std::min(horizon, num_steps - t)});
  }
  return chunks;
}

namespace {

void check_indices(const Trajectory& traj, const Eigen::MatrixXd& stoich, std::size_t species,
                   std::size_t step) {
  if (static_cast<std::size_t>(stoich.rows()) != traj.num_species() ||
      static_cast<std::size_t>(stoich.cols()) != traj.num_reactions()) {
    throw ValidationError(fmt::format(
        "stoichiometric matrix is {}x{} but the trajectory has {} species and {} reactions",
        stoich.rows(), stoich.cols(), traj.num_species(), traj.num_reactions()));
  }
  if (species >= traj.num_species()) {
    throw ValidationError(fmt::format("species index {} out of range ({} species)", species,
                                      traj.num_species()));
  }
  if (step >= traj.num_steps()) {
    throw ValidationError(fmt::format("step index {} out of range ({} steps)", step, traj.num_steps()));
  }
}

// Per-reaction extents r_ik * dt_k for one step.
Eigen::VectorXd extents(const Trajectory& traj, std::size_t step) {
  return traj.rates().row(static_cast<Eigen::Index>(step)).transpose() * traj.delta(step);
}

double concentration_change(const Trajectory& traj, std::size_t species, std::size_t from_sample,
                            std::size_t to_sample) {
  const auto& X = traj.concentrations();
  const auto j = static_cast<Eigen::Index>(species);
  return X(static_cast<Eigen::Index>(to_sample), j) - X(static_cast<Eigen::Index>(from_sample), j);
}

}  // namespace

double concentration_error(const Trajectory& traj, const Eigen::MatrixXd& stoich, std::size_t species,
                           std::size_t step, const Eigen::Ref<const Eigen::VectorXd>& weights) {
  check_indices(traj, stoich, species, step);
  if (static_cast<std::size_t>(weights.size()) != traj.num_reactions()) {
    throw ValidationError(fmt::format("weight vector has {} entries for {} reactions",
                                      weights.size(), traj.num_reactions()));
  }
  const Eigen::VectorXd e = extents(traj, step);
  const double modeled = stoich.row(static_cast<Eigen::Index>(species)).dot(weights.cwiseProduct(e));
  return std::abs(concentration_change(traj, species, step, step + 1) - modeled);
}

double normalization(const Trajectory& traj, const Eigen::MatrixXd& stoich, std::size_t species,
                     std::size_t step) {
  check_indices(traj, stoich, species, step);
  return stoich.row(static_cast<Eigen::Index>(species)).cwiseAbs().dot(extents(traj, step));
}

std::size_t expected_row_count(std::size_t num_species, std::size_t chunk_steps, bool prefix_drift) {
  std::size_t rows = 2 * num_species * chunk_steps + 2 * num_species;
  if (prefix_drift && chunk_steps > 2) rows += 2 * num_species * (chunk_steps - 2);
  return rows;
}

ChunkProblem build_chunk_problem(const Trajectory& traj, const Eigen::MatrixXd& stoich,
                                 const SelectionConfig& config, StepRange steps) {
  config.validate();
  if (steps.count == 0) throw ValidationError("chunk step range is empty");
  if (steps.first + steps.count > traj.num_steps()) {
    throw ValidationError(fmt::format("chunk steps [{}, {}] exceed the trajectory's {} steps",
                                      steps.first, steps.last(), traj.num_steps()));
  }
  check_indices(traj, stoich, 0, steps.first);

  const std::size_t ns = traj.num_species();
  const std::size_t nr = traj.num_reactions();
  const std::size_t W = steps.count;

  ChunkProblem p;
  p.steps = steps;
  p.num_species = ns;
  p.num_reactions = nr;
  p.step_rows = 2 * ns * W;
  p.drift_rows = 2 * ns;
  p.prefix_rows = (config.prefix_drift && W > 2) ? 2 * ns * (W - 2) : 0;

  const auto nvars = static_cast<Eigen::Index>(nr * W);
  const auto nrows = static_cast<Eigen::Index>(p.step_rows + p.drift_rows + p.prefix_rows);
  auto& lp = p.program.base;
  lp.c = Eigen::VectorXd::Ones(nvars);
  lp.A = Eigen::MatrixXd::Zero(nrows, nvars);
  lp.b = Eigen::VectorXd::Zero(nrows);
  lp.lower = Eigen::VectorXd::Zero(nvars);
  lp.upper = Eigen::VectorXd::Ones(nvars);
  p.program.integral.assign(static_cast<std::size_t>(nvars), config.mode == SelectionMode::kExact);

  const Eigen::MatrixXd absM = stoich.cwiseAbs();
  // coef(j, s * nr + i) = M_ji * r_ik * dt_k for the chunk's s-th step k.
  Eigen::MatrixXd coef(static_cast<Eigen::Index>(ns), nvars);
  Eigen::MatrixXd norm(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(W));
  for (std::size_t s = 0; s < W; ++s) {
    const Eigen::VectorXd e = extents(traj, steps.first + s);
    for (std::size_t i = 0; i < nr; ++i) {
      coef.col(static_cast<Eigen::Index>(s * nr + i)) = stoich.col(static_cast<Eigen::Index>(i)) * e(static_cast<Eigen::Index>(i));
    }
    norm.col(static_cast<Eigen::Index>(s)) = absM * e;
  }

  Eigen::Index row = 0;
  // |d - sum a w| <= R  as  -a.w <= R - d  and  a.w <= R + d
  auto add_pair = [&](std::size_t species, std::size_t s_begin, std::size_t s_end, double change,
                      double rhs) {
    for (int sign : {-1, +1}) {
      for (std::size_t s = s_begin; s < s_end; ++s) {
        for (std::size_t i = 0; i < nr; ++i) {
          const auto v = static_cast<Eigen::Index>(s * nr + i);
          lp.A(row, v) = sign * coef(static_cast<Eigen::Index>(species), v);
        }
      }
      lp.b(row) = rhs + sign * change;
      ++row;
    }
  };
  auto floored = [&](double n) { return n < config.zero_norm_floor ? config.zero_norm_floor : n; };

  for (std::size_t s = 0; s < W; ++s) {
    const std::size_t k = steps.first + s;
    for (std::size_t j = 0; j < ns; ++j) {
      const double n = norm(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s));
      const double rhs = n < config.zero_norm_floor ? config.zero_norm_floor : config.epsilon * n;
      add_pair(j, s, s + 1, concentration_change(traj, j, k, k + 1), rhs);
    }
  }
  auto add_drift = [&](std::size_t prefix) {
    for (std::size_t j = 0; j < ns; ++j) {
      const double total = norm.row(static_cast<Eigen::Index>(j)).head(static_cast<Eigen::Index>(prefix)).sum();
      const double rhs = total < config.zero_norm_floor ? floored(total)
                                                        : config.beta * config.epsilon * total;
      add_pair(j, 0, prefix, concentration_change(traj, j, steps.first, steps.first + prefix), rhs);
    }
  };
  add_drift(W);
  if (p.prefix_rows > 0) {
    for (std::size_t prefix = 2; prefix < W; ++prefix) add_drift(prefix);
  }
  return p;
}

namespace {

// Row-scaled feasibility, matching the solver's internal unit-max-norm rows.
bool satisfies_rows(const lp::LinearProgram& lp, const Eigen::VectorXd& x) {
  const Eigen::VectorXd lhs = lp.A * x;
  for (Eigen::Index i = 0; i < lhs.size(); ++i) {
    const double scale = std::max(lp.A.row(i).cwiseAbs().maxCoeff(), std::abs(lp.b(i)));
    if (lhs(i) - lp.b(i) > lp::Tolerances::kFeasibility * (scale > 0.0 ? scale : 1.0)) return false;
  }
  return true;
}

// The per-step rows of a chunk only involve that step's variables, so the
// optimum of each step alone is a lower bound for its share of the chunk.
// When the stitched per-step optima also meet the drift rows they are optimal
// for the whole chunk; otherwise `coupled` is set and the caller must solve
// the full program.
lp::SolveResult solve_by_steps(const ChunkProblem& problem, const SelectionConfig& config, bool& coupled) {
  coupled = false;
  const auto nr = static_cast<Eigen::Index>(problem.num_reactions);
  const auto rows_per_step = static_cast<Eigen::Index>(2 * problem.num_species);
  const auto& full = problem.program.base;

  lp::SolveResult out;
  out.status = lp::SolveStatus::kOptimal;
  out.x = Eigen::VectorXd::Zero(full.c.size());
  for (std::size_t s = 0; s < problem.steps.count; ++s) {
    const auto col = static_cast<Eigen::Index>(s) * nr;
    const auto row = static_cast<Eigen::Index>(s) * rows_per_step;
    lp::IntegerProgram step;
    step.base.c = full.c.segment(col, nr);
    step.base.A = full.A.block(row, col, rows_per_step, nr);
    step.base.b = full.b.segment(row, rows_per_step);
    step.base.lower = full.lower.segment(col, nr);
    step.base.upper = full.upper.segment(col, nr);
    step.integral.assign(static_cast<std::size_t>(nr), config.mode == SelectionMode::kExact);
    const auto r = config.mode == SelectionMode::kExact ? lp::solve_ilp(step, config.node_limit)
                                                        : lp::solve_lp(step.base);
    out.iterations += r.iterations;
    if (r.status != lp::SolveStatus::kOptimal) {
      out.status = r.status;
      return out;
    }
    out.x.segment(col, nr) = r.x;
    out.objective += r.objective;
  }
  coupled = !satisfies_rows(full, out.x);
  return out;
}

}  // namespace

ChunkSolution solve_chunk(const ChunkProblem& problem, const SelectionConfig& config) {
  const std::size_t nr = problem.num_reactions;
  const auto describe = [&] {
    return fmt::format("steps {}..{}", problem.steps.first, problem.steps.last());
  };

  bool coupled = false;
  lp::SolveResult result = solve_by_steps(problem, config, coupled);
  if (coupled) {
    // Stitched per-step optima violate a drift row: solve the coupled program.
    const std::size_t work = result.iterations;
    if (config.mode == SelectionMode::kExact) {
      lp::IntegerProgram ip = problem.program;
      std::fill(ip.integral.begin(), ip.integral.end(), true);
      result = lp::solve_ilp(ip, config.node_limit);
    } else {
      result = lp::solve_lp(problem.program.base);
    }
    result.iterations += work;
  }
  switch (result.status) {
    case lp::SolveStatus::kOptimal:
      break;
    case lp::SolveStatus::kNodeLimit:
      throw NodeLimitError(fmt::format("branch and bound hit its node limit ({}) on {}",
                                       config.node_limit, describe()));
    default:
      throw InfeasibleChunkError(
          fmt::format("no weights satisfy the tolerances on {} (epsilon={}, beta={})", describe(),
                      config.epsilon, config.beta),
          0, problem.steps.first, problem.steps.last());
  }

  ChunkSolution out;
  out.steps = problem.steps;
  out.solver_work = result.iterations;
  for (std::size_t s = 0; s < problem.steps.count; ++s) {
    Eigen::VectorXd w = result.x.segment(static_cast<Eigen::Index>(s * nr), static_cast<Eigen::Index>(nr));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w(i) = config.mode == SelectionMode::kExact ? std::round(w(i)) : std::clamp(w(i), 0.0, 1.0);
    }
    out.objective += w.sum();
    out.weights.push_back(std::move(w));
  }
  return out;
}

double WeightMatrix::total_objective() const {
  double total = 0.0;
  for (const auto& c : chunks) total += c.objective;
  return total;
}

namespace {

WeightMatrix empty_weights(const Trajectory& traj, const SelectionConfig& config) {
  WeightMatrix W;
  W.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(traj.num_reactions()),
                                   static_cast<Eigen::Index>(traj.num_steps()));
  W.step_start_times.assign(traj.times().begin(), traj.times().end() - 1);
  W.condition = traj.condition();
  W.config = config;
  return W;
}

void place(WeightMatrix& W, const ChunkSolution& sol) {
  for (std::size_t s = 0; s < sol.steps.count; ++s) {
    W.values.col(static_cast<Eigen::Index>(sol.steps.first + s)) = sol.weights[s];
  }
  W.chunks.push_back({sol.steps, sol.objective});
}

void check_shapes(const Trajectory& traj, const Mechanism& mech) {
  if (traj.num_species() != mech.num_species() || traj.num_reactions() != mech.num_reactions()) {
    throw ValidationError(fmt::format(
        "trajectory has {} species and {} reactions; mechanism has {} and {}", traj.num_species(),
        traj.num_reactions(), mech.num_species(), mech.num_reactions()));
  }
}

ChunkSolution solve_indexed_chunk(const Trajectory& traj, const Eigen::MatrixXd& M,
                                  const SelectionConfig& config, StepRange range,
                                  std::size_t index) {
  try {
    return solve_chunk(build_chunk_problem(traj, M, config, range), config);
  } catch (const InfeasibleChunkError& e) {
    throw InfeasibleChunkError(fmt::format("chunk {}: {}", index, e.what()), index, e.first_step(),
                               e.last_step());
  }
}

}  // namespace

WeightMatrix run_selection_serial(const Trajectory& traj, const Mechanism& mech,
                                  const SelectionConfig& config) {
  config.validate();
  check_shapes(traj, mech);
  const Eigen::MatrixXd M = stoich_matrix(mech).cast<double>();
  WeightMatrix W = empty_weights(traj, config);
  const auto ranges = chunk_ranges(traj.num_steps(), config.horizon);
  for (std::size_t c = 0; c < ranges.size(); ++c) {
    place(W, solve_indexed_chunk(traj, M, config, ranges[c], c));
  }
  return W;
}

WeightMatrix run_selection(const Trajectory& traj, const Mechanism& mech,
                           const SelectionConfig& config, int jobs) {
  config.validate();
  check_shapes(traj, mech);
  if (jobs < 1) throw ValidationError(fmt::format("jobs must be at least 1, got {}", jobs));
  const Eigen::MatrixXd M = stoich_matrix(mech).cast<double>();
  const auto ranges = chunk_ranges(traj.num_steps(), config.horizon);
  const auto n = static_cast<std::ptrdiff_t>(ranges.size());

  std::vector<ChunkSolution> solutions(ranges.size());
  std::vector<std::exception_ptr> errors(ranges.size());
#pragma omp parallel for num_threads(jobs) schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    try {
      solutions[idx] = solve_indexed_chunk(traj, M, config, ranges[idx], idx);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  WeightMatrix W = empty_weights(traj, config);
  for (const auto& sol : solutions) place(W, sol);
  return W;
}

SelectionMask threshold(const WeightMatrix& weights, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ValidationError(fmt::format("alpha must lie in [0, 1), got {}", alpha));
  }
  return {(weights.values.array() > alpha), weights.step_start_times};
}

Eigen::VectorXd aggregate_relevance(const WeightMatrix& weights) {
  if (weights.values.cols() == 0) return Eigen::VectorXd::Zero(weights.values.rows());
  return weights.values.rowwise().maxCoeff();
}

double minimal_feasible_epsilon(const Trajectory& traj, const Eigen::MatrixXd& stoich,
                                const SelectionConfig& config, StepRange steps, double rel_tol) {
  auto feasible = [&](double eps) {
    SelectionConfig c = config;
    c.epsilon = eps;
    try {
      solve_chunk(build_chunk_problem(traj, stoich, c, steps), c);
      return true;
    } catch (const InfeasibleChunkError&) {
      return false;
    } catch (const NodeLimitError&) {
      return false;
    }
  };
  double lo = 0.0;
  double hi = config.epsilon;
  while (!feasible(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) {
      throw InfeasibleChunkError(
          fmt::format("steps {}..{} stay infeasible for every epsilon (beta={})", steps.first,
                      steps.last(), config.beta),
          0, steps.first, steps.last());
    }
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

namespace {

std::string csv_header(const Mechanism& mech) {
  std::string out = "step_index,t_start";
  for (const auto& r : mech.reactions()) out += "," + r.label;
  return out + "\n";
}

void check_rows(std::size_t rows, const Mechanism& mech) {
  if (rows != mech.num_reactions()) {
    throw ValidationError(fmt::format("selection has {} reactions, mechanism has {}", rows,
                                      mech.num_reactions()));
  }
}

}  // namespace

std::string format_weights_csv(const WeightMatrix& weights, const Mechanism& mech) {
  check_rows(weights.num_reactions(), mech);
  std::string out = csv_header(mech);
  for (std::size_t k = 0; k < weights.num_steps(); ++k) {
    out += fmt::format("{},{}", k, weights.step_start_times[k]);
    for (Eigen::Index i = 0; i < weights.values.rows(); ++i) {
      out += fmt::format(",{}", weights.values(i, static_cast<Eigen::Index>(k)));
    }
    out += "\n";
  }
  return out;
}

std::string format_mask_csv(const SelectionMask& mask, const Mechanism& mech) {
  check_rows(mask.num_reactions(), mech);
  std::string out = csv_header(mech);
  for (std::size_t k = 0; k < mask.num_steps(); ++k) {
    out += fmt::format("{},{}", k, mask.step_start_times[k]);
    for (Eigen::Index i = 0; i < mask.selected.rows(); ++i) {
      out += mask.selected(i, static_cast<Eigen::Index>(k)) ? ",1" : ",0";
    }
    out += "\n";
  }
  return out;
}

std::string format_relevance_csv(const Eigen::VectorXd& relevance, const Mechanism& mech) {
  check_rows(static_cast<std::size_t>(relevance.size()), mech);
  std::string out = "reaction_index,label,relevance\n";
  for (std::size_t i = 0; i < mech.num_reactions(); ++i) {
    out += fmt::format("{},{},{}\n", i + 1, mech.reactions()[i].label,
                       relevance(static_cast<Eigen::Index>(i)));
  }
  return out;
}

SelectionMask parse_mask_csv(const std::string& text, std::size_t num_reactions) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("mask CSV: empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "step_index" || header[1] != "t_start") {
    throw ValidationError("mask CSV: header must start with 'step_index,t_start'");
  }
  if (header.size() - 2 != num_reactions) {
    throw ValidationError(fmt::format("mask CSV: shape mismatch, {} reaction columns but the mechanism has {}",
                                      header.size() - 2, num_reactions));
  }
  std::vector<std::vector<bool>> cols;
  std::vector<double> starts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError(fmt::format("mask CSV line {}: expected {} fields, found {}", line_no,
                                        header.size(), fields.size()));
    }
    starts.push_back(parse_csv_number(fields[1], fmt::format("mask CSV line {}", line_no)));
    std::vector<bool> col;
    for (std::size_t c = 2; c < fields.size(); ++c) {
      if (fields[c] != "0" && fields[c] != "1") {
        throw ValidationError(fmt::format("mask CSV line {}: entry '{}' is not 0 or 1", line_no, fields[c]));
      }
      col.push_back(fields[c] == "1");
    }
    cols.push_back(std::move(col));
  }
  SelectionMask mask;
  mask.selected.resize(static_cast<Eigen::Index>(num_reactions), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    for (std::size_t i = 0; i < num_reactions; ++i) {
      mask.selected(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cols[k][i];
    }
  }
  mask.step_start_times = std::move(starts);
  return mask;
}

}  // namespace crnsel
