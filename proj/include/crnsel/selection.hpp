#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "crnsel/kinetics.hpp"
#include "crnsel/lp.hpp"
#include "crnsel/mechanism.hpp"

namespace crnsel {

enum class SelectionMode { kExact, kRelaxed };

const char* to_string(SelectionMode mode);
SelectionMode parse_selection_mode(const std::string& text);

struct SelectionConfig {
  double epsilon = 0.21;  // per-step error tolerance, fraction of the normalization
  double beta = 3.0;      // drift multiplier over a chunk, >= 1
  std::size_t horizon = 10;
  double alpha = 0.0;  // mask threshold in [0, 1)
  SelectionMode mode = SelectionMode::kRelaxed;
  double zero_norm_floor = 1e-12;
  // Also bound the drift of every intermediate prefix of a chunk, not just its endpoint.
  bool prefix_drift = false;
  std::size_t node_limit = 200000;

  void validate() const;

  // Parameter sets used for small (H2-sized) and large (propane-sized) networks.
  static SelectionConfig small_network();
  static SelectionConfig large_network();
};

// Contiguous steps [first, first + count). Step k is the transition from sample k to k+1.
struct StepRange {
  std::size_t first = 0;
  std::size_t count = 0;
  std::size_t last() const { return first + count - 1; }
  bool operator==(const StepRange&) const = default;
};

// Consecutive chunks of `horizon` steps; the last one takes whatever remains.
std::vector<StepRange> chunk_ranges(std::size_t num_steps, std::size_t horizon);

// |X_{k+1}(j) - X_k(j) - M_j (w .* r_k) dt_k|
double concentration_error(const Trajectory& traj, const Eigen::MatrixXd& stoich, std::size_t species,
                           std::size_t step, const Eigen::Ref<const Eigen::VectorXd>& weights);

// |M_j| r_k dt_k
double normalization(const Trajectory& traj, const Eigen::MatrixXd& stoich, std::size_t species,
                     std::size_t step);

// One chunk's optimization problem. Variable (reaction i, local step s) sits at
// s * num_reactions + i. Row blocks, in order: two per (step, species), two per
// species for the chunk drift, then two per (species, prefix) when prefix_drift is on.
struct ChunkProblem {
  StepRange steps;
  std::size_t num_species = 0;
  std::size_t num_reactions = 0;
  std::size_t step_rows = 0;
  std::size_t drift_rows = 0;
  std::size_t prefix_rows = 0;
  lp::IntegerProgram program;

  std::size_t num_variables() const { return num_reactions * steps.count; }
  std::size_t variable(std::size_t reaction, std::size_t local_step) const {
    return local_step * num_reactions + reaction;
  }
};

// Row count produced by build_chunk_problem: 2 Ns W + 2 Ns (+ 2 Ns (W - 2) with prefix drift).
std::size_t expected_row_count(std::size_t num_species, std::size_t chunk_steps, bool prefix_drift);

ChunkProblem build_chunk_problem(const Trajectory& traj, const Eigen::MatrixXd& stoich,
                                 const SelectionConfig& config, StepRange steps);

struct ChunkSolution {
  StepRange steps;
  std::vector<Eigen::VectorXd> weights;  // one vector of length Nr per step
  double objective = 0.0;
  std::size_t solver_work = 0;  // simplex pivots (relaxed) or B&B nodes (exact)
};

// Solves one chunk in the configured mode. Throws InfeasibleChunkError or NodeLimitError.
ChunkSolution solve_chunk(const ChunkProblem& problem, const SelectionConfig& config);

struct ChunkSummary {
  StepRange steps;
  double objective = 0.0;
};

struct WeightMatrix {
  Eigen::MatrixXd values;  // Nr x N_steps
  std::vector<double> step_start_times;
  Condition condition;
  SelectionConfig config;
  std::vector<ChunkSummary> chunks;

  std::size_t num_reactions() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t num_steps() const { return static_cast<std::size_t>(values.cols()); }
  double total_objective() const;
};

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct SelectionMask {
  BoolMatrix selected;  // Nr x N_steps
  std::vector<double> step_start_times;

  std::size_t num_reactions() const { return static_cast<std::size_t>(selected.rows()); }
  std::size_t num_steps() const { return static_cast<std::size_t>(selected.cols()); }
};

// Serial reference: chunks solved one after another.
WeightMatrix run_selection_serial(const Trajectory& traj, const Mechanism& mech,
                                  const SelectionConfig& config);

// Chunks solved concurrently on up to `jobs` OpenMP threads; assembly is keyed by
// chunk index so the result matches run_selection_serial bit for bit. On failure
// the error of the lowest-indexed failing chunk is thrown.
WeightMatrix run_selection(const Trajectory& traj, const Mechanism& mech,
                           const SelectionConfig& config, int jobs = 1);

// mask(i, k) = weights(i, k) > alpha
SelectionMask threshold(const WeightMatrix& weights, double alpha);

// relevance(i) = max_k weights(i, k)
Eigen::VectorXd aggregate_relevance(const WeightMatrix& weights);

// Smallest epsilon (to within rel_tol, by bisection) at which the chunk becomes
// feasible in the configured mode, other parameters unchanged.
double minimal_feasible_epsilon(const Trajectory& traj, const Eigen::MatrixXd& stoich,
                                const SelectionConfig& config, StepRange steps,
                                double rel_tol = 1e-4);

std::string format_weights_csv(const WeightMatrix& weights, const Mechanism& mech);
std::string format_mask_csv(const SelectionMask& mask, const Mechanism& mech);
std::string format_relevance_csv(const Eigen::VectorXd& relevance, const Mechanism& mech);

// Reads a mask CSV; its reaction columns must number `num_reactions`.
SelectionMask parse_mask_csv(const std::string& text, std::size_t num_reactions);

}  // namespace crnsel
