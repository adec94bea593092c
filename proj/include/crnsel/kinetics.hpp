#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "crnsel/mechanism.hpp"

namespace crnsel {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Initial condition metadata. Only temperature enters the kinetics (Arrhenius rates).
struct Condition {
  std::string label;
  std::optional<double> temperature;
  std::optional<double> pressure;
  std::optional<double> phi;
};

// Sampled concentrations and reaction rates for one initial condition.
// Rows are samples; X has one column per species, rates one per reaction.
class Trajectory {
 public:
  Trajectory(std::vector<double> times, RowMatrix concentrations, RowMatrix rates,
             Condition condition);

  const std::vector<double>& times() const { return times_; }
  const RowMatrix& concentrations() const { return X_; }
  const RowMatrix& rates() const { return r_; }
  const Condition& condition() const { return condition_; }

  std::size_t num_samples() const { return times_.size(); }
  std::size_t num_steps() const { return times_.size() - 1; }
  std::size_t num_species() const { return static_cast<std::size_t>(X_.cols()); }
  std::size_t num_reactions() const { return static_cast<std::size_t>(r_.cols()); }
  const std::vector<double>& deltas() const { return deltas_; }
  double delta(std::size_t k) const { return deltas_.at(k); }

 private:
  std::vector<double> times_;
  std::vector<double> deltas_;
  RowMatrix X_;
  RowMatrix r_;
  Condition condition_;
};

// Mass-action rate evaluator with rate constants fixed for one temperature.
class MassActionModel {
 public:
  MassActionModel(const Mechanism& mech, std::optional<double> temperature);

  // r_i = k_i * prod_j X_j^nu_ij. Negative inputs are treated as zero.
  Eigen::VectorXd rates(const Eigen::Ref<const Eigen::VectorXd>& X) const;
  Eigen::VectorXd derivative(const Eigen::Ref<const Eigen::VectorXd>& X) const;

  const Eigen::MatrixXd& stoich() const { return M_; }
  const Eigen::VectorXd& rate_constants() const { return k_; }
  std::size_t num_species() const { return static_cast<std::size_t>(M_.rows()); }
  std::size_t num_reactions() const { return static_cast<std::size_t>(M_.cols()); }

 private:
  Eigen::MatrixXd M_;
  Eigen::VectorXd k_;
  std::vector<std::vector<StoichTerm>> reactants_;
};

Eigen::VectorXd reaction_rates(const Mechanism& mech, const Eigen::Ref<const Eigen::VectorXd>& X,
                               std::optional<double> temperature = std::nullopt);

struct EulerStepResult {
  Eigen::VectorXd X;
  std::vector<std::size_t> clamped_species;
};

// X' = X + M r dt, negative components clamped to zero and reported.
EulerStepResult euler_step(const Eigen::Ref<const Eigen::VectorXd>& X, const Eigen::MatrixXd& M,
                           const Eigen::Ref<const Eigen::VectorXd>& r, double dt);

struct ClampEvent {
  std::size_t interval = 0;  // sample interval [t_k, t_k+1] in which it happened
  std::size_t species = 0;
  double value = 0.0;  // most negative pre-clamp value in that interval
};

struct SimulateOptions {
  // Record X_{k+1} = X_k + M r_k dt_k at the sample spacing, no sub-stepping.
  bool exact_euler = false;
  double rel_tol = 1e-6;
  std::size_t max_substeps = std::size_t{1} << 20;
};

struct SimulationResult {
  Trajectory trajectory;
  std::vector<ClampEvent> clamps;
};

// Integrates mass-action dynamics and records X and r at sample_times.
// Sub-steps per interval double until successive RK4 results agree to rel_tol.
SimulationResult simulate(const Mechanism& mech, const Eigen::Ref<const Eigen::VectorXd>& X0,
                          const Condition& condition, const std::vector<double>& sample_times,
                          const SimulateOptions& options = {});

std::vector<double> uniform_schedule(double t0, double tf, std::size_t samples);
// Spacings grow by `ratio` from one interval to the next.
std::vector<double> geometric_schedule(double t0, double tf, std::size_t samples, double ratio);

// CSV: header `t,<names...>`, one row per sample.
std::string format_trajectory_csv(const Trajectory& traj, const Mechanism& mech);
std::string format_rates_csv(const Trajectory& traj, const Mechanism& mech);

// Reads the trajectory CSV and, if given, the companion rates CSV. Without a
// rates file, rates are recomputed from each X row.
Trajectory parse_trajectory(const std::string& concentrations_csv,
                            const std::optional<std::string>& rates_csv, const Mechanism& mech,
                            const Condition& condition);
Trajectory load_trajectory(const std::string& concentrations_path,
                           const std::optional<std::string>& rates_path, const Mechanism& mech,
                           const Condition& condition);

}  // namespace crnsel
