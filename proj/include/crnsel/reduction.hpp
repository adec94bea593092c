#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "crnsel/kinetics.hpp"
#include "crnsel/mechanism.hpp"
#include "crnsel/selection.hpp"
#include "crnsel/study.hpp"

namespace crnsel {

struct LabeledMask {
  std::string label;
  SelectionMask mask;
};

// Reaction index (0-based, parent order) -> labels of the conditions that selected it.
using Provenance = std::map<std::size_t, std::set<std::string>>;

struct UnionResult {
  std::vector<std::size_t> kept;  // sorted
  Provenance provenance;
};

// A reaction is kept iff some condition selected it at some step.
UnionResult union_influential(const std::vector<LabeledMask>& masks);

struct ReducedMechanism {
  Mechanism mechanism;
  std::vector<std::size_t> kept_reaction_indices;
  Provenance provenance;
};

// Kept reactions in parent order; species no kept reaction touches are dropped.
ReducedMechanism emit_reduced(const Mechanism& parent, const std::vector<std::size_t>& kept,
                              const Provenance& provenance = {});

// Mechanism JSON plus a "provenance" block keyed by 1-based parent reaction index.
std::string serialize_reduced(const ReducedMechanism& reduced, const Mechanism& parent);

// Earliest time at which the species has covered half of its total change,
// interpolated linearly between samples.
double characteristic_time(const Trajectory& traj, std::size_t species);

struct ConditionComparison {
  std::string label;
  double tau_full = 0.0;
  double tau_reduced = 0.0;
  double tau_deviation = 0.0;            // |tau_red - tau_full| / tau_full
  double max_concentration_deviation = 0.0;  // max over (t, j) of |X_red - X_full| / (max_t X_full(j) + floor)
};

struct ComparisonReport {
  std::string progress_species;
  std::vector<ConditionComparison> conditions;
  double reaction_reduction_percent = 0.0;
  double species_reduction_percent = 0.0;
  std::size_t parent_reactions = 0;
  std::size_t reduced_reactions = 0;
  std::size_t parent_species = 0;
  std::size_t reduced_species = 0;
};

struct CompareOptions {
  // Empty: the first reactant of the parent's first reaction.
  std::string progress_species;
  double zero_norm_floor = 1e-12;
  SimulateOptions simulate;
  int jobs = 1;
};

// Simulates both mechanisms for every condition. Failures are rethrown as
// ComparisonError naming the condition.
ComparisonReport compare(const Mechanism& parent, const Mechanism& reduced,
                         const std::vector<ConditionSpec>& conditions,
                         const CompareOptions& options = {});

class ComparisonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_report_json(const ComparisonReport& report);
std::string format_report_text(const ComparisonReport& report);

}  // namespace crnsel
