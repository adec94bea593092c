#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "crnsel/kinetics.hpp"
#include "crnsel/mechanism.hpp"

namespace crnsel {

// Sampling schedule description, as written in conditions files.
struct Schedule {
  enum class Kind { kUniform, kGeometric, kExplicit };
  Kind kind = Kind::kUniform;
  double t0 = 0.0;
  double tf = 1.0;
  std::size_t samples = 2;
  double ratio = 1.05;        // geometric only
  std::vector<double> times;  // explicit only

  std::vector<double> sample_times() const;
};

// "uniform:t0:tf:n", "geometric:t0:tf:n:ratio" or "list:t0,t1,..."
Schedule parse_schedule(std::string_view text);

// One record of a conditions file.
struct ConditionSpec {
  Condition condition;
  std::map<std::string, double> initial;  // species -> concentration; others start at 0
  Schedule schedule;

  Eigen::VectorXd initial_state(const Mechanism& mech) const;
};

// JSON array of {label, T, P, phi, X0: {species: value}, schedule: {...}}.
std::vector<ConditionSpec> parse_conditions(std::string_view text);

// "A=1,B=0.5"
std::map<std::string, double> parse_initial_state(std::string_view text);

}  // namespace crnsel
