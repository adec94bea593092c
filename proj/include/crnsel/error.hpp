#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crnsel {

// Bad input: malformed files, out-of-range parameters, shape mismatches.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MechanismError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Integrator could not reach the requested accuracy within its sub-step budget.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t_begin, double t_end)
      : std::runtime_error(what), t_begin_(t_begin), t_end_(t_end) {}
  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }

 private:
  double t_begin_;
  double t_end_;
};

// Simplex exceeded its pivot budget; carries enough context to reproduce.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A selection chunk admits no weights satisfying the error tolerances.
class InfeasibleChunkError : public std::runtime_error {
 public:
  InfeasibleChunkError(const std::string& what, std::size_t chunk_index,
                       std::size_t first_step, std::size_t last_step)
      : std::runtime_error(what),
        chunk_index_(chunk_index),
        first_step_(first_step),
        last_step_(last_step) {}
  std::size_t chunk_index() const { return chunk_index_; }
  std::size_t first_step() const { return first_step_; }
  std::size_t last_step() const { return last_step_; }

 private:
  std::size_t chunk_index_;
  std::size_t first_step_;
  std::size_t last_step_;
};

// Branch and bound stopped at its node budget before proving optimality.
class NodeLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crnsel
