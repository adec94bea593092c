#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace crnsel::lp {

// All solver tolerances live here.
struct Tolerances {
  static constexpr double kFeasibility = 1e-9;
  static constexpr double kIntegrality = 1e-6;
  static constexpr double kObjective = 1e-6;
  // Reduced cost and pivot magnitudes below these are treated as zero.
  static constexpr double kOptimality = 1e-9;
  static constexpr double kPivot = 1e-9;
};

// minimize c.x  subject to  A x <= b,  lower <= x <= upper.
// Bounds may be infinite; all other entries must be finite.
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  std::size_t num_variables() const { return static_cast<std::size_t>(c.size()); }
  std::size_t num_rows() const { return static_cast<std::size_t>(A.rows()); }

  // Throws ValidationError on shape mismatches, non-finite data or lower > upper.
  void validate() const;
};

struct IntegerProgram {
  LinearProgram base;
  std::vector<bool> integral;

  void validate() const;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNodeLimit };

const char* to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  std::size_t iterations = 0;  // simplex pivots (LP) or nodes evaluated (ILP)
};

struct SimplexOptions {
  std::size_t max_iterations = 0;  // 0: derived from problem size
  // Consecutive non-improving pivots before switching to Bland's rule.
  std::size_t stall_threshold = 50;
  std::size_t refactor_interval = 64;
};

// Bounded revised simplex with Dantzig pricing and a Bland fallback on stalls.
// Infeasible and unbounded are statuses; exceeding the pivot budget throws SolverError.
SolveResult solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

// Depth-first branch and bound on the most fractional variable. When the
// node budget runs out the status is kNodeLimit and x holds the incumbent, if any.
SolveResult solve_ilp(const IntegerProgram& ip, std::size_t node_limit = 200000,
                      const SimplexOptions& options = {});

// Max violation of A x <= b and the bounds, in the units of each row.
double max_violation(const LinearProgram& lp, const Eigen::VectorXd& x);

// Plain-text dump of the problem for inspection.
void write_tableau(std::ostream& out, const LinearProgram& lp);
std::string format_tableau(const IntegerProgram& ip);

}  // namespace crnsel::lp
