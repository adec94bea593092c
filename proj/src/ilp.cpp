#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "crnsel/lp.hpp"

namespace crnsel::lp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Node {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  SolveResult relaxation;
};

bool is_feasible(const LinearProgram& lp, const Eigen::VectorXd& x) {
  return max_violation(lp, x) <= Tolerances::kFeasibility;
}

// Variable farthest from integrality; ties go to the lower index. -1 if integral.
Eigen::Index most_fractional(const Eigen::VectorXd& x, const std::vector<bool>& integral) {
  Eigen::Index best = -1;
  double best_frac = Tolerances::kIntegrality;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!integral[static_cast<std::size_t>(j)]) continue;
    const double frac = std::abs(x(j) - std::round(x(j)));
    if (frac > best_frac) {
      best_frac = frac;
      best = j;
    }
  }
  return best;
}

}  // namespace

SolveResult solve_ilp(const IntegerProgram& ip, std::size_t node_limit,
                      const SimplexOptions& options) {
  ip.validate();
  const LinearProgram& base = ip.base;

  // With integer costs on integral variables and free continuous variables,
  // every feasible objective is an integer, so node bounds round up.
  bool integral_objective = true;
  for (Eigen::Index j = 0; j < base.c.size(); ++j) {
    const double cj = base.c(j);
    if (ip.integral[static_cast<std::size_t>(j)] ? cj != std::round(cj) : cj != 0.0) {
      integral_objective = false;
    }
  }
  auto node_bound = [&](double objective) {
    return integral_objective ? std::ceil(objective - Tolerances::kObjective) : objective;
  };

  SolveResult best;
  best.status = SolveStatus::kInfeasible;
  double incumbent = kInf;
  std::size_t nodes = 0;

  auto offer = [&](const Eigen::VectorXd& x) {
    if (!is_feasible(base, x)) return;
    const double obj = base.c.dot(x);
    if (obj < incumbent - Tolerances::kObjective) {
      incumbent = obj;
      best.x = x;
      best.objective = obj;
      best.status = SolveStatus::kOptimal;
    }
  };
  auto pruned = [&](const Node& node) {
    return node_bound(node.relaxation.objective) >= incumbent - Tolerances::kObjective;
  };
  auto evaluate = [&](Eigen::VectorXd lower, Eigen::VectorXd upper) {
    LinearProgram lp{base.c, base.A, base.b, lower, upper};
    ++nodes;
    return Node{std::move(lower), std::move(upper), solve_lp(lp, options)};
  };

  Node root = evaluate(base.lower, base.upper);
  if (root.relaxation.status != SolveStatus::kOptimal) {
    best.status = root.relaxation.status;
    best.iterations = nodes;
    return best;
  }

  std::vector<Node> stack;
  stack.push_back(std::move(root));
  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    if (pruned(node)) continue;

    const Eigen::VectorXd& x = node.relaxation.x;
    const Eigen::Index branch = most_fractional(x, ip.integral);
    if (branch < 0) {
      // Snap to exact integers when that stays feasible.
      Eigen::VectorXd snapped = x;
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (ip.integral[static_cast<std::size_t>(j)]) snapped(j) = std::round(x(j));
      }
      if (is_feasible(base, snapped)) {
        offer(snapped);
      } else {
        offer(x);
      }
      continue;
    }

    // Rounding heuristics for an early incumbent.
    Eigen::VectorXd nearest = x;
    Eigen::VectorXd up = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (!ip.integral[static_cast<std::size_t>(j)]) continue;
      nearest(j) = std::round(x(j));
      up(j) = std::ceil(x(j) - Tolerances::kIntegrality);
    }
    offer(nearest);
    offer(up);
    if (pruned(node)) continue;

    std::vector<Node> children;
    for (int side = 0; side < 2; ++side) {
      if (nodes >= node_limit) {
        best.status = SolveStatus::kNodeLimit;
        best.iterations = nodes;
        if (incumbent == kInf) best.x.resize(0);
        return best;
      }
      Eigen::VectorXd lower = node.lower;
      Eigen::VectorXd upper = node.upper;
      if (side == 0) {
        upper(branch) = std::floor(x(branch));
      } else {
        lower(branch) = std::ceil(x(branch));
      }
      Node child = evaluate(std::move(lower), std::move(upper));
      if (child.relaxation.status == SolveStatus::kOptimal && !pruned(child)) {
        children.push_back(std::move(child));
      }
    }
    // Depth first; the child with the better bound is explored first, down branch on ties.
    if (children.size() == 2 &&
        children[1].relaxation.objective < children[0].relaxation.objective) {
      std::swap(children[0], children[1]);
    }
    for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(std::move(*it));
  }

  best.iterations = nodes;
  return best;
}

}  // namespace crnsel::lp
