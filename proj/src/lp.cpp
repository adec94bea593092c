#include "crnsel/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/LU>
#include <fmt/format.h>

#include "crnsel/error.hpp"

namespace crnsel::lp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void LinearProgram::validate() const {
  const auto n = c.size();
  if (A.cols() != n && A.rows() > 0) {
    throw ValidationError(fmt::format("LP: A has {} columns for {} variables", A.cols(), n));
  }
  if (b.size() != A.rows()) {
    throw ValidationError(fmt::format("LP: b has {} entries for {} rows", b.size(), A.rows()));
  }
  if (lower.size() != n || upper.size() != n) throw ValidationError("LP: bound vectors wrong size");
  if (!c.allFinite() || !A.allFinite() || !b.allFinite()) {
    throw ValidationError("LP: objective, matrix and right-hand side must be finite");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) > upper(j) ||
        lower(j) == kInf || upper(j) == -kInf) {
      throw ValidationError(
          fmt::format("LP: invalid bounds [{}, {}] on variable {}", lower(j), upper(j), j));
    }
  }
}

void IntegerProgram::validate() const {
  base.validate();
  if (integral.size() != base.num_variables()) {
    throw ValidationError("IP: integrality mask length differs from variable count");
  }
  for (std::size_t j = 0; j < integral.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (integral[j] && (base.lower(jj) < 0.0 || base.upper(jj) > 1.0)) {
      throw ValidationError(fmt::format(
          "IP: integral variable {} has bounds [{}, {}] outside [0, 1]", j, base.lower(jj),
          base.upper(jj)));
    }
  }
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNodeLimit: return "node-limit";
  }
  return "unknown";
}

double max_violation(const LinearProgram& lp, const Eigen::VectorXd& x) {
  double worst = 0.0;
  if (lp.A.rows() > 0) {
    const Eigen::VectorXd Ax = lp.A * x;
    for (Eigen::Index i = 0; i < Ax.size(); ++i) {
      worst = std::max(worst, (Ax(i) - lp.b(i)) / (1.0 + std::abs(lp.b(i))));
    }
  }
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    worst = std::max(worst, lp.lower(j) - x(j));
    worst = std::max(worst, x(j) - lp.upper(j));
  }
  return worst;
}

namespace {

// Working problem in standard form: [A_s | I | -E] z = b_s over structural,
// slack and artificial columns. Rows are scaled to unit max-norm.
class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SimplexOptions& options) : lp_(lp), options_(options) {}

  SolveResult run();

 private:
  enum class PhaseResult { kOptimal, kUnbounded };

  Eigen::Index num_structural() const { return lp_.c.size(); }

  void add_column_to(Eigen::Index var, double scale, Eigen::VectorXd& v) const {
    if (var < n_) {
      v += scale * A_.col(var);
    } else if (var < n_ + m_) {
      v(var - n_) += scale;
    } else {
      v(art_row_[static_cast<std::size_t>(var - n_ - m_)]) -= scale;
    }
  }

  Eigen::VectorXd column(Eigen::Index var) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m_);
    add_column_to(var, 1.0, v);
    return v;
  }

  void refactor();
  PhaseResult iterate(const Eigen::VectorXd& cost);

  const LinearProgram& lp_;
  SimplexOptions options_;

  Eigen::Index n_ = 0;  // structural
  Eigen::Index m_ = 0;  // rows kept after dropping empty ones
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  std::vector<Eigen::Index> art_row_;

  Eigen::VectorXd lo_, up_, value_;
  std::vector<Eigen::Index> head_;  // basic variable per row
  std::vector<Eigen::Index> pos_;   // row of a basic variable, -1 when nonbasic
  Eigen::MatrixXd Binv_;
  std::size_t iterations_ = 0;
  std::size_t max_iterations_ = 0;
  std::size_t since_refactor_ = 0;
};

void Simplex::refactor() {
  since_refactor_ = 0;
  if (m_ == 0) return;
  Eigen::MatrixXd B(m_, m_);
  for (Eigen::Index r = 0; r < m_; ++r) B.col(r) = column(head_[static_cast<std::size_t>(r)]);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  Binv_ = lu.inverse();
  Eigen::VectorXd rhs = b_;
  const Eigen::Index total = value_.size();
  for (Eigen::Index j = 0; j < total; ++j) {
    if (pos_[static_cast<std::size_t>(j)] < 0 && value_(j) != 0.0) add_column_to(j, -value_(j), rhs);
  }
  const Eigen::VectorXd xb = Binv_ * rhs;
  for (Eigen::Index r = 0; r < m_; ++r) value_(head_[static_cast<std::size_t>(r)]) = xb(r);
}

Simplex::PhaseResult Simplex::iterate(const Eigen::VectorXd& cost) {
  const Eigen::Index total = value_.size();
  bool bland = false;
  std::size_t stalled = 0;
  Eigen::VectorXd cb(m_);
  while (true) {
    if (since_refactor_ >= options_.refactor_interval) refactor();
    for (Eigen::Index r = 0; r < m_; ++r) cb(r) = cost(head_[static_cast<std::size_t>(r)]);
    const Eigen::VectorXd y = Binv_.transpose() * cb;
    const Eigen::VectorXd dstruct = cost.head(n_) - A_.transpose() * y;

    // Pricing.
    Eigen::Index entering = -1;
    double entering_dir = 0.0;
    double best = 0.0;
    for (Eigen::Index j = 0; j < total; ++j) {
      if (pos_[static_cast<std::size_t>(j)] >= 0 || lo_(j) == up_(j)) continue;
      double d;
      if (j < n_) {
        d = dstruct(j);
      } else if (j < n_ + m_) {
        d = cost(j) - y(j - n_);
      } else {
        d = cost(j) + y(art_row_[static_cast<std::size_t>(j - n_ - m_)]);
      }
      double dir = 0.0;
      const bool at_lower = value_(j) == lo_(j);
      const bool at_upper = value_(j) == up_(j);
      if (d < -Tolerances::kOptimality && !at_upper) {
        dir = 1.0;
      } else if (d > Tolerances::kOptimality && !at_lower) {
        dir = -1.0;
      }
      if (dir == 0.0) continue;
      if (bland) {
        entering = j;
        entering_dir = dir;
        break;
      }
      if (std::abs(d) > best) {
        best = std::abs(d);
        entering = j;
        entering_dir = dir;
      }
    }
    if (entering < 0) return PhaseResult::kOptimal;

    if (++iterations_ > max_iterations_) {
      throw SolverError(fmt::format(
          "simplex iteration limit {} exceeded ({} rows, {} variables, entering {}, bland={})",
          max_iterations_, m_, n_, entering, bland));
    }

    const Eigen::VectorXd alpha = Binv_ * column(entering);
    // Ratio test: basic r moves by -dir * alpha_r per unit step.
    double theta = up_(entering) - lo_(entering);  // bound flip
    Eigen::Index leave_row = -1;
    double leave_pivot = 0.0;
    for (Eigen::Index r = 0; r < m_; ++r) {
      const double delta = -entering_dir * alpha(r);
      if (std::abs(delta) <= Tolerances::kPivot) continue;
      const Eigen::Index var = head_[static_cast<std::size_t>(r)];
      double limit;
      if (delta < 0.0) {
        if (lo_(var) == -kInf) continue;
        limit = (value_(var) - lo_(var)) / -delta;
      } else {
        if (up_(var) == kInf) continue;
        limit = (up_(var) - value_(var)) / delta;
      }
      limit = std::max(limit, 0.0);
      bool take = false;
      if (limit < theta - 1e-12 * (1.0 + std::abs(limit))) {
        take = true;
      } else if (leave_row >= 0 && limit <= theta + 1e-12 * (1.0 + std::abs(limit))) {
        // Tie: Bland takes the smallest variable index, otherwise the larger pivot.
        const Eigen::Index current = head_[static_cast<std::size_t>(leave_row)];
        take = bland ? var < current : std::abs(alpha(r)) > std::abs(leave_pivot);
      }
      if (take) {
        theta = limit;
        leave_row = r;
        leave_pivot = alpha(r);
      }
    }
    if (theta == kInf) return PhaseResult::kUnbounded;

    if (theta > 1e-12) {
      stalled = 0;
      bland = false;
    } else if (++stalled > options_.stall_threshold) {
      bland = true;
    }

    value_(entering) += entering_dir * theta;
    for (Eigen::Index r = 0; r < m_; ++r) {
      value_(head_[static_cast<std::size_t>(r)]) -= entering_dir * theta * alpha(r);
    }

    if (leave_row < 0) {
      value_(entering) = entering_dir > 0 ? up_(entering) : lo_(entering);
      continue;
    }

    const Eigen::Index leaving = head_[static_cast<std::size_t>(leave_row)];
    const double delta = -entering_dir * alpha(leave_row);
    value_(leaving) = delta < 0.0 ? lo_(leaving) : up_(leaving);
    pos_[static_cast<std::size_t>(leaving)] = -1;
    pos_[static_cast<std::size_t>(entering)] = leave_row;
    head_[static_cast<std::size_t>(leave_row)] = entering;

    // Product-form update of the explicit inverse.
    const double pivot = alpha(leave_row);
    Binv_.row(leave_row) /= pivot;
    for (Eigen::Index r = 0; r < m_; ++r) {
      if (r != leave_row && alpha(r) != 0.0) Binv_.row(r) -= alpha(r) * Binv_.row(leave_row);
    }
    ++since_refactor_;
  }
}

SolveResult Simplex::run() {
  n_ = num_structural();
  SolveResult result;

  // Row scaling; all-zero rows are checked directly and dropped.
  std::vector<Eigen::Index> kept;
  std::vector<double> scales;
  for (Eigen::Index i = 0; i < lp_.A.rows(); ++i) {
    const double row_max = n_ > 0 ? lp_.A.row(i).cwiseAbs().maxCoeff() : 0.0;
    if (row_max == 0.0) {
      if (lp_.b(i) < -Tolerances::kFeasibility * (1.0 + std::abs(lp_.b(i)))) {
        result.status = SolveStatus::kInfeasible;
        return result;
      }
      continue;
    }
    kept.push_back(i);
    scales.push_back(1.0 / row_max);
  }
  m_ = static_cast<Eigen::Index>(kept.size());
  A_.resize(m_, n_);
  b_.resize(m_);
  for (Eigen::Index r = 0; r < m_; ++r) {
    A_.row(r) = lp_.A.row(kept[static_cast<std::size_t>(r)]) * scales[static_cast<std::size_t>(r)];
    b_(r) = lp_.b(kept[static_cast<std::size_t>(r)]) * scales[static_cast<std::size_t>(r)];
  }

  // Nonbasic structurals start at a finite bound (or zero when free).
  Eigen::VectorXd x0(n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    x0(j) = std::isfinite(lp_.lower(j)) ? lp_.lower(j) : (std::isfinite(lp_.upper(j)) ? lp_.upper(j) : 0.0);
  }
  const Eigen::VectorXd slack = m_ > 0 ? Eigen::VectorXd(b_ - A_ * x0) : Eigen::VectorXd(0);
  for (Eigen::Index r = 0; r < m_; ++r) {
    if (slack(r) < 0.0) art_row_.push_back(r);
  }
  const Eigen::Index num_art = static_cast<Eigen::Index>(art_row_.size());
  const Eigen::Index total = n_ + m_ + num_art;

  lo_.resize(total);
  up_.resize(total);
  value_ = Eigen::VectorXd::Zero(total);
  lo_.head(n_) = lp_.lower;
  up_.head(n_) = lp_.upper;
  value_.head(n_) = x0;
  lo_.segment(n_, m_).setZero();
  up_.segment(n_, m_).setConstant(kInf);
  lo_.tail(num_art).setZero();
  up_.tail(num_art).setConstant(kInf);

  head_.assign(static_cast<std::size_t>(m_), 0);
  pos_.assign(static_cast<std::size_t>(total), -1);
  {
    std::size_t a = 0;
    for (Eigen::Index r = 0; r < m_; ++r) {
      Eigen::Index var = n_ + r;
      if (a < art_row_.size() && art_row_[a] == r) {
        var = n_ + m_ + static_cast<Eigen::Index>(a);
        ++a;
      }
      head_[static_cast<std::size_t>(r)] = var;
      pos_[static_cast<std::size_t>(var)] = r;
    }
  }
  max_iterations_ = options_.max_iterations > 0
                        ? options_.max_iterations
                        : std::max<std::size_t>(10000, 50 * static_cast<std::size_t>(m_ + n_));
  refactor();

  if (num_art > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(total);
    phase1.tail(num_art).setOnes();
    iterate(phase1);  // bounded below by zero, never unbounded
    refactor();
    for (Eigen::Index a = 0; a < num_art; ++a) {
      const Eigen::Index row = art_row_[static_cast<std::size_t>(a)];
      if (value_(n_ + m_ + a) > Tolerances::kFeasibility * (1.0 + std::abs(b_(row)))) {
        result.status = SolveStatus::kInfeasible;
        result.iterations = iterations_;
        return result;
      }
    }
    // Artificials are pinned at zero from here on.
    up_.tail(num_art).setZero();
    for (Eigen::Index a = 0; a < num_art; ++a) {
      if (pos_[static_cast<std::size_t>(n_ + m_ + a)] < 0) value_(n_ + m_ + a) = 0.0;
    }
  }

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(total);
  cost.head(n_) = lp_.c;
  if (iterate(cost) == PhaseResult::kUnbounded) {
    result.status = SolveStatus::kUnbounded;
    result.iterations = iterations_;
    return result;
  }
  refactor();

  result.status = SolveStatus::kOptimal;
  result.x = value_.head(n_);
  for (Eigen::Index j = 0; j < n_; ++j) result.x(j) = std::clamp(result.x(j), lp_.lower(j), lp_.upper(j));
  result.objective = lp_.c.dot(result.x);
  result.iterations = iterations_;
  return result;
}

}  // namespace

SolveResult solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  lp.validate();
  return Simplex(lp, options).run();
}

void write_tableau(std::ostream& out, const LinearProgram& lp) {
  out << fmt::format("# minimize c.x s.t. A x <= b, lower <= x <= upper\n");
  out << fmt::format("variables {} rows {}\n", lp.num_variables(), lp.num_rows());
  out << "c";
  for (Eigen::Index j = 0; j < lp.c.size(); ++j) out << fmt::format(" {}", lp.c(j));
  out << "\nlower";
  for (Eigen::Index j = 0; j < lp.lower.size(); ++j) out << fmt::format(" {}", lp.lower(j));
  out << "\nupper";
  for (Eigen::Index j = 0; j < lp.upper.size(); ++j) out << fmt::format(" {}", lp.upper(j));
  out << "\n";
  for (Eigen::Index i = 0; i < lp.A.rows(); ++i) {
    out << fmt::format("row {}:", i);
    for (Eigen::Index j = 0; j < lp.A.cols(); ++j) out << fmt::format(" {}", lp.A(i, j));
    out << fmt::format(" <= {}\n", lp.b(i));
  }
}

std::string format_tableau(const IntegerProgram& ip) {
  std::ostringstream out;
  write_tableau(out, ip.base);
  out << "integral";
  for (bool flag : ip.integral) out << (flag ? " 1" : " 0");
  out << "\n";
  return out.str();
}

}  // namespace crnsel::lp
