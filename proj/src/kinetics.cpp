#include "crnsel/kinetics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "crnsel/error.hpp"
#include "crnsel/io.hpp"

namespace crnsel {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path));
  out << contents;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_csv_number(const std::string& field, const std::string& where) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin < end && *begin == ' ') ++begin;
  if (begin < end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError(fmt::format("{}: '{}' is not a number", where, field));
  }
  return value;
}

Trajectory::Trajectory(std::vector<double> times, RowMatrix concentrations, RowMatrix rates,
                       Condition condition)
    : times_(std::move(times)),
      X_(std::move(concentrations)),
      r_(std::move(rates)),
      condition_(std::move(condition)) {
  if (times_.size() < 2) throw ValidationError("trajectory needs at least two samples");
  const auto n = static_cast<Eigen::Index>(times_.size());
  if (X_.rows() != n || r_.rows() != n) {
    throw ValidationError(fmt::format("trajectory has {} times but {} concentration rows and {} rate rows",
                                      times_.size(), X_.rows(), r_.rows()));
  }
  deltas_.resize(times_.size() - 1);
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    if (!std::isfinite(times_[k]) || !std::isfinite(times_[k + 1]) || !(times_[k + 1] > times_[k])) {
      throw ValidationError(fmt::format("non-increasing times at samples {} and {} ({} -> {})", k,
                                        k + 1, times_[k], times_[k + 1]));
    }
    deltas_[k] = times_[k + 1] - times_[k];
  }
  auto check = [&](const RowMatrix& m, const char* what) {
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(k, c);
        if (!std::isfinite(v) || v < 0.0) {
          throw ValidationError(
              fmt::format("{} at sample {} column {} is {}; must be finite and nonnegative", what, k,
                          c, v));
        }
      }
    }
  };
  check(X_, "concentration");
  check(r_, "rate");
}

MassActionModel::MassActionModel(const Mechanism& mech, std::optional<double> temperature)
    : M_(stoich_matrix(mech).cast<double>()), k_(mech.num_reactions()) {
  if (mech.has_reversible()) {
    throw ValidationError("mechanism still has reversible entries; expand them first");
  }
  for (std::size_t i = 0; i < mech.num_reactions(); ++i) {
    const auto& r = mech.reactions()[i];
    if (needs_temperature(r.rate) && !temperature) {
      throw ValidationError(
          fmt::format("reaction {} ({}) uses an Arrhenius rate but no temperature was given", i + 1,
                      r.label));
    }
    k_(static_cast<Eigen::Index>(i)) = rate_constant(r.rate, temperature);
    reactants_.push_back(r.reactants);
  }
}

Eigen::VectorXd MassActionModel::rates(const Eigen::Ref<const Eigen::VectorXd>& X) const {
  Eigen::VectorXd r(k_.size());
  for (Eigen::Index i = 0; i < k_.size(); ++i) {
    double v = k_(i);
    for (const auto& t : reactants_[static_cast<std::size_t>(i)]) {
      const double x = std::max(0.0, X(static_cast<Eigen::Index>(t.species)));
      for (int p = 0; p < t.coefficient; ++p) v *= x;
    }
    r(i) = v;
  }
  return r;
}

Eigen::VectorXd MassActionModel::derivative(const Eigen::Ref<const Eigen::VectorXd>& X) const {
  return M_ * rates(X);
}

Eigen::VectorXd reaction_rates(const Mechanism& mech, const Eigen::Ref<const Eigen::VectorXd>& X,
                               std::optional<double> temperature) {
  if (static_cast<std::size_t>(X.size()) != mech.num_species()) {
    throw ValidationError(fmt::format("concentration vector has {} entries, mechanism has {} species",
                                      X.size(), mech.num_species()));
  }
  return MassActionModel(mech, temperature).rates(X);
}

EulerStepResult euler_step(const Eigen::Ref<const Eigen::VectorXd>& X, const Eigen::MatrixXd& M,
                           const Eigen::Ref<const Eigen::VectorXd>& r, double dt) {
  EulerStepResult out{X + M * r * dt, {}};
  for (Eigen::Index j = 0; j < out.X.size(); ++j) {
    if (out.X(j) < 0.0) {
      out.X(j) = 0.0;
      out.clamped_species.push_back(static_cast<std::size_t>(j));
    }
  }
  return out;
}

namespace {

struct IntervalResult {
  Eigen::VectorXd X;
  std::map<std::size_t, double> clamps;  // species -> most negative value
};

IntervalResult rk4_interval(const MassActionModel& model, const Eigen::VectorXd& X0, double t_begin,
                            double t_end, std::size_t substeps) {
  IntervalResult out{X0, {}};
  const double h = (t_end - t_begin) / static_cast<double>(substeps);
  Eigen::VectorXd& X = out.X;
  for (std::size_t s = 0; s < substeps; ++s) {
    const Eigen::VectorXd k1 = model.derivative(X);
    const Eigen::VectorXd k2 = model.derivative(X + 0.5 * h * k1);
    const Eigen::VectorXd k3 = model.derivative(X + 0.5 * h * k2);
    const Eigen::VectorXd k4 = model.derivative(X + h * k3);
    X += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    for (Eigen::Index j = 0; j < X.size(); ++j) {
      if (X(j) < 0.0) {
        auto [it, inserted] = out.clamps.emplace(static_cast<std::size_t>(j), X(j));
        if (!inserted) it->second = std::min(it->second, X(j));
        X(j) = 0.0;
      }
    }
  }
  return out;
}

double max_relative_change(const Eigen::VectorXd& coarse, const Eigen::VectorXd& fine) {
  const double scale = fine.cwiseAbs().maxCoeff();
  const double floor = std::max(1e-9 * scale, 1e-300);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < fine.size(); ++j) {
    const double denom = std::max(std::abs(fine(j)), floor);
    worst = std::max(worst, std::abs(fine(j) - coarse(j)) / denom);
  }
  return worst;
}

}  // namespace

SimulationResult simulate(const Mechanism& mech, const Eigen::Ref<const Eigen::VectorXd>& X0,
                          const Condition& condition, const std::vector<double>& sample_times,
                          const SimulateOptions& options) {
  const MassActionModel model(mech, condition.temperature);
  const std::size_t ns = mech.num_species();
  if (static_cast<std::size_t>(X0.size()) != ns) {
    throw ValidationError(
        fmt::format("initial state has {} entries, mechanism has {} species", X0.size(), ns));
  }
  for (Eigen::Index j = 0; j < X0.size(); ++j) {
    if (!std::isfinite(X0(j)) || X0(j) < 0.0) {
      throw ValidationError(fmt::format("initial concentration of '{}' is {}; must be >= 0",
                                        mech.species()[static_cast<std::size_t>(j)], X0(j)));
    }
  }
  if (sample_times.size() < 2) throw ValidationError("sample schedule needs at least two times");
  for (std::size_t k = 0; k + 1 < sample_times.size(); ++k) {
    if (!(sample_times[k + 1] > sample_times[k])) {
      throw ValidationError(fmt::format("sample times not strictly increasing at index {} ({} -> {})",
                                        k, sample_times[k], sample_times[k + 1]));
    }
  }

  const auto n = static_cast<Eigen::Index>(sample_times.size());
  RowMatrix X(n, static_cast<Eigen::Index>(ns));
  RowMatrix R(n, static_cast<Eigen::Index>(mech.num_reactions()));
  std::vector<ClampEvent> clamps;

  Eigen::VectorXd state = X0;
  std::size_t substeps = 1;
  for (Eigen::Index k = 0; k < n; ++k) {
    X.row(k) = state.transpose();
    const Eigen::VectorXd r = model.rates(state);
    R.row(k) = r.transpose();
    if (k + 1 == n) break;

    const double t0 = sample_times[static_cast<std::size_t>(k)];
    const double t1 = sample_times[static_cast<std::size_t>(k + 1)];
    const auto interval = static_cast<std::size_t>(k);
    if (options.exact_euler) {
      auto step = euler_step(state, model.stoich(), r, t1 - t0);
      for (std::size_t j : step.clamped_species) {
        const double raw = state(static_cast<Eigen::Index>(j)) +
                           model.stoich().row(static_cast<Eigen::Index>(j)).dot(r) * (t1 - t0);
        clamps.push_back({interval, j, raw});
      }
      state = std::move(step.X);
      continue;
    }

    // Start from half the previous interval's count so smooth stretches coarsen again.
    substeps = std::max<std::size_t>(1, substeps / 2);
    IntervalResult coarse = rk4_interval(model, state, t0, t1, substeps);
    while (true) {
      if (substeps * 2 > options.max_substeps) {
        throw IntegrationError(
            fmt::format("step-size underflow on interval [{}, {}]: no convergence within {} sub-steps",
                        t0, t1, options.max_substeps),
            t0, t1);
      }
      IntervalResult fine = rk4_interval(model, state, t0, t1, substeps * 2);
      substeps *= 2;
      if (max_relative_change(coarse.X, fine.X) < options.rel_tol) {
        for (const auto& [j, v] : fine.clamps) clamps.push_back({interval, j, v});
        state = std::move(fine.X);
        break;
      }
      coarse = std::move(fine);
    }
  }
  return {Trajectory(sample_times, std::move(X), std::move(R), condition), std::move(clamps)};
}

std::vector<double> uniform_schedule(double t0, double tf, std::size_t samples) {
  if (samples < 2) throw ValidationError("schedule needs at least two samples");
  if (!(tf > t0)) throw ValidationError(fmt::format("schedule end {} must exceed start {}", tf, t0));
  std::vector<double> t(samples);
  const double span = tf - t0;
  for (std::size_t k = 0; k < samples; ++k) {
    t[k] = t0 + span * static_cast<double>(k) / static_cast<double>(samples - 1);
  }
  t.back() = tf;
  return t;
}

std::vector<double> geometric_schedule(double t0, double tf, std::size_t samples, double ratio) {
  if (!(ratio > 0.0)) throw ValidationError("geometric schedule ratio must be positive");
  if (ratio == 1.0) return uniform_schedule(t0, tf, samples);
  if (samples < 2) throw ValidationError("schedule needs at least two samples");
  if (!(tf > t0)) throw ValidationError(fmt::format("schedule end {} must exceed start {}", tf, t0));
  // t_k = t0 + span * (ratio^k - 1) / (ratio^(n-1) - 1)
  const double denom = std::pow(ratio, static_cast<double>(samples - 1)) - 1.0;
  std::vector<double> t(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    t[k] = t0 + (tf - t0) * (std::pow(ratio, static_cast<double>(k)) - 1.0) / denom;
  }
  t.back() = tf;
  for (std::size_t k = 0; k + 1 < samples; ++k) {
    if (!(t[k + 1] > t[k])) {
      throw ValidationError("geometric schedule collapses: ratio too extreme for the sample count");
    }
  }
  return t;
}

namespace {

std::string format_matrix_csv(const std::vector<double>& times, const RowMatrix& m,
                              const std::vector<std::string>& names) {
  std::string out = "t";
  for (const auto& name : names) out += "," + name;
  out += "\n";
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    out += fmt::format("{}", times[static_cast<std::size_t>(k)]);
    for (Eigen::Index c = 0; c < m.cols(); ++c) out += fmt::format(",{}", m(k, c));
    out += "\n";
  }
  return out;
}

struct CsvTable {
  std::vector<double> times;
  RowMatrix values;
};

CsvTable parse_matrix_csv(const std::string& text, const std::vector<std::string>& names,
                          const std::string& what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(what + ": empty file");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "t") {
    throw ValidationError(what + ": header must start with 't'");
  }
  if (header.size() != names.size() + 1) {
    throw ValidationError(fmt::format("{}: column mismatch, expected {} data columns, found {}", what,
                                      names.size(), header.size() - 1));
  }
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (header[c + 1] != names[c]) {
      throw ValidationError(fmt::format("{}: column mismatch at column {}: expected '{}', found '{}'",
                                        what, c + 2, names[c], header[c + 1]));
    }
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError(fmt::format("{} line {}: expected {} fields, found {}", what, line_no,
                                        header.size(), fields.size()));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double v = parse_csv_number(fields[c], fmt::format("{} line {}", what, line_no));
      if (c > 0 && v < 0.0) {
        throw ValidationError(fmt::format("{} line {} column '{}': negative value {}", what, line_no,
                                          header[c], v));
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  CsvTable table;
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    table.times.push_back(rows[k][0]);
    for (std::size_t c = 0; c < names.size(); ++c) {
      table.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = rows[k][c + 1];
    }
  }
  for (std::size_t k = 0; k + 1 < table.times.size(); ++k) {
    if (!(table.times[k + 1] > table.times[k])) {
      throw ValidationError(fmt::format("{}: non-increasing times at rows {} and {} ({} -> {})", what,
                                        k + 1, k + 2, table.times[k], table.times[k + 1]));
    }
  }
  return table;
}

std::vector<std::string> reaction_labels(const Mechanism& mech) {
  std::vector<std::string> labels;
  for (const auto& r : mech.reactions()) labels.push_back(r.label);
  return labels;
}

}  // namespace

std::string format_trajectory_csv(const Trajectory& traj, const Mechanism& mech) {
  return format_matrix_csv(traj.times(), traj.concentrations(), mech.species());
}

std::string format_rates_csv(const Trajectory& traj, const Mechanism& mech) {
  return format_matrix_csv(traj.times(), traj.rates(), reaction_labels(mech));
}

Trajectory parse_trajectory(const std::string& concentrations_csv,
                            const std::optional<std::string>& rates_csv, const Mechanism& mech,
                            const Condition& condition) {
  auto conc = parse_matrix_csv(concentrations_csv, mech.species(), "trajectory CSV");
  RowMatrix rates;
  if (rates_csv) {
    auto r = parse_matrix_csv(*rates_csv, reaction_labels(mech), "rates CSV");
    if (r.times != conc.times) {
      throw ValidationError("rates CSV time grid differs from the trajectory CSV");
    }
    rates = std::move(r.values);
  } else {
    const MassActionModel model(mech, condition.temperature);
    rates.resize(conc.values.rows(), static_cast<Eigen::Index>(mech.num_reactions()));
    for (Eigen::Index k = 0; k < conc.values.rows(); ++k) {
      rates.row(k) = model.rates(conc.values.row(k).transpose()).transpose();
    }
  }
  return Trajectory(std::move(conc.times), std::move(conc.values), std::move(rates), condition);
}

Trajectory load_trajectory(const std::string& concentrations_path,
                           const std::optional<std::string>& rates_path, const Mechanism& mech,
                           const Condition& condition) {
  std::optional<std::string> rates_text;
  if (rates_path) rates_text = read_text_file(*rates_path);
  return parse_trajectory(read_text_file(concentrations_path), rates_text, mech, condition);
}

}  // namespace crnsel
