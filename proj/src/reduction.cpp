#include "crnsel/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include <fmt/format.h>
#include "json.hpp"

#include "crnsel/error.hpp"

namespace crnsel {

UnionResult union_influential(const std::vector<LabeledMask>& masks) {
  UnionResult out;
  if (masks.empty()) return out;
  const std::size_t nr = masks.front().mask.num_reactions();
  for (const auto& m : masks) {
    if (m.mask.num_reactions() != nr) {
      throw ValidationError(fmt::format("mask '{}' has {} reactions, expected {}", m.label,
                                        m.mask.num_reactions(), nr));
    }
    for (std::size_t i = 0; i < nr; ++i) {
      if (m.mask.selected.row(static_cast<Eigen::Index>(i)).any()) out.provenance[i].insert(m.label);
    }
  }
  for (const auto& [i, _] : out.provenance) out.kept.push_back(i);
  return out;
}

ReducedMechanism emit_reduced(const Mechanism& parent, const std::vector<std::size_t>& kept,
                              const Provenance& provenance) {
  if (kept.empty()) throw ValidationError("reduced mechanism would have no reactions");
  std::vector<std::size_t> indices = kept;
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (indices.back() >= parent.num_reactions()) {
    throw ValidationError(fmt::format("kept reaction index {} out of range ({} reactions)",
                                      indices.back(), parent.num_reactions()));
  }

  std::vector<bool> used(parent.num_species(), false);
  for (std::size_t i : indices) {
    const auto& r = parent.reactions()[i];
    for (const auto& t : r.reactants) used[t.species] = true;
    for (const auto& t : r.products) used[t.species] = true;
  }
  std::vector<std::size_t> remap(parent.num_species(), 0);
  std::vector<std::string> species;
  for (std::size_t j = 0; j < parent.num_species(); ++j) {
    if (!used[j]) continue;
    remap[j] = species.size();
    species.push_back(parent.species()[j]);
  }
  std::vector<Reaction> reactions;
  for (std::size_t i : indices) {
    Reaction r = parent.reactions()[i];
    for (auto& t : r.reactants) t.species = remap[t.species];
    for (auto& t : r.products) t.species = remap[t.species];
    reactions.push_back(std::move(r));
  }

  ReducedMechanism out{Mechanism(std::move(species), std::move(reactions)), indices, {}};
  for (std::size_t i : indices) {
    auto it = provenance.find(i);
    if (it != provenance.end()) out.provenance[i] = it->second;
  }
  return out;
}

std::string serialize_reduced(const ReducedMechanism& reduced, const Mechanism& parent) {
  auto doc = nlohmann::ordered_json::parse(serialize_mechanism(reduced.mechanism));
  auto prov = nlohmann::ordered_json::array();
  for (std::size_t i : reduced.kept_reaction_indices) {
    nlohmann::ordered_json entry;
    entry["parent_index"] = i + 1;
    entry["label"] = parent.reactions()[i].label;
    auto it = reduced.provenance.find(i);
    entry["selected_by"] = it == reduced.provenance.end() ? std::vector<std::string>{}
                                                          : std::vector<std::string>(it->second.begin(), it->second.end());
    prov.push_back(std::move(entry));
  }
  doc["provenance"] = std::move(prov);
  return doc.dump(2) + "\n";
}

double characteristic_time(const Trajectory& traj, std::size_t species) {
  if (species >= traj.num_species()) {
    throw ValidationError(fmt::format("progress species index {} out of range", species));
  }
  const auto col = traj.concentrations().col(static_cast<Eigen::Index>(species));
  const double start = col(0);
  const double total = col(col.size() - 1) - start;
  const double scale = col.cwiseAbs().maxCoeff();
  if (total == 0.0 || std::abs(total) <= 1e-12 * scale) {
    throw ValidationError("progress species has zero net change over the trajectory");
  }
  const auto& t = traj.times();
  double prev = 0.0;
  for (Eigen::Index k = 1; k < col.size(); ++k) {
    const double frac = (col(k) - start) / total;
    if (frac >= 0.5) {
      const auto kk = static_cast<std::size_t>(k);
      return t[kk - 1] + (0.5 - prev) / (frac - prev) * (t[kk] - t[kk - 1]);
    }
    prev = frac;
  }
  return t.back();  // unreachable: the final sample has frac == 1
}

namespace {

ConditionComparison compare_one(const Mechanism& parent, const Mechanism& reduced,
                                const ConditionSpec& spec, std::size_t progress,
                                const CompareOptions& options) {
  ConditionComparison out;
  out.label = spec.condition.label;
  const auto times = spec.schedule.sample_times();
  const Eigen::VectorXd x0_full = spec.initial_state(parent);
  Eigen::VectorXd x0_red = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(reduced.num_species()));
  std::vector<std::size_t> parent_of(reduced.num_species());
  for (std::size_t j = 0; j < reduced.num_species(); ++j) {
    const auto idx = parent.species_index(reduced.species()[j]);
    if (!idx) {
      throw ValidationError(fmt::format("reduced species '{}' is not in the parent mechanism",
                                        reduced.species()[j]));
    }
    parent_of[j] = *idx;
    x0_red(static_cast<Eigen::Index>(j)) = x0_full(static_cast<Eigen::Index>(*idx));
  }

  const auto full = simulate(parent, x0_full, spec.condition, times, options.simulate);
  const auto red = simulate(reduced, x0_red, spec.condition, times, options.simulate);

  out.tau_full = characteristic_time(full.trajectory, progress);
  const auto progress_red = reduced.species_index(parent.species()[progress]);
  if (!progress_red) {
    throw ValidationError(fmt::format(
        "progress species '{}' has zero net change: the reduced mechanism no longer contains it",
        parent.species()[progress]));
  }
  out.tau_reduced = characteristic_time(red.trajectory, *progress_red);
  out.tau_deviation = std::abs(out.tau_reduced - out.tau_full) / out.tau_full;

  const auto& Xf = full.trajectory.concentrations();
  const auto& Xr = red.trajectory.concentrations();
  for (std::size_t j = 0; j < reduced.num_species(); ++j) {
    const auto pj = static_cast<Eigen::Index>(parent_of[j]);
    const auto rj = static_cast<Eigen::Index>(j);
    const double denom = Xf.col(pj).maxCoeff() + options.zero_norm_floor;
    for (Eigen::Index k = 0; k < Xf.rows(); ++k) {
      out.max_concentration_deviation =
          std::max(out.max_concentration_deviation, std::abs(Xr(k, rj) - Xf(k, pj)) / denom);
    }
  }
  return out;
}

}  // namespace

ComparisonReport compare(const Mechanism& parent, const Mechanism& reduced,
                         const std::vector<ConditionSpec>& conditions, const CompareOptions& options) {
  if (parent.num_reactions() == 0) throw ValidationError("parent mechanism has no reactions");
  if (options.jobs < 1) throw ValidationError("jobs must be at least 1");
  ComparisonReport report;
  std::size_t progress = 0;
  if (options.progress_species.empty()) {
    progress = parent.reactions().front().reactants.front().species;
  } else {
    const auto idx = parent.species_index(options.progress_species);
    if (!idx) {
      throw ValidationError(fmt::format("progress species '{}' is not in the parent mechanism",
                                        options.progress_species));
    }
    progress = *idx;
  }
  report.progress_species = parent.species()[progress];
  report.parent_reactions = parent.num_reactions();
  report.reduced_reactions = reduced.num_reactions();
  report.parent_species = parent.num_species();
  report.reduced_species = reduced.num_species();
  report.reaction_reduction_percent =
      100.0 * (1.0 - static_cast<double>(reduced.num_reactions()) / static_cast<double>(parent.num_reactions()));
  report.species_reduction_percent =
      parent.num_species() == 0
          ? 0.0
          : 100.0 * (1.0 - static_cast<double>(reduced.num_species()) / static_cast<double>(parent.num_species()));
  report.reaction_reduction_percent = std::clamp(report.reaction_reduction_percent, 0.0, 100.0);
  report.species_reduction_percent = std::clamp(report.species_reduction_percent, 0.0, 100.0);

  const auto n = static_cast<std::ptrdiff_t>(conditions.size());
  report.conditions.resize(conditions.size());
  std::vector<std::string> errors(conditions.size());
#pragma omp parallel for num_threads(options.jobs) schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    try {
      report.conditions[idx] = compare_one(parent, reduced, conditions[idx], progress, options);
    } catch (const std::exception& e) {
      errors[idx] = fmt::format("condition '{}': {}", conditions[idx].condition.label, e.what());
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw ComparisonError(e);
  }
  return report;
}

std::string format_report_json(const ComparisonReport& report) {
  nlohmann::ordered_json doc;
  doc["progress_species"] = report.progress_species;
  doc["parent"] = {{"species", report.parent_species}, {"reactions", report.parent_reactions}};
  doc["reduced"] = {{"species", report.reduced_species}, {"reactions", report.reduced_reactions}};
  doc["reaction_reduction_percent"] = report.reaction_reduction_percent;
  doc["species_reduction_percent"] = report.species_reduction_percent;
  doc["conditions"] = nlohmann::ordered_json::array();
  for (const auto& c : report.conditions) {
    doc["conditions"].push_back({{"label", c.label},
                                 {"tau_full", c.tau_full},
                                 {"tau_reduced", c.tau_reduced},
                                 {"tau_deviation", c.tau_deviation},
                                 {"max_concentration_deviation", c.max_concentration_deviation}});
  }
  return doc.dump(2) + "\n";
}

std::string format_report_text(const ComparisonReport& report) {
  std::string out;
  out += fmt::format("reactions: {} -> {} ({:.1f}% removed)\n", report.parent_reactions,
                     report.reduced_reactions, report.reaction_reduction_percent);
  out += fmt::format("species:   {} -> {} ({:.1f}% removed)\n", report.parent_species,
                     report.reduced_species, report.species_reduction_percent);
  out += fmt::format("progress species: {}\n\n", report.progress_species);
  std::size_t width = 9;
  for (const auto& c : report.conditions) width = std::max(width, c.label.size());
  out += fmt::format("{:<{}}  {:>14}  {:>14}  {:>10}  {:>12}\n", "condition", width, "tau_full",
                     "tau_reduced", "tau_dev_%", "max_conc_dev");
  for (const auto& c : report.conditions) {
    out += fmt::format("{:<{}}  {:>14.6e}  {:>14.6e}  {:>10.4f}  {:>12.4e}\n", c.label, width,
                       c.tau_full, c.tau_reduced, 100.0 * c.tau_deviation,
                       c.max_concentration_deviation);
  }
  return out;
}

}  // namespace crnsel
