#include "crnsel/study.hpp"

#include <cmath>

#include <fmt/format.h>
#include "json.hpp"

#include "crnsel/error.hpp"
#include "crnsel/io.hpp"

namespace crnsel {

std::vector<double> Schedule::sample_times() const {
  switch (kind) {
    case Kind::kUniform: return uniform_schedule(t0, tf, samples);
    case Kind::kGeometric: return geometric_schedule(t0, tf, samples, ratio);
    case Kind::kExplicit: break;
  }
  if (times.size() < 2) throw ValidationError("explicit schedule needs at least two times");
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    if (!(times[k + 1] > times[k])) {
      throw ValidationError(fmt::format("schedule times not strictly increasing at index {} ({} -> {})",
                                        k, times[k], times[k + 1]));
    }
  }
  return times;
}

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

std::size_t parse_count(const std::string& s, const std::string& where) {
  const double v = parse_csv_number(s, where);
  if (v < 2 || v != std::floor(v)) {
    throw ValidationError(fmt::format("{}: sample count must be an integer >= 2, got '{}'", where, s));
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

Schedule parse_schedule(std::string_view text) {
  const auto parts = split(text, ':');
  Schedule s;
  const std::string where = fmt::format("schedule '{}'", text);
  if (parts[0] == "uniform" || parts[0] == "geometric") {
    const bool geometric = parts[0] == "geometric";
    if (parts.size() != (geometric ? 5u : 4u)) {
      throw ValidationError(where + ": expected uniform:t0:tf:n or geometric:t0:tf:n:ratio");
    }
    s.kind = geometric ? Schedule::Kind::kGeometric : Schedule::Kind::kUniform;
    s.t0 = parse_csv_number(parts[1], where);
    s.tf = parse_csv_number(parts[2], where);
    s.samples = parse_count(parts[3], where);
    if (geometric) s.ratio = parse_csv_number(parts[4], where);
  } else if (parts[0] == "list" && parts.size() == 2) {
    s.kind = Schedule::Kind::kExplicit;
    for (const auto& t : split(parts[1], ',')) s.times.push_back(parse_csv_number(t, where));
  } else {
    throw ValidationError(where + ": unknown schedule kind (uniform, geometric, list)");
  }
  s.sample_times();  // validates
  return s;
}

Eigen::VectorXd ConditionSpec::initial_state(const Mechanism& mech) const {
  Eigen::VectorXd X = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mech.num_species()));
  for (const auto& [name, value] : initial) {
    const auto idx = mech.species_index(name);
    if (!idx) {
      throw ValidationError(fmt::format("condition '{}': unknown species '{}' in initial state",
                                        condition.label, name));
    }
    if (!std::isfinite(value) || value < 0.0) {
      throw ValidationError(fmt::format("condition '{}': initial concentration of '{}' is {}",
                                        condition.label, name, value));
    }
    X(static_cast<Eigen::Index>(*idx)) = value;
  }
  return X;
}

std::map<std::string, double> parse_initial_state(std::string_view text) {
  std::map<std::string, double> out;
  if (text.empty()) return out;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError(fmt::format("initial state entry '{}': expected name=value", item));
    }
    out[item.substr(0, eq)] = parse_csv_number(item.substr(eq + 1), "initial state '" + item + "'");
  }
  return out;
}

namespace {

Schedule schedule_from_json(const nlohmann::json& j, const std::string& where) {
  if (j.is_string()) return parse_schedule(j.get<std::string>());
  if (j.is_array()) {
    Schedule s;
    s.kind = Schedule::Kind::kExplicit;
    for (const auto& t : j) {
      if (!t.is_number()) throw ValidationError(where + ": schedule times must be numbers");
      s.times.push_back(t.get<double>());
    }
    s.sample_times();
    return s;
  }
  if (!j.is_object() || !j.contains("type")) {
    throw ValidationError(where + ": schedule must be a string, an array or an object with 'type'");
  }
  Schedule s;
  const auto type = j["type"].get<std::string>();
  if (type == "list") {
    return schedule_from_json(j.at("times"), where);
  }
  if (type != "uniform" && type != "geometric") {
    throw ValidationError(fmt::format("{}: unknown schedule type '{}'", where, type));
  }
  s.kind = type == "uniform" ? Schedule::Kind::kUniform : Schedule::Kind::kGeometric;
  s.t0 = j.value("t0", 0.0);
  s.tf = j.at("tf").get<double>();
  s.samples = j.at("samples").get<std::size_t>();
  s.ratio = j.value("ratio", 1.05);
  s.sample_times();
  return s;
}

}  // namespace

std::vector<ConditionSpec> parse_conditions(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("malformed conditions JSON: {}", e.what()));
  }
  if (!doc.is_array()) throw ValidationError("conditions: expected a JSON array");
  std::vector<ConditionSpec> out;
  for (std::size_t n = 0; n < doc.size(); ++n) {
    const auto& rec = doc[n];
    const std::string where = fmt::format("conditions[{}]", n);
    if (!rec.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& [key, _] : rec.items()) {
      if (key != "label" && key != "T" && key != "P" && key != "phi" && key != "X0" &&
          key != "schedule") {
        throw ValidationError(fmt::format("{}: unexpected field '{}'", where, key));
      }
    }
    try {
      ConditionSpec spec;
      spec.condition.label = rec.value("label", fmt::format("condition{}", n));
      if (rec.contains("T")) spec.condition.temperature = rec["T"].get<double>();
      if (rec.contains("P")) spec.condition.pressure = rec["P"].get<double>();
      if (rec.contains("phi")) spec.condition.phi = rec["phi"].get<double>();
      if (spec.condition.temperature && !(*spec.condition.temperature > 0.0)) {
        throw ValidationError(where + ".T: temperature must be positive");
      }
      if (!rec.contains("X0") || !rec["X0"].is_object()) {
        throw ValidationError(where + ".X0: expected an object of species concentrations");
      }
      for (const auto& [name, value] : rec["X0"].items()) {
        if (!value.is_number()) throw ValidationError(fmt::format("{}.X0.{}: expected a number", where, name));
        spec.initial[name] = value.get<double>();
      }
      if (!rec.contains("schedule")) throw ValidationError(where + ": missing 'schedule'");
      spec.schedule = schedule_from_json(rec["schedule"], where + ".schedule");
      out.push_back(std::move(spec));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{}: {}", where, e.what()));
    }
  }
  for (std::size_t a = 0; a < out.size(); ++a) {
    for (std::size_t b = a + 1; b < out.size(); ++b) {
      if (out[a].condition.label == out[b].condition.label) {
        throw ValidationError(fmt::format("conditions: duplicate label '{}'", out[a].condition.label));
      }
    }
  }
  return out;
}

}  // namespace crnsel
