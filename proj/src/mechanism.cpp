#include "crnsel/mechanism.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include "json.hpp"

#include "crnsel/error.hpp"

namespace crnsel {

using ordered_json = nlohmann::ordered_json;

bool needs_temperature(const RateLaw& rate) {
  return std::holds_alternative<ArrheniusRate>(rate);
}

double rate_constant(const RateLaw& rate, std::optional<double> temperature) {
  if (const auto* c = std::get_if<ConstantRate>(&rate)) return c->k;
  const auto& arr = std::get<ArrheniusRate>(rate);
  if (!temperature) {
    throw ValidationError("Arrhenius rate requires a temperature");
  }
  const double T = *temperature;
  if (!(T > 0.0)) {
    throw ValidationError(fmt::format("temperature must be positive, got {}", T));
  }
  return arr.A * std::pow(T, arr.b) * std::exp(-arr.Ea / (kGasConstant * T));
}

namespace {

std::string equation_of(const std::vector<std::string>& species, const Reaction& r) {
  auto side = [&](const std::vector<StoichTerm>& terms) {
    std::string out;
    for (std::size_t n = 0; n < terms.size(); ++n) {
      if (n > 0) out += " + ";
      if (terms[n].coefficient != 1) out += fmt::format("{} ", terms[n].coefficient);
      out += species[terms[n].species];
    }
    return out;
  };
  return side(r.reactants) + (r.reversible ? " <=> " : " => ") + side(r.products);
}

void validate_side(const std::vector<StoichTerm>& side, std::size_t num_species,
                   const std::string& where) {
  if (side.empty()) throw MechanismError(where + ": must list at least one species");
  std::set<std::size_t> seen;
  for (const auto& term : side) {
    if (term.species >= num_species) {
      throw MechanismError(fmt::format("{}: species index {} out of range", where, term.species));
    }
    if (!seen.insert(term.species).second) {
      throw MechanismError(fmt::format("{}: species index {} listed twice", where, term.species));
    }
    if (term.coefficient < 1) {
      throw MechanismError(
          fmt::format("{}: nonpositive coefficient {}", where, term.coefficient));
    }
  }
}

void validate_rate(const RateLaw& rate, const std::string& where) {
  if (const auto* c = std::get_if<ConstantRate>(&rate)) {
    if (!std::isfinite(c->k)) throw MechanismError(where + ".rate.k: not finite");
    if (c->k < 0.0) throw MechanismError(fmt::format("{}.rate.k: negative rate {}", where, c->k));
    return;
  }
  const auto& a = std::get<ArrheniusRate>(rate);
  if (!std::isfinite(a.A) || !std::isfinite(a.b) || !std::isfinite(a.Ea)) {
    throw MechanismError(where + ".rate: Arrhenius parameters must be finite");
  }
  if (a.A < 0.0) throw MechanismError(fmt::format("{}.rate.A: negative prefactor {}", where, a.A));
}

}  // namespace

Mechanism::Mechanism(std::vector<std::string> species, std::vector<Reaction> reactions)
    : species_(std::move(species)), reactions_(std::move(reactions)) {
  std::unordered_set<std::string> names;
  for (std::size_t j = 0; j < species_.size(); ++j) {
    if (species_[j].empty()) throw MechanismError(fmt::format("species[{}]: empty name", j));
    if (!names.insert(species_[j]).second) {
      throw MechanismError(fmt::format("species[{}]: duplicate species name '{}'", j, species_[j]));
    }
  }
  for (std::size_t i = 0; i < reactions_.size(); ++i) {
    auto& r = reactions_[i];
    const std::string where = fmt::format("reactions[{}]", i);
    validate_side(r.reactants, species_.size(), where + ".reactants");
    validate_side(r.products, species_.size(), where + ".products");
    validate_rate(r.rate, where);
    if (r.reversible && (!std::isfinite(r.k_rev) || r.k_rev < 0.0)) {
      throw MechanismError(fmt::format("{}.k_rev: invalid reverse rate {}", where, r.k_rev));
    }
    std::map<std::size_t, int> net;
    for (const auto& t : r.reactants) net[t.species] -= t.coefficient;
    for (const auto& t : r.products) net[t.species] += t.coefficient;
    bool changes = false;
    for (const auto& [_, v] : net) changes = changes || v != 0;
    if (!changes) throw MechanismError(where + ": reaction changes no species");
    if (r.label.empty()) r.label = equation_of(species_, r);
  }
}

std::optional<std::size_t> Mechanism::species_index(std::string_view name) const {
  for (std::size_t j = 0; j < species_.size(); ++j) {
    if (species_[j] == name) return j;
  }
  return std::nullopt;
}

bool Mechanism::has_reversible() const {
  for (const auto& r : reactions_) {
    if (r.reversible) return true;
  }
  return false;
}

bool Mechanism::needs_temperature() const {
  for (const auto& r : reactions_) {
    if (crnsel::needs_temperature(r.rate)) return true;
  }
  return false;
}

std::string equation_string(const Mechanism& mech, const Reaction& reaction) {
  return equation_of(mech.species(), reaction);
}

namespace {

const std::set<std::string> kReactionKeys = {"reactants", "products", "rate",
                                             "reversible", "k_rev", "label"};

double read_number(const ordered_json& j, const std::string& where) {
  if (!j.is_number()) throw MechanismError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw MechanismError(where + ": not finite");
  return v;
}

std::vector<StoichTerm> read_side(const ordered_json& j, const Mechanism& names_only,
                                  const std::string& where) {
  if (!j.is_object()) throw MechanismError(where + ": expected an object of species: coefficient");
  std::vector<StoichTerm> side;
  for (const auto& [name, coef] : j.items()) {
    const std::string field = fmt::format("{}[\"{}\"]", where, name);
    auto idx = names_only.species_index(name);
    if (!idx) throw MechanismError(fmt::format("{}: unknown species '{}'", field, name));
    if (!coef.is_number_integer()) {
      if (coef.is_number() && coef.get<double>() <= 0.0) {
        throw MechanismError(field + ": nonpositive coefficient");
      }
      throw MechanismError(field + ": coefficient must be an integer");
    }
    const auto value = coef.get<long long>();
    if (value < 1) throw MechanismError(fmt::format("{}: nonpositive coefficient {}", field, value));
    side.push_back({*idx, static_cast<int>(value)});
  }
  return side;
}

RateLaw read_rate(const ordered_json& j, const std::string& where) {
  if (!j.is_object()) throw MechanismError(where + ": expected an object");
  if (j.contains("k")) {
    if (j.size() != 1) throw MechanismError(where + ": constant rate takes only 'k'");
    const double k = read_number(j["k"], where + ".k");
    if (k < 0.0) throw MechanismError(fmt::format("{}.k: negative rate {}", where, k));
    return ConstantRate{k};
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "A" && key != "b" && key != "Ea") {
      throw MechanismError(fmt::format("{}: unexpected field '{}'", where, key));
    }
  }
  if (!j.contains("A") || !j.contains("b") || !j.contains("Ea")) {
    throw MechanismError(where + ": expected {\"k\"} or {\"A\", \"b\", \"Ea\"}");
  }
  return ArrheniusRate{read_number(j["A"], where + ".A"), read_number(j["b"], where + ".b"),
                       read_number(j["Ea"], where + ".Ea")};
}

}  // namespace

Mechanism parse_mechanism_document(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw MechanismError(fmt::format("malformed mechanism JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw MechanismError("mechanism: top level must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "species" && key != "reactions" && key != "provenance") {
      throw MechanismError(fmt::format("mechanism: unexpected field '{}'", key));
    }
  }
  if (!doc.contains("species") || !doc["species"].is_array()) {
    throw MechanismError("species: expected an array of names");
  }
  if (!doc.contains("reactions") || !doc["reactions"].is_array()) {
    throw MechanismError("reactions: expected an array");
  }

  std::vector<std::string> species;
  for (std::size_t j = 0; j < doc["species"].size(); ++j) {
    const auto& s = doc["species"][j];
    if (!s.is_string()) throw MechanismError(fmt::format("species[{}]: expected a string", j));
    species.push_back(s.get<std::string>());
  }
  // Validates names before reactions refer to them.
  const Mechanism names_only(species, {});

  std::vector<Reaction> reactions;
  const auto& list = doc["reactions"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& entry = list[i];
    const std::string where = fmt::format("reactions[{}]", i);
    if (!entry.is_object()) throw MechanismError(where + ": expected an object");
    for (const auto& [key, _] : entry.items()) {
      if (!kReactionKeys.count(key)) {
        throw MechanismError(fmt::format("{}: unexpected field '{}'", where, key));
      }
    }
    for (const char* required : {"reactants", "products", "rate"}) {
      if (!entry.contains(required)) {
        throw MechanismError(fmt::format("{}: missing '{}'", where, required));
      }
    }
    Reaction r;
    r.reactants = read_side(entry["reactants"], names_only, where + ".reactants");
    r.products = read_side(entry["products"], names_only, where + ".products");
    r.rate = read_rate(entry["rate"], where + ".rate");
    if (entry.contains("reversible")) {
      if (!entry["reversible"].is_boolean()) {
        throw MechanismError(where + ".reversible: expected a boolean");
      }
      r.reversible = entry["reversible"].get<bool>();
    }
    if (r.reversible) {
      if (!entry.contains("k_rev")) {
        throw MechanismError(where + ": reversible reaction missing 'k_rev'");
      }
      r.k_rev = read_number(entry["k_rev"], where + ".k_rev");
    } else if (entry.contains("k_rev")) {
      throw MechanismError(where + ".k_rev: only allowed on reversible reactions");
    }
    if (entry.contains("label")) {
      if (!entry["label"].is_string()) throw MechanismError(where + ".label: expected a string");
      r.label = entry["label"].get<std::string>();
    }
    reactions.push_back(std::move(r));
  }
  return Mechanism(std::move(species), std::move(reactions));
}

Mechanism parse_mechanism(std::string_view text) {
  return expand_reversible(parse_mechanism_document(text));
}

Mechanism load_mechanism(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open mechanism file '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_mechanism(buf.str());
  } catch (const MechanismError& e) {
    throw MechanismError(fmt::format("{}: {}", path, e.what()));
  }
}

Mechanism expand_reversible(const Mechanism& mech) {
  std::vector<Reaction> out;
  out.reserve(mech.num_reactions() * 2);
  for (const auto& r : mech.reactions()) {
    if (!r.reversible) {
      out.push_back(r);
      continue;
    }
    Reaction fwd = r;
    fwd.reversible = false;
    fwd.k_rev = 0.0;
    Reaction rev;
    rev.reactants = r.products;
    rev.products = r.reactants;
    rev.rate = ConstantRate{r.k_rev};
    // Auto-generated labels track the equation; user labels get a suffix.
    if (r.label == equation_string(mech, r)) {
      fwd.label.clear();
    } else {
      rev.label = r.label + " (rev)";
    }
    out.push_back(std::move(fwd));
    out.push_back(std::move(rev));
  }
  return Mechanism(mech.species(), std::move(out));
}

std::string serialize_mechanism(const Mechanism& mech) {
  ordered_json doc;
  doc["species"] = mech.species();
  doc["reactions"] = ordered_json::array();
  for (const auto& r : mech.reactions()) {
    ordered_json entry;
    auto side = [&](const std::vector<StoichTerm>& terms) {
      ordered_json obj = ordered_json::object();
      for (const auto& t : terms) obj[mech.species()[t.species]] = t.coefficient;
      return obj;
    };
    entry["reactants"] = side(r.reactants);
    entry["products"] = side(r.products);
    if (const auto* c = std::get_if<ConstantRate>(&r.rate)) {
      entry["rate"] = {{"k", c->k}};
    } else {
      const auto& a = std::get<ArrheniusRate>(r.rate);
      entry["rate"] = {{"A", a.A}, {"b", a.b}, {"Ea", a.Ea}};
    }
    if (r.reversible) {
      entry["reversible"] = true;
      entry["k_rev"] = r.k_rev;
    }
    entry["label"] = r.label;
    doc["reactions"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

StoichMatrix stoich_matrix(const Mechanism& mech) {
  StoichMatrix M = StoichMatrix::Zero(static_cast<Eigen::Index>(mech.num_species()),
                                      static_cast<Eigen::Index>(mech.num_reactions()));
  for (std::size_t i = 0; i < mech.num_reactions(); ++i) {
    const auto& r = mech.reactions()[i];
    const auto col = static_cast<Eigen::Index>(i);
    for (const auto& t : r.reactants) M(static_cast<Eigen::Index>(t.species), col) -= t.coefficient;
    for (const auto& t : r.products) M(static_cast<Eigen::Index>(t.species), col) += t.coefficient;
  }
  return M;
}

OrderMatrix order_matrix(const Mechanism& mech) {
  OrderMatrix nu = OrderMatrix::Zero(static_cast<Eigen::Index>(mech.num_reactions()),
                                     static_cast<Eigen::Index>(mech.num_species()));
  for (std::size_t i = 0; i < mech.num_reactions(); ++i) {
    for (const auto& t : mech.reactions()[i].reactants) {
      nu(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t.species)) = t.coefficient;
    }
  }
  return nu;
}

ElementTable parse_element_table(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("malformed element table: {}", e.what()));
  }
  if (!doc.is_object()) throw ValidationError("element table: expected an object");
  ElementTable table;
  for (const auto& [species, comp] : doc.items()) {
    if (!comp.is_object()) {
      throw ValidationError(fmt::format("element table['{}']: expected an object", species));
    }
    for (const auto& [element, count] : comp.items()) {
      if (!count.is_number_integer() || count.get<int>() < 0) {
        throw ValidationError(
            fmt::format("element table['{}']['{}']: expected a nonnegative integer", species, element));
      }
      table[species][element] = count.get<int>();
    }
  }
  return table;
}

std::vector<std::string> check_element_balance(const Mechanism& mech,
                                               const ElementTable& elements) {
  std::vector<std::string> warnings;
  for (const auto& name : mech.species()) {
    if (!elements.count(name)) {
      warnings.push_back(fmt::format("species '{}' has no element composition", name));
    }
  }
  for (std::size_t i = 0; i < mech.num_reactions(); ++i) {
    const auto& r = mech.reactions()[i];
    std::map<std::string, long> balance;
    auto add = [&](const std::vector<StoichTerm>& side, int sign) {
      for (const auto& t : side) {
        auto it = elements.find(mech.species()[t.species]);
        if (it == elements.end()) continue;
        for (const auto& [el, n] : it->second) balance[el] += sign * t.coefficient * n;
      }
    };
    add(r.products, +1);
    add(r.reactants, -1);
    for (const auto& [el, net] : balance) {
      if (net != 0) {
        warnings.push_back(fmt::format("reaction {} ({}): element {} unbalanced by {:+}", i + 1,
                                       r.label, el, net));
      }
    }
  }
  return warnings;
}

}  // namespace crnsel
