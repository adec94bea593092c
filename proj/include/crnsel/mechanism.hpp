#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace crnsel {

// Molar gas constant in J/(mol K). Arrhenius activation energies are read in J/mol.
inline constexpr double kGasConstant = 8.314462618;

struct ConstantRate {
  double k = 0.0;
  bool operator==(const ConstantRate&) const = default;
};

// k(T) = A * T^b * exp(-Ea / (R T))
struct ArrheniusRate {
  double A = 0.0;
  double b = 0.0;
  double Ea = 0.0;
  bool operator==(const ArrheniusRate&) const = default;
};

using RateLaw = std::variant<ConstantRate, ArrheniusRate>;

bool needs_temperature(const RateLaw& rate);
double rate_constant(const RateLaw& rate, std::optional<double> temperature);

// One side of a reaction equation, in file order.
struct StoichTerm {
  std::size_t species = 0;
  int coefficient = 1;
  bool operator==(const StoichTerm&) const = default;
};

struct Reaction {
  std::vector<StoichTerm> reactants;
  std::vector<StoichTerm> products;
  RateLaw rate = ConstantRate{};
  std::string label;
  // Only meaningful before expand_reversible(); a validated irreversible
  // mechanism never has reversible == true.
  bool reversible = false;
  double k_rev = 0.0;

  bool operator==(const Reaction&) const = default;
};

using StoichMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using OrderMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

class Mechanism {
 public:
  Mechanism() = default;
  // Validates every invariant; throws MechanismError with field context.
  Mechanism(std::vector<std::string> species, std::vector<Reaction> reactions);

  const std::vector<std::string>& species() const { return species_; }
  const std::vector<Reaction>& reactions() const { return reactions_; }
  std::size_t num_species() const { return species_.size(); }
  std::size_t num_reactions() const { return reactions_.size(); }

  std::optional<std::size_t> species_index(std::string_view name) const;
  bool has_reversible() const;
  bool needs_temperature() const;

  bool operator==(const Mechanism& other) const {
    return species_ == other.species_ && reactions_ == other.reactions_;
  }

 private:
  std::vector<std::string> species_;
  std::vector<Reaction> reactions_;
};

// "A + 2 B => C" using the mechanism's species names.
std::string equation_string(const Mechanism& mech, const Reaction& reaction);

// Parses the mechanism JSON document as written, reversible flags intact.
Mechanism parse_mechanism_document(std::string_view text);

// Parses and expands reversible entries; the result is irreversible.
Mechanism parse_mechanism(std::string_view text);
Mechanism load_mechanism(const std::string& path);

// Each reversible entry becomes forward then reverse, in place.
Mechanism expand_reversible(const Mechanism& mech);

// Serializes to the mechanism JSON schema; parse_mechanism inverts it.
std::string serialize_mechanism(const Mechanism& mech);

// Net change: entry (j, i) = products - reactants of species j in reaction i.
StoichMatrix stoich_matrix(const Mechanism& mech);
// Reaction orders: entry (i, j) = reactant coefficient of species j in reaction i.
OrderMatrix order_matrix(const Mechanism& mech);

// Element composition per species, e.g. {"H2O": {"H": 2, "O": 1}}.
using ElementTable = std::map<std::string, std::map<std::string, int>>;
ElementTable parse_element_table(std::string_view text);

// Returns one human-readable warning per unbalanced reaction or missing species.
std::vector<std::string> check_element_balance(const Mechanism& mech,
                                               const ElementTable& elements);

}  // namespace crnsel
