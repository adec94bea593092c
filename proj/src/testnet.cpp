#include "crnsel/testnet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "crnsel/error.hpp"

namespace crnsel {

namespace {

std::vector<StoichTerm> pick_side(std::mt19937_64& rng, std::size_t species, std::size_t max_side) {
  std::uniform_int_distribution<std::size_t> count_dist(1, std::min(max_side, species));
  std::vector<std::size_t> pool(species);
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);
  const std::size_t count = count_dist(rng);
  std::vector<StoichTerm> side;
  for (std::size_t n = 0; n < count; ++n) side.push_back({pool[n], 1});
  std::sort(side.begin(), side.end(),
            [](const StoichTerm& a, const StoichTerm& b) { return a.species < b.species; });
  return side;
}

bool changes_something(const std::vector<StoichTerm>& lhs, const std::vector<StoichTerm>& rhs) {
  std::map<std::size_t, int> net;
  for (const auto& t : lhs) net[t.species] -= t.coefficient;
  for (const auto& t : rhs) net[t.species] += t.coefficient;
  return std::any_of(net.begin(), net.end(), [](const auto& kv) { return kv.second != 0; });
}

}  // namespace

Mechanism random_network(std::uint64_t seed, const TestNetOptions& options) {
  if (options.species < 2) throw ValidationError("test network needs at least two species");
  if (options.reactions < 1) throw ValidationError("test network needs at least one reaction");
  if (!(options.k_min > 0.0) || options.k_max < options.k_min) {
    throw ValidationError("test network rate range must satisfy 0 < k_min <= k_max");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_k(std::log(options.k_min), std::log(options.k_max));

  std::vector<std::string> species;
  for (std::size_t j = 0; j < options.species; ++j) species.push_back(fmt::format("S{}", j));

  std::vector<Reaction> reactions;
  for (std::size_t i = 0; i < options.reactions; ++i) {
    Reaction r;
    do {
      r.reactants = pick_side(rng, options.species, std::max<std::size_t>(1, options.max_side));
      r.products = pick_side(rng, options.species, std::max<std::size_t>(1, options.max_side));
    } while (!changes_something(r.reactants, r.products));
    r.rate = ConstantRate{std::exp(log_k(rng))};
    reactions.push_back(std::move(r));
  }
  return Mechanism(std::move(species), std::move(reactions));
}

Eigen::VectorXd random_initial_state(std::uint64_t seed, std::size_t species, double lo, double hi) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::VectorXd X(static_cast<Eigen::Index>(species));
  for (Eigen::Index j = 0; j < X.size(); ++j) X(j) = dist(rng);
  return X;
}

}  // namespace crnsel
