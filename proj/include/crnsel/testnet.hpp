#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Core>

#include "crnsel/mechanism.hpp"

namespace crnsel {

struct TestNetOptions {
  std::size_t species = 4;
  std::size_t reactions = 6;
  double k_min = 0.1;  // rate constants are log-uniform in [k_min, k_max]
  double k_max = 10.0;
  std::size_t max_side = 2;  // species per reaction side
};

// Seeded random mass-action network with irreversible constant-rate reactions.
Mechanism random_network(std::uint64_t seed, const TestNetOptions& options = {});

// Concentrations uniform in [lo, hi], one per species.
Eigen::VectorXd random_initial_state(std::uint64_t seed, std::size_t species, double lo = 0.5,
                                     double hi = 1.5);

}  // namespace crnsel
