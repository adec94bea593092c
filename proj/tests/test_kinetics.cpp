#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>

#include "crnsel/error.hpp"
#include "crnsel/kinetics.hpp"
#include "crnsel/mechanism.hpp"
#include "crnsel/testnet.hpp"
#include "oracles.hpp"

using namespace crnsel;

namespace {

Mechanism a_to_b(double k = 1.0) {
  return parse_mechanism(R"({"species": ["A", "B"], "reactions": [
    {"reactants": {"A": 1}, "products": {"B": 1}, "rate": {"k": )" + std::to_string(k) + "}}]}");
}

Condition cond() { return Condition{"c", {}, {}, {}}; }

}  // namespace

TEST_CASE("reaction rates") {
  SUBCASE("bimolecular substitution") {
    const auto mech = parse_mechanism(R"({"species": ["A", "B", "C"], "reactions": [
      {"reactants": {"A": 1, "B": 1}, "products": {"C": 1}, "rate": {"k": 2}}]})");
    const auto r = reaction_rates(mech, Eigen::Vector3d(1, 3, 0));
    CHECK(r(0) == doctest::Approx(6.0));
  }
  SUBCASE("zero concentrations give zero rates") {
    const auto mech = random_network(3, {5, 8});
    const auto r = reaction_rates(mech, Eigen::VectorXd::Zero(5));
    CHECK(r.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("Arrhenius without temperature dependence") {
    const auto mech = parse_mechanism(R"({"species": ["A", "B"], "reactions": [
      {"reactants": {"A": 1}, "products": {"B": 1}, "rate": {"A": 1, "b": 0, "Ea": 0}}]})");
    CHECK(reaction_rates(mech, Eigen::Vector2d(2, 0), 700.0)(0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(reaction_rates(mech, Eigen::Vector2d(2, 0)), ValidationError);
  }
  SUBCASE("second-order self reaction uses the square") {
    const auto mech = parse_mechanism(R"({"species": ["A", "B"], "reactions": [
      {"reactants": {"A": 2}, "products": {"B": 1}, "rate": {"k": 0.5}}]})");
    CHECK(reaction_rates(mech, Eigen::Vector2d(3, 0))(0) == doctest::Approx(4.5));
  }
}

TEST_CASE("euler step") {
  const auto M = stoich_matrix(a_to_b()).cast<double>().eval();
  SUBCASE("zero rates leave X unchanged") {
    const auto res = euler_step(Eigen::Vector2d(0.3, 0.7), M, Eigen::VectorXd::Zero(1), 0.1);
    CHECK(res.X == Eigen::Vector2d(0.3, 0.7));
    CHECK(res.clamped_species.empty());
  }
  SUBCASE("hand arithmetic") {
    const auto res = euler_step(Eigen::Vector2d(1, 0), M, Eigen::VectorXd::Ones(1), 0.1);
    CHECK(res.X(0) == doctest::Approx(0.9));
    CHECK(res.X(1) == doctest::Approx(0.1));
  }
  SUBCASE("negative results are clamped and reported") {
    const auto res = euler_step(Eigen::Vector2d(0.05, 0.95), M, Eigen::VectorXd::Ones(1), 0.1);
    CHECK(res.X(0) == 0.0);
    CHECK(res.X(1) == doctest::Approx(1.05));
    REQUIRE(res.clamped_species.size() == 1);
    CHECK(res.clamped_species[0] == 0);
  }
}

TEST_CASE("simulate closed A to B") {
  const auto mech = a_to_b();
  const auto result = simulate(mech, Eigen::Vector2d(1, 0), cond(), {0.0, 0.1, 0.2});
  const auto& X = result.trajectory.concentrations();
  CHECK(X(1, 0) < X(0, 0));
  CHECK(X(2, 0) < X(1, 0));
  for (Eigen::Index k = 0; k < X.rows(); ++k) CHECK(std::abs(X(k, 0) + X(k, 1) - 1.0) <= 1e-9);
  CHECK(result.clamps.empty());
}

TEST_CASE("simulate matches the analytic decay at t = 1") {
  const auto result = simulate(a_to_b(), Eigen::Vector2d(1, 0), cond(), {0.0, 1.0});
  CHECK(std::abs(result.trajectory.concentrations()(1, 0) - std::exp(-1.0)) <= 1e-4);
}

TEST_CASE("null dynamics keep X constant") {
  const auto mech = a_to_b(0.0);
  const auto result = simulate(mech, Eigen::Vector2d(0.4, 0.6), cond(), uniform_schedule(0, 5, 6));
  for (Eigen::Index k = 0; k < 6; ++k) {
    CHECK(result.trajectory.concentrations()(k, 0) == 0.4);
    CHECK(result.trajectory.concentrations()(k, 1) == 0.6);
  }
}

TEST_CASE("conservation along random networks with a known left null vector") {
  // One species per side: every reaction is an isomerization, so the total is conserved.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TestNetOptions opts{5, 7, 0.1, 10.0, 1};
    const auto mech = random_network(seed, opts);
    const Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(5);
    REQUIRE((v * oracle::net_stoich(mech)).cwiseAbs().maxCoeff() == 0.0);
    const auto x0 = random_initial_state(seed, 5);
    for (bool exact : {false, true}) {
      SimulateOptions so;
      so.exact_euler = exact;
      const auto traj = simulate(mech, x0, cond(), uniform_schedule(0, 1, 41), so).trajectory;
      const auto& X = traj.concentrations();
      for (Eigen::Index k = 1; k < X.rows(); ++k) {
        CHECK(std::abs(v.dot(X.row(k)) - v.dot(X.row(k - 1))) <= 1e-9);
      }
    }
  }
}

TEST_CASE("exact Euler mode records the discrete dynamics") {
  const auto mech = random_network(11, {4, 6});
  const auto M = oracle::net_stoich(mech);
  SimulateOptions so;
  so.exact_euler = true;
  const auto traj =
      simulate(mech, random_initial_state(11, 4), cond(), geometric_schedule(0, 0.5, 12, 1.1), so)
          .trajectory;
  for (std::size_t k = 0; k < traj.num_steps(); ++k) {
    const Eigen::VectorXd dx = (traj.concentrations().row(static_cast<Eigen::Index>(k) + 1) -
                                traj.concentrations().row(static_cast<Eigen::Index>(k)))
                                   .transpose();
    const Eigen::VectorXd model =
        M * traj.rates().row(static_cast<Eigen::Index>(k)).transpose() * traj.delta(k);
    CHECK((dx - model).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("stiffness beyond the sub-step budget is an integration error") {
  const auto mech = a_to_b(1e9);
  SimulateOptions so;
  so.max_substeps = 4;
  CHECK_THROWS_AS(simulate(mech, Eigen::Vector2d(1, 0), cond(), {0.0, 1.0}, so), IntegrationError);
}

TEST_CASE("schedules") {
  const auto u = uniform_schedule(0, 1, 5);
  REQUIRE(u.size() == 5);
  CHECK(u[2] == doctest::Approx(0.5));
  CHECK(u.back() == 1.0);
  const auto g = geometric_schedule(0, 1, 6, 2.0);
  REQUIRE(g.size() == 6);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(1.0));
  CHECK((g[2] - g[1]) == doctest::Approx(2.0 * (g[1] - g[0])));
  CHECK_THROWS_AS(uniform_schedule(1, 0, 5), ValidationError);
  CHECK_THROWS_AS(uniform_schedule(0, 1, 1), ValidationError);
}

TEST_CASE("trajectory CSV loading") {
  const auto mech = a_to_b(2.0);
  const auto traj =
      simulate(mech, Eigen::Vector2d(1, 0), cond(), {0.0, 0.1, 0.3}, {}).trajectory;
  const auto xcsv = format_trajectory_csv(traj, mech);
  const auto rcsv = format_rates_csv(traj, mech);

  SUBCASE("with a rates file the rates pass through") {
    const std::string custom = "t,A => B\n0,5\n0.1,6\n0.3,7\n";
    const auto loaded = parse_trajectory(xcsv, custom, mech, cond());
    CHECK(loaded.num_samples() == 3);
    CHECK(loaded.rates()(1, 0) == 6.0);
  }
  SUBCASE("without a rates file the rates are recomputed") {
    const auto with = parse_trajectory(xcsv, rcsv, mech, cond());
    const auto without = parse_trajectory(xcsv, std::nullopt, mech, cond());
    CHECK((with.rates() - without.rates()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((with.concentrations() - traj.concentrations()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("non-increasing times") {
    CHECK_THROWS_WITH_AS(parse_trajectory("t,A,B\n0,1,0\n0,1,0\n1,0.5,0.5\n", std::nullopt, mech, cond()),
                         doctest::Contains("increasing"), ValidationError);
  }
  SUBCASE("column mismatch") {
    CHECK_THROWS_AS(parse_trajectory("t,A\n0,1\n1,0.5\n", std::nullopt, mech, cond()), ValidationError);
  }
  SUBCASE("negative values") {
    CHECK_THROWS_AS(parse_trajectory("t,A,B\n0,1,0\n1,-0.5,0.5\n", std::nullopt, mech, cond()),
                    ValidationError);
  }
}
