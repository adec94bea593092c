#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "crnsel/error.hpp"
#include "crnsel/selection.hpp"
#include "crnsel/testnet.hpp"
#include "oracles.hpp"

using namespace crnsel;

namespace {

Condition cond() { return Condition{"c", {}, {}, {}}; }

Mechanism a_to_b() {
  return parse_mechanism(R"({"species": ["A", "B"], "reactions": [
    {"reactants": {"A": 1}, "products": {"B": 1}, "rate": {"k": 1}}]})");
}

Mechanism fast_slow() {
  return parse_mechanism(R"({"species": ["A", "B"], "reactions": [
    {"reactants": {"A": 1}, "products": {"B": 1}, "rate": {"k": 10}, "label": "fast"},
    {"reactants": {"A": 1}, "products": {"B": 1}, "rate": {"k": 0.1}, "label": "slow"}]})");
}

Trajectory single_step(RowMatrix X, RowMatrix r, double dt) {
  return Trajectory({0.0, dt}, std::move(X), std::move(r), cond());
}

Trajectory hand_step() {
  RowMatrix X(2, 2);
  X << 1, 0, 0.9, 0.1;
  RowMatrix r(2, 1);
  r << 1, 0.9;
  return single_step(X, r, 0.1);
}

SelectionConfig with(double eps, double beta, std::size_t horizon, SelectionMode mode) {
  SelectionConfig c;
  c.epsilon = eps;
  c.beta = beta;
  c.horizon = horizon;
  c.mode = mode;
  return c;
}

Eigen::MatrixXd dstoich(const Mechanism& mech) { return stoich_matrix(mech).cast<double>(); }

}  // namespace

TEST_CASE("concentration error and normalization by hand") {
  const auto traj = hand_step();
  const auto M = dstoich(a_to_b());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd half = Eigen::VectorXd::Constant(1, 0.5);
  CHECK(concentration_error(traj, M, 0, 0, zero) == doctest::Approx(0.1));
  CHECK(concentration_error(traj, M, 1, 0, zero) == doctest::Approx(0.1));
  CHECK(concentration_error(traj, M, 0, 0, half) == doctest::Approx(0.05));
  CHECK(normalization(traj, M, 0, 0) == doctest::Approx(0.1));
  CHECK(normalization(traj, M, 1, 0) == doctest::Approx(0.1));
  CHECK_THROWS_AS(concentration_error(traj, M, 2, 0, zero), ValidationError);
  CHECK_THROWS_AS(normalization(traj, M, 0, 1), ValidationError);
}

TEST_CASE("normalization sums absolute contributions") {
  const auto mech = parse_mechanism(R"({"species": ["A", "B"], "reactions": [
    {"reactants": {"A": 1}, "products": {"B": 1}, "rate": {"k": 1}},
    {"reactants": {"B": 1}, "products": {"A": 1}, "rate": {"k": 1}}]})");
  RowMatrix X(2, 2);
  X << 1, 1, 1, 1;
  RowMatrix r(2, 2);
  r << 2, 3, 2, 3;
  const auto traj = single_step(X, r, 0.1);
  CHECK(normalization(traj, dstoich(mech), 0, 0) == doctest::Approx(0.5));
  RowMatrix r0 = RowMatrix::Zero(2, 2);
  CHECK(normalization(single_step(X, r0, 0.1), dstoich(mech), 0, 0) == 0.0);
}

TEST_CASE("exact Euler data has zero error at all-ones weights") {
  const auto mech = random_network(4, {4, 6});
  const auto traj = oracle::exact_euler(mech, random_initial_state(4, 4), 8, 0.05);
  const auto M = dstoich(mech);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(6);
  for (std::size_t k = 0; k < traj.num_steps(); ++k) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(concentration_error(traj, M, j, k, ones) <= 1e-14);
  }
}

TEST_CASE("chunk problem dimensions") {
  const auto mech = random_network(2, {3, 4});
  const auto traj = oracle::exact_euler(mech, random_initial_state(2, 3), 6, 0.05);
  const auto M = dstoich(mech);
  const auto p = build_chunk_problem(traj, M, with(0.2, 3, 3, SelectionMode::kExact), {0, 3});
  CHECK(p.num_variables() == 12);
  CHECK(p.program.base.num_variables() == 12);
  CHECK(p.program.base.num_rows() == expected_row_count(3, 3, false));
  CHECK(p.variable(2, 1) == 6);

  SUBCASE("one reaction, two species, one step") {
    const auto q = build_chunk_problem(hand_step(), dstoich(a_to_b()), SelectionConfig{}, {0, 1});
    CHECK(q.step_rows == 4);
    CHECK(q.drift_rows == 4);
    CHECK(q.program.base.num_rows() == 8);
    CHECK(q.program.base.lower.isZero());
    CHECK(q.program.base.upper == Eigen::VectorXd::Ones(1));
  }
  SUBCASE("prefix drift rows") {
    auto cfg = with(0.2, 3, 5, SelectionMode::kExact);
    cfg.prefix_drift = true;
    const auto traj6 = oracle::exact_euler(mech, random_initial_state(2, 3), 5, 0.05);
    const auto q = build_chunk_problem(traj6, M, cfg, {0, 5});
    CHECK(q.prefix_rows == 2 * 3 * 3);
    CHECK(q.program.base.num_rows() == 2 * 3 * 5 + 2 * 3 + 2 * 3 * 3);
    CHECK(q.program.base.num_rows() == expected_row_count(3, 5, true));
  }
  SUBCASE("empty range") {
    CHECK_THROWS_AS(build_chunk_problem(traj, M, SelectionConfig{}, {0, 0}), ValidationError);
    CHECK_THROWS_AS(build_chunk_problem(traj, M, SelectionConfig{}, {4, 3}), ValidationError);
  }
  SUBCASE("all-ones weights satisfy every row on exact Euler data") {
    const auto& lp = p.program.base;
    const Eigen::VectorXd slack = lp.b - lp.A * Eigen::VectorXd::Ones(12);
    CHECK(slack.minCoeff() >= -1e-12);
  }
}

TEST_CASE("solve_chunk hand examples") {
  const auto mech = a_to_b();
  const auto traj = oracle::exact_euler(mech, Eigen::Vector2d(1, 0), 1, 0.1);
  const auto M = dstoich(mech);
  for (auto mode : {SelectionMode::kExact, SelectionMode::kRelaxed}) {
    CAPTURE(to_string(mode));
    const auto half = with(0.5, 3, 1, mode);
    const auto s = solve_chunk(build_chunk_problem(traj, M, half, {0, 1}), half);
    // Binary: only w = 1 fits. Relaxed: error (1 - w) N <= 0.5 N first holds at w = 0.5.
    const double expected = mode == SelectionMode::kExact ? 1.0 : 0.5;
    CHECK(s.weights[0](0) == doctest::Approx(expected));
    CHECK(s.objective == doctest::Approx(expected));

    const auto loose = with(1.0, 1, 1, mode);
    const auto z = solve_chunk(build_chunk_problem(traj, M, loose, {0, 1}), loose);
    CHECK(z.weights[0](0) == doctest::Approx(0.0));
    CHECK(z.objective == doctest::Approx(0.0));
  }
  const auto exact = with(0.5, 3, 1, SelectionMode::kExact);
  CHECK(oracle::brute_force_min_selection(traj, M, exact, {0, 1}) == 1);
}

TEST_CASE("fast and slow duplicate pathways keep only the fast one") {
  const auto mech = fast_slow();
  const auto traj = oracle::exact_euler(mech, Eigen::Vector2d(1, 0), 1, 0.01);
  const auto M = dstoich(mech);
  const auto cfg = with(0.05, 3, 1, SelectionMode::kExact);
  const auto s = solve_chunk(build_chunk_problem(traj, M, cfg, {0, 1}), cfg);
  CHECK(s.weights[0](0) == 1.0);
  CHECK(s.weights[0](1) == 0.0);
  CHECK(s.objective == 1.0);
  CHECK(oracle::brute_force_min_selection(traj, M, cfg, {0, 1}) == 1);
}

TEST_CASE("chunk ranges") {
  CHECK(chunk_ranges(10, 4) == std::vector<StepRange>{{0, 4}, {4, 4}, {8, 2}});
  CHECK(chunk_ranges(3, 10) == std::vector<StepRange>{{0, 3}});
  CHECK(chunk_ranges(6, 3) == std::vector<StepRange>{{0, 3}, {3, 3}});
}

TEST_CASE("tolerance one and unit drift multiplier select nothing") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto mech = random_network(seed, {4, 5});
    const auto traj = oracle::exact_euler(mech, random_initial_state(seed, 4), 9, 0.05);
    for (std::size_t h : {1, 2, 4, 20}) {
      for (auto mode : {SelectionMode::kExact, SelectionMode::kRelaxed}) {
        const auto W = run_selection_serial(traj, mech, with(1.0, 1.0, h, mode));
        CHECK(W.values.cwiseAbs().maxCoeff() <= 1e-9);
      }
    }
    const auto cfg = with(1.0, 1.0, 2, SelectionMode::kExact);
    CHECK(oracle::brute_force_min_selection(traj, oracle::net_stoich(mech), cfg, {0, 2}) == 0);
  }
}

TEST_CASE("exact mode matches brute force on small chunks") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto mech = random_network(seed, {3, 4});
    const auto traj = oracle::exact_euler(mech, random_initial_state(seed, 3), 4, 0.1);
    const auto M = oracle::net_stoich(mech);
    const auto cfg = with(0.2, 2.0, 2, SelectionMode::kExact);
    for (const auto& range : chunk_ranges(traj.num_steps(), 2)) {
      const auto expected = oracle::brute_force_min_selection(traj, M, cfg, range);
      const auto problem = build_chunk_problem(traj, M, cfg, range);
      if (!expected) {
        CHECK_THROWS_AS(solve_chunk(problem, cfg), InfeasibleChunkError);
        continue;
      }
      const auto s = solve_chunk(problem, cfg);
      CHECK(s.objective == *expected);
    }
  }
}

TEST_CASE("serial and parallel selection agree bitwise") {
  const auto mech = random_network(31, {5, 10});
  const auto traj = oracle::exact_euler(mech, random_initial_state(31, 5), 40, 0.02);
  for (auto mode : {SelectionMode::kExact, SelectionMode::kRelaxed}) {
    const auto cfg = with(0.3, 3, 4, mode);
    const auto serial = run_selection_serial(traj, mech, cfg);
    for (int jobs : {1, 2, 8}) {
      const auto par = run_selection(traj, mech, cfg, jobs);
      CHECK(par.values == serial.values);
      CHECK(format_weights_csv(par, mech) == format_weights_csv(serial, mech));
    }
  }
}

TEST_CASE("weights replay within tolerance") {
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    const auto mech = random_network(seed, {4, 6});
    const auto traj = oracle::exact_euler(mech, random_initial_state(seed, 4), 12, 0.05);
    for (auto mode : {SelectionMode::kExact, SelectionMode::kRelaxed}) {
      const auto W = run_selection(traj, mech, with(0.2, 3, 3, mode));
      CHECK(oracle::replay_excess(traj, mech, W) <= 1e-8);
    }
  }
}

TEST_CASE("objective does not grow as the tolerance loosens") {
  const auto mech = random_network(7, {4, 6});
  const auto traj = oracle::exact_euler(mech, random_initial_state(7, 4), 10, 0.05);
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {0.05, 0.1, 0.2, 0.5, 1.0}) {
    const auto W = run_selection(traj, mech, with(eps, 3, 2, SelectionMode::kExact));
    CHECK(W.total_objective() <= previous);
    previous = W.total_objective();
  }
}

TEST_CASE("rescaling time leaves exact weights unchanged") {
  const auto mech = random_network(12, {4, 6});
  const auto traj = oracle::exact_euler(mech, random_initial_state(12, 4), 10, 0.05);
  const auto cfg = with(0.2, 3, 3, SelectionMode::kExact);
  const auto base = run_selection(traj, mech, cfg);
  for (double c : {0.1, 10.0}) {
    std::vector<double> times;
    for (double t : traj.times()) times.push_back(t * c);
    RowMatrix r = traj.rates() / c;
    const Trajectory scaled(times, traj.concentrations(), r, cond());
    CHECK(run_selection(scaled, mech, cfg).values == base.values);
  }
}

TEST_CASE("permuting reactions permutes the weights") {
  const auto mech = random_network(21, {4, 5});
  const auto traj = oracle::exact_euler(mech, random_initial_state(21, 4), 6, 0.05);
  const auto cfg = with(0.2, 3, 2, SelectionMode::kExact);
  const auto base = run_selection(traj, mech, cfg);

  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<Reaction> reactions;
  RowMatrix r(traj.rates().rows(), traj.rates().cols());
  for (std::size_t p = 0; p < perm.size(); ++p) {
    reactions.push_back(mech.reactions()[perm[p]]);
    r.col(static_cast<Eigen::Index>(p)) = traj.rates().col(static_cast<Eigen::Index>(perm[p]));
  }
  const Mechanism permuted(mech.species(), reactions);
  const Trajectory ptraj(traj.times(), traj.concentrations(), r, cond());
  const auto W = run_selection(ptraj, permuted, cfg);
  // Ties may be broken differently, so compare per-chunk objectives and feasibility.
  CHECK(W.total_objective() == base.total_objective());
  CHECK(oracle::replay_excess(ptraj, permuted, W) <= 1e-8);
}

TEST_CASE("infeasible chunk reports its range and a feasible tolerance exists") {
  // Dropping the only reaction leaves the full change unexplained, and with
  // r = 0 the normalization collapses to the floor: nothing can satisfy it.
  RowMatrix X(3, 2);
  X << 1, 0, 0.9, 0.1, 0.8, 0.2;
  RowMatrix r(3, 1);
  r << 0.5, 0.5;
  const Trajectory traj({0.0, 0.1, 0.2}, X, r, cond());
  const auto mech = a_to_b();
  const auto M = dstoich(mech);
  const auto cfg = with(0.1, 1.0, 2, SelectionMode::kExact);
  try {
    run_selection(traj, mech, cfg);
    FAIL("expected an infeasible chunk");
  } catch (const InfeasibleChunkError& e) {
    CHECK(e.chunk_index() == 0);
    CHECK(e.first_step() == 0);
    CHECK(e.last_step() == 1);
  }
  const double eps = minimal_feasible_epsilon(traj, M, cfg, {0, 2});
  // Oracle: with w = 1 the per-step error is 0.05 against N = 0.05, so
  // eps = 1 is needed; w = 0 needs eps = 0.1/0.05 = 2. Minimum is 1.
  CHECK(eps == doctest::Approx(1.0).epsilon(1e-3));
  auto ok = cfg;
  ok.epsilon = eps;
  CHECK_NOTHROW(run_selection(traj, mech, ok));
}

TEST_CASE("threshold and relevance") {
  WeightMatrix W;
  W.values.resize(3, 3);
  W.values << 0.0, 0.2, 0.7, 0.0, 0.0, 0.0, 0.3, 0.5, 0.5;
  W.step_start_times = {0, 1, 2};
  const auto mask = threshold(W, 0.0);
  CHECK(mask.selected(2, 0));
  CHECK_FALSE(mask.selected(0, 0));
  CHECK_FALSE(threshold(W, 0.5).selected(2, 1));
  CHECK(threshold(W, 0.5).selected(0, 2));
  const auto rel = aggregate_relevance(W);
  CHECK(rel(0) == 0.7);
  CHECK(rel(1) == 0.0);
  CHECK(rel(2) == 0.5);
}

TEST_CASE("exact-mode relevance marks reactions ever selected") {
  const auto mech = random_network(8, {4, 6});
  const auto traj = oracle::exact_euler(mech, random_initial_state(8, 4), 8, 0.05);
  const auto W = run_selection(traj, mech, with(0.2, 3, 2, SelectionMode::kExact));
  const auto rel = aggregate_relevance(W);
  const auto mask = threshold(W, 0.0);
  for (Eigen::Index i = 0; i < rel.size(); ++i) {
    CHECK((rel(i) == 0.0 || rel(i) == 1.0));
    CHECK((rel(i) == 1.0) == mask.selected.row(i).any());
  }
}

TEST_CASE("horizon beyond the step count is one chunk") {
  const auto mech = random_network(9, {4, 5});
  const auto traj = oracle::exact_euler(mech, random_initial_state(9, 4), 3, 0.05);
  const auto a = run_selection(traj, mech, with(0.2, 3, 10, SelectionMode::kExact));
  const auto b = run_selection(traj, mech, with(0.2, 3, 3, SelectionMode::kExact));
  CHECK(a.values == b.values);
  CHECK(a.chunks.size() == 1);
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(with(0.0, 3, 1, SelectionMode::kExact).validate(), ValidationError);
  CHECK_THROWS_AS(with(0.2, 0.5, 1, SelectionMode::kExact).validate(), ValidationError);
  CHECK_THROWS_AS(with(0.2, 3, 0, SelectionMode::kExact).validate(), ValidationError);
  auto cfg = SelectionConfig{};
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK(SelectionConfig::small_network().epsilon == 0.21);
  CHECK(SelectionConfig::small_network().beta == 3.0);
  CHECK(SelectionConfig::large_network().epsilon == 0.5);
  CHECK(parse_selection_mode("exact") == SelectionMode::kExact);
  CHECK_THROWS_AS(parse_selection_mode("fuzzy"), ValidationError);
}

TEST_CASE("mask CSV round trip") {
  const auto mech = random_network(10, {4, 5});
  const auto traj = oracle::exact_euler(mech, random_initial_state(10, 4), 5, 0.05);
  const auto W = run_selection(traj, mech, with(0.2, 3, 2, SelectionMode::kExact));
  const auto mask = threshold(W, 0.0);
  const auto text = format_mask_csv(mask, mech);
  CHECK(text.rfind("step_index,t_start,", 0) == 0);
  const auto back = parse_mask_csv(text, 5);
  CHECK((back.selected == mask.selected).all());
  CHECK(back.step_start_times == mask.step_start_times);
  CHECK_THROWS_AS(parse_mask_csv(text, 6), ValidationError);
  CHECK(format_relevance_csv(aggregate_relevance(W), mech).rfind("reaction_index,label,relevance", 0) == 0);
}

TEST_CASE("binding drift rows fall back to the coupled program") {
  for (std::uint64_t seed = 200; seed < 215; ++seed) {
    const auto mech = random_network(seed, {3, 4});
    const auto traj = oracle::exact_euler(mech, random_initial_state(seed, 3), 3, 0.1);
    const auto M = oracle::net_stoich(mech);
    for (auto mode : {SelectionMode::kExact, SelectionMode::kRelaxed}) {
      const auto cfg = with(0.3, 1.0, 3, mode);
      auto problem = build_chunk_problem(traj, M, cfg, {0, 3});
      // Shrink the drift tolerance to a tenth so it can cut off the per-step optima.
      auto& lp = problem.program.base;
      for (std::size_t r = problem.step_rows; r < problem.step_rows + problem.drift_rows; r += 2) {
        const auto i = static_cast<Eigen::Index>(r);
        const double tol = 0.5 * (lp.b(i) + lp.b(i + 1));
        const double change = 0.5 * (lp.b(i + 1) - lp.b(i));
        lp.b(i) = 0.1 * tol - change;
        lp.b(i + 1) = 0.1 * tol + change;
      }
      std::optional<double> expected;
      if (mode == SelectionMode::kExact) {
        expected = oracle::binary_enumeration(lp);
      } else if (const auto direct = lp::solve_lp(lp); direct.status == lp::SolveStatus::kOptimal) {
        expected = direct.objective;
      }
      if (!expected) {
        CHECK_THROWS_AS(solve_chunk(problem, cfg), InfeasibleChunkError);
        continue;
      }
      const auto s = solve_chunk(problem, cfg);
      CHECK(s.objective == doctest::Approx(*expected).epsilon(1e-8));
      Eigen::VectorXd x(lp.c.size());
      for (std::size_t k = 0; k < 3; ++k) x.segment(static_cast<Eigen::Index>(4 * k), 4) = s.weights[k];
      CHECK(lp::max_violation(lp, x) <= 1e-9);
    }
  }
}
