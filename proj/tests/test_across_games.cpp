#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mglab/across_games.hpp"
#include "mglab/rng.hpp"

using namespace mglab;

namespace {

// learner payoffs independent of the opponent (single opponent action)
MatrixGame learner_game(const std::vector<double>& action_payoffs) {
    std::vector<std::vector<double>> learner, opponent;
    for (double u : action_payoffs) {
        learner.push_back({u});
        opponent.push_back({0.0});
    }
    return MatrixGame::two_player(learner, opponent);
}

OpponentModel trivial_opponent(int n_games) {
    OpponentModel model;
    model.strategies.assign(static_cast<std::size_t>(n_games), {1.0});
    return model;
}

// Bell numbers via the Bell-triangle recurrence, independent of the library.
std::vector<long> bell_numbers(int n) {
    std::vector<long> bell = {1};  // B(0)
    std::vector<long> row = {1};
    for (int i = 1; i <= n; ++i) {
        std::vector<long> next = {row.back()};
        for (long v : row) next.push_back(next.back() + v);
        bell.push_back(next.front());
        row = std::move(next);
    }
    return bell;
}

int index_of_coarsest(const std::vector<Partition>& candidates, int n_games) {
    const Partition coarse = Partition::coarsest(n_games);
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i] == coarse) return static_cast<int>(i);
    return -1;
}

int index_of_finest(const std::vector<Partition>& candidates, int n_games) {
    const Partition fine = Partition::finest(n_games);
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i] == fine) return static_cast<int>(i);
    return -1;
}

}  // namespace

TEST_CASE("enumerate_partitions: counts match the Bell numbers") {
    const auto bell = bell_numbers(8);  // B(0..8)
    for (int n = 1; n <= 8; ++n) {
        const auto partitions = enumerate_partitions(n);
        CHECK(static_cast<long>(partitions.size()) == bell[static_cast<std::size_t>(n)]);
        for (const Partition& p : partitions) CHECK(p.n_games() == n);
    }
    CHECK(enumerate_partitions(1).size() == 1);
    CHECK(enumerate_partitions(3).size() == 5);
    CHECK(enumerate_partitions(5).size() == 52);
    CHECK_THROWS_AS(enumerate_partitions(9), InvalidInputError);
}

TEST_CASE("enumerate_partitions: canonical, disjoint, covering, distinct") {
    const auto partitions = enumerate_partitions(4);
    for (std::size_t i = 0; i < partitions.size(); ++i) {
        const Partition& p = partitions[i];
        // every game is in exactly one class (class_of is total by construction)
        std::vector<int> seen(4, 0);
        for (const auto& cls : p.classes()) {
            for (std::size_t k = 1; k < cls.size(); ++k)
                CHECK(cls[k - 1] < cls[k]);  // ascending members
            for (int g : cls) ++seen[static_cast<std::size_t>(g)];
        }
        for (int count : seen) CHECK(count == 1);
        for (int c = 1; c < p.n_classes(); ++c)
            CHECK(p.classes()[c - 1].front() < p.classes()[c].front());
        for (std::size_t j = i + 1; j < partitions.size(); ++j)
            CHECK_FALSE(partitions[i] == partitions[j]);
    }
}

TEST_CASE("Partition: invalid class systems are rejected") {
    CHECK_THROWS_AS(Partition({{0, 1}, {1}}), InvalidInputError);   // overlap
    CHECK_THROWS_AS(Partition({{0}, {2}}), InvalidInputError);      // gap
    CHECK_THROWS_AS(Partition({{}}), InvalidInputError);            // empty class
}

TEST_CASE("softmax_probs: normalization and shift invariance") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> levels(static_cast<std::size_t>(2 + rng.next_int(5)));
        for (double& v : levels) v = 20.0 * (rng.next_double() - 0.5);
        const double temperature = 0.1 + 3.0 * rng.next_double();
        const auto probs = softmax_probs(levels, temperature);
        double total = 0.0;
        for (double p : probs) total += p;
        CHECK(std::abs(total - 1.0) <= 1e-12);

        std::vector<double> shifted = levels;
        for (double& v : shifted) v += 123.456;
        const auto probs2 = softmax_probs(shifted, temperature);
        for (std::size_t i = 0; i < probs.size(); ++i)
            CHECK(probs[i] == doctest::Approx(probs2[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(softmax_probs(std::vector<double>{1.0}, 0.0), InvalidInputError);
}

TEST_CASE("softmax_probs: huge levels do not overflow") {
    const std::vector<double> levels = {2e5, 1e5};
    const auto probs = softmax_probs(levels, 1.0);
    CHECK(probs[0] == doctest::Approx(1.0));
    CHECK(probs[1] == doctest::Approx(0.0));
}

TEST_CASE("choose_partition: single candidate is always chosen") {
    LearnerState state({Partition::coarsest(2)}, 2, 0.0);
    Rng rng(5);
    for (int i = 0; i < 100; ++i) CHECK(choose_partition(state, 1.0, rng) == 0);
}

TEST_CASE("choose_partition: equal propensities are a fair coin") {
    LearnerState state(enumerate_partitions(2), 2, 0.0);  // two candidates
    Rng rng(6);
    long firsts = 0;
    const long n = 10000;
    for (long i = 0; i < n; ++i)
        if (choose_partition(state, 1.0, rng) == 0) ++firsts;
    CHECK(std::abs(static_cast<double>(firsts) / static_cast<double>(n) - 0.5) <= 0.02);
}

TEST_CASE("choose_partition: wide gap at low temperature is near-deterministic") {
    LearnerState state(enumerate_partitions(2), 2, 0.0);
    update_learning(state, 0, 0, 0, 10.0);  // propensity gap 10
    Rng rng(7);
    long firsts = 0;
    const long n = 10000;
    for (long i = 0; i < n; ++i)
        if (choose_partition(state, 0.1, rng) == 0) ++firsts;
    CHECK(static_cast<double>(firsts) / static_cast<double>(n) > 0.999);
}

TEST_CASE("choose_action: mirrors the partition sampler") {
    LearnerState single({Partition::coarsest(1)}, 3, 0.0);
    Rng rng(8);
    // uniform attractions: each action near 1/3
    std::vector<long> counts(3, 0);
    const long n = 30000;
    for (long i = 0; i < n; ++i)
        ++counts[static_cast<std::size_t>(choose_action(single, 0, 0, 1.0, rng))];
    for (long c : counts)
        CHECK(std::abs(static_cast<double>(c) / static_cast<double>(n) - 1.0 / 3.0) <=
              0.02);

    // gap 10 at temperature 0.1
    update_learning(single, 0, 0, 2, 10.0);
    long hits = 0;
    for (long i = 0; i < n; ++i)
        if (choose_action(single, 0, 0, 0.1, rng) == 2) ++hits;
    CHECK(static_cast<double>(hits) / static_cast<double>(n) > 0.999);
}

TEST_CASE("update_learning: arithmetic and floors") {
    LearnerState state(enumerate_partitions(2), 2, 0.2, 1.0, 1.0);
    const int fine = index_of_finest(state.candidates(), 2);
    REQUIRE(fine >= 0);
    CHECK(state.reasoning_cost(fine) == doctest::Approx(0.2));

    update_learning(state, fine, 0, 1, 1.0);
    CHECK(state.propensity(fine) == doctest::Approx(1.8));      // +1 - 0.2
    CHECK(state.attraction(fine, 0, 1) == doctest::Approx(2.0));  // +1

    // payoff 0 with zero-cost candidate leaves the state unchanged
    const int coarse = index_of_coarsest(state.candidates(), 2);
    const double before = state.propensity(coarse);
    update_learning(state, coarse, 0, 0, 0.0);
    CHECK(state.propensity(coarse) == before);
    CHECK(state.attraction(coarse, 0, 0) == 1.0);

    // deep negative payoffs land on the floor
    update_learning(state, coarse, 0, 0, -100.0);
    CHECK(state.propensity(coarse) == doctest::Approx(1e-6));
    CHECK(state.attraction(coarse, 0, 0) == doctest::Approx(1e-6));
}

TEST_CASE("update_learning: repeated constant payoffs grow linearly") {
    LearnerState state({Partition::coarsest(1)}, 2, 0.0, 1.0, 1.0);
    for (int k = 1; k <= 10; ++k) {
        update_learning(state, 0, 0, 0, 0.5);
        CHECK(state.propensity(0) == doctest::Approx(1.0 + 0.5 * k));
    }
}

TEST_CASE("update_learning: frame property") {
    LearnerState state(enumerate_partitions(3), 2, 0.1);
    LearnerState before = state;
    update_learning(state, 2, 0, 1, 0.7);
    for (int p = 0; p < state.n_candidates(); ++p) {
        if (p != 2) CHECK(state.propensity(p) == before.propensity(p));
        for (int c = 0; c < state.candidate(p).n_classes(); ++c)
            for (int a = 0; a < state.n_actions(); ++a)
                if (!(p == 2 && c == 0 && a == 1))
                    CHECK(state.attraction(p, c, a) == before.attraction(p, c, a));
    }
    CHECK(state.propensity(2) != before.propensity(2));
    CHECK(state.attraction(2, 0, 1) != before.attraction(2, 0, 1));
}

namespace {

GameSet two_copies() {
    const MatrixGame g = learner_game({1.0, 0.5});
    return GameSet({g, g}, {0.5, 0.5});
}

GameSet two_distinct() {
    return GameSet({learner_game({1.0, 0.0}), learner_game({0.0, 1.0})},
                   {0.5, 0.5});
}

AcrossGamesConfig desk_config(double kappa, std::uint64_t seed) {
    AcrossGamesConfig config;
    config.partition_temperature = 100.0;
    config.action_temperature = 10.0;
    config.kappa = kappa;
    config.rounds = 200000;
    config.seed = seed;
    return config;
}

}  // namespace

TEST_CASE("run_across_games: a single game locks the only partition") {
    const GameSet gameset({learner_game({1.0, 0.0})}, {1.0});
    AcrossGamesConfig config = desk_config(0.0, 4);
    config.rounds = 5000;
    const auto result = run_across_games(gameset, trivial_opponent(1), config);
    REQUIRE(result.final_frequencies.size() == 1);
    CHECK(result.final_frequencies[0] == doctest::Approx(1.0));
    CHECK(result.trajectory.size() == 5000);
}

TEST_CASE("run_across_games: identical games with costs favor the coarse partition") {
    const GameSet gameset = two_copies();
    double total = 0.0;
    const int n_seeds = 5;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
        const auto result = run_across_games(gameset, trivial_opponent(2),
                                             desk_config(0.3, seed));
        const int coarse = index_of_coarsest(result.state.candidates(), 2);
        total += result.final_frequencies[static_cast<std::size_t>(coarse)];
    }
    CHECK(total / n_seeds >= 0.9);
}

TEST_CASE("run_across_games: distinct optima with no cost favor the fine partition") {
    const GameSet gameset = two_distinct();
    double total = 0.0;
    const int n_seeds = 5;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
        const auto result = run_across_games(gameset, trivial_opponent(2),
                                             desk_config(0.0, seed));
        const int fine = index_of_finest(result.state.candidates(), 2);
        total += result.final_frequencies[static_cast<std::size_t>(fine)];
    }
    CHECK(total / n_seeds >= 0.9);
}

TEST_CASE("run_across_games: deterministic per seed") {
    const GameSet gameset = two_distinct();
    AcrossGamesConfig config = desk_config(0.1, 21);
    config.rounds = 3000;
    const auto a = run_across_games(gameset, trivial_opponent(2), config);
    const auto b = run_across_games(gameset, trivial_opponent(2), config);
    CHECK(a.final_frequencies == b.final_frequencies);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
        CHECK(a.trajectory[i].candidate == b.trajectory[i].candidate);
        CHECK(a.trajectory[i].payoff == b.trajectory[i].payoff);
    }
}

TEST_CASE("run_across_games: increasing cost never helps finer partitions") {
    const GameSet gameset = two_copies();
    const std::vector<double> kappas = {0.0, 0.15, 0.3, 0.6};
    std::vector<double> fine_freqs;
    for (double kappa : kappas) {
        double total = 0.0;
        const int n_seeds = 20;
        for (std::uint64_t seed = 100; seed < 100 + n_seeds; ++seed) {
            AcrossGamesConfig config = desk_config(kappa, seed);
            config.rounds = 20000;
            const auto result =
                run_across_games(gameset, trivial_opponent(2), config);
            const int fine = index_of_finest(result.state.candidates(), 2);
            total += result.final_frequencies[static_cast<std::size_t>(fine)];
        }
        fine_freqs.push_back(total / n_seeds);
    }
    for (std::size_t k = 1; k < fine_freqs.size(); ++k)
        CHECK(fine_freqs[k] <= fine_freqs[k - 1] + 0.05);
}

TEST_CASE("ode_approximation: zero payoffs and zero cost freeze the state") {
    const GameSet gameset({learner_game({0.0, 0.0})}, {1.0});
    const auto traj = ode_approximation(gameset, trivial_opponent(1),
                                        desk_config(0.0, 0), 100.0, 0.5);
    CHECK(traj.final_state.propensity(0) == doctest::Approx(1.0));
    CHECK(traj.final_state.attraction(0, 0, 0) == doctest::Approx(1.0));
    CHECK(traj.final_state.attraction(0, 0, 1) == doctest::Approx(1.0));
}

TEST_CASE("ode_approximation: single class learns the better action") {
    const GameSet gameset({learner_game({1.0, 0.0})}, {1.0});
    AcrossGamesConfig config = desk_config(0.0, 0);
    config.action_temperature = 1.0;
    const auto traj =
        ode_approximation(gameset, trivial_opponent(1), config, 50.0, 0.05);

    // attraction gap grows monotonically, pushing the good action's
    // probability toward 1
    double prev_gap = 0.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const double gap = traj.attractions_flat[k][0] - traj.attractions_flat[k][1];
        CHECK(gap >= prev_gap - 1e-12);
        prev_gap = gap;
    }
    const auto final_probs =
        softmax_probs(traj.final_state.attractions(0, 0), 1.0);
    CHECK(final_probs[0] > 0.99);

    // independent fine-step integration of the same 1-d field:
    // dA0/dt = sigma(A0; A1=1), A1 frozen because its payoff is 0
    double a0 = 1.0;
    const double dt = 0.0005;
    for (double t = 0.0; t < 50.0 - 1e-12; t += dt) {
        const double p0 = 1.0 / (1.0 + std::exp(-(a0 - 1.0)));
        a0 += dt * p0;
    }
    CHECK(traj.final_state.attraction(0, 0, 0) ==
          doctest::Approx(a0).epsilon(5e-3));
}

TEST_CASE("ode_approximation: step doubling changes the endpoint marginally") {
    const GameSet gameset = two_copies();
    const AcrossGamesConfig config = desk_config(0.3, 0);
    const auto coarse_run =
        ode_approximation(gameset, trivial_opponent(2), config, 200.0, 0.02);
    const auto fine_run =
        ode_approximation(gameset, trivial_opponent(2), config, 200.0, 0.01);
    for (int p = 0; p < coarse_run.final_state.n_candidates(); ++p) {
        const double rel =
            std::abs(coarse_run.final_state.propensity(p) -
                     fine_run.final_state.propensity(p)) /
            std::max(1.0, std::abs(fine_run.final_state.propensity(p)));
        CHECK(rel <= 1e-4);
    }
    CHECK_THROWS_AS(
        ode_approximation(gameset, trivial_opponent(2), config, 10.0, 0.0),
        InvalidInputError);
}

TEST_CASE("ode_approximation: rankings match the stochastic runs") {
    struct Scenario {
        GameSet gameset;
        double kappa;
    };
    const std::vector<Scenario> scenarios = {
        {GameSet({learner_game({1.0, 0.0})}, {1.0}), 0.0},
        {two_copies(), 0.3},
        {two_distinct(), 0.0},
    };
    for (const Scenario& scenario : scenarios) {
        const OpponentModel opponents = trivial_opponent(scenario.gameset.n_games());
        AcrossGamesConfig config = desk_config(scenario.kappa, 0);

        const auto ode = ode_approximation(scenario.gameset, opponents, config,
                                           static_cast<double>(config.rounds), 1.0);
        int ode_top = 0;
        for (std::size_t i = 1; i < ode.final_partition_probs.size(); ++i)
            if (ode.final_partition_probs[i] > ode.final_partition_probs[ode_top])
                ode_top = static_cast<int>(i);

        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            config.seed = seed;
            const auto run =
                run_across_games(scenario.gameset, opponents, config);
            int run_top = 0;
            for (std::size_t i = 1; i < run.final_frequencies.size(); ++i)
                if (run.final_frequencies[i] > run.final_frequencies[run_top])
                    run_top = static_cast<int>(i);
            CHECK(run_top == ode_top);
            CHECK(std::abs(run.final_frequencies[run_top] -
                           ode.final_partition_probs[ode_top]) <= 0.1);
        }
    }
}

TEST_CASE("GameSet and OpponentModel validation") {
    CHECK_THROWS_AS(GameSet({}, {}), InvalidInputError);
    CHECK_THROWS_AS(GameSet({learner_game({1.0})}, {0.5}), InvalidInputError);
    const GameSet gameset = two_copies();
    OpponentModel bad;
    bad.strategies = {{1.0}};
    CHECK_THROWS_AS(bad.validate_for(gameset), InvalidInputError);
    OpponentModel wrong_sum;
    wrong_sum.strategies = {{0.9}, {1.0}};
    CHECK_THROWS_AS(wrong_sum.validate_for(gameset), InvalidInputError);
}
