#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mglab/environments.hpp"
#include "mglab/mdp.hpp"
#include "mglab/qlearning.hpp"
#include "mglab/rng.hpp"

using namespace mglab;

namespace {

// 2-state, 2-action ergodic MDP with an exact solution from value_iteration.
TabularMDP two_state_mdp() {
    TabularMDP mdp(2, 2, 0.6);
    mdp.set_transition(0, 0, 0, 0.8);
    mdp.set_transition(0, 0, 1, 0.2);
    mdp.set_transition(0, 1, 0, 0.2);
    mdp.set_transition(0, 1, 1, 0.8);
    mdp.set_transition(1, 0, 0, 0.7);
    mdp.set_transition(1, 0, 1, 0.3);
    mdp.set_transition(1, 1, 0, 0.1);
    mdp.set_transition(1, 1, 1, 0.9);
    mdp.set_reward(0, 0, 0.1);
    mdp.set_reward(0, 1, 1.0);
    mdp.set_reward(1, 0, 0.5);
    mdp.set_reward(1, 1, 0.2);
    mdp.validate();
    return mdp;
}

double q_sup_error(const QTable& q, const std::vector<std::vector<double>>& q_star) {
    double err = 0.0;
    for (int s = 0; s < q.n_states(); ++s)
        for (int a = 0; a < q.n_actions(); ++a)
            err = std::max(err, std::abs(q.value(s, a) - q_star[s][a]));
    return err;
}

}  // namespace

TEST_CASE("q_update: alpha 0 changes only the visit count") {
    QTable q(2, 2, 3.0);
    q_update(q, 0, 1, 10.0, 1, 0.0, 0.9);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) CHECK(q.value(s, a) == 3.0);
    CHECK(q.visits(0, 1) == 1);
    CHECK(q.visits(0, 0) == 0);
}

TEST_CASE("q_update: alpha 1 with beta 0 overwrites with the reward") {
    QTable q(2, 2, 7.0);
    q_update(q, 0, 0, 5.0, 1, 1.0, 0.0);
    CHECK(q.value(0, 0) == 5.0);
    CHECK_THROWS_AS(q_update(q, 0, 0, 5.0, 0, 1.5, 0.0), InvalidInputError);
}

TEST_CASE("q_update: direct formula evaluation") {
    QTable q(3, 2, 0.0);
    q_update(q, 1, 0, 2.0, 2, 0.5, 0.9);
    CHECK(q.value(1, 0) == doctest::Approx(1.0));  // 0.5*(2 + 0.9*0)
}

TEST_CASE("q_update: rejects out-of-range indices") {
    QTable q(2, 2, 0.0);
    CHECK_THROWS_AS(q_update(q, 2, 0, 0.0, 0, 0.5, 0.5), InvalidInputError);
    CHECK_THROWS_AS(q_update(q, 0, -1, 0.0, 0, 0.5, 0.5), InvalidInputError);
    CHECK_THROWS_AS(q_update(q, 0, 0, 0.0, 2, 0.5, 0.5), InvalidInputError);
}

TEST_CASE("q_update: frame property on random tables") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int ns = 2 + rng.next_int(4);
        const int na = 2 + rng.next_int(3);
        QTable q(ns, na, 0.0);
        // scramble
        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a)
                q_update(q, s, a, 10.0 * (rng.next_double() - 0.5), rng.next_int(ns),
                         0.9, 0.0);
        QTable before = q;
        const int s = rng.next_int(ns), a = rng.next_int(na);
        q_update(q, s, a, rng.next_double(), rng.next_int(ns), 0.3, 0.8);
        for (int s2 = 0; s2 < ns; ++s2)
            for (int a2 = 0; a2 < na; ++a2) {
                if (s2 == s && a2 == a) {
                    CHECK(q.visits(s2, a2) == before.visits(s2, a2) + 1);
                } else {
                    CHECK(q.value(s2, a2) == before.value(s2, a2));
                    CHECK(q.visits(s2, a2) == before.visits(s2, a2));
                }
            }
    }
}

TEST_CASE("q_update: bounded rewards keep the table bounded") {
    const double M = 1.0;
    const double beta = 0.8;
    const double bound = M / (1.0 - beta);
    Rng rng(4);
    QTable q(3, 2, 0.0);
    for (int step = 0; step < 10000; ++step) {
        const int s = rng.next_int(3), a = rng.next_int(2);
        const double r = M * (2.0 * rng.next_double() - 1.0);
        const double alpha = 0.99 * rng.next_double();
        q_update(q, s, a, r, rng.next_int(3), alpha, beta);
        CHECK(std::abs(q.value(s, a)) <= bound + 1e-12);
    }
}

TEST_CASE("learning rate schedules meet their envelope") {
    const LearningRateSchedule poly = LearningRateSchedule::polynomial(0.7);
    double sum = 0.0, sum_sq = 0.0;
    for (long n = 1; n <= 10000; ++n) {
        const double a = poly.alpha_for_visit(n);
        CHECK(a >= 0.0);
        CHECK(a < 1.0);
        sum += a;
        sum_sq += a * a;
    }
    CHECK(sum > 25.0);      // diverging partial sums
    CHECK(sum_sq < 3.0);    // convergent square sums
    CHECK_THROWS_AS(LearningRateSchedule::polynomial(0.5), InvalidInputError);
    CHECK_THROWS_AS(LearningRateSchedule::polynomial(1.1), InvalidInputError);
    CHECK_THROWS_AS(LearningRateSchedule::constant(1.0), InvalidInputError);
}

TEST_CASE("epsilon schedule stays within [floor, initial]") {
    const EpsilonGreedy eps(0.9, 0.99, 0.05);
    for (long e = 0; e < 2000; ++e) {
        const double v = eps.epsilon(e);
        CHECK(v >= 0.05);
        CHECK(v <= 0.9);
    }
    CHECK(eps.epsilon(0) == doctest::Approx(0.9));
    CHECK(eps.epsilon(100000) == doctest::Approx(0.05));
    CHECK_THROWS_AS(EpsilonGreedy(0.5, 0.9, 0.6), InvalidInputError);
}

TEST_CASE("run_q_learning: zero exploration and zero rate freeze the table") {
    MdpEnv env(two_state_mdp(), 10, 0);
    QLearningConfig config;
    config.schedule = LearningRateSchedule::constant(0.0);
    config.exploration = EpsilonGreedy(0.0, 1.0, 0.0);
    config.episodes = 50;
    config.discount = 0.6;
    config.initial_q = 1.5;
    config.seed = 1;
    const QLearningResult result = run_q_learning(env, config);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) CHECK(result.q.value(s, a) == 1.5);
    CHECK(result.episode_returns.size() == 50);
}

TEST_CASE("run_q_learning: converges to the value-iteration oracle") {
    const TabularMDP mdp = two_state_mdp();
    const auto q_star = action_values(mdp, value_iteration(mdp, 1e-10).values);

    MdpEnv env(mdp, 5, 0);
    QLearningConfig config;
    config.schedule = LearningRateSchedule::polynomial(0.7);
    config.exploration = EpsilonGreedy(1.0, 0.999, 0.05);
    config.episodes = 50000;
    config.discount = mdp.discount();
    config.seed = 7;

    // checkpoint every 1000 episodes; the error must land below 1e-2
    std::vector<double> checkpoints;
    const QLearningResult result =
        run_q_learning(env, config, [&](long episode, const QTable& q) {
            if ((episode + 1) % 1000 == 0)
                checkpoints.push_back(q_sup_error(q, q_star));
        });
    CHECK(checkpoints.size() == 50);
    CHECK(checkpoints.back() <= 1e-2);
    CHECK(q_sup_error(result.q, q_star) <= 1e-2);

    // greedy policy agrees with the oracle's
    const Policy oracle_policy = value_iteration(mdp, 1e-10).policy;
    for (int s = 0; s < mdp.n_states(); ++s)
        CHECK(result.greedy.action(s) == oracle_policy.action(s));
}

TEST_CASE("run_q_learning: deterministic per seed, seeds differ") {
    const TabularMDP mdp = two_state_mdp();
    const auto q_star = action_values(mdp, value_iteration(mdp, 1e-10).values);
    MdpEnv env(mdp, 5, 0);

    QLearningConfig config;
    config.schedule = LearningRateSchedule::polynomial(0.7);
    config.exploration = EpsilonGreedy(1.0, 0.999, 0.05);
    config.episodes = 50000;
    config.discount = mdp.discount();

    config.seed = 11;
    const QLearningResult a = run_q_learning(env, config);
    const QLearningResult b = run_q_learning(env, config);
    CHECK(a.episode_returns == b.episode_returns);
    for (int s = 0; s < 2; ++s)
        for (int act = 0; act < 2; ++act)
            CHECK(a.q.value(s, act) == b.q.value(s, act));

    config.seed = 12;
    const QLearningResult c = run_q_learning(env, config);
    CHECK(a.episode_returns != c.episode_returns);
    CHECK(q_sup_error(a.q, q_star) <= 1e-2);
    CHECK(q_sup_error(c.q, q_star) <= 1e-2);
}

TEST_CASE("greedy_policy: tie-break and argmax") {
    QTable zeros(3, 3, 0.0);
    const Policy p0 = greedy_policy(zeros);
    for (int s = 0; s < 3; ++s) CHECK(p0.action(s) == 0);

    QTable q(1, 3, 0.0);
    q_update(q, 0, 0, 1.0, 0, 0.99, 0.0);
    q_update(q, 0, 1, 3.0, 0, 0.99, 0.0);
    q_update(q, 0, 2, 2.0, 0, 0.99, 0.0);
    CHECK(greedy_policy(q).action(0) == 1);
}

// Brute-force re-implementations used as equilibrium oracles: recursive
// enumeration over joint actions, structured differently from the library.
namespace {

void all_joints(const MatrixGame& g, int agent, std::vector<int>& joint,
                std::vector<std::vector<int>>& out) {
    if (agent == g.n_agents()) {
        out.push_back(joint);
        return;
    }
    for (int a = 0; a < g.action_count(agent); ++a) {
        joint[static_cast<std::size_t>(agent)] = a;
        all_joints(g, agent + 1, joint, out);
    }
}

bool oracle_adversarial(const MatrixGame& g, const std::vector<int>& joint) {
    std::vector<int> scratch(static_cast<std::size_t>(g.n_agents()));
    std::vector<std::vector<int>> joints;
    all_joints(g, 0, scratch, joints);
    for (int i = 0; i < g.n_agents(); ++i) {
        const double base = g.payoff(i, joint);
        double worst = base;
        for (const auto& other : joints)
            if (other[static_cast<std::size_t>(i)] == joint[static_cast<std::size_t>(i)])
                worst = std::min(worst, g.payoff(i, other));
        if (worst < base) return false;
    }
    return true;
}

bool oracle_coordination(const MatrixGame& g, const std::vector<int>& joint) {
    std::vector<int> scratch(static_cast<std::size_t>(g.n_agents()));
    std::vector<std::vector<int>> joints;
    all_joints(g, 0, scratch, joints);
    for (int i = 0; i < g.n_agents(); ++i) {
        double best = g.payoff(i, joints.front());
        for (const auto& other : joints) best = std::max(best, g.payoff(i, other));
        if (g.payoff(i, joint) < best) return false;
    }
    return true;
}

MatrixGame matching_pennies() {
    return MatrixGame::two_player({{1.0, -1.0}, {-1.0, 1.0}},
                                  {{-1.0, 1.0}, {1.0, -1.0}});
}

}  // namespace

TEST_CASE("adversarial equilibrium: single agent is trivially at one") {
    const MatrixGame solo({3}, {{0.2, 0.9, 0.5}});
    for (int a = 0; a < 3; ++a) {
        const auto check = check_adversarial_equilibrium(solo, {a});
        CHECK(check.overall);
    }
}

TEST_CASE("adversarial equilibrium: constant payoffs hold everywhere") {
    const MatrixGame constant =
        MatrixGame::two_player({{2.0, 2.0}, {2.0, 2.0}}, {{1.0, 1.0}, {1.0, 1.0}});
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            CHECK(check_adversarial_equilibrium(constant, {a, b}).overall);
}

TEST_CASE("adversarial equilibrium: matching pennies has none") {
    const MatrixGame game = matching_pennies();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            CHECK_FALSE(check_adversarial_equilibrium(game, {a, b}).overall);
}

TEST_CASE("coordination equilibrium: unique maximum cell") {
    const MatrixGame game =
        MatrixGame::two_player({{3.0, 0.0}, {0.0, 1.0}}, {{3.0, 0.0}, {0.0, 1.0}});
    CHECK(check_coordination_equilibrium(game, {0, 0}));
    CHECK_FALSE(check_coordination_equilibrium(game, {0, 1}));
    CHECK_FALSE(check_coordination_equilibrium(game, {1, 0}));
    CHECK_FALSE(check_coordination_equilibrium(game, {1, 1}));
}

TEST_CASE("coordination equilibrium: matching pennies has none") {
    const MatrixGame game = matching_pennies();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            CHECK_FALSE(check_coordination_equilibrium(game, {a, b}));
}

TEST_CASE("coordination equilibrium: single agent at its argmax cells") {
    const MatrixGame solo({3}, {{0.2, 0.9, 0.9}});
    CHECK_FALSE(check_coordination_equilibrium(solo, {0}));
    CHECK(check_coordination_equilibrium(solo, {1}));
    CHECK(check_coordination_equilibrium(solo, {2}));
}

TEST_CASE("equilibrium predicates agree with brute-force oracles") {
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const int n_agents = 1 + rng.next_int(3);
        std::vector<int> counts(static_cast<std::size_t>(n_agents));
        long joints = 1;
        for (auto& c : counts) {
            c = 2 + rng.next_int(3);  // 2..4 actions
            joints *= c;
        }
        std::vector<std::vector<double>> payoffs(
            static_cast<std::size_t>(n_agents),
            std::vector<double>(static_cast<std::size_t>(joints)));
        // small integer payoffs produce plenty of exact ties
        for (auto& tensor : payoffs)
            for (auto& v : tensor) v = static_cast<double>(rng.next_int(4));
        const MatrixGame game(counts, payoffs);
        for (long j = 0; j < joints; ++j) {
            const auto joint = game.joint_from_index(j);
            CHECK(check_adversarial_equilibrium(game, joint).overall ==
                  oracle_adversarial(game, joint));
            CHECK(check_coordination_equilibrium(game, joint) ==
                  oracle_coordination(game, joint));
        }
    }
}
