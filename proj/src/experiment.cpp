#include "mglab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "mglab/mdp.hpp"

namespace mglab {

using nlohmann::json;

std::string experiment_kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::MdpSolve: return "mdp-solve";
        case ExperimentKind::QLearning: return "q-learning";
        case ExperimentKind::Kelly: return "kelly";
        case ExperimentKind::Mmm: return "mmm";
        case ExperimentKind::AcrossGames: return "across-games";
    }
    return "?";
}

std::string format_number(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

// ---------------------------------------------------------------------------
// Config reading helpers

namespace {

[[noreturn]] void fail(const std::string& ctx, const std::string& message) {
    throw ConfigError(ctx + ": " + message);
}

const json& require_key(const json& obj, const std::string& key,
                        const std::string& ctx) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(ctx, "missing required key '" + key + "'");
    return *it;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& ctx) {
    for (const auto& item : obj.items())
        if (!allowed.contains(item.key()))
            fail(ctx, "unknown key '" + item.key() + "'");
}

double get_number(const json& obj, const std::string& key, const std::string& ctx) {
    const json& v = require_key(obj, key, ctx);
    if (!v.is_number()) fail(ctx, key + " must be a number");
    return v.get<double>();
}

double get_number_or(const json& obj, const std::string& key, double fallback,
                     const std::string& ctx) {
    if (!obj.contains(key)) return fallback;
    return get_number(obj, key, ctx);
}

long get_integer(const json& obj, const std::string& key, const std::string& ctx) {
    const json& v = require_key(obj, key, ctx);
    if (!v.is_number_integer()) fail(ctx, key + " must be an integer");
    return v.get<long>();
}

long get_integer_or(const json& obj, const std::string& key, long fallback,
                    const std::string& ctx) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(ctx, key + " must be an integer");
    return v.get<long>();
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& ctx) {
    const json& v = require_key(obj, key, ctx);
    if (!v.is_string()) fail(ctx, key + " must be a string");
    return v.get<std::string>();
}

void check_range(double value, double lo, double hi, bool lo_open, bool hi_open,
                 const std::string& key, const std::string& ctx) {
    const bool lo_ok = lo_open ? value > lo : value >= lo;
    const bool hi_ok = hi_open ? value < hi : value <= hi;
    if (!lo_ok || !hi_ok) {
        std::ostringstream msg;
        msg << key << " must lie in " << (lo_open ? "(" : "[") << lo << ", " << hi
            << (hi_open ? ")" : "]") << " (got " << value << ")";
        fail(ctx, msg.str());
    }
}

std::vector<std::vector<double>> get_matrix(const json& v, const std::string& key,
                                            const std::string& ctx) {
    if (!v.is_array() || v.empty()) fail(ctx, key + " must be a nonempty array");
    std::vector<std::vector<double>> out;
    for (const auto& row : v) {
        if (!row.is_array() || row.empty())
            fail(ctx, key + " rows must be nonempty arrays");
        std::vector<double> r;
        for (const auto& cell : row) {
            if (!cell.is_number()) fail(ctx, key + " entries must be numbers");
            r.push_back(cell.get<double>());
        }
        if (!out.empty() && r.size() != out.front().size())
            fail(ctx, key + " rows must have equal length");
        out.push_back(std::move(r));
    }
    return out;
}

MdpSpec parse_mdp_spec(const json& obj, const std::string& ctx) {
    if (!obj.is_object()) fail(ctx, "mdp must be an object");
    MdpSpec spec;
    const std::string kind = get_string(obj, "kind", ctx);
    if (kind == "random") {
        reject_unknown(obj, {"kind", "n_states", "n_actions", "discount"}, ctx);
        spec.random = true;
        spec.n_states = static_cast<int>(get_integer(obj, "n_states", ctx));
        spec.n_actions = static_cast<int>(get_integer(obj, "n_actions", ctx));
        if (spec.n_states < 1) fail(ctx, "n_states must be >= 1");
        if (spec.n_actions < 1) fail(ctx, "n_actions must be >= 1");
    } else if (kind == "explicit") {
        reject_unknown(obj, {"kind", "transition", "reward", "discount"}, ctx);
        spec.random = false;
        const json& tr = require_key(obj, "transition", ctx);
        if (!tr.is_array() || tr.empty()) fail(ctx, "transition must be a nonempty array");
        for (const auto& per_state : tr)
            spec.transition.push_back(get_matrix(per_state, "transition", ctx));
        spec.reward = get_matrix(require_key(obj, "reward", ctx), "reward", ctx);
        spec.n_states = static_cast<int>(spec.transition.size());
        spec.n_actions = static_cast<int>(spec.transition.front().size());
        if (static_cast<int>(spec.reward.size()) != spec.n_states ||
            static_cast<int>(spec.reward.front().size()) != spec.n_actions)
            fail(ctx, "reward shape must match transition shape");
        for (const auto& per_state : spec.transition)
            if (static_cast<int>(per_state.size()) != spec.n_actions ||
                static_cast<int>(per_state.front().size()) != spec.n_states)
                fail(ctx, "transition must have shape [n_states][n_actions][n_states]");
    } else {
        fail(ctx, "kind must be 'random' or 'explicit' (got '" + kind + "')");
    }
    spec.discount = get_number(obj, "discount", ctx);
    check_range(spec.discount, 0.0, 1.0, false, true, "discount", ctx);
    return spec;
}

MmmEnvSpec parse_mmm_env(const json& obj, const std::string& ctx) {
    if (!obj.is_object()) fail(ctx, "env must be an object");
    MmmEnvSpec spec;
    const std::string kind = get_string(obj, "kind", ctx);
    if (kind == "gaussian-iid") {
        reject_unknown(obj, {"kind", "mu", "sigma"}, ctx);
        spec.regime_switching = false;
        spec.mu = get_number_or(obj, "mu", 0.0, ctx);
        spec.sigma = get_number(obj, "sigma", ctx);
    } else if (kind == "regime-switching") {
        reject_unknown(obj, {"kind", "drift0", "drift1", "switch_prob", "sigma"}, ctx);
        spec.regime_switching = true;
        spec.drift0 = get_number(obj, "drift0", ctx);
        spec.drift1 = get_number(obj, "drift1", ctx);
        spec.switch_prob = get_number(obj, "switch_prob", ctx);
        check_range(spec.switch_prob, 0.0, 1.0, false, false, "switch_prob", ctx);
        spec.sigma = get_number(obj, "sigma", ctx);
    } else {
        fail(ctx, "env.kind must be 'gaussian-iid' or 'regime-switching' (got '" +
                      kind + "')");
    }
    if (!(spec.sigma > 0.0)) fail(ctx, "sigma must be > 0");
    return spec;
}

}  // namespace

TabularMDP MdpSpec::build(std::uint64_t seed) const {
    if (random) {
        Rng rng = Rng(seed).substream("mdp-instance");
        return random_mdp(n_states, n_actions, discount, rng);
    }
    TabularMDP mdp(n_states, n_actions, discount);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            mdp.set_reward(s, a, reward[s][a]);
            for (int t = 0; t < n_states; ++t)
                mdp.set_transition(s, a, t, transition[s][a][t]);
        }
    mdp.validate();
    return mdp;
}

LogPriceEnv MmmEnvSpec::build(std::uint64_t seed) const {
    if (regime_switching)
        return LogPriceEnv::regime_switching(drift0, drift1, switch_prob, sigma, seed);
    return LogPriceEnv::iid_gaussian(mu, sigma, seed);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

ExperimentConfig parse_root(const json& root, const std::string& ctx) {
    if (!root.is_object()) fail(ctx, "top level must be an object");

    ExperimentConfig config;
    const std::string kind = get_string(root, "experiment", ctx);

    // common keys
    const json& seeds = require_key(root, "seeds", ctx);
    if (!seeds.is_array() || seeds.empty())
        fail(ctx, "seeds must be a nonempty array of integers");
    std::set<std::uint64_t> seen;
    for (const auto& s : seeds) {
        if (!s.is_number_integer() || s.get<long long>() < 0)
            fail(ctx, "seeds entries must be nonnegative integers");
        const auto value = s.get<std::uint64_t>();
        if (!seen.insert(value).second)
            fail(ctx, "seeds contains duplicate entry " + std::to_string(value));
    }
    config.seeds.assign(seen.begin(), seen.end());  // ascending

    config.record_every = get_integer_or(root, "record_every", 1, ctx);
    if (config.record_every < 1) fail(ctx, "record_every must be >= 1");
    if (root.contains("output")) config.output = get_string(root, "output", ctx);

    const std::set<std::string> common = {"experiment", "seeds", "output",
                                          "record_every"};

    if (kind == "mdp-solve") {
        config.kind = ExperimentKind::MdpSolve;
        std::set<std::string> allowed = common;
        allowed.insert({"mdp", "tol"});
        reject_unknown(root, allowed, ctx);
        MdpSolveSpec spec;
        spec.mdp = parse_mdp_spec(require_key(root, "mdp", ctx), ctx + ".mdp");
        spec.tol = get_number_or(root, "tol", 1e-10, ctx);
        if (!(spec.tol > 0.0)) fail(ctx, "tol must be > 0");
        config.spec = spec;
    } else if (kind == "q-learning") {
        config.kind = ExperimentKind::QLearning;
        std::set<std::string> allowed = common;
        allowed.insert({"mdp", "episodes", "horizon", "omega", "epsilon_initial",
                        "epsilon_decay", "epsilon_floor", "initial_q"});
        reject_unknown(root, allowed, ctx);
        QLearningSpec spec;
        spec.mdp = parse_mdp_spec(require_key(root, "mdp", ctx), ctx + ".mdp");
        spec.episodes = get_integer(root, "episodes", ctx);
        if (spec.episodes < 1) fail(ctx, "episodes must be >= 1");
        spec.horizon = get_integer(root, "horizon", ctx);
        if (spec.horizon < 1) fail(ctx, "horizon must be >= 1");
        spec.omega = get_number_or(root, "omega", 0.7, ctx);
        check_range(spec.omega, 0.5, 1.0, true, false, "omega", ctx);
        spec.epsilon_initial = get_number_or(root, "epsilon_initial", 1.0, ctx);
        check_range(spec.epsilon_initial, 0.0, 1.0, false, false, "epsilon_initial", ctx);
        spec.epsilon_decay = get_number_or(root, "epsilon_decay", 1.0, ctx);
        check_range(spec.epsilon_decay, 0.0, 1.0, true, false, "epsilon_decay", ctx);
        spec.epsilon_floor = get_number_or(root, "epsilon_floor", 0.05, ctx);
        check_range(spec.epsilon_floor, 0.0, spec.epsilon_initial, false, false,
                    "epsilon_floor", ctx);
        spec.initial_q = get_number_or(root, "initial_q", 0.0, ctx);
        if (!std::isfinite(spec.initial_q)) fail(ctx, "initial_q must be finite");
        config.spec = spec;
    } else if (kind == "kelly") {
        config.kind = ExperimentKind::Kelly;
        std::set<std::string> allowed = common;
        allowed.insert({"win_probability", "payout_ratio", "n_bets", "rule",
                        "fraction", "window", "initial_capital", "fraction_cap"});
        reject_unknown(root, allowed, ctx);
        KellySpec spec;
        spec.win_probability = get_number(root, "win_probability", ctx);
        check_range(spec.win_probability, 0.0, 1.0, true, true, "win_probability", ctx);
        spec.payout_ratio = get_number(root, "payout_ratio", ctx);
        if (!(spec.payout_ratio > 0.0)) fail(ctx, "payout_ratio must be > 0");
        spec.n_bets = get_integer(root, "n_bets", ctx);
        if (spec.n_bets < 1) fail(ctx, "n_bets must be >= 1");
        spec.options.initial_capital =
            get_number_or(root, "initial_capital", 1.0, ctx);
        if (!(spec.options.initial_capital > 0.0))
            fail(ctx, "initial_capital must be > 0");
        spec.options.fraction_cap = get_number_or(root, "fraction_cap", 0.99, ctx);
        check_range(spec.options.fraction_cap, 0.0, 1.0, false, true,
                    "fraction_cap", ctx);
        const std::string rule = get_string(root, "rule", ctx);
        if (rule == "fixed") {
            spec.online = false;
            spec.fraction = get_number(root, "fraction", ctx);
            check_range(spec.fraction, 0.0, spec.options.fraction_cap, false, false,
                        "fraction", ctx);
            if (root.contains("window"))
                fail(ctx, "window applies to the online rule only");
        } else if (rule == "online") {
            spec.online = true;
            spec.window = get_integer_or(root, "window", 0, ctx);
            if (spec.window < 0) fail(ctx, "window must be >= 0 (0 = all history)");
            if (root.contains("fraction"))
                fail(ctx, "fraction applies to the fixed rule only");
        } else {
            fail(ctx, "rule must be 'fixed' or 'online' (got '" + rule + "')");
        }
        config.spec = spec;
    } else if (kind == "mmm") {
        config.kind = ExperimentKind::Mmm;
        std::set<std::string> allowed = common;
        allowed.insert({"env", "strategy", "withdrawal", "n_rounds",
                        "transaction_cost", "sell_prob"});
        reject_unknown(root, allowed, ctx);
        MmmSpec spec;
        spec.env = parse_mmm_env(require_key(root, "env", ctx), ctx + ".env");
        spec.n_rounds = get_integer(root, "n_rounds", ctx);
        if (spec.n_rounds < 1) fail(ctx, "n_rounds must be >= 1");
        const std::string strategy = get_string(root, "strategy", ctx);
        if (strategy == "fixed") {
            spec.adaptive = false;
            spec.withdrawal = get_number(root, "withdrawal", ctx);
            if (!std::isfinite(spec.withdrawal))
                fail(ctx, "withdrawal must be finite");
        } else if (strategy == "adaptive") {
            spec.adaptive = true;
            if (root.contains("withdrawal"))
                fail(ctx, "withdrawal applies to the fixed strategy only");
        } else {
            fail(ctx, "strategy must be 'fixed' or 'adaptive' (got '" + strategy + "')");
        }
        spec.transaction_cost = get_number_or(root, "transaction_cost", 0.0, ctx);
        if (!(spec.transaction_cost >= 0.0))
            fail(ctx, "transaction_cost must be >= 0");
        spec.sell_prob = get_number_or(root, "sell_prob", 1.0, ctx);
        check_range(spec.sell_prob, 0.0, 1.0, true, false, "sell_prob", ctx);
        config.spec = spec;
    } else if (kind == "across-games") {
        config.kind = ExperimentKind::AcrossGames;
        std::set<std::string> allowed = common;
        allowed.insert({"games", "draw_weights", "rounds", "kappa",
                        "partition_temperature", "action_temperature",
                        "initial_propensity", "initial_attraction", "candidates"});
        reject_unknown(root, allowed, ctx);
        AcrossGamesSpec spec;
        const json& games = require_key(root, "games", ctx);
        if (!games.is_array() || games.empty())
            fail(ctx, "games must be a nonempty array");
        for (std::size_t i = 0; i < games.size(); ++i) {
            const std::string gctx = ctx + ".games[" + std::to_string(i) + "]";
            const json& g = games[i];
            if (!g.is_object()) fail(gctx, "must be an object");
            reject_unknown(g, {"learner_payoffs", "opponent_payoffs",
                               "opponent_strategy"}, gctx);
            auto learner =
                get_matrix(require_key(g, "learner_payoffs", gctx), "learner_payoffs",
                           gctx);
            std::vector<std::vector<double>> opponent;
            if (g.contains("opponent_payoffs")) {
                opponent = get_matrix(g.at("opponent_payoffs"), "opponent_payoffs", gctx);
                if (opponent.size() != learner.size() ||
                    opponent.front().size() != learner.front().size())
                    fail(gctx, "opponent_payoffs shape must match learner_payoffs");
            } else {
                opponent.assign(learner.size(),
                                std::vector<double>(learner.front().size(), 0.0));
            }
            const json& strat = require_key(g, "opponent_strategy", gctx);
            if (!strat.is_array() || strat.size() != learner.front().size())
                fail(gctx, "opponent_strategy length must equal opponent action count");
            std::vector<double> mixed;
            for (const auto& p : strat) {
                if (!p.is_number()) fail(gctx, "opponent_strategy entries must be numbers");
                mixed.push_back(p.get<double>());
            }
            try {
                spec.games.push_back(MatrixGame::two_player(learner, opponent));
            } catch (const InvalidInputError& e) {
                fail(gctx, e.what());
            }
            spec.opponent_strategies.push_back(std::move(mixed));
        }
        if (root.contains("draw_weights")) {
            const json& w = root.at("draw_weights");
            if (!w.is_array() || w.size() != games.size())
                fail(ctx, "draw_weights length must equal the number of games");
            for (const auto& x : w) {
                if (!x.is_number()) fail(ctx, "draw_weights entries must be numbers");
                spec.draw_weights.push_back(x.get<double>());
            }
        } else {
            spec.draw_weights.assign(games.size(), 1.0 / static_cast<double>(games.size()));
        }
        spec.config.rounds = get_integer(root, "rounds", ctx);
        if (spec.config.rounds < 1) fail(ctx, "rounds must be >= 1");
        spec.config.kappa = get_number_or(root, "kappa", 0.0, ctx);
        if (!(spec.config.kappa >= 0.0)) fail(ctx, "kappa must be >= 0");
        spec.config.partition_temperature =
            get_number_or(root, "partition_temperature", 100.0, ctx);
        if (!(spec.config.partition_temperature > 0.0))
            fail(ctx, "partition_temperature must be > 0");
        spec.config.action_temperature =
            get_number_or(root, "action_temperature", 10.0, ctx);
        if (!(spec.config.action_temperature > 0.0))
            fail(ctx, "action_temperature must be > 0");
        spec.config.initial_propensity =
            get_number_or(root, "initial_propensity", 1.0, ctx);
        if (!(spec.config.initial_propensity > 0.0))
            fail(ctx, "initial_propensity must be > 0");
        spec.config.initial_attraction =
            get_number_or(root, "initial_attraction", 1.0, ctx);
        if (!(spec.config.initial_attraction > 0.0))
            fail(ctx, "initial_attraction must be > 0");
        if (root.contains("candidates")) {
            const std::string c = get_string(root, "candidates", ctx);
            if (c == "all")
                spec.config.candidates = CandidateSet::AllPartitions;
            else if (c == "coarse-fine")
                spec.config.candidates = CandidateSet::CoarseAndFinest;
            else
                fail(ctx, "candidates must be 'all' or 'coarse-fine' (got '" + c + "')");
        }
        if (spec.config.candidates == CandidateSet::AllPartitions &&
            spec.games.size() > 8)
            fail(ctx, "games: at most 8 with candidates='all'; use 'coarse-fine'");
        // surfaces weight/shape problems at parse time
        try {
            GameSet check(spec.games, spec.draw_weights);
            OpponentModel om{spec.opponent_strategies};
            om.validate_for(check);
        } catch (const InvalidInputError& e) {
            fail(ctx, e.what());
        }
        config.spec = spec;
    } else {
        fail(ctx, "experiment must be one of mdp-solve, q-learning, kelly, mmm, "
                  "across-games (got '" + kind + "')");
    }

    if (config.output.empty())
        config.output = experiment_kind_name(config.kind) + ".csv";
    return config;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& context) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(context + ": " + e.what());
    }
    return parse_root(root, context);
}

ExperimentConfig parse_config(const std::string& path,
                              const std::optional<std::string>& output_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    ExperimentConfig config = parse_config_text(buffer.str(), path);
    if (output_override) config.output = *output_override;
    return config;
}

// ---------------------------------------------------------------------------
// Running

namespace {

// Accumulates CSV lines for one run and per-seed metric values.
class RecordSink {
public:
    RecordSink(std::string kind_name, std::vector<std::string> columns)
        : kind_(std::move(kind_name)), columns_(std::move(columns)) {}

    void begin_seed(std::uint64_t seed) { seed_ = seed; }

    void row(long step, std::initializer_list<double> values) {
        std::string line = kind_;
        line += '-';
        line += std::to_string(seed_);
        line += ',';
        line += std::to_string(seed_);
        line += ',';
        line += std::to_string(step);
        for (double v : values) {
            line += ',';
            line += format_number(v);
        }
        lines_.push_back(std::move(line));
    }

    void metric(const std::string& name, double value) {
        for (auto& [n, values] : metrics_)
            if (n == name) {
                values.push_back(value);
                return;
            }
        metrics_.emplace_back(name, std::vector<double>{value});
    }

    std::string header() const {
        std::string h = "run_id,seed,step";
        for (const auto& c : columns_) {
            h += ',';
            h += c;
        }
        return h;
    }

    const std::vector<std::string>& lines() const { return lines_; }
    const std::vector<std::pair<std::string, std::vector<double>>>& metrics() const {
        return metrics_;
    }

private:
    std::string kind_;
    std::vector<std::string> columns_;
    std::uint64_t seed_ = 0;
    std::vector<std::string> lines_;
    std::vector<std::pair<std::string, std::vector<double>>> metrics_;
};

bool should_record(long step, long record_every, long last_step) {
    return step % record_every == 0 || step == last_step;
}

void run_mdp_solve(const MdpSolveSpec& spec, std::uint64_t seed, long, RecordSink& sink) {
    const TabularMDP mdp = spec.mdp.build(seed);
    const SolveResult vi = value_iteration(mdp, spec.tol);
    const Policy pi = policy_iteration(mdp);
    const ValueFunction v_pi = solve_policy_values(mdp, pi);

    double gap = 0.0;
    bool same_policy = true;
    for (int s = 0; s < mdp.n_states(); ++s) {
        gap = std::max(gap, std::abs(vi.values[s] - v_pi[s]));
        if (vi.policy.action(s) != pi.action(s)) same_policy = false;
        sink.row(s, {vi.values[s], v_pi[s], static_cast<double>(vi.policy.action(s)),
                     static_cast<double>(pi.action(s))});
    }
    const ValueFunction backed = bellman_backup(mdp, vi.values);
    double residual = 0.0;
    for (int s = 0; s < mdp.n_states(); ++s)
        residual = std::max(residual, std::abs(backed[s] - vi.values[s]));

    sink.metric("value_gap", gap);
    sink.metric("policy_match", same_policy ? 1.0 : 0.0);
    sink.metric("bellman_residual", residual);
}

void run_q_learning_experiment(const QLearningSpec& spec, std::uint64_t seed,
                               long record_every, RecordSink& sink) {
    const TabularMDP mdp = spec.mdp.build(seed);
    MdpEnv env(mdp, spec.horizon, seed);

    const auto q_star = action_values(mdp, value_iteration(mdp, 1e-10).values);
    const auto q_error = [&](const QTable& q) {
        double err = 0.0;
        for (int s = 0; s < mdp.n_states(); ++s)
            for (int a = 0; a < mdp.n_actions(); ++a)
                err = std::max(err, std::abs(q.value(s, a) - q_star[s][a]));
        return err;
    };

    QLearningConfig config;
    config.schedule = LearningRateSchedule::polynomial(spec.omega);
    config.exploration =
        EpsilonGreedy(spec.epsilon_initial, spec.epsilon_decay, spec.epsilon_floor);
    config.episodes = spec.episodes;
    config.discount = mdp.discount();
    config.initial_q = spec.initial_q;
    config.seed = seed;

    std::vector<std::pair<long, double>> error_curve;
    const QLearningResult result = run_q_learning(
        env, config, [&](long episode, const QTable& q) {
            if (should_record(episode, record_every, spec.episodes - 1))
                error_curve.emplace_back(episode, q_error(q));
        });

    for (const auto& [episode, err] : error_curve)
        sink.row(episode, {result.episode_returns[static_cast<std::size_t>(episode)],
                           err, config.exploration.epsilon(episode)});

    sink.metric("final_q_error", q_error(result.q));
    double tail = 0.0;
    const std::size_t n_episodes = result.episode_returns.size();
    const std::size_t tail_start = n_episodes >= 10 ? n_episodes - n_episodes / 10 : 0;
    std::size_t count = 0;
    for (std::size_t e = tail_start; e < result.episode_returns.size(); ++e, ++count)
        tail += result.episode_returns[e];
    sink.metric("mean_tail_return", count ? tail / static_cast<double>(count) : 0.0);
}

void run_kelly(const KellySpec& spec, std::uint64_t seed, long record_every,
               RecordSink& sink) {
    const BiasedBetEnv env(spec.win_probability, spec.payout_ratio, 0);
    std::vector<double> capital;
    std::vector<double> fractions;
    if (spec.online) {
        OnlineKellyResult result =
            online_kelly(env, spec.window, spec.n_bets, seed, spec.options);
        capital = std::move(result.capital);
        fractions = std::move(result.fractions);
    } else {
        capital = simulate_bankroll(env, FixedFraction{spec.fraction}, spec.n_bets,
                                    seed, spec.options);
        fractions.assign(static_cast<std::size_t>(spec.n_bets), spec.fraction);
    }

    for (long t = 0; t < spec.n_bets; ++t)
        if (should_record(t, record_every, spec.n_bets - 1))
            sink.row(t, {capital[static_cast<std::size_t>(t) + 1],
                         fractions[static_cast<std::size_t>(t)]});

    sink.metric("log_growth_rate", log_growth_rate(capital));
    sink.metric("final_capital", capital.back());
    const std::size_t tail_start = fractions.size() - fractions.size() / 10;
    double tail = 0.0;
    std::size_t count = 0;
    for (std::size_t t = tail_start; t < fractions.size(); ++t, ++count)
        tail += fractions[t];
    sink.metric("mean_tail_fraction",
                count ? tail / static_cast<double>(count) : fractions.back());
}

void run_mmm(const MmmSpec& spec, std::uint64_t seed, long record_every,
             RecordSink& sink) {
    const MmmStrategy strategy = spec.adaptive
                                     ? MmmStrategy::adaptive()
                                     : MmmStrategy::fixed(spec.withdrawal);
    MmmOptions options;
    options.sell_prob = spec.sell_prob;
    const auto cycles =
        simulate_mmm(spec.env.build(seed), strategy, spec.n_rounds, seed, options);
    const TransactionCostModel cost_model(spec.transaction_cost);

    double profit_sum = 0.0, round_sum = 0.0, net_sum = 0.0;
    for (std::size_t k = 0; k < cycles.size(); ++k) {
        const CycleRecord& c = cycles[k];
        const double traded = std::abs(c.buy_price) + std::abs(c.sell_price);
        const double net = apply_transaction_cost(cost_model, c.profit, traded);
        profit_sum += c.profit;
        round_sum += static_cast<double>(c.waiting_rounds + 1);
        net_sum += net;
        const double withdrawal =
            spec.adaptive ? profit_sum / round_sum : spec.withdrawal;
        if (should_record(static_cast<long>(k), record_every,
                          static_cast<long>(cycles.size()) - 1))
            sink.row(static_cast<long>(k),
                     {c.buy_price, c.sell_price, c.profit, net,
                      static_cast<double>(c.waiting_rounds), withdrawal});
    }

    sink.metric("n_cycles", static_cast<double>(cycles.size()));
    sink.metric("mean_profit_per_round",
                cycles.empty() ? 0.0 : profit_sum / round_sum);
    sink.metric("mean_net_profit_per_cycle",
                cycles.empty() ? 0.0
                               : net_sum / static_cast<double>(cycles.size()));
    sink.metric("final_withdrawal",
                spec.adaptive ? adaptive_withdrawal(cycles) : spec.withdrawal);
    if (!spec.env.regime_switching) {
        const PriceDensity density =
            PriceDensity::gaussian(spec.env.mu, spec.env.sigma);
        sink.metric("fixed_point_withdrawal", fixed_point_withdrawal(density, 1e-9));
    }
}

void run_across_games_experiment(const AcrossGamesSpec& spec, std::uint64_t seed,
                                 long record_every, RecordSink& sink) {
    const GameSet gameset(spec.games, spec.draw_weights);
    const OpponentModel opponents{spec.opponent_strategies};
    AcrossGamesConfig config = spec.config;
    config.seed = seed;

    const AcrossGamesResult result = run_across_games(gameset, opponents, config);
    for (long round = 0; round < config.rounds; ++round)
        if (should_record(round, record_every, config.rounds - 1)) {
            const auto& r = result.trajectory[static_cast<std::size_t>(round)];
            sink.row(round, {static_cast<double>(r.game),
                             static_cast<double>(r.candidate),
                             static_cast<double>(r.cls),
                             static_cast<double>(r.action), r.payoff});
        }

    int top = 0;
    for (std::size_t i = 1; i < result.final_frequencies.size(); ++i)
        if (result.final_frequencies[i] > result.final_frequencies[top])
            top = static_cast<int>(i);
    for (std::size_t i = 0; i < result.final_frequencies.size(); ++i)
        sink.metric("partition_freq_" + std::to_string(i),
                    result.final_frequencies[i]);
    sink.metric("top_partition", static_cast<double>(top));
}

std::vector<std::string> columns_for(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::MdpSolve:
            return {"value_vi", "value_pi", "action_vi", "action_pi"};
        case ExperimentKind::QLearning:
            return {"episode_return", "q_error", "epsilon"};
        case ExperimentKind::Kelly:
            return {"capital", "fraction"};
        case ExperimentKind::Mmm:
            return {"buy_price", "sell_price", "profit", "net_profit",
                    "waiting_rounds", "withdrawal"};
        case ExperimentKind::AcrossGames:
            return {"game", "partition", "class", "action", "payoff"};
    }
    return {};
}

// Removes the temporary on failure so no partial output survives.
class AtomicFile {
public:
    explicit AtomicFile(std::string path) : path_(std::move(path)), tmp_(path_ + ".tmp") {}
    ~AtomicFile() {
        if (!committed_) {
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    const std::string& tmp_path() const { return tmp_; }

    void commit() {
        std::filesystem::rename(tmp_, path_);
        committed_ = true;
    }

private:
    std::string path_;
    std::string tmp_;
    bool committed_ = false;
};

}  // namespace

const MetricSummary* ExperimentSummary::find(const std::string& name) const {
    for (const auto& [n, m] : metrics)
        if (n == name) return &m;
    return nullptr;
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
    RecordSink sink(experiment_kind_name(config.kind), columns_for(config.kind));

    for (std::uint64_t seed : config.seeds) {
        sink.begin_seed(seed);
        std::visit(
            [&](const auto& spec) {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, MdpSolveSpec>)
                    run_mdp_solve(spec, seed, config.record_every, sink);
                else if constexpr (std::is_same_v<T, QLearningSpec>)
                    run_q_learning_experiment(spec, seed, config.record_every, sink);
                else if constexpr (std::is_same_v<T, KellySpec>)
                    run_kelly(spec, seed, config.record_every, sink);
                else if constexpr (std::is_same_v<T, MmmSpec>)
                    run_mmm(spec, seed, config.record_every, sink);
                else
                    run_across_games_experiment(spec, seed, config.record_every, sink);
            },
            config.spec);
    }

    ExperimentSummary summary;
    summary.kind = config.kind;
    summary.seeds = config.seeds;
    summary.record_path = config.output;
    summary.summary_path = config.output + ".summary.json";

    for (const auto& [name, per_seed] : sink.metrics()) {
        MetricSummary m;
        m.per_seed = per_seed;
        for (double v : per_seed) m.mean += v;
        m.mean /= static_cast<double>(per_seed.size());
        for (double v : per_seed) m.stddev += (v - m.mean) * (v - m.mean);
        m.stddev = std::sqrt(m.stddev / static_cast<double>(per_seed.size()));
        summary.metrics.emplace_back(name, std::move(m));
    }

    // record file
    AtomicFile record(summary.record_path);
    {
        std::ofstream out(record.tmp_path(), std::ios::binary);
        if (!out)
            throw RunError("run_experiment: cannot write " + record.tmp_path());
        out << sink.header() << '\n';
        for (const auto& line : sink.lines()) out << line << '\n';
        if (!out.good())
            throw RunError("run_experiment: write failed for " + record.tmp_path());
    }

    // summary file
    AtomicFile summary_file(summary.summary_path);
    {
        json doc;
        doc["experiment"] = experiment_kind_name(config.kind);
        doc["record_file"] = summary.record_path;
        json seed_list = json::array();
        for (std::uint64_t s : config.seeds) seed_list.push_back(s);
        doc["seeds"] = seed_list;
        json metrics = json::object();
        for (const auto& [name, m] : summary.metrics) {
            json entry;
            entry["mean"] = m.mean;
            entry["stddev"] = m.stddev;
            entry["per_seed"] = m.per_seed;
            metrics[name] = entry;
        }
        doc["metrics"] = metrics;
        std::ofstream out(summary_file.tmp_path(), std::ios::binary);
        if (!out)
            throw RunError("run_experiment: cannot write " + summary_file.tmp_path());
        out << doc.dump(2) << '\n';
        if (!out.good())
            throw RunError("run_experiment: write failed for " +
                           summary_file.tmp_path());
    }

    record.commit();
    summary_file.commit();
    return summary;
}

std::string list_experiments() {
    std::ostringstream out;
    out << "mdp-solve     [core_mdp]      value iteration vs policy iteration on a "
           "tabular MDP\n"
        << "                required: mdp, seeds | optional: tol, output, record_every\n"
        << "q-learning    [qlearning]     Watkins Q-learning on an MDP environment, "
           "error vs the exact solver\n"
        << "                required: mdp, episodes, horizon, seeds | optional: omega, "
           "epsilon_initial, epsilon_decay, epsilon_floor, initial_q, output, "
           "record_every\n"
        << "kelly         [kelly]         fixed-fraction or online Kelly staking on a "
           "biased binary bet\n"
        << "                required: win_probability, payout_ratio, n_bets, rule, "
           "seeds | optional: fraction, window, initial_capital, fraction_cap, "
           "output, record_every\n"
        << "mmm           [mmm]           buy-low/sell-next cycle trading against a "
           "log-price process\n"
        << "                required: env, strategy, n_rounds, seeds | optional: "
           "withdrawal, transaction_cost, sell_prob, output, record_every\n"
        << "across-games  [across_games]  reinforcement learning of game partitions "
           "and per-class actions\n"
        << "                required: games, rounds, seeds | optional: draw_weights, "
           "kappa, partition_temperature, action_temperature, initial_propensity, "
           "initial_attraction, candidates, output, record_every\n";
    return out.str();
}

}  // namespace mglab
