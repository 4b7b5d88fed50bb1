#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mglab/across_games.hpp"
#include "mglab/environments.hpp"
#include "mglab/errors.hpp"
#include "mglab/kelly.hpp"
#include "mglab/mmm.hpp"
#include "mglab/qlearning.hpp"

namespace mglab {

enum class ExperimentKind { MdpSolve, QLearning, Kelly, Mmm, AcrossGames };

std::string experiment_kind_name(ExperimentKind kind);

// Either a per-seed random instance or a fully specified one.
struct MdpSpec {
    bool random = true;
    int n_states = 2;
    int n_actions = 2;
    double discount = 0.9;
    // explicit kind only:
    std::vector<std::vector<std::vector<double>>> transition;  // [s][a][s']
    std::vector<std::vector<double>> reward;                   // [s][a]

    TabularMDP build(std::uint64_t seed) const;
};

struct MdpSolveSpec {
    MdpSpec mdp;
    double tol = 1e-10;
};

struct QLearningSpec {
    MdpSpec mdp;
    long episodes = 1000;
    long horizon = 20;
    double omega = 0.7;
    double epsilon_initial = 1.0;
    double epsilon_decay = 1.0;
    double epsilon_floor = 0.05;
    double initial_q = 0.0;
};

struct KellySpec {
    double win_probability = 0.5;
    double payout_ratio = 1.0;
    long n_bets = 1000;
    bool online = false;
    double fraction = 0.0;  // fixed rule
    long window = 0;        // online rule; 0 = all history
    BankrollOptions options;
};

struct MmmEnvSpec {
    bool regime_switching = false;
    double mu = 0.0;
    double sigma = 1.0;
    double drift0 = 0.0;
    double drift1 = 0.0;
    double switch_prob = 0.0;

    LogPriceEnv build(std::uint64_t seed) const;
};

struct MmmSpec {
    MmmEnvSpec env;
    bool adaptive = false;
    double withdrawal = 0.0;  // fixed strategy
    long n_rounds = 10000;
    double transaction_cost = 0.0;
    double sell_prob = 1.0;
};

struct AcrossGamesSpec {
    std::vector<MatrixGame> games;
    std::vector<double> draw_weights;
    std::vector<std::vector<double>> opponent_strategies;
    AcrossGamesConfig config;  // seed filled per run
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::MdpSolve;
    std::vector<std::uint64_t> seeds;
    std::string output;  // record file path
    long record_every = 1;
    std::variant<MdpSolveSpec, QLearningSpec, KellySpec, MmmSpec, AcrossGamesSpec> spec;
};

// Parses and fully validates a JSON experiment description.  Unknown keys are
// rejected; each diagnostic names the offending key and the violated
// constraint.  An --out style override replaces the file's output path.
ExperimentConfig parse_config(const std::string& path,
                              const std::optional<std::string>& output_override = {});

// Same, from an in-memory JSON string ("context" labels diagnostics).
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& context = "<inline>");

struct MetricSummary {
    std::vector<double> per_seed;
    double mean = 0.0;
    double stddev = 0.0;  // population
};

struct ExperimentSummary {
    ExperimentKind kind = ExperimentKind::MdpSolve;
    std::vector<std::uint64_t> seeds;
    std::string record_path;
    std::string summary_path;
    // insertion-ordered metric names with per-seed values and aggregates
    std::vector<std::pair<std::string, MetricSummary>> metrics;

    const MetricSummary* find(const std::string& name) const;
};

// Runs every seed, writes the record CSV and a JSON summary next to it
// (<output>.summary.json), and returns the aggregate metrics.  Output files
// are written atomically; nothing is left behind on failure.
ExperimentSummary run_experiment(const ExperimentConfig& config);

// One line per experiment kind: name, module, required keys, description.
std::string list_experiments();

// Decimal formatting used for all emitted numbers (12 significant digits).
std::string format_number(double value);

}  // namespace mglab
