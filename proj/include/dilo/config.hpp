#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dilo/dual_trainer.hpp"
#include "dilo/envs.hpp"

namespace dilo {

struct EnvConfig {
    std::string name = "gridworld";  // or "pointmass"
    Gridworld grid;                  // used when name == "gridworld"
    PointMassEnv pointmass;          // used when name == "pointmass"
};

struct DataConfig {
    int n_expert_traj = 5;            // observation-only expert trajectories
    int n_offline_expert_traj = 10;   // expert trajectories kept in the offline set
    int n_offline_behavior_traj = 40; // behavior-policy trajectories
    std::string behavior = "uniform"; // "uniform" or "ring" (gridworld only)
    int horizon = 60;
    std::uint64_t seed = 0;
    std::string expert_path = "expert.jsonl";
    std::string offline_path = "offline.jsonl";
};

struct EvalConfig {
    int n_episodes = 100;
    int horizon = 60;
    std::uint64_t seed = 0;
};

struct OracleConfig {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    double tol = 1e-6;
    int max_iterations = 50000;
    bool include_chain = true;
};

// The full run document. JSON sections {env, data, dilo, eval, oracle,
// output_dir}; every key optional (defaults above and in DiloConfig), unknown
// keys rejected. `hidden` and `policy_steps` live in the "dilo" section.
struct RunConfig {
    EnvConfig env;
    DataConfig data;
    DiloConfig dilo;
    std::vector<int> hidden{64, 64};  // network widths for continuous observations
    int policy_steps = 2000;          // extraction / baseline training steps
    EvalConfig eval;
    OracleConfig oracle;
    std::string output_dir = "run_output";

    void validate() const;  // throws ConfigError
};

// Strict parse; throws IoError when the file is missing, ConfigError on any
// schema violation (unknown key, wrong type, out-of-range value).
RunConfig load_run_config(const std::string& path);

// Deterministic serialization of the fully resolved config (every default
// materialized, keys sorted); written to the output dir by every command.
std::string run_config_to_json(const RunConfig& cfg);

// output_dir, prefixed by $DILO_OUTPUT_ROOT when that is set and the
// configured path is relative.
std::string resolve_output_dir(const RunConfig& cfg);

}  // namespace dilo
