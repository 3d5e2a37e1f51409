#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dilo/rng.hpp"

namespace dilo {

// One environment step. Observations are plain real vectors; the action is
// optional (observation-only expert data) and there is deliberately no reward
// field anywhere on this path.
struct TrajStep {
    Eigen::VectorXd obs;
    std::optional<Eigen::VectorXd> act;
    bool terminal = false;
};

struct Trajectory {
    std::vector<TrajStep> steps;
};

struct DatasetMeta {
    std::string env;
    int obs_dim = 0;
    int act_dim = 0;
    bool has_actions = false;
    std::uint64_t seed = 0;
    std::string generator;  // in-memory description of the source, not serialized
};

struct TrajectoryDataset {
    DatasetMeta meta;
    std::vector<Trajectory> trajectories;

    // Invariants: every trajectory has >= 2 steps, dimensions match the
    // metadata, actions are present on every step or on none (matching
    // has_actions), and the terminal flag appears only on last steps.
    // Throws DataError on violation.
    void validate() const;
};

// Batch of (s, s', s'') rows. source[i] is 0 for expert rows, 1 for offline.
struct TripleBatch {
    Eigen::MatrixXd s;        // (batch, obs_dim)
    Eigen::MatrixXd s_next;   // s'
    Eigen::MatrixXd s_next2;  // s''
    std::vector<int> source;

    int size() const { return static_cast<int>(s.rows()); }
};

// Batch of (s, s') pairs, optionally with the connecting action (needed for
// policy extraction, absent for the d~0 sampler).
struct PairBatch {
    Eigen::MatrixXd s;
    Eigen::MatrixXd s_next;
    Eigen::MatrixXd actions;  // (batch, act_dim) when has_actions
    bool has_actions = false;

    int size() const { return static_cast<int>(s.rows()); }
};

// Line-delimited JSON on disk: one header object
// {"env","obs_dim","act_dim","has_actions","seed"} followed by one object per
// step {"traj","t","obs","act","term"} ("act" is null for observation-only
// data). The reader names the offending line in every diagnostic.
void save_dataset(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

// Same states, no actions. Precondition: ds.meta.has_actions.
TrajectoryDataset strip_actions(const TrajectoryDataset& ds);

// Valid triple positions of a dataset: consecutive (t, t+1, t+2) indices plus,
// for a trajectory ending in an absorbing terminal, one synthetic self-loop
// triple (T-1, T, T). Timeout-truncated trajectories contribute nothing past
// their last step.
struct TriplePos {
    int traj = 0;
    int t = 0;           // index of s
    bool self_loop = false;  // (T-1, T, T) continuation at a terminal
};
std::vector<TriplePos> triple_positions(const TrajectoryDataset& ds);

// Valid pair positions: consecutive (t, t+1).
struct PairPos {
    int traj = 0;
    int t = 0;
};
std::vector<PairPos> pair_positions(const TrajectoryDataset& ds);

// Every valid triple of the dataset in position order, all rows labelled with
// source_label. Throws DataError when the dataset has no valid triple.
TripleBatch all_triples(const TrajectoryDataset& ds, int source_label);

// Every consecutive (s, s') pair in position order, optionally with actions
// (with_actions requires meta.has_actions).
PairBatch all_pairs(const TrajectoryDataset& ds, bool with_actions = false);

// Each row is expert with probability beta, then a triple position uniform
// over the chosen dataset's flat position list. Throws DataError if either
// dataset has no valid triple, std::invalid_argument for beta outside (0,1].
TripleBatch sample_mixture_triples(const TrajectoryDataset& expert,
                                   const TrajectoryDataset& offline, double beta, int batch,
                                   Rng& rng);

// Uniform triples from the offline dataset only.
TripleBatch sample_offline_triples(const TrajectoryDataset& offline, int batch, Rng& rng);

// Replay-buffer d~0 pairs, uniform over all consecutive (s,s') pairs in the
// union of both datasets (restrict to offline-only with include_expert =
// false). No actions attached.
PairBatch sample_d0_pairs(const TrajectoryDataset& expert, const TrajectoryDataset& offline,
                          int batch, Rng& rng, bool include_expert = true);

// Uniform (s, a, s') rows from the offline dataset; requires actions.
PairBatch sample_offline_sas(const TrajectoryDataset& offline, int batch, Rng& rng);

}  // namespace dilo
