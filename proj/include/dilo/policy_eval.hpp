#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "dilo/approximator.hpp"
#include "dilo/dataset.hpp"
#include "dilo/dual_trainer.hpp"
#include "dilo/envs.hpp"

namespace dilo {

struct References {
    double expert_return = 0.0;
    double random_return = 0.0;
};

struct EvalReport {
    double mean_return = 0.0;
    double normalized_score = 0.0;  // 100*(mean-random)/(expert-random), 0 without references
    double success_rate = 0.0;
    int n_episodes = 0;
    std::uint64_t seed = 0;
    double std_err = 0.0;
};

// Value-weighted extraction from the offline interaction data. Row weights are
// e^{min(tau*V(s,s'), ln clip_max)} (clipping before the exponential, so the
// raw e^{tau V} never materializes) with no per-batch normalization.
//
// Tabular: closed form pi(a|s) proportional to the summed weights of matching
// (s,a,s') rows; states without coverage fall back to uniform and are listed
// in `uncovered`.
TabularSoftmaxPolicy extract_policy_tabular(const ValueApproximator& v,
                                            const TrajectoryDataset& offline, int n_states,
                                            int n_actions, const DiloConfig& cfg);

// Continuous: diagonal-Gaussian policy trained by weighted maximum likelihood
// with Adam at cfg.policy_lr for `steps` full-batch steps.
GaussianPolicy extract_policy_gaussian(const ValueApproximator& v,
                                       const TrajectoryDataset& offline,
                                       const std::vector<int>& hidden, const DiloConfig& cfg,
                                       int steps, Rng& rng);

// Behavior cloning: empirical action frequencies per state (uncovered states
// uniform). Equals tau -> 0 extraction.
TabularSoftmaxPolicy train_bc(const TrajectoryDataset& offline, int n_states, int n_actions);

// Behavior cloning from observation: (i) inverse dynamics by max-likelihood
// lookup (s,s') -> most frequent offline action, ties to the lowest action
// index, pairs never observed labeled with the globally most frequent action
// (the baseline labels everything rather than rejecting), (ii) label the
// expert's consecutive pairs, (iii) BC on the labels.
TabularSoftmaxPolicy train_bco(const TrajectoryDataset& expert_obs,
                               const TrajectoryDataset& offline, int n_states, int n_actions);

// Continuous BCO: least-squares network inverse-dynamics regressor on offline
// (s,s') -> a, then Gaussian BC on the labeled expert pairs.
GaussianPolicy train_bco_gaussian(const TrajectoryDataset& expert_obs,
                                  const TrajectoryDataset& offline,
                                  const std::vector<int>& hidden, int idm_steps, int bc_steps,
                                  double lr, Rng& rng);

// Hidden-reward rollout evaluation, deterministic given the seed (episode e
// uses the fork of the master stream salted with e). Gridworld return is the
// number of steps spent at the absorbing goal within the horizon, i.e.
// horizon - t_reach; success means the goal was reached. normalized_score is
// filled only when references are given.
EvalReport evaluate_policy(const Gridworld& grid, const TabularPolicy& policy, int n_episodes,
                           int horizon, std::uint64_t seed,
                           const std::optional<References>& refs = std::nullopt);
EvalReport evaluate_policy(const Gridworld& grid, const TabularSoftmaxPolicy& policy,
                           int n_episodes, int horizon, std::uint64_t seed,
                           const std::optional<References>& refs = std::nullopt);

// Point mass: the policy acts through its mean; success means the episode
// ends inside the goal disc with zero obstacle contacts along the way, and
// the return is the success indicator.
EvalReport evaluate_policy(const PointMassEnv& env, const GaussianPolicy& policy, int n_episodes,
                           std::uint64_t seed,
                           const std::optional<References>& refs = std::nullopt);

}  // namespace dilo
