#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "dilo/dataset.hpp"
#include "dilo/mdp.hpp"
#include "dilo/rng.hpp"

namespace dilo {

// Cell coordinates are (row, col) with row 0 at the top. Actions: 0 up,
// 1 down, 2 left, 3 right. A slip sends the agent sideways: with probability
// slip_prob/2 each, the move is replaced by one of the two perpendicular
// directions. Bumping a wall or obstacle leaves the state unchanged. The goal
// is an absorbing self-loop. The +1-at-goal reward exists only for expert
// construction and evaluation; it never reaches the dataset path.
struct Gridworld {
    int width = 5;
    int height = 5;
    double slip_prob = 0.1;
    std::pair<int, int> goal{0, 4};
    std::vector<std::pair<int, int>> obstacles;
    std::optional<std::pair<int, int>> start;  // fixed start; otherwise uniform over free non-goal cells
    double gamma = 0.99;

    static constexpr int n_env_actions = 4;

    int n_states() const { return width * height; }
    int cell_index(int r, int c) const { return r * width + c; }
    bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }
    bool is_obstacle(int r, int c) const;
    int goal_index() const { return cell_index(goal.first, goal.second); }

    // Throws std::invalid_argument on out-of-range fields (slip outside
    // [0, 0.5], goal on an obstacle, cells out of bounds).
    void validate() const;

    // Exact dynamics as a TabularMDP (gamma copied from this struct).
    TabularMDP to_mdp() const;

    // Hidden reward r(s) = 1 at the goal cell, 0 elsewhere.
    Eigen::VectorXd hidden_reward() const;

    int sample_initial(Rng& rng) const;
    // One environment step; returns (next state, reached goal).
    std::pair<int, bool> step(int s, int a, Rng& rng) const;
    // Observation exposed to learners: the state index as a 1-dim vector.
    Eigen::VectorXd obs(int s) const;
};

struct Disc {
    Eigen::Vector2d center;
    double radius = 0.0;
};

// Deterministic 2-D point mass on the unit square: s' = clip(s + a*dt).
// Episodes truncate at truncate_steps (recorded as non-terminal timeout);
// entering the goal disc terminates (absorbing).
struct PointMassEnv {
    double dt = 0.05;
    double max_action = 1.0;  // per-axis magnitude limit
    std::vector<Disc> obstacles{{Eigen::Vector2d(0.5, 0.5), 0.12}};
    Disc goal{Eigen::Vector2d(0.85, 0.85), 0.06};
    Eigen::Vector2d start_center{0.15, 0.15};
    double start_noise = 0.02;
    int truncate_steps = 120;

    void validate() const;
    Eigen::Vector2d reset(Rng& rng) const;
    Eigen::Vector2d clip_action(const Eigen::Vector2d& a) const;
    Eigen::Vector2d step(const Eigen::Vector2d& s, const Eigen::Vector2d& a) const;
    bool in_goal(const Eigen::Vector2d& s) const;
    // True iff the segment s -> s_next intersects any obstacle disc.
    bool segment_hits_obstacle(const Eigen::Vector2d& s, const Eigen::Vector2d& s_next) const;
};

// Value iteration on a tabular MDP with reward on the current state
// (reward vector) or on (state, action) (reward matrix). Returns values with
// Bellman residual <= tol and the greedy policy, ties broken by lowest
// action index.
struct ValueIterationResult {
    Eigen::VectorXd values;
    TabularPolicy policy;
};
ValueIterationResult value_iteration(const TabularMDP& mdp, const Eigen::VectorXd& reward,
                                     double tol);
ValueIterationResult value_iteration(const TabularMDP& mdp, const Eigen::MatrixXd& reward,
                                     double tol);

// Greedy-on-hidden-reward expert for a gridworld.
TabularPolicy gridworld_expert(const Gridworld& grid);

// Uniform policy over all actions.
TabularPolicy uniform_policy(int n_states, int n_actions);

// Behavior policy with deliberately partial action coverage: bottom row
// {right .5, left .25, down .25}, right column {up .5, down .25, right .25},
// everywhere else uniform over {down, left, right}. It never produces the
// up-moves of the column-0 expert route but fully covers the
// bottom-row/right-column route to the goal.
TabularPolicy ring_behavior_policy(const Gridworld& grid);

// Episode rollout; at most `horizon` transitions, stops early at the goal
// (terminal flag on the last step). Every step carries the action the policy
// sampled at that state, including the final one, so action homogeneity holds.
Trajectory rollout(const Gridworld& grid, const TabularPolicy& policy, int horizon,
                   std::uint64_t seed);

// Point-mass rollout under a deterministic state-feedback controller.
Trajectory rollout(const PointMassEnv& env,
                   const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& controller,
                   int horizon, std::uint64_t seed);

// Potential-field controller: unit attraction to the goal centre plus, inside
// 1.5x an obstacle radius, a radial push-away and a tangential swirl oriented
// toward the goal side. Output rescaled uniformly so no axis exceeds
// max_action (uniform scaling keeps the direction intact). Zero action within
// a 1e-3 deadband of the goal centre.
Eigen::Vector2d scripted_pointmass_expert(const PointMassEnv& env, const Eigen::Vector2d& state);

// Offline mixture dataset: n_subopt_traj behavior rollouts plus n_expert_traj
// expert rollouts, actions included, trajectory order shuffled. Seeded and
// fully deterministic.
TrajectoryDataset compose_mixture_dataset(const Gridworld& grid, const TabularPolicy& expert,
                                          const TabularPolicy& behavior, int n_expert_traj,
                                          int n_subopt_traj, int horizon, std::uint64_t seed);

}  // namespace dilo
