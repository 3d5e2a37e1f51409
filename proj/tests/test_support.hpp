#pragma once

// Shared fixtures for the unit suites: tiny hand-built MDPs, seeded random
// instances, observation-index datasets, temp-dir paths, and a helper that
// runs the installed CLI binary and captures its exit code and output.

#include <sys/wait.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dilo/dataset.hpp"
#include "dilo/mdp.hpp"
#include "dilo/rng.hpp"
#include "dilo/util.hpp"

namespace testsup {

// Deterministic chain 0 -> 1 -> 1 (absorbing), one action, start at 0, gamma 0.5.
inline dilo::TabularMDP chain_mdp() {
    dilo::TabularMDP mdp;
    mdp.n_states = 2;
    mdp.n_actions = 1;
    Eigen::MatrixXd t(2, 2);
    t << 0, 1, 0, 1;
    mdp.transition = {t};
    mdp.initial_dist = Eigen::VectorXd::Zero(2);
    mdp.initial_dist(0) = 1.0;
    mdp.gamma = 0.5;
    return mdp;
}

inline dilo::TabularMDP self_loop_mdp() {
    dilo::TabularMDP mdp;
    mdp.n_states = 1;
    mdp.n_actions = 1;
    mdp.transition = {Eigen::MatrixXd::Ones(1, 1)};
    mdp.initial_dist = Eigen::VectorXd::Ones(1);
    mdp.gamma = 0.9;
    return mdp;
}

inline Eigen::VectorXd exp_normalized(int n, dilo::Rng& rng) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = -std::log(1.0 - rng.uniform());
    return v / v.sum();
}

inline dilo::TabularMDP random_mdp(int n_states, int n_actions, std::uint64_t seed,
                                   double gamma = 0.9) {
    dilo::Rng rng(seed);
    dilo::TabularMDP mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    for (int a = 0; a < n_actions; ++a) {
        Eigen::MatrixXd t(n_states, n_states);
        for (int s = 0; s < n_states; ++s) t.row(s) = exp_normalized(n_states, rng).transpose();
        mdp.transition.push_back(t);
    }
    mdp.initial_dist = exp_normalized(n_states, rng);
    return mdp;
}

inline dilo::TabularPolicy random_policy(int n_states, int n_actions, std::uint64_t seed) {
    dilo::Rng rng(seed);
    dilo::TabularPolicy pi;
    pi.probs = Eigen::MatrixXd(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) pi.probs.row(s) = exp_normalized(n_actions, rng).transpose();
    return pi;
}

// Dataset of 1-dim integer observations; `absorbed[i]` marks trajectory i as
// ending in an absorbing terminal. Optional integer actions (one per step).
inline dilo::TrajectoryDataset state_dataset(const std::vector<std::vector<int>>& trajs,
                                             const std::vector<bool>& absorbed,
                                             const std::vector<std::vector<int>>* actions = nullptr) {
    dilo::TrajectoryDataset ds;
    ds.meta.env = "test";
    ds.meta.obs_dim = 1;
    ds.meta.act_dim = actions ? 1 : 0;
    ds.meta.has_actions = actions != nullptr;
    ds.meta.seed = 0;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        dilo::Trajectory traj;
        for (std::size_t t = 0; t < trajs[i].size(); ++t) {
            dilo::TrajStep st;
            st.obs = Eigen::VectorXd::Constant(1, static_cast<double>(trajs[i][t]));
            if (actions) st.act = Eigen::VectorXd::Constant(1, static_cast<double>((*actions)[i][t]));
            st.terminal = absorbed[i] && t + 1 == trajs[i].size();
            traj.steps.push_back(st);
        }
        ds.trajectories.push_back(traj);
    }
    ds.validate();
    return ds;
}

inline std::string tmp_path(const std::string& leaf) {
    std::string root = DILO_TEST_TMP;
    dilo::ensure_dir(root);
    return root + "/" + leaf;
}

// Run the CLI with the given argument string; returns the exit code and
// captures combined stdout/stderr.
inline int run_cli(const std::string& args, std::string* out = nullptr) {
    std::string cmd = std::string(DILO_BIN_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return -1;
    std::string acc;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) acc.append(buf, n);
    int rc = pclose(pipe);
    if (out) *out = acc;
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace testsup
