#include "dilo/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dilo {

namespace {
// Row/col deltas for up, down, left, right.
constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};
// Perpendicular action pairs: up/down slip to left/right and vice versa.
constexpr int kPerp[4][2] = {{2, 3}, {2, 3}, {0, 1}, {0, 1}};
}  // namespace

bool Gridworld::is_obstacle(int r, int c) const {
    for (const auto& o : obstacles)
        if (o.first == r && o.second == c) return true;
    return false;
}

void Gridworld::validate() const {
    if (width < 2 || height < 2)
        throw std::invalid_argument("Gridworld: needs at least a 2x2 grid");
    if (!(slip_prob >= 0.0 && slip_prob <= 0.5))
        throw std::invalid_argument("Gridworld: slip_prob must lie in [0, 0.5]");
    if (!in_bounds(goal.first, goal.second))
        throw std::invalid_argument("Gridworld: goal out of bounds");
    if (is_obstacle(goal.first, goal.second))
        throw std::invalid_argument("Gridworld: goal must not be an obstacle");
    for (const auto& o : obstacles)
        if (!in_bounds(o.first, o.second))
            throw std::invalid_argument("Gridworld: obstacle out of bounds");
    if (start) {
        if (!in_bounds(start->first, start->second))
            throw std::invalid_argument("Gridworld: start out of bounds");
        if (is_obstacle(start->first, start->second))
            throw std::invalid_argument("Gridworld: start on an obstacle");
        if (cell_index(start->first, start->second) == goal_index())
            throw std::invalid_argument("Gridworld: start equals goal");
    }
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("Gridworld: gamma must lie strictly inside (0,1)");
}

// Destination of an attempted move, with bump-stays-put walls and obstacles.
static int grid_move(const Gridworld& g, int s, int dir) {
    int r = s / g.width, c = s % g.width;
    int nr = r + kDr[dir], nc = c + kDc[dir];
    if (!g.in_bounds(nr, nc) || g.is_obstacle(nr, nc)) return s;
    return g.cell_index(nr, nc);
}

TabularMDP Gridworld::to_mdp() const {
    validate();
    TabularMDP mdp;
    mdp.n_states = n_states();
    mdp.n_actions = n_env_actions;
    mdp.gamma = gamma;
    mdp.transition.assign(n_env_actions, Eigen::MatrixXd::Zero(n_states(), n_states()));
    int g = goal_index();
    for (int s = 0; s < n_states(); ++s) {
        int r = s / width, c = s % width;
        for (int a = 0; a < n_env_actions; ++a) {
            if (s == g || is_obstacle(r, c)) {
                mdp.transition[a](s, s) = 1.0;  // absorbing (goal) or inert (obstacle)
                continue;
            }
            mdp.transition[a](s, grid_move(*this, s, a)) += 1.0 - slip_prob;
            mdp.transition[a](s, grid_move(*this, s, kPerp[a][0])) += slip_prob / 2.0;
            mdp.transition[a](s, grid_move(*this, s, kPerp[a][1])) += slip_prob / 2.0;
        }
    }
    mdp.initial_dist = Eigen::VectorXd::Zero(n_states());
    if (start) {
        mdp.initial_dist(cell_index(start->first, start->second)) = 1.0;
    } else {
        int free_cells = 0;
        for (int s = 0; s < n_states(); ++s)
            if (s != g && !is_obstacle(s / width, s % width)) ++free_cells;
        for (int s = 0; s < n_states(); ++s)
            if (s != g && !is_obstacle(s / width, s % width))
                mdp.initial_dist(s) = 1.0 / free_cells;
    }
    return mdp;
}

Eigen::VectorXd Gridworld::hidden_reward() const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n_states());
    r(goal_index()) = 1.0;
    return r;
}

int Gridworld::sample_initial(Rng& rng) const {
    if (start) return cell_index(start->first, start->second);
    std::vector<int> free;
    for (int s = 0; s < n_states(); ++s)
        if (s != goal_index() && !is_obstacle(s / width, s % width)) free.push_back(s);
    return free[rng.uniform_int(free.size())];
}

std::pair<int, bool> Gridworld::step(int s, int a, Rng& rng) const {
    if (a < 0 || a >= n_env_actions) throw std::invalid_argument("Gridworld::step: bad action");
    int dir = a;
    double u = rng.uniform();
    if (u < slip_prob / 2.0)
        dir = kPerp[a][0];
    else if (u < slip_prob)
        dir = kPerp[a][1];
    int next = (s == goal_index() || is_obstacle(s / width, s % width)) ? s
                                                                        : grid_move(*this, s, dir);
    return {next, next == goal_index()};
}

Eigen::VectorXd Gridworld::obs(int s) const {
    Eigen::VectorXd o(1);
    o(0) = static_cast<double>(s);
    return o;
}

void PointMassEnv::validate() const {
    if (dt <= 0.0 || max_action <= 0.0 || truncate_steps < 1)
        throw std::invalid_argument("PointMassEnv: dt, max_action, truncate_steps must be positive");
    auto inside = [](const Disc& d) {
        return d.radius > 0.0 && d.center.minCoeff() - d.radius >= 0.0 &&
               d.center.maxCoeff() + d.radius <= 1.0;
    };
    if (!inside(goal)) throw std::invalid_argument("PointMassEnv: goal disc outside workspace");
    for (const auto& o : obstacles)
        if (!inside(o)) throw std::invalid_argument("PointMassEnv: obstacle outside workspace");
}

Eigen::Vector2d PointMassEnv::reset(Rng& rng) const {
    Eigen::Vector2d s = start_center;
    s.x() += start_noise * rng.gaussian();
    s.y() += start_noise * rng.gaussian();
    return s.cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::Vector2d PointMassEnv::clip_action(const Eigen::Vector2d& a) const {
    return a.cwiseMax(-max_action).cwiseMin(max_action);
}

Eigen::Vector2d PointMassEnv::step(const Eigen::Vector2d& s, const Eigen::Vector2d& a) const {
    Eigen::Vector2d next = s + clip_action(a) * dt;
    return next.cwiseMax(0.0).cwiseMin(1.0);
}

bool PointMassEnv::in_goal(const Eigen::Vector2d& s) const {
    return (s - goal.center).norm() <= goal.radius;
}

bool PointMassEnv::segment_hits_obstacle(const Eigen::Vector2d& s,
                                         const Eigen::Vector2d& s_next) const {
    for (const auto& o : obstacles) {
        // Distance from the disc centre to the closed segment [s, s_next].
        Eigen::Vector2d d = s_next - s;
        double len2 = d.squaredNorm();
        double t = len2 > 0.0 ? std::clamp((o.center - s).dot(d) / len2, 0.0, 1.0) : 0.0;
        if ((s + t * d - o.center).norm() <= o.radius) return true;
    }
    return false;
}

static ValueIterationResult value_iteration_impl(const TabularMDP& mdp,
                                                 const Eigen::MatrixXd& R, double tol) {
    mdp.validate();
    if (tol <= 0.0) throw std::invalid_argument("value_iteration: tol must be positive");
    int S = mdp.n_states, A = mdp.n_actions;
    Eigen::VectorXd V = Eigen::VectorXd::Zero(S);
    Eigen::MatrixXd Q(S, A);
    // sup-norm contraction: stopping when the update moves by <= tol leaves a
    // Bellman residual <= gamma * tol < tol.
    for (int it = 0; it < 1000000; ++it) {
        for (int a = 0; a < A; ++a) Q.col(a) = R.col(a) + mdp.gamma * (mdp.transition[a] * V);
        Eigen::VectorXd Vn = Q.rowwise().maxCoeff();
        double delta = (Vn - V).cwiseAbs().maxCoeff();
        V = Vn;
        if (delta <= tol) break;
    }
    for (int a = 0; a < A; ++a) Q.col(a) = R.col(a) + mdp.gamma * (mdp.transition[a] * V);
    TabularPolicy pi;
    pi.probs = Eigen::MatrixXd::Zero(S, A);
    for (int s = 0; s < S; ++s) {
        int best = 0;
        for (int a = 1; a < A; ++a)
            if (Q(s, a) > Q(s, best)) best = a;  // strict: ties keep the lowest index
        pi.probs(s, best) = 1.0;
    }
    return {V, pi};
}

ValueIterationResult value_iteration(const TabularMDP& mdp, const Eigen::VectorXd& reward,
                                     double tol) {
    if (reward.size() != mdp.n_states)
        throw std::invalid_argument("value_iteration: reward vector size mismatch");
    Eigen::MatrixXd R = reward.replicate(1, mdp.n_actions);
    return value_iteration_impl(mdp, R, tol);
}

ValueIterationResult value_iteration(const TabularMDP& mdp, const Eigen::MatrixXd& reward,
                                     double tol) {
    if (reward.rows() != mdp.n_states || reward.cols() != mdp.n_actions)
        throw std::invalid_argument("value_iteration: reward matrix shape mismatch");
    return value_iteration_impl(mdp, reward, tol);
}

TabularPolicy gridworld_expert(const Gridworld& grid) {
    return value_iteration(grid.to_mdp(), grid.hidden_reward(), 1e-10).policy;
}

TabularPolicy uniform_policy(int n_states, int n_actions) {
    TabularPolicy pi;
    pi.probs = Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions);
    return pi;
}

TabularPolicy ring_behavior_policy(const Gridworld& grid) {
    grid.validate();
    TabularPolicy pi;
    pi.probs = Eigen::MatrixXd::Zero(grid.n_states(), Gridworld::n_env_actions);
    for (int s = 0; s < grid.n_states(); ++s) {
        int r = s / grid.width, c = s % grid.width;
        if (r == grid.height - 1) {
            pi.probs(s, 3) = 0.5;   // right
            pi.probs(s, 2) = 0.25;  // left
            pi.probs(s, 1) = 0.25;  // down
        } else if (c == grid.width - 1) {
            pi.probs(s, 0) = 0.5;   // up
            pi.probs(s, 1) = 0.25;  // down
            pi.probs(s, 3) = 0.25;  // right
        } else {
            pi.probs(s, 1) = pi.probs(s, 2) = pi.probs(s, 3) = 1.0 / 3.0;
        }
    }
    return pi;
}

static int sample_discrete(const Eigen::VectorXd& p, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        acc += p(i);
        if (u < acc) return i;
    }
    return static_cast<int>(p.size()) - 1;
}

Trajectory rollout(const Gridworld& grid, const TabularPolicy& policy, int horizon,
                   std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
    grid.validate();
    Rng rng(seed);
    Trajectory traj;
    int s = grid.sample_initial(rng);
    for (int t = 0; t < horizon; ++t) {
        int a = sample_discrete(policy.probs.row(s), rng);
        Eigen::VectorXd act(1);
        act(0) = static_cast<double>(a);
        traj.steps.push_back({grid.obs(s), act, false});
        auto [next, done] = grid.step(s, a, rng);
        s = next;
        if (done) break;
    }
    // Final state, with the action the policy would take there.
    int a_last = sample_discrete(policy.probs.row(s), rng);
    Eigen::VectorXd act(1);
    act(0) = static_cast<double>(a_last);
    traj.steps.push_back({grid.obs(s), act, s == grid.goal_index()});
    return traj;
}

Trajectory rollout(const PointMassEnv& env,
                   const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& controller,
                   int horizon, std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
    env.validate();
    Rng rng(seed);
    Trajectory traj;
    Eigen::Vector2d s = env.reset(rng);
    int limit = std::min(horizon, env.truncate_steps);
    for (int t = 0; t < limit; ++t) {
        Eigen::Vector2d a = env.clip_action(controller(s));
        traj.steps.push_back({s, Eigen::VectorXd(a), false});
        s = env.step(s, a);
        if (env.in_goal(s)) break;
    }
    Eigen::Vector2d a_last = env.clip_action(controller(s));
    traj.steps.push_back({s, Eigen::VectorXd(a_last), env.in_goal(s)});
    return traj;
}

Eigen::Vector2d scripted_pointmass_expert(const PointMassEnv& env, const Eigen::Vector2d& state) {
    Eigen::Vector2d to_goal = env.goal.center - state;
    double dist_goal = to_goal.norm();
    if (dist_goal < 1e-3) return Eigen::Vector2d::Zero();
    Eigen::Vector2d cmd = to_goal / dist_goal;
    for (const auto& o : env.obstacles) {
        Eigen::Vector2d away = state - o.center;
        double dist = away.norm();
        if (dist >= 1.5 * o.radius || dist <= 1e-9) continue;
        Eigen::Vector2d radial = away / dist;
        // 0 at the influence boundary, 1 at the disc surface.
        double strength = std::clamp((1.5 * o.radius - dist) / (0.5 * o.radius), 0.0, 1.5);
        Eigen::Vector2d tangential(-radial.y(), radial.x());
        if (tangential.dot(to_goal) < 0.0) tangential = -tangential;
        cmd += 2.0 * strength * radial + 1.5 * strength * tangential;
    }
    // Scale uniformly into the per-axis box so the direction is preserved.
    double m = cmd.cwiseAbs().maxCoeff();
    if (m > env.max_action) cmd *= env.max_action / m;
    return cmd;
}

TrajectoryDataset compose_mixture_dataset(const Gridworld& grid, const TabularPolicy& expert,
                                          const TabularPolicy& behavior, int n_expert_traj,
                                          int n_subopt_traj, int horizon, std::uint64_t seed) {
    if (n_expert_traj < 0 || n_subopt_traj < 0 || n_expert_traj + n_subopt_traj == 0)
        throw std::invalid_argument("compose_mixture_dataset: need a positive trajectory count");
    Rng rng(seed);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < n_subopt_traj; ++i)
        trajs.push_back(rollout(grid, behavior, horizon, rng.fork(i).uniform_int(UINT64_MAX)));
    for (int i = 0; i < n_expert_traj; ++i)
        trajs.push_back(
            rollout(grid, expert, horizon, rng.fork(n_subopt_traj + i).uniform_int(UINT64_MAX)));
    // Fisher-Yates shuffle of the trajectory order.
    for (size_t i = trajs.size(); i > 1; --i) {
        size_t j = rng.uniform_int(i);
        std::swap(trajs[i - 1], trajs[j]);
    }
    TrajectoryDataset ds;
    ds.meta.env = "gridworld";
    ds.meta.obs_dim = 1;
    ds.meta.act_dim = 1;
    ds.meta.has_actions = true;
    ds.meta.seed = seed;
    ds.meta.generator = "compose_mixture_dataset";
    ds.trajectories = std::move(trajs);
    ds.validate();
    return ds;
}

}  // namespace dilo
