#include "dilo/policy_eval.hpp"

#include <cmath>
#include <stdexcept>

#include "dilo/errors.hpp"

namespace dilo {

namespace {

int action_index(const Eigen::VectorXd& act, int n_actions) {
    if (act.size() != 1) throw DataError("policy_eval: expected 1-dim tabular actions");
    long a = std::lround(act(0));
    if (a < 0 || a >= n_actions)
        throw DataError("policy_eval: action index " + std::to_string(a) + " out of range");
    return static_cast<int>(a);
}

int sample_row(const Eigen::MatrixXd& probs, int s, Rng& rng) {
    double u = rng.uniform();
    double c = 0.0;
    int A = static_cast<int>(probs.cols());
    for (int a = 0; a < A; ++a) {
        c += probs(s, a);
        if (u < c) return a;
    }
    return A - 1;
}

TabularSoftmaxPolicy policy_from_counts(const Eigen::MatrixXd& counts) {
    TabularSoftmaxPolicy pol;
    int S = static_cast<int>(counts.rows());
    pol.logits.resize(S, counts.cols());
    for (int s = 0; s < S; ++s) {
        if (counts.row(s).sum() <= 0.0) {
            pol.logits.row(s).setZero();
            pol.uncovered.push_back(s);
        } else {
            for (int a = 0; a < counts.cols(); ++a) pol.logits(s, a) = std::log(counts(s, a));
        }
    }
    return pol;
}

// Weighted diagonal-Gaussian maximum likelihood: full-batch Adam over the
// mean net parameters and the shared log-std vector.
GaussianPolicy fit_gaussian(const Eigen::MatrixXd& X, const Eigen::MatrixXd& actions,
                            const Eigen::VectorXd& w, const std::vector<int>& hidden, int steps,
                            double lr, Rng& rng) {
    int N = static_cast<int>(X.rows());
    int obs_dim = static_cast<int>(X.cols());
    int act_dim = static_cast<int>(actions.cols());
    GaussianPolicy pol;
    Eigen::RowVectorXd mu = X.colwise().mean();
    Eigen::RowVectorXd sd =
        (X.rowwise() - mu).array().square().colwise().mean().sqrt().max(1e-8);
    pol.in_mean = mu.transpose();
    pol.in_std = sd.transpose();
    Eigen::MatrixXd Xn = X.rowwise() - mu;
    Xn.array().rowwise() /= sd.array();

    pol.mean_net = Mlp(obs_dim, hidden, act_dim);
    pol.mean_net.init(rng);
    pol.log_std = Eigen::VectorXd::Zero(act_dim);

    int np = pol.mean_net.n_params();
    Eigen::VectorXd theta(np + act_dim);
    theta.head(np) = pol.mean_net.flat_params();
    theta.tail(act_dim) = pol.log_std;
    Optimizer opt;
    opt.lr = lr;
    for (int step = 0; step < steps; ++step) {
        pol.mean_net.set_flat_params(theta.head(np));
        pol.log_std = theta.tail(act_dim);
        Eigen::VectorXd cls = pol.clamped_log_std();
        Eigen::VectorXd prec = (-2.0 * cls).array().exp();
        Mlp::Cache cache;
        Eigen::MatrixXd mean_out = pol.mean_net.forward(Xn, &cache);
        Eigen::MatrixXd resid = mean_out - actions;
        Eigen::MatrixXd dY(N, act_dim);
        Eigen::VectorXd g_ls = Eigen::VectorXd::Zero(act_dim);
        for (int k = 0; k < act_dim; ++k) {
            dY.col(k) = (w.array() * prec(k) * resid.col(k).array()) / N;
            g_ls(k) = (w.array() * (1.0 - prec(k) * resid.col(k).array().square())).sum() / N;
            bool clamped = pol.log_std(k) < GaussianPolicy::log_std_min ||
                           pol.log_std(k) > GaussianPolicy::log_std_max;
            if (clamped) g_ls(k) = 0.0;
        }
        Eigen::VectorXd g(np + act_dim);
        g.head(np) = pol.mean_net.backward(cache, dY);
        g.tail(act_dim) = g_ls;
        opt.step(theta, g);
    }
    pol.mean_net.set_flat_params(theta.head(np));
    pol.log_std = theta.tail(act_dim);
    return pol;
}

}  // namespace

TabularSoftmaxPolicy extract_policy_tabular(const ValueApproximator& v,
                                            const TrajectoryDataset& offline, int n_states,
                                            int n_actions, const DiloConfig& cfg) {
    cfg.validate();
    if (!offline.meta.has_actions)
        throw std::invalid_argument("extract_policy: offline data must carry actions");
    PairBatch rows = all_pairs(offline, true);
    Eigen::VectorXd vals = v.evaluate_batch(rows.s, rows.s_next, nullptr);
    double log_clip = std::log(cfg.clip_max);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n_states, n_actions);
    for (int i = 0; i < rows.size(); ++i) {
        int s = state_index_from_obs(rows.s.row(i).transpose(), n_states);
        int a = action_index(rows.actions.row(i).transpose(), n_actions);
        acc(s, a) += std::exp(std::min(cfg.tau * vals(i), log_clip));
    }
    return policy_from_counts(acc);
}

GaussianPolicy extract_policy_gaussian(const ValueApproximator& v,
                                       const TrajectoryDataset& offline,
                                       const std::vector<int>& hidden, const DiloConfig& cfg,
                                       int steps, Rng& rng) {
    cfg.validate();
    if (steps < 1) throw std::invalid_argument("extract_policy: steps must be >= 1");
    if (!offline.meta.has_actions)
        throw std::invalid_argument("extract_policy: offline data must carry actions");
    PairBatch rows = all_pairs(offline, true);
    Eigen::VectorXd vals = v.evaluate_batch(rows.s, rows.s_next, nullptr);
    double log_clip = std::log(cfg.clip_max);
    Eigen::VectorXd w(rows.size());
    for (int i = 0; i < rows.size(); ++i)
        w(i) = std::exp(std::min(cfg.tau * vals(i), log_clip));
    return fit_gaussian(rows.s, rows.actions, w, hidden, steps, cfg.policy_lr, rng);
}

TabularSoftmaxPolicy train_bc(const TrajectoryDataset& offline, int n_states, int n_actions) {
    if (!offline.meta.has_actions)
        throw std::invalid_argument("train_bc: dataset must carry actions");
    PairBatch rows = all_pairs(offline, true);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n_states, n_actions);
    for (int i = 0; i < rows.size(); ++i) {
        int s = state_index_from_obs(rows.s.row(i).transpose(), n_states);
        int a = action_index(rows.actions.row(i).transpose(), n_actions);
        counts(s, a) += 1.0;
    }
    return policy_from_counts(counts);
}

TabularSoftmaxPolicy train_bco(const TrajectoryDataset& expert_obs,
                               const TrajectoryDataset& offline, int n_states, int n_actions) {
    if (!offline.meta.has_actions)
        throw std::invalid_argument("train_bco: offline dataset must carry actions");
    PairBatch off = all_pairs(offline, true);
    Eigen::MatrixXd pair_counts = Eigen::MatrixXd::Zero(n_states * n_states, n_actions);
    Eigen::VectorXd global_counts = Eigen::VectorXd::Zero(n_actions);
    for (int i = 0; i < off.size(); ++i) {
        int s = state_index_from_obs(off.s.row(i).transpose(), n_states);
        int sp = state_index_from_obs(off.s_next.row(i).transpose(), n_states);
        int a = action_index(off.actions.row(i).transpose(), n_actions);
        pair_counts(s * n_states + sp, a) += 1.0;
        global_counts(a) += 1.0;
    }
    int global_best = 0;
    for (int a = 1; a < n_actions; ++a)
        if (global_counts(a) > global_counts(global_best)) global_best = a;

    PairBatch exp_pairs = all_pairs(expert_obs);
    Eigen::MatrixXd labeled = Eigen::MatrixXd::Zero(n_states, n_actions);
    for (int i = 0; i < exp_pairs.size(); ++i) {
        int s = state_index_from_obs(exp_pairs.s.row(i).transpose(), n_states);
        int sp = state_index_from_obs(exp_pairs.s_next.row(i).transpose(), n_states);
        int row = s * n_states + sp;
        int label = global_best;
        if (pair_counts.row(row).sum() > 0.0) {
            label = 0;
            for (int a = 1; a < n_actions; ++a)
                if (pair_counts(row, a) > pair_counts(row, label)) label = a;
        }
        labeled(s, label) += 1.0;
    }
    return policy_from_counts(labeled);
}

GaussianPolicy train_bco_gaussian(const TrajectoryDataset& expert_obs,
                                  const TrajectoryDataset& offline,
                                  const std::vector<int>& hidden, int idm_steps, int bc_steps,
                                  double lr, Rng& rng) {
    if (!offline.meta.has_actions)
        throw std::invalid_argument("train_bco: offline dataset must carry actions");
    if (idm_steps < 1 || bc_steps < 1)
        throw std::invalid_argument("train_bco: step counts must be >= 1");
    PairBatch off = all_pairs(offline, true);
    int obs_dim = static_cast<int>(off.s.cols());
    int act_dim = static_cast<int>(off.actions.cols());
    int N = off.size();

    Eigen::MatrixXd X(N, 2 * obs_dim);
    X << off.s, off.s_next;
    Eigen::RowVectorXd mu = X.colwise().mean();
    Eigen::RowVectorXd sd =
        (X.rowwise() - mu).array().square().colwise().mean().sqrt().max(1e-8);
    Eigen::MatrixXd Xn = X.rowwise() - mu;
    Xn.array().rowwise() /= sd.array();

    Mlp idm(2 * obs_dim, hidden, act_dim);
    idm.init(rng);
    Eigen::VectorXd theta = idm.flat_params();
    Optimizer opt;
    opt.lr = lr;
    for (int step = 0; step < idm_steps; ++step) {
        idm.set_flat_params(theta);
        Mlp::Cache cache;
        Eigen::MatrixXd pred = idm.forward(Xn, &cache);
        Eigen::MatrixXd dY = 2.0 * (pred - off.actions) / N;
        Eigen::VectorXd g = idm.backward(cache, dY);
        opt.step(theta, g);
    }
    idm.set_flat_params(theta);

    PairBatch exp_pairs = all_pairs(expert_obs);
    int M = exp_pairs.size();
    Eigen::MatrixXd Xe(M, 2 * obs_dim);
    Xe << exp_pairs.s, exp_pairs.s_next;
    Eigen::MatrixXd Xen = Xe.rowwise() - mu;
    Xen.array().rowwise() /= sd.array();
    Eigen::MatrixXd labels = idm.forward(Xen, nullptr);
    return fit_gaussian(exp_pairs.s, labels, Eigen::VectorXd::Ones(M), hidden, bc_steps, lr, rng);
}

namespace {

EvalReport finish_report(Eigen::VectorXd& rets, int successes, std::uint64_t seed,
                         const std::optional<References>& refs) {
    EvalReport rep;
    rep.n_episodes = static_cast<int>(rets.size());
    rep.seed = seed;
    rep.mean_return = rets.mean();
    rep.success_rate = static_cast<double>(successes) / rep.n_episodes;
    if (rep.n_episodes > 1) {
        double var = (rets.array() - rep.mean_return).square().sum() / (rep.n_episodes - 1);
        rep.std_err = std::sqrt(var / rep.n_episodes);
    }
    if (refs && refs->expert_return != refs->random_return)
        rep.normalized_score = 100.0 * (rep.mean_return - refs->random_return) /
                               (refs->expert_return - refs->random_return);
    return rep;
}

}  // namespace

EvalReport evaluate_policy(const Gridworld& grid, const TabularPolicy& policy, int n_episodes,
                           int horizon, std::uint64_t seed,
                           const std::optional<References>& refs) {
    grid.validate();
    policy.validate();
    if (n_episodes < 1) throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
    if (horizon < 1) throw std::invalid_argument("evaluate_policy: horizon must be >= 1");
    if (policy.probs.rows() != grid.n_states() ||
        policy.probs.cols() != Gridworld::n_env_actions)
        throw std::invalid_argument("evaluate_policy: policy shape mismatch");
    Rng master(seed);
    Eigen::VectorXd rets(n_episodes);
    int successes = 0;
    const int goal = grid.goal_index();
    for (int e = 0; e < n_episodes; ++e) {
        Rng ep = master.fork(static_cast<std::uint64_t>(e));
        int s = grid.sample_initial(ep);
        double ret = 0.0;
        for (int t = 0; t < horizon; ++t) {
            int a = sample_row(policy.probs, s, ep);
            s = grid.step(s, a, ep).first;
            if (s == goal) {
                // Arrival plus every absorbing step until the horizon.
                ret = static_cast<double>(horizon - t);
                ++successes;
                break;
            }
        }
        rets(e) = ret;
    }
    return finish_report(rets, successes, seed, refs);
}

EvalReport evaluate_policy(const Gridworld& grid, const TabularSoftmaxPolicy& policy,
                           int n_episodes, int horizon, std::uint64_t seed,
                           const std::optional<References>& refs) {
    TabularPolicy plain;
    plain.probs = policy.probs();
    return evaluate_policy(grid, plain, n_episodes, horizon, seed, refs);
}

EvalReport evaluate_policy(const PointMassEnv& env, const GaussianPolicy& policy, int n_episodes,
                           std::uint64_t seed, const std::optional<References>& refs) {
    env.validate();
    if (n_episodes < 1) throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
    Rng master(seed);
    Eigen::VectorXd rets(n_episodes);
    int successes = 0;
    for (int e = 0; e < n_episodes; ++e) {
        Rng ep = master.fork(static_cast<std::uint64_t>(e));
        Eigen::Vector2d s = env.reset(ep);
        bool contact = false;
        bool reached = env.in_goal(s);
        for (int t = 0; t < env.truncate_steps && !reached; ++t) {
            Eigen::VectorXd a = policy.mean(s);
            if (a.size() != 2)
                throw std::invalid_argument("evaluate_policy: point-mass policy must be 2-dim");
            Eigen::Vector2d sn = env.step(s, Eigen::Vector2d(a(0), a(1)));
            if (env.segment_hits_obstacle(s, sn)) contact = true;
            s = sn;
            reached = env.in_goal(s);
        }
        bool success = reached && !contact;
        rets(e) = success ? 1.0 : 0.0;
        if (success) ++successes;
    }
    return finish_report(rets, successes, seed, refs);
}

}  // namespace dilo
