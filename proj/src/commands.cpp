#include "dilo/commands.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <variant>

#include "dilo/approximator.hpp"
#include "dilo/config.hpp"
#include "dilo/dataset.hpp"
#include "dilo/dual_trainer.hpp"
#include "dilo/envs.hpp"
#include "dilo/errors.hpp"
#include "dilo/policy_eval.hpp"
#include "dilo/primal_oracle.hpp"
#include "dilo/util.hpp"

namespace dilo {

namespace {

namespace fs = std::filesystem;

std::string join_under(const std::string& dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(dir) / p).string();
}

// Load + validate the config, create the output directory, and echo the fully
// resolved config (defaults materialized) next to the run artifacts.
RunConfig prepare(const std::string& config_path, std::string* outdir) {
    RunConfig cfg = load_run_config(config_path);
    *outdir = resolve_output_dir(cfg);
    ensure_dir(*outdir);
    write_text_file(join_under(*outdir, "config_resolved.json"), run_config_to_json(cfg));
    return cfg;
}

// Point-mass analogue of compose_mixture_dataset: scripted-expert episodes
// mixed with uniform-random-action episodes, shuffled.
TrajectoryDataset compose_pointmass_dataset(const PointMassEnv& env, int n_expert_traj,
                                            int n_random_traj, int horizon, std::uint64_t seed) {
    if (n_expert_traj < 0 || n_random_traj < 0 || n_expert_traj + n_random_traj == 0)
        throw std::invalid_argument("compose_pointmass_dataset: need a positive trajectory count");
    Rng rng(seed);
    auto expert_ctl = [&env](const Eigen::Vector2d& s) {
        return scripted_pointmass_expert(env, s);
    };
    std::vector<Trajectory> trajs;
    // Even fork salts seed the rollouts, odd salts drive the random controllers.
    for (int i = 0; i < n_random_traj; ++i) {
        auto random_ctl = [&env, step_rng = rng.fork(2 * i + 1)](const Eigen::Vector2d&) mutable {
            return Eigen::Vector2d(env.max_action * (2.0 * step_rng.uniform() - 1.0),
                                   env.max_action * (2.0 * step_rng.uniform() - 1.0));
        };
        trajs.push_back(
            rollout(env, random_ctl, horizon, rng.fork(2 * i).uniform_int(UINT64_MAX)));
    }
    for (int i = 0; i < n_expert_traj; ++i)
        trajs.push_back(rollout(env, expert_ctl, horizon,
                                rng.fork(2 * (n_random_traj + i)).uniform_int(UINT64_MAX)));
    for (size_t i = trajs.size(); i > 1; --i) {
        size_t j = rng.uniform_int(i);
        std::swap(trajs[i - 1], trajs[j]);
    }
    TrajectoryDataset ds;
    ds.meta.env = "pointmass";
    ds.meta.obs_dim = 2;
    ds.meta.act_dim = 2;
    ds.meta.has_actions = true;
    ds.meta.seed = seed;
    ds.meta.generator = "compose_pointmass_dataset";
    ds.trajectories = std::move(trajs);
    ds.validate();
    return ds;
}

// Scripted-expert success rate under the same per-episode stream scheme and
// success rule as evaluate_policy for the point mass.
double scripted_pointmass_return(const PointMassEnv& env, int n_episodes, std::uint64_t seed) {
    Rng master(seed);
    int successes = 0;
    for (int e = 0; e < n_episodes; ++e) {
        Rng episode = master.fork(static_cast<std::uint64_t>(e));
        Eigen::Vector2d s = env.reset(episode);
        bool contact = false;
        bool reached = false;
        for (int t = 0; t < env.truncate_steps; ++t) {
            Eigen::Vector2d a = env.clip_action(scripted_pointmass_expert(env, s));
            Eigen::Vector2d next = env.step(s, a);
            if (env.segment_hits_obstacle(s, next)) contact = true;
            s = next;
            if (env.in_goal(s)) {
                reached = true;
                break;
            }
        }
        if (reached && !contact) ++successes;
    }
    return static_cast<double>(successes) / n_episodes;
}

// Normalization statistics for network inputs: per-dimension mean/std over
// the concatenated (s, s') rows of the offline dataset.
void set_input_stats(ValueApproximator& v, const TrajectoryDataset& offline) {
    PairBatch pairs = all_pairs(offline);
    Eigen::MatrixXd X(pairs.size(), pairs.s.cols() + pairs.s_next.cols());
    X << pairs.s, pairs.s_next;
    Eigen::VectorXd mean = X.colwise().mean();
    Eigen::VectorXd var =
        (X.rowwise() - mean.transpose()).array().square().colwise().mean();
    v.set_normalization(mean, var.array().sqrt());
}

}  // namespace

int run_gen_data(const std::string& config_path) {
    std::string outdir;
    RunConfig cfg = prepare(config_path, &outdir);
    TrajectoryDataset offline, expert;
    if (cfg.env.name == "gridworld") {
        const Gridworld& grid = cfg.env.grid;
        TabularPolicy expert_pi = gridworld_expert(grid);
        TabularPolicy behavior_pi = cfg.data.behavior == "ring"
                                        ? ring_behavior_policy(grid)
                                        : uniform_policy(grid.n_states(), Gridworld::n_env_actions);
        offline = compose_mixture_dataset(grid, expert_pi, behavior_pi,
                                          cfg.data.n_offline_expert_traj,
                                          cfg.data.n_offline_behavior_traj, cfg.data.horizon,
                                          cfg.data.seed);
        expert = strip_actions(compose_mixture_dataset(grid, expert_pi, behavior_pi,
                                                       cfg.data.n_expert_traj, 0,
                                                       cfg.data.horizon, cfg.data.seed + 1));
    } else {
        const PointMassEnv& env = cfg.env.pointmass;
        offline = compose_pointmass_dataset(env, cfg.data.n_offline_expert_traj,
                                            cfg.data.n_offline_behavior_traj, cfg.data.horizon,
                                            cfg.data.seed);
        expert = strip_actions(compose_pointmass_dataset(env, cfg.data.n_expert_traj, 0,
                                                         cfg.data.horizon, cfg.data.seed + 1));
    }
    save_dataset(expert, join_under(outdir, cfg.data.expert_path));
    save_dataset(offline, join_under(outdir, cfg.data.offline_path));
    std::cout << "gen-data: " << expert.trajectories.size() << " expert trajectories -> "
              << cfg.data.expert_path << ", " << offline.trajectories.size()
              << " offline trajectories -> " << cfg.data.offline_path << " under " << outdir
              << "\n";
    return 0;
}

int run_train(const std::string& config_path) {
    std::string outdir;
    RunConfig cfg = prepare(config_path, &outdir);
    TrajectoryDataset expert = load_dataset(join_under(outdir, cfg.data.expert_path));
    TrajectoryDataset offline = load_dataset(join_under(outdir, cfg.data.offline_path));
    Rng rng(cfg.dilo.seed);
    ValueApproximator v;
    if (cfg.env.name == "gridworld") {
        v = ValueApproximator::make_table(cfg.env.grid.n_states());
    } else {
        v = ValueApproximator::make_network(offline.meta.obs_dim, cfg.hidden, rng);
        set_input_stats(v, offline);
    }
    TrainResult result = train_value(v, expert, offline, cfg.dilo, rng);

    std::ostringstream csv;
    csv << "step,total,term_initial,term_conjugate,term_linear,grad_norm_forward,"
           "grad_norm_backward,grad_norm_combined,mean_w_expert,mean_w_offline\n";
    for (const StepMetrics& m : result.history) {
        csv << m.step << ',' << format_double(m.loss.total) << ','
            << format_double(m.loss.term_initial) << ',' << format_double(m.loss.term_conjugate)
            << ',' << format_double(m.loss.term_linear) << ','
            << format_double(m.grad_norm_forward) << ',' << format_double(m.grad_norm_backward)
            << ',' << format_double(m.grad_norm_combined) << ',' << format_double(m.mean_w_expert)
            << ',' << format_double(m.mean_w_offline) << '\n';
    }
    write_text_file(join_under(outdir, "metrics.csv"), csv.str());
    v.save(join_under(outdir, "value.ckpt"));

    if (cfg.env.name == "gridworld") {
        TabularSoftmaxPolicy pi = extract_policy_tabular(v, offline, cfg.env.grid.n_states(),
                                                         Gridworld::n_env_actions, cfg.dilo);
        save_policy(pi, join_under(outdir, "policy.ckpt"));
        if (!pi.uncovered.empty())
            std::cout << "train: " << pi.uncovered.size()
                      << " states without offline coverage kept uniform rows\n";
    } else {
        GaussianPolicy pi =
            extract_policy_gaussian(v, offline, cfg.hidden, cfg.dilo, cfg.policy_steps, rng);
        save_policy(pi, join_under(outdir, "policy.ckpt"));
    }
    const StepMetrics& last = result.history.back();
    std::cout << "train: " << result.history.size() << " steps, final loss "
              << format_double(last.loss.total) << ", wrote metrics.csv, value.ckpt, policy.ckpt under "
              << outdir << "\n";
    return 0;
}

int run_eval(const std::string& config_path, const std::string& ckpt_path) {
    std::string outdir;
    RunConfig cfg = prepare(config_path, &outdir);
    ParametricPolicy policy = load_policy(ckpt_path);
    EvalReport rep;
    if (cfg.env.name == "gridworld") {
        if (!std::holds_alternative<TabularSoftmaxPolicy>(policy))
            throw DataError("checkpoint '" + ckpt_path + "' does not hold a discrete policy");
        const Gridworld& grid = cfg.env.grid;
        References refs;
        refs.expert_return = evaluate_policy(grid, gridworld_expert(grid), cfg.eval.n_episodes,
                                             cfg.eval.horizon, cfg.eval.seed)
                                 .mean_return;
        refs.random_return =
            evaluate_policy(grid, uniform_policy(grid.n_states(), Gridworld::n_env_actions),
                            cfg.eval.n_episodes, cfg.eval.horizon, cfg.eval.seed)
                .mean_return;
        rep = evaluate_policy(grid, std::get<TabularSoftmaxPolicy>(policy), cfg.eval.n_episodes,
                              cfg.eval.horizon, cfg.eval.seed, refs);
    } else {
        if (!std::holds_alternative<GaussianPolicy>(policy))
            throw DataError("checkpoint '" + ckpt_path + "' does not hold a Gaussian policy");
        const PointMassEnv& env = cfg.env.pointmass;
        References refs;
        refs.expert_return =
            scripted_pointmass_return(env, cfg.eval.n_episodes, cfg.eval.seed);
        refs.random_return = 0.0;
        rep = evaluate_policy(env, std::get<GaussianPolicy>(policy), cfg.eval.n_episodes,
                              cfg.eval.seed, refs);
    }

    std::string results_path = join_under(outdir, "eval_results.csv");
    bool fresh = !fs::exists(results_path);
    std::ofstream out(results_path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open '" + results_path + "' for append");
    if (fresh)
        out << "ckpt,env,n_episodes,seed,mean_return,success_rate,normalized_score,std_err\n";
    out << ckpt_path << ',' << cfg.env.name << ',' << rep.n_episodes << ',' << rep.seed << ','
        << format_double(rep.mean_return) << ',' << format_double(rep.success_rate) << ','
        << format_double(rep.normalized_score) << ',' << format_double(rep.std_err) << '\n';
    if (!out) throw IoError("failed writing '" + results_path + "'");
    std::cout << "eval: mean_return " << format_double(rep.mean_return) << ", success_rate "
              << format_double(rep.success_rate) << ", normalized_score "
              << format_double(rep.normalized_score) << " (n " << rep.n_episodes << ", seed "
              << rep.seed << ")\n";
    return 0;
}

int run_oracle_check(const std::string& config_path) {
    std::string outdir;
    RunConfig cfg = prepare(config_path, &outdir);
    FGenerator gen = chi_square();
    std::ostringstream csv;
    csv << "instance,seed,primal_value,dual_value,gap\n";
    auto emit = [&](const std::string& name, std::uint64_t seed, const CertificateInstance& inst) {
        SmoothedInputs sm = maybe_smooth(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                         inst.beta);
        PrimalSolution primal = solve_primal(inst.mdp, inst.d0_joint, sm.d_expert, sm.rho,
                                             inst.beta, gen, cfg.oracle.tol,
                                             cfg.oracle.max_iterations);
        DualSolution dual = solve_dual_exact(inst.mdp, inst.d0_joint, sm.d_expert, sm.rho,
                                             inst.beta, gen, cfg.oracle.tol);
        double gap = duality_gap(primal, dual);
        csv << name << ',' << seed << ',' << format_double(primal.objective_value) << ','
            << format_double(dual.value) << ',' << format_double(gap) << '\n';
    };
    for (std::uint64_t s : cfg.oracle.seeds) emit("random", s, random_certificate_instance(s));
    if (cfg.oracle.include_chain) emit("chain", 0, chain_certificate_instance());
    write_text_file(join_under(outdir, "oracle_check.csv"), csv.str());
    std::cout << csv.str();
    return 0;
}

int run_diagnose(const std::string& ckpt_path, const std::string& data_path) {
    ValueApproximator v = ValueApproximator::load(ckpt_path);
    TrajectoryDataset ds = load_dataset(data_path);
    DiloConfig cfg;
    Rng rng(0);
    int n = static_cast<int>(std::min<std::size_t>(1000, triple_positions(ds).size()));
    TripleBatch batch = sample_offline_triples(ds, n, rng);
    Eigen::VectorXd w = recover_ratio(v, batch, cfg);
    std::cout << "w,implied_reward,residual\n";
    for (int i = 0; i < batch.size(); ++i) {
        double r = implied_reward(v, batch.s.row(i), batch.s_next.row(i), batch.s_next2.row(i),
                                  cfg.gamma);
        std::cout << format_double(w(i)) << ',' << format_double(r) << ',' << format_double(-r)
                  << '\n';
    }
    return 0;
}

}  // namespace dilo
