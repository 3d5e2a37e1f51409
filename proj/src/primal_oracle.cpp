#include "dilo/primal_oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dilo/envs.hpp"
#include "dilo/errors.hpp"

namespace dilo {

namespace {

JointVisitation smooth_one(const JointVisitation& d, double eps) {
    JointVisitation out = d;
    double total = 0.0;
    for (auto& m : out.tensor) {
        m.array() += eps;
        total += m.sum();
    }
    for (auto& m : out.tensor) m /= total;
    return out;
}

void check_model(const TabularMDP& mdp, const JointInitialDist& d0_joint) {
    int S = mdp.n_states;
    for (int s = 0; s < S; ++s) {
        for (int p = 0; p < S; ++p) {
            if (d0_joint.m(s, p) <= 0.0) continue;
            double mx = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) mx = std::max(mx, mdp.transition[a](s, p));
            if (mx == 0.0)
                throw DataError("primal oracle: d~0 places mass on pair (" + std::to_string(s) +
                                "," + std::to_string(p) + ") that no action can produce");
        }
    }
}

}  // namespace

SmoothedInputs maybe_smooth(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                            const JointVisitation& d_expert, const JointVisitation& rho,
                            double beta) {
    std::vector<bool> reach = reachable_pairs(mdp, d0_joint);
    int S = mdp.n_states;
    bool zero_found = false;
    for (int a = 0; a < mdp.n_actions && !zero_found; ++a)
        for (int s = 0; s < S && !zero_found; ++s)
            for (int p = 0; p < S; ++p) {
                if (!reach[s * S + p]) continue;
                double e = beta * d_expert.tensor[a](s, p) + (1.0 - beta) * rho.tensor[a](s, p);
                if (e <= 0.0) {
                    zero_found = true;
                    break;
                }
            }
    SmoothedInputs out;
    out.applied = zero_found;
    out.d_expert = zero_found ? smooth_one(d_expert, 1e-8) : d_expert;
    out.rho = zero_found ? smooth_one(rho, 1e-8) : rho;
    return out;
}

double primal_objective(const JointVisitation& d, const JointVisitation& d_expert,
                        const JointVisitation& rho, double beta, const FGenerator& gen) {
    int S = d.n_states();
    double total = 0.0;
    for (int a = 0; a < d.n_actions(); ++a) {
        for (int s = 0; s < S; ++s) {
            for (int p = 0; p < S; ++p) {
                double q = beta * d_expert.tensor[a](s, p) + (1.0 - beta) * rho.tensor[a](s, p);
                if (q <= 0.0) continue;
                double pd = beta * d.tensor[a](s, p) + (1.0 - beta) * rho.tensor[a](s, p);
                total -= q * gen.f(pd / q);
            }
        }
    }
    return total;
}

PrimalSolution solve_primal(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                            const JointVisitation& d_expert, const JointVisitation& rho,
                            double beta, const FGenerator& gen, double tol, int max_iterations,
                            StepRule rule) {
    mdp.validate();
    d0_joint.validate();
    d_expert.validate(&mdp);
    rho.validate(&mdp);
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("solve_primal: beta must lie in (0,1]");
    if (!(tol > 0.0)) throw std::invalid_argument("solve_primal: tol must be > 0");
    if (max_iterations < 1) throw std::invalid_argument("solve_primal: max_iterations must be >= 1");
    check_model(mdp, d0_joint);

    SmoothedInputs sm = maybe_smooth(mdp, d0_joint, d_expert, rho, beta);
    const JointVisitation& dE = sm.d_expert;
    const JointVisitation& r = sm.rho;
    int S = mdp.n_states, A = mdp.n_actions;

    TabularMDP aug = augmented_mdp(mdp, d0_joint);
    JointVisitation d = augmented_occupancy(mdp, d0_joint, uniform_policy(S * S, A));

    // Gradient of the objective in d, flattened for use as an augmented reward:
    // grad(s*S+p, a) = -beta * f'(Mix(d)/Mix(dE)) where the denominator is
    // positive, 0 elsewhere (those entries never carry occupancy mass).
    auto gradient = [&](const JointVisitation& cur) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(S * S, A);
        for (int a = 0; a < A; ++a)
            for (int s = 0; s < S; ++s)
                for (int p = 0; p < S; ++p) {
                    double q = beta * dE.tensor[a](s, p) + (1.0 - beta) * r.tensor[a](s, p);
                    if (q <= 0.0) continue;
                    double pd = beta * cur.tensor[a](s, p) + (1.0 - beta) * r.tensor[a](s, p);
                    g(s * S + p, a) = -beta * gen.f_prime(pd / q);
                }
        return g;
    };

    PrimalSolution sol;
    sol.tol = tol;
    sol.smoothed = sm.applied;
    int k = 0;
    double gap = 0.0;
    for (; k < max_iterations; ++k) {
        sol.objective_history.push_back(primal_objective(d, dE, r, beta, gen));
        Eigen::MatrixXd g = gradient(d);
        ValueIterationResult vi = value_iteration(aug, g, 1e-13);
        JointVisitation vert = augmented_occupancy(mdp, d0_joint, vi.policy);

        gap = 0.0;
        std::vector<Eigen::MatrixXd> delta(A);
        for (int a = 0; a < A; ++a) {
            delta[a] = vert.tensor[a] - d.tensor[a];
            for (int s = 0; s < S; ++s)
                for (int p = 0; p < S; ++p) gap += g(s * S + p, a) * delta[a](s, p);
        }
        if (gap <= tol) break;

        double t;
        if (rule == StepRule::vanilla) {
            t = 2.0 / (k + 2.0);
        } else {
            // Exact maximizer of the quadratic objective along delta:
            // t* = -sum (Mix - MixE) delta / MixE  /  (beta sum delta^2 / MixE).
            double num = 0.0, den = 0.0;
            for (int a = 0; a < A; ++a)
                for (int s = 0; s < S; ++s)
                    for (int p = 0; p < S; ++p) {
                        double q =
                            beta * dE.tensor[a](s, p) + (1.0 - beta) * r.tensor[a](s, p);
                        if (q <= 0.0) continue;
                        double pd =
                            beta * d.tensor[a](s, p) + (1.0 - beta) * r.tensor[a](s, p);
                        num -= (pd - q) * delta[a](s, p) / q;
                        den += beta * delta[a](s, p) * delta[a](s, p) / q;
                    }
            t = den <= 0.0 ? 1.0 : std::min(1.0, std::max(0.0, num / den));
        }
        for (int a = 0; a < A; ++a) d.tensor[a] += t * delta[a];
    }

    sol.d_star = std::move(d);
    sol.objective_value = primal_objective(sol.d_star, dE, r, beta, gen);
    sol.objective_history.push_back(sol.objective_value);
    sol.feasibility_residual = verify_flow_constraints(sol.d_star, d0_joint, mdp);
    sol.iterations = k;
    sol.fw_gap = gap;
    return sol;
}

PrimalSolution solve_primal_grid(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                                 const JointVisitation& d_expert, const JointVisitation& rho,
                                 double beta, const FGenerator& gen, int passes) {
    mdp.validate();
    d0_joint.validate();
    if (mdp.n_states > 2 || mdp.n_actions > 2)
        throw std::invalid_argument("solve_primal_grid: limited to <= 2 states and <= 2 actions");
    if (passes < 1) throw std::invalid_argument("solve_primal_grid: passes must be >= 1");
    check_model(mdp, d0_joint);
    SmoothedInputs sm = maybe_smooth(mdp, d0_joint, d_expert, rho, beta);

    int S = mdp.n_states, A = mdp.n_actions;
    int n = S * S;
    auto evaluate = [&](const Eigen::VectorXd& q0) {
        TabularPolicy pol;
        pol.probs.resize(n, A);
        if (A == 1) {
            pol.probs.setOnes();
        } else {
            pol.probs.col(0) = q0;
            pol.probs.col(1) = Eigen::VectorXd::Ones(n) - q0;
        }
        JointVisitation d = augmented_occupancy(mdp, d0_joint, pol);
        return std::make_pair(primal_objective(d, sm.d_expert, sm.rho, beta, gen), std::move(d));
    };

    Eigen::VectorXd best_q = Eigen::VectorXd::Constant(n, 0.5);
    auto [best_val, best_d] = evaluate(best_q);
    int evals = 1;
    double width = 0.5;
    if (A == 2) {
        const int levels = 7;
        // Global seeding: the full product grid over {0, 1/6, ..., 1}^n.
        int combos = 1;
        for (int i = 0; i < n; ++i) combos *= levels;
        for (int c = 0; c < combos; ++c) {
            Eigen::VectorXd q(n);
            int rem = c;
            for (int i = 0; i < n; ++i) {
                q(i) = static_cast<double>(rem % levels) / (levels - 1);
                rem /= levels;
            }
            auto [val, d] = evaluate(q);
            ++evals;
            if (val > best_val) {
                best_val = val;
                best_q = q;
                best_d = std::move(d);
            }
        }
        for (int pass = 0; pass < passes; ++pass) {
            // Coordinate sweeps over a shrinking bracket around the incumbent.
            for (int sweep = 0; sweep < 2; ++sweep) {
                for (int i = 0; i < n; ++i) {
                    double lo = std::max(0.0, best_q(i) - width);
                    double hi = std::min(1.0, best_q(i) + width);
                    for (int l = 0; l < levels; ++l) {
                        Eigen::VectorXd q = best_q;
                        q(i) = lo + (hi - lo) * l / (levels - 1);
                        auto [val, d] = evaluate(q);
                        ++evals;
                        if (val > best_val) {
                            best_val = val;
                            best_q = q;
                            best_d = std::move(d);
                        }
                    }
                }
            }
            width *= 0.5;
        }
    }

    PrimalSolution sol;
    sol.d_star = std::move(best_d);
    sol.objective_value = best_val;
    sol.feasibility_residual = verify_flow_constraints(sol.d_star, d0_joint, mdp);
    sol.iterations = evals;
    sol.tol = width;
    sol.fw_gap = 0.0;
    sol.smoothed = sm.applied;
    return sol;
}

double duality_gap(const PrimalSolution& primal, double dual_optimum) {
    return std::abs(primal.objective_value - dual_optimum);
}

double duality_gap(const PrimalSolution& primal, const DualSolution& dual) {
    if (primal.tol != dual.tol)
        throw std::invalid_argument("duality_gap: primal and dual were solved to different tolerances");
    return duality_gap(primal, dual.value);
}

namespace {

double exp1(Rng& rng) { return -std::log(1.0 - rng.uniform()); }

TabularMDP random_mdp_exp(Rng& rng, int S, int A, double gamma) {
    TabularMDP mdp;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.gamma = gamma;
    mdp.transition.assign(A, Eigen::MatrixXd(S, S));
    for (int a = 0; a < A; ++a) {
        for (int s = 0; s < S; ++s) {
            for (int v = 0; v < S; ++v) mdp.transition[a](s, v) = exp1(rng);
            mdp.transition[a].row(s) /= mdp.transition[a].row(s).sum();
        }
    }
    mdp.initial_dist.resize(S);
    for (int s = 0; s < S; ++s) mdp.initial_dist(s) = exp1(rng);
    mdp.initial_dist /= mdp.initial_dist.sum();
    return mdp;
}

TabularPolicy soften(const TabularPolicy& pi, double soft) {
    TabularPolicy out = pi;
    int A = static_cast<int>(pi.probs.cols());
    out.probs = (1.0 - soft) * pi.probs;
    out.probs.array() += soft / A;
    return out;
}

JointVisitation mix_visitations(const JointVisitation& a, const JointVisitation& b, double wa) {
    JointVisitation out = a;
    for (size_t i = 0; i < out.tensor.size(); ++i)
        out.tensor[i] = wa * a.tensor[i] + (1.0 - wa) * b.tensor[i];
    return out;
}

}  // namespace

CertificateInstance random_certificate_instance(std::uint64_t seed) {
    Rng rng(seed);
    const int S = 3, A = 2;
    CertificateInstance inst;
    inst.mdp = random_mdp_exp(rng, S, A, 0.9);
    Eigen::MatrixXd reward(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) reward(s, a) = rng.gaussian();
    TabularPolicy expert = soften(value_iteration(inst.mdp, reward, 1e-12).policy, 0.15);
    TabularPolicy uniform = uniform_policy(S, A);
    inst.d_expert = joint_visitation(inst.mdp, expert);
    JointVisitation d_uniform = joint_visitation(inst.mdp, uniform);
    inst.rho = mix_visitations(inst.d_expert, d_uniform, 0.2);
    inst.beta = 0.5;
    inst.d0_joint.m = inst.beta * inst.d_expert.pair_marginal() +
                      (1.0 - inst.beta) * inst.rho.pair_marginal();
    return inst;
}

CertificateInstance chain_certificate_instance() {
    CertificateInstance inst;
    TabularMDP& mdp = inst.mdp;
    mdp.n_states = 2;
    mdp.n_actions = 1;
    mdp.gamma = 0.5;
    mdp.transition.assign(1, Eigen::MatrixXd::Zero(2, 2));
    mdp.transition[0](0, 1) = 1.0;
    mdp.transition[0](1, 1) = 1.0;
    mdp.initial_dist = Eigen::Vector2d(1.0, 0.0);
    TabularPolicy only = uniform_policy(2, 1);
    inst.d_expert = joint_visitation(mdp, only);
    TabularMDP behavior_mdp = mdp;
    behavior_mdp.initial_dist = Eigen::Vector2d(0.5, 0.5);
    inst.rho = joint_visitation(behavior_mdp, only);
    inst.beta = 0.5;
    inst.d0_joint.m = inst.beta * inst.d_expert.pair_marginal() +
                      (1.0 - inst.beta) * inst.rho.pair_marginal();
    return inst;
}

CertificateInstance matched_certificate_instance(std::uint64_t seed) {
    Rng rng(seed);
    const int S = 3, A = 2;
    CertificateInstance inst;
    inst.mdp = random_mdp_exp(rng, S, A, 0.9);
    Eigen::MatrixXd reward(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) reward(s, a) = rng.gaussian();
    TabularPolicy expert = soften(value_iteration(inst.mdp, reward, 1e-12).policy, 0.1);
    inst.d_expert = joint_visitation(inst.mdp, expert);
    inst.rho = inst.d_expert;
    inst.beta = 0.5;
    inst.d0_joint = on_policy_joint_initial(inst.mdp, expert);
    return inst;
}

}  // namespace dilo
