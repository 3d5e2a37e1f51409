#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dilo/divergence.hpp"
#include "dilo/dual_trainer.hpp"
#include "dilo/mdp.hpp"

namespace dilo {

// Frank-Wolfe step rule. line_search maximizes the quadratic objective along
// the direction exactly (which makes the objective nondecreasing per step);
// vanilla is the classical 2/(k+2) schedule, kept for comparison.
enum class StepRule { line_search, vanilla };

struct PrimalSolution {
    JointVisitation d_star;
    double objective_value = 0.0;     // the maximized -D_f(Mix(d,rho) || Mix(d_expert,rho))
    double feasibility_residual = 0.0;
    int iterations = 0;
    double tol = 0.0;
    double fw_gap = 0.0;  // last Frank-Wolfe gap (0 for the grid solver)
    bool smoothed = false;
    std::vector<double> objective_history;  // per-iteration objective (empty for the grid solver)
};

// Uniform 1e-8 smoothing of both visitations, applied iff the mixture
// denominator Mix_beta(d_expert, rho) vanishes for some action at a pair
// reachable from d0_joint. Both distributions are transformed identically so
// the primal and dual certify the same smoothed program.
struct SmoothedInputs {
    JointVisitation d_expert;
    JointVisitation rho;
    bool applied = false;
};
SmoothedInputs maybe_smooth(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                            const JointVisitation& d_expert, const JointVisitation& rho,
                            double beta);

// -sum_i q_i f(p_i/q_i) with p = Mix_beta(d, rho), q = Mix_beta(d_expert, rho),
// summed over entries with q_i > 0.
double primal_objective(const JointVisitation& d, const JointVisitation& d_expert,
                        const JointVisitation& rho, double beta, const FGenerator& gen);

// Maximize primal_objective over the occupancy polytope of the augmented MDP
// by conditional gradient: the linear oracle is exact value iteration on the
// augmented MDP with the objective gradient as reward. Stops at Frank-Wolfe
// gap <= tol (the gap upper-bounds the remaining suboptimality). Throws
// DataError when d0_joint places mass on a pair no action can produce.
PrimalSolution solve_primal(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                            const JointVisitation& d_expert, const JointVisitation& rho,
                            double beta, const FGenerator& gen, double tol,
                            int max_iterations = 50000, StepRule rule = StepRule::line_search);

// Independent cross-check for n_states <= 2, n_actions <= 2: dense grid over
// stochastic augmented policies (one action-0 probability per pair state)
// with `passes` rounds of local refinement; every candidate is an exact
// occupancy solve. tol reports the final grid width.
PrimalSolution solve_primal_grid(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                                 const JointVisitation& d_expert, const JointVisitation& rho,
                                 double beta, const FGenerator& gen, int passes = 12);

// |primal optimum - dual optimum|. The dual minimum equals the primal maximum
// directly (no extra sign flip); the mapping was pinned on instances with a
// nonzero optimum where the opposite convention is off by twice the optimum.
double duality_gap(const PrimalSolution& primal, double dual_optimum);
// Overload enforcing the contract that both sides were solved to the same
// tolerance on the same data; throws std::invalid_argument on mismatch.
double duality_gap(const PrimalSolution& primal, const DualSolution& dual);

// One self-contained certification problem.
struct CertificateInstance {
    TabularMDP mdp;
    JointInitialDist d0_joint;
    JointVisitation d_expert;
    JointVisitation rho;
    double beta = 0.5;
};

// Seeded 3-state 2-action instance: transition rows and d0 are normalized
// Exp(1) draws, gamma 0.9; the expert is the greedy policy on N(0,1) rewards
// softened to 0.85 greedy + 0.15 uniform; rho = 0.2 expert + 0.8 uniform
// visitation; replay-style d~0 = beta * expert pair marginal + (1-beta) * rho
// pair marginal; beta 0.5. The soft expert keeps every mixture entry positive.
CertificateInstance random_certificate_instance(std::uint64_t seed);

// Two-state single-action chain 0 -> 1 -> 1 (absorbing), gamma 0.5, expert
// starting at state 0, behavior starting uniformly, beta 0.5. Its primal
// optimum is exactly -5/48, small enough to verify by hand.
CertificateInstance chain_certificate_instance();

// rho = d_expert with the expert's own on-policy joint initial distribution:
// the dual optimum is V = 0 with unit visitation ratio on the whole support.
CertificateInstance matched_certificate_instance(std::uint64_t seed);

}  // namespace dilo
