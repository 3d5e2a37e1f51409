#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dilo {

// Finite MDP without rewards: dynamics p(s'|s,a), initial distribution d0,
// discount gamma. The transition tensor is stored per action, transition[a]
// is the (s, s') row-stochastic matrix.
struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Eigen::MatrixXd> transition;  // transition[a](s, s')
    Eigen::VectorXd initial_dist;             // d0
    double gamma = 0.0;

    // Throws std::invalid_argument unless rows sum to 1 +- 1e-9 elementwise
    // >= 0, d0 sums to 1 +- 1e-9, and gamma lies strictly inside (0,1).
    void validate() const;
};

// pi(a|s), one row per state.
struct TabularPolicy {
    Eigen::MatrixXd probs;  // (s, a)

    void validate() const;
};

// Discounted visitation over (s, s', a') triples: the probability of seeing
// consecutive states (s,s') and then taking a' from s'. Stored per a',
// tensor[a'](s, s'). Also carries the (s,s') marginal on demand.
struct JointVisitation {
    std::vector<Eigen::MatrixXd> tensor;  // tensor[a'](s, s')

    int n_states() const { return tensor.empty() ? 0 : static_cast<int>(tensor[0].rows()); }
    int n_actions() const { return static_cast<int>(tensor.size()); }
    double total_mass() const;
    Eigen::MatrixXd pair_marginal() const;  // sum over a'

    // Invariant check: mass 1 +- 1e-8, elementwise >= 0, and (if mdp given)
    // support only where transition mass exists. Throws std::invalid_argument.
    void validate(const TabularMDP* mdp = nullptr) const;
};

// Initial distribution over (s, s') pairs, the d~0 of the pair-flow
// constraints.
struct JointInitialDist {
    Eigen::MatrixXd m;  // (s, s')

    void validate() const;
};

// Exact discounted state-action visitation d(s,a): solves the linear flow
// system (I - gamma P_pi^T) mu = (1-gamma) d0 and returns mu(s) * pi(a|s).
Eigen::MatrixXd state_action_visitation(const TabularMDP& mdp, const TabularPolicy& pi);

// Joint visitation d~(s,s',a') = [sum_a d(s,a) p(s'|s,a)] * pi(a'|s').
JointVisitation joint_visitation(const TabularMDP& mdp, const TabularPolicy& pi);

// The d~0 induced by d0 and one policy step: d~0(s,s') = d0(s) sum_a pi(a|s) p(s'|s,a).
// With this choice the on-policy joint visitation satisfies the pair-flow
// constraints exactly.
JointInitialDist on_policy_joint_initial(const TabularMDP& mdp, const TabularPolicy& pi);

// Max absolute residual of the pair-flow constraints
//   sum_{a''} d(s',s'',a'') = (1-gamma) d~0(s',s'') + gamma sum_{s,a'} d(s,s',a') p(s''|s',a')
// over all (s',s'').
double verify_flow_constraints(const JointVisitation& d, const JointInitialDist& d0_joint,
                               const TabularMDP& mdp);

// MDP over pair states (s,s') whose occupancy polytope equals the feasible
// set of the pair-flow constraints: action a moves (s,s') -> (s', v) with
// probability p(v|s',a); initial distribution is d0_joint flattened row-major
// (pair (s,s') has index s*n_states + s').
TabularMDP augmented_mdp(const TabularMDP& mdp, const JointInitialDist& d0_joint);

// Pairs (s,s') reachable in the augmented MDP from the support of d0_joint
// under any action sequence. Row-major flattened mask.
std::vector<bool> reachable_pairs(const TabularMDP& mdp, const JointInitialDist& d0_joint);

// Occupancy of a (possibly stochastic) policy on the augmented MDP, returned
// as a JointVisitation over the original (s,s',a') indexing. Exact linear solve.
JointVisitation augmented_occupancy(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                                    const TabularPolicy& aug_policy);

}  // namespace dilo
