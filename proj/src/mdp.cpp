#include "dilo/mdp.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "dilo/errors.hpp"

namespace dilo {

void TabularMDP::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("TabularMDP: n_states and n_actions must be positive");
    if (static_cast<int>(transition.size()) != n_actions)
        throw std::invalid_argument("TabularMDP: transition tensor has wrong action count");
    for (int a = 0; a < n_actions; ++a) {
        const auto& T = transition[a];
        if (T.rows() != n_states || T.cols() != n_states)
            throw std::invalid_argument("TabularMDP: transition matrix shape mismatch");
        for (int s = 0; s < n_states; ++s) {
            double row = 0.0;
            for (int sp = 0; sp < n_states; ++sp) {
                if (T(s, sp) < 0.0)
                    throw std::invalid_argument("TabularMDP: negative transition probability");
                row += T(s, sp);
            }
            if (std::abs(row - 1.0) > 1e-9)
                throw std::invalid_argument("TabularMDP: transition row does not sum to 1");
        }
    }
    if (initial_dist.size() != n_states)
        throw std::invalid_argument("TabularMDP: initial_dist size mismatch");
    double mass = 0.0;
    for (int s = 0; s < n_states; ++s) {
        if (initial_dist(s) < 0.0)
            throw std::invalid_argument("TabularMDP: negative initial probability");
        mass += initial_dist(s);
    }
    if (std::abs(mass - 1.0) > 1e-9)
        throw std::invalid_argument("TabularMDP: initial_dist does not sum to 1");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("TabularMDP: gamma must lie strictly inside (0,1)");
}

void TabularPolicy::validate() const {
    for (int s = 0; s < probs.rows(); ++s) {
        double row = 0.0;
        for (int a = 0; a < probs.cols(); ++a) {
            if (probs(s, a) < 0.0)
                throw std::invalid_argument("TabularPolicy: negative probability");
            row += probs(s, a);
        }
        if (std::abs(row - 1.0) > 1e-9)
            throw std::invalid_argument("TabularPolicy: row does not sum to 1");
    }
}

double JointVisitation::total_mass() const {
    double m = 0.0;
    for (const auto& slice : tensor) m += slice.sum();
    return m;
}

Eigen::MatrixXd JointVisitation::pair_marginal() const {
    if (tensor.empty()) return Eigen::MatrixXd();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(tensor[0].rows(), tensor[0].cols());
    for (const auto& slice : tensor) m += slice;
    return m;
}

void JointVisitation::validate(const TabularMDP* mdp) const {
    if (tensor.empty()) throw std::invalid_argument("JointVisitation: empty tensor");
    for (const auto& slice : tensor)
        if (slice.minCoeff() < 0.0)
            throw std::invalid_argument("JointVisitation: negative entry");
    if (std::abs(total_mass() - 1.0) > 1e-8)
        throw std::invalid_argument("JointVisitation: total mass not 1");
    if (mdp != nullptr) {
        // d~(s,s',a') can only be supported where some action reaches s' from s.
        int S = mdp->n_states;
        for (int s = 0; s < S; ++s)
            for (int sp = 0; sp < S; ++sp) {
                double reach = 0.0;
                for (int a = 0; a < mdp->n_actions; ++a) reach += mdp->transition[a](s, sp);
                if (reach > 0.0) continue;
                for (const auto& slice : tensor)
                    if (slice(s, sp) != 0.0)
                        throw std::invalid_argument(
                            "JointVisitation: mass on a pair with no transition support");
            }
    }
}

void JointInitialDist::validate() const {
    if (m.size() == 0) throw std::invalid_argument("JointInitialDist: empty");
    if (m.minCoeff() < 0.0) throw std::invalid_argument("JointInitialDist: negative entry");
    if (std::abs(m.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("JointInitialDist: does not sum to 1");
}

// State marginal mu(s) = (1-gamma) sum_t gamma^t P(s_t = s), by direct solve of
// (I - gamma P_pi^T) mu = (1-gamma) d0.
static Eigen::VectorXd state_visitation(const TabularMDP& mdp, const TabularPolicy& pi) {
    int S = mdp.n_states;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
    for (int a = 0; a < mdp.n_actions; ++a)
        P += pi.probs.col(a).asDiagonal() * mdp.transition[a];
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * P.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw NumericError("state_action_visitation: singular flow system");
    return lu.solve((1.0 - mdp.gamma) * mdp.initial_dist);
}

Eigen::MatrixXd state_action_visitation(const TabularMDP& mdp, const TabularPolicy& pi) {
    mdp.validate();
    pi.validate();
    if (pi.probs.rows() != mdp.n_states || pi.probs.cols() != mdp.n_actions)
        throw std::invalid_argument("state_action_visitation: policy shape mismatch");
    Eigen::VectorXd mu = state_visitation(mdp, pi);
    Eigen::MatrixXd d(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) d(s, a) = mu(s) * pi.probs(s, a);
    return d;
}

JointVisitation joint_visitation(const TabularMDP& mdp, const TabularPolicy& pi) {
    Eigen::MatrixXd d = state_action_visitation(mdp, pi);
    int S = mdp.n_states;
    // Pair marginal: dpair(s,s') = sum_a d(s,a) p(s'|s,a).
    Eigen::MatrixXd dpair = Eigen::MatrixXd::Zero(S, S);
    for (int a = 0; a < mdp.n_actions; ++a)
        dpair += d.col(a).asDiagonal() * mdp.transition[a];
    JointVisitation out;
    out.tensor.resize(mdp.n_actions);
    for (int ap = 0; ap < mdp.n_actions; ++ap) {
        out.tensor[ap] = dpair;
        for (int sp = 0; sp < S; ++sp) out.tensor[ap].col(sp) *= pi.probs(sp, ap);
    }
    return out;
}

JointInitialDist on_policy_joint_initial(const TabularMDP& mdp, const TabularPolicy& pi) {
    mdp.validate();
    pi.validate();
    int S = mdp.n_states;
    Eigen::MatrixXd step = Eigen::MatrixXd::Zero(S, S);
    for (int a = 0; a < mdp.n_actions; ++a)
        step += pi.probs.col(a).asDiagonal() * mdp.transition[a];
    JointInitialDist out;
    out.m = mdp.initial_dist.asDiagonal() * step;
    return out;
}

double verify_flow_constraints(const JointVisitation& d, const JointInitialDist& d0_joint,
                               const TabularMDP& mdp) {
    int S = mdp.n_states;
    if (d.n_states() != S || d.n_actions() != mdp.n_actions || d0_joint.m.rows() != S)
        throw std::invalid_argument("verify_flow_constraints: shape mismatch");
    // Outflow: sum over a'' of d(s',s'',a'').
    Eigen::MatrixXd lhs = d.pair_marginal();
    // Inflow into (s',s''): sum over (s,a') of d(s,s',a') p(s''|s',a').
    Eigen::MatrixXd inflow = Eigen::MatrixXd::Zero(S, S);
    for (int ap = 0; ap < mdp.n_actions; ++ap) {
        Eigen::VectorXd col_mass = d.tensor[ap].colwise().sum();  // mass arriving at s' with a'
        inflow += col_mass.asDiagonal() * mdp.transition[ap];
    }
    Eigen::MatrixXd rhs = (1.0 - mdp.gamma) * d0_joint.m + mdp.gamma * inflow;
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

TabularMDP augmented_mdp(const TabularMDP& mdp, const JointInitialDist& d0_joint) {
    mdp.validate();
    d0_joint.validate();
    int S = mdp.n_states;
    int n = S * S;
    TabularMDP aug;
    aug.n_states = n;
    aug.n_actions = mdp.n_actions;
    aug.gamma = mdp.gamma;
    aug.transition.assign(mdp.n_actions, Eigen::MatrixXd::Zero(n, n));
    for (int a = 0; a < mdp.n_actions; ++a)
        for (int s = 0; s < S; ++s)
            for (int sp = 0; sp < S; ++sp)
                for (int v = 0; v < S; ++v)
                    aug.transition[a](s * S + sp, sp * S + v) = mdp.transition[a](sp, v);
    aug.initial_dist.resize(n);
    for (int s = 0; s < S; ++s)
        for (int sp = 0; sp < S; ++sp) aug.initial_dist(s * S + sp) = d0_joint.m(s, sp);
    return aug;
}

std::vector<bool> reachable_pairs(const TabularMDP& mdp, const JointInitialDist& d0_joint) {
    int S = mdp.n_states;
    std::vector<bool> seen(S * S, false);
    std::deque<int> frontier;
    for (int s = 0; s < S; ++s)
        for (int sp = 0; sp < S; ++sp)
            if (d0_joint.m(s, sp) > 0.0) {
                seen[s * S + sp] = true;
                frontier.push_back(s * S + sp);
            }
    while (!frontier.empty()) {
        int idx = frontier.front();
        frontier.pop_front();
        int sp = idx % S;
        for (int a = 0; a < mdp.n_actions; ++a)
            for (int v = 0; v < S; ++v)
                if (mdp.transition[a](sp, v) > 0.0 && !seen[sp * S + v]) {
                    seen[sp * S + v] = true;
                    frontier.push_back(sp * S + v);
                }
    }
    return seen;
}

JointVisitation augmented_occupancy(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                                    const TabularPolicy& aug_policy) {
    int S = mdp.n_states;
    int n = S * S;
    if (aug_policy.probs.rows() != n || aug_policy.probs.cols() != mdp.n_actions)
        throw std::invalid_argument("augmented_occupancy: policy shape mismatch");
    // Pair-state chain under the policy: (s,s') -> (s', v) w.p. sum_a pi(a) p(v|s',a).
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < S; ++s)
        for (int sp = 0; sp < S; ++sp)
            for (int a = 0; a < mdp.n_actions; ++a) {
                double pa = aug_policy.probs(s * S + sp, a);
                if (pa == 0.0) continue;
                for (int v = 0; v < S; ++v)
                    P(s * S + sp, sp * S + v) += pa * mdp.transition[a](sp, v);
            }
    Eigen::VectorXd b(n);
    for (int s = 0; s < S; ++s)
        for (int sp = 0; sp < S; ++sp) b(s * S + sp) = (1.0 - mdp.gamma) * d0_joint.m(s, sp);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - mdp.gamma * P.transpose();
    Eigen::VectorXd mu = A.partialPivLu().solve(b);
    JointVisitation out;
    out.tensor.assign(mdp.n_actions, Eigen::MatrixXd::Zero(S, S));
    for (int s = 0; s < S; ++s)
        for (int sp = 0; sp < S; ++sp)
            for (int a = 0; a < mdp.n_actions; ++a)
                out.tensor[a](s, sp) = mu(s * S + sp) * aug_policy.probs(s * S + sp, a);
    return out;
}

}  // namespace dilo
