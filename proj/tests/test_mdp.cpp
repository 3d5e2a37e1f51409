#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dilo/mdp.hpp"
#include "dilo/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace dilo;

TEST_SUITE("mdp") {
    TEST_CASE("validate rejects malformed inputs") {
        TabularMDP mdp = testsup::chain_mdp();
        CHECK_NOTHROW(mdp.validate());

        TabularMDP bad_row = mdp;
        bad_row.transition[0](0, 1) = 0.7;
        CHECK_THROWS_AS(bad_row.validate(), std::invalid_argument);

        TabularMDP neg = mdp;
        neg.transition[0](0, 0) = -0.5;
        neg.transition[0](0, 1) = 1.5;
        CHECK_THROWS_AS(neg.validate(), std::invalid_argument);

        TabularMDP bad_gamma = mdp;
        bad_gamma.gamma = 1.0;
        CHECK_THROWS_AS(bad_gamma.validate(), std::invalid_argument);

        TabularMDP bad_d0 = mdp;
        bad_d0.initial_dist(0) = 0.4;
        CHECK_THROWS_AS(bad_d0.validate(), std::invalid_argument);

        TabularPolicy bad_pi;
        bad_pi.probs = Eigen::MatrixXd::Constant(2, 2, 0.3);
        CHECK_THROWS_AS(bad_pi.validate(), std::invalid_argument);
    }

    TEST_CASE("self-loop visitation is the whole mass") {
        TabularMDP mdp = testsup::self_loop_mdp();
        TabularPolicy pi;
        pi.probs = Eigen::MatrixXd::Ones(1, 1);
        Eigen::MatrixXd d = state_action_visitation(mdp, pi);
        CHECK(d(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("chain splits mass between the two states") {
        TabularMDP mdp = testsup::chain_mdp();
        TabularPolicy pi;
        pi.probs = Eigen::MatrixXd::Ones(2, 1);
        Eigen::MatrixXd d = state_action_visitation(mdp, pi);
        CHECK(d(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(d(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
    }

    TEST_CASE("chain joint visitation puts half on each reachable pair") {
        TabularMDP mdp = testsup::chain_mdp();
        TabularPolicy pi;
        pi.probs = Eigen::MatrixXd::Ones(2, 1);
        JointVisitation d = joint_visitation(mdp, pi);
        CHECK(d.tensor[0](0, 1) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(d.tensor[0](1, 1) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(d.tensor[0](0, 0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(d.tensor[0](1, 0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(d.total_mass() == doctest::Approx(1.0).epsilon(1e-10));
        d.validate(&mdp);
    }

    TEST_CASE("deterministic cycle under the single action is uniform") {
        TabularMDP mdp;
        mdp.n_states = 3;
        mdp.n_actions = 1;
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(3, 3);
        t(0, 1) = 1.0;
        t(1, 2) = 1.0;
        t(2, 0) = 1.0;
        mdp.transition = {t};
        mdp.initial_dist = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
        mdp.gamma = 0.7;
        TabularPolicy pi;
        pi.probs = Eigen::MatrixXd::Ones(3, 1);
        JointVisitation d = joint_visitation(mdp, pi);
        for (int s = 0; s < 3; ++s) CHECK(d.tensor[0](s, (s + 1) % 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    TEST_CASE("on-policy joint initial marginalizes back to d0") {
        TabularMDP chain = testsup::chain_mdp();
        TabularPolicy chain_pi;
        chain_pi.probs = Eigen::MatrixXd::Ones(2, 1);
        JointInitialDist j0 = on_policy_joint_initial(chain, chain_pi);
        CHECK(j0.m(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(j0.m.sum() == doctest::Approx(1.0).epsilon(1e-12));

        TabularMDP mdp = testsup::random_mdp(4, 3, 91);
        TabularPolicy pi = testsup::random_policy(4, 3, 92);
        JointInitialDist d0j = on_policy_joint_initial(mdp, pi);
        d0j.validate();
        Eigen::VectorXd row_sums = d0j.m.rowwise().sum();
        for (int s = 0; s < 4; ++s) CHECK(row_sums(s) == doctest::Approx(mdp.initial_dist(s)).epsilon(1e-12));
    }

    TEST_CASE("on-policy joint visitation satisfies the pair flow constraints") {
        TabularMDP chain = testsup::chain_mdp();
        TabularPolicy chain_pi;
        chain_pi.probs = Eigen::MatrixXd::Ones(2, 1);
        JointVisitation dc = joint_visitation(chain, chain_pi);
        JointInitialDist j0c = on_policy_joint_initial(chain, chain_pi);
        CHECK(verify_flow_constraints(dc, j0c, chain) <= 1e-12);

        TabularMDP mdp = testsup::random_mdp(5, 2, 17);
        TabularPolicy pi = testsup::random_policy(5, 2, 18);
        JointVisitation d = joint_visitation(mdp, pi);
        JointInitialDist d0j = on_policy_joint_initial(mdp, pi);
        CHECK(verify_flow_constraints(d, d0j, mdp) <= 1e-8);
        CHECK(d.total_mass() == doctest::Approx(1.0).epsilon(1e-8));

        JointVisitation perturbed = d;
        perturbed.tensor[0](0, 1) += 0.1;
        CHECK(verify_flow_constraints(perturbed, d0j, mdp) >= 0.05);
    }

    TEST_CASE("Monte-Carlo sampling agrees with the linear solve") {
        TabularMDP mdp = testsup::random_mdp(3, 2, 23, 0.9);
        TabularPolicy pi = testsup::random_policy(3, 2, 24);
        Eigen::MatrixXd d = state_action_visitation(mdp, pi);

        // One occupancy draw per episode: stop with probability 1-gamma and
        // record the current (s,a), which hits (s_t,a_t) w.p. (1-gamma)gamma^t.
        Rng rng(25);
        const int n = 1000000;
        Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(3, 2);
        auto draw = [&](const Eigen::VectorXd& p) {
            double u = rng.uniform(), acc = 0.0;
            for (int i = 0; i < p.size(); ++i) {
                acc += p(i);
                if (u < acc) return i;
            }
            return static_cast<int>(p.size()) - 1;
        };
        for (int e = 0; e < n; ++e) {
            int s = draw(mdp.initial_dist);
            for (;;) {
                int a = draw(pi.probs.row(s).transpose());
                if (rng.uniform() < 1.0 - mdp.gamma) {
                    counts(s, a) += 1.0;
                    break;
                }
                s = draw(mdp.transition[a].row(s).transpose());
            }
        }
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 2; ++a) {
                double p = d(s, a);
                double se = std::sqrt(p * (1.0 - p) / n);
                CHECK(std::abs(counts(s, a) / n - p) <= 3.0 * se);
            }
    }

    TEST_CASE("augmented chain has four pair states with two reachable") {
        TabularMDP chain = testsup::chain_mdp();
        TabularPolicy pi;
        pi.probs = Eigen::MatrixXd::Ones(2, 1);
        JointInitialDist d0j = on_policy_joint_initial(chain, pi);
        TabularMDP aug = augmented_mdp(chain, d0j);
        CHECK(aug.n_states == 4);
        CHECK(aug.n_actions == 1);
        CHECK_NOTHROW(aug.validate());
        std::vector<bool> reach = reachable_pairs(chain, d0j);
        REQUIRE(reach.size() == 4);
        CHECK_FALSE(reach[0 * 2 + 0]);
        CHECK(reach[0 * 2 + 1]);
        CHECK_FALSE(reach[1 * 2 + 0]);
        CHECK(reach[1 * 2 + 1]);
    }

    TEST_CASE("augmented occupancy reproduces the joint visitation") {
        TabularMDP mdp = testsup::random_mdp(3, 2, 31);
        TabularPolicy pi = testsup::random_policy(3, 2, 32);
        JointVisitation direct = joint_visitation(mdp, pi);
        JointInitialDist d0j = on_policy_joint_initial(mdp, pi);

        // Natural embedding: at pair (s,p) act like pi at the current state p.
        TabularPolicy aug_pi;
        aug_pi.probs = Eigen::MatrixXd(9, 2);
        for (int s = 0; s < 3; ++s)
            for (int p = 0; p < 3; ++p) aug_pi.probs.row(s * 3 + p) = pi.probs.row(p);
        JointVisitation via_aug = augmented_occupancy(mdp, d0j, aug_pi);
        for (int a = 0; a < 2; ++a)
            CHECK((direct.tensor[a] - via_aug.tensor[a]).cwiseAbs().maxCoeff() <= 1e-9);
        via_aug.validate(&mdp);
    }

    TEST_CASE("visitation validate catches support violations") {
        TabularMDP chain = testsup::chain_mdp();
        TabularPolicy pi;
        pi.probs = Eigen::MatrixXd::Ones(2, 1);
        JointVisitation d = joint_visitation(chain, pi);
        JointVisitation off_support = d;
        off_support.tensor[0](0, 0) = 0.1;
        off_support.tensor[0](0, 1) -= 0.1;
        CHECK_THROWS_AS(off_support.validate(&chain), std::invalid_argument);

        JointVisitation bad_mass = d;
        bad_mass.tensor[0](1, 1) += 0.1;
        CHECK_THROWS_AS(bad_mass.validate(), std::invalid_argument);
    }
}
