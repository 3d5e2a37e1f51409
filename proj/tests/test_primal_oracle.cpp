#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dilo/divergence.hpp"
#include "dilo/dual_trainer.hpp"
#include "dilo/errors.hpp"
#include "dilo/mdp.hpp"
#include "dilo/primal_oracle.hpp"
#include "dilo/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace dilo;

namespace {

// Fully supported 2-state 2-action instance (every mixture entry positive, so
// no smoothing and the grid cross-check applies).
CertificateInstance small_instance(std::uint64_t seed) {
    CertificateInstance inst;
    inst.mdp = testsup::random_mdp(2, 2, seed, 0.8);
    TabularPolicy expert = testsup::random_policy(2, 2, seed + 100);
    TabularPolicy behavior = testsup::random_policy(2, 2, seed + 200);
    inst.d_expert = joint_visitation(inst.mdp, expert);
    inst.rho = joint_visitation(inst.mdp, behavior);
    inst.beta = 0.5;
    JointInitialDist j0 = on_policy_joint_initial(inst.mdp, behavior);
    JointInitialDist jE = on_policy_joint_initial(inst.mdp, expert);
    inst.d0_joint.m = 0.5 * jE.m + 0.5 * j0.m;
    return inst;
}

}  // namespace

TEST_SUITE("primal_oracle") {
    TEST_CASE("chain optimum is exactly -5/48") {
        CertificateInstance inst = chain_certificate_instance();
        auto gen = chi_square();
        PrimalSolution sol = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                          inst.beta, gen, 1e-9);
        CHECK(sol.objective_value == doctest::Approx(-5.0 / 48.0).epsilon(1e-8));
        CHECK(sol.feasibility_residual <= 1e-8);
        CHECK_FALSE(sol.smoothed);
        CHECK(sol.fw_gap <= 1e-9);
        sol.d_star.validate(&inst.mdp);

        PrimalSolution grid = solve_primal_grid(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                                inst.beta, gen);
        CHECK(grid.objective_value == doctest::Approx(-5.0 / 48.0).epsilon(1e-4));
        CHECK(grid.feasibility_residual <= 1e-8);
    }

    TEST_CASE("line-search iterates never decrease the objective") {
        auto gen = chi_square();
        for (auto inst : {chain_certificate_instance(), small_instance(3)}) {
            PrimalSolution sol = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                              inst.beta, gen, 1e-8);
            REQUIRE(sol.objective_history.size() >= 2);
            for (std::size_t i = 0; i + 1 < sol.objective_history.size(); ++i)
                CHECK(sol.objective_history[i + 1] >= sol.objective_history[i] - 1e-12);
        }
    }

    TEST_CASE("vanilla step rule also converges on the chain") {
        CertificateInstance inst = chain_certificate_instance();
        auto gen = chi_square();
        PrimalSolution sol = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                          inst.beta, gen, 1e-5, 50000, StepRule::vanilla);
        CHECK(sol.objective_value == doctest::Approx(-5.0 / 48.0).epsilon(1e-3));
        CHECK(sol.feasibility_residual <= 1e-8);
    }

    TEST_CASE("matched expert and behavior make zero the optimum") {
        CertificateInstance inst = matched_certificate_instance(4);
        auto gen = chi_square();
        CHECK(primal_objective(inst.d_expert, inst.d_expert, inst.rho, inst.beta, gen) == 0.0);
        PrimalSolution sol = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                          inst.beta, gen, 1e-6);
        CHECK(sol.objective_value <= 0.0);
        CHECK(std::abs(sol.objective_value) <= 1e-6);
    }

    TEST_CASE("vanishing expert share flattens the objective") {
        CertificateInstance inst = small_instance(5);
        auto gen = chi_square();
        PrimalSolution sol = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho, 1e-6,
                                          gen, 1e-9);
        CHECK(std::abs(sol.objective_value) <= 1e-6);
    }

    TEST_CASE("grid search confirms Frank-Wolfe on a small instance") {
        auto gen = chi_square();
        for (std::uint64_t seed : {11ull, 12ull}) {
            CertificateInstance inst = small_instance(seed);
            PrimalSolution fw = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                             inst.beta, gen, 1e-8);
            PrimalSolution grid = solve_primal_grid(inst.mdp, inst.d0_joint, inst.d_expert,
                                                    inst.rho, inst.beta, gen);
            CHECK(std::abs(fw.objective_value - grid.objective_value) <= 1e-3);
        }
    }

    TEST_CASE("strong duality on seeded random instances") {
        auto gen = chi_square();
        CertificateInstance inst = random_certificate_instance(7);
        PrimalSolution primal = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                             inst.beta, gen, 1e-6);
        SmoothedInputs sm = maybe_smooth(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                         inst.beta);
        DualSolution dual = solve_dual_exact(inst.mdp, inst.d0_joint, sm.d_expert, sm.rho,
                                             inst.beta, gen, 1e-6);
        CHECK(duality_gap(primal, dual) <= 2e-3);
        CHECK(primal.feasibility_residual <= 1e-8);
    }

    TEST_CASE("dual and primal visitation ratios agree at the optimum") {
        auto gen = chi_square();
        CertificateInstance inst = small_instance(21);
        PrimalSolution primal = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                             inst.beta, gen, 1e-10);
        DualSolution dual = solve_dual_exact(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                             inst.beta, gen, 1e-10);
        std::vector<Eigen::MatrixXd> y = exact_residuals(inst.mdp, dual.V);
        double worst = 0.0;
        for (int a = 0; a < inst.mdp.n_actions; ++a)
            for (int s = 0; s < inst.mdp.n_states; ++s)
                for (int p = 0; p < inst.mdp.n_states; ++p) {
                    double mixE = inst.beta * inst.d_expert.tensor[a](s, p) +
                                  (1.0 - inst.beta) * inst.rho.tensor[a](s, p);
                    if (mixE <= 1e-6) continue;
                    double mixD = inst.beta * primal.d_star.tensor[a](s, p) +
                                  (1.0 - inst.beta) * inst.rho.tensor[a](s, p);
                    double w_primal = mixD / mixE;
                    double w_dual = ratio_from_residual(gen, y[a](s, p));
                    worst = std::max(worst, std::abs(w_primal - w_dual));
                }
        CHECK(worst <= 1e-2);
    }

    TEST_CASE("under-converged dual leaves a visible gap") {
        CertificateInstance inst = chain_certificate_instance();
        auto gen = chi_square();
        PrimalSolution primal = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                             inst.beta, gen, 1e-6);
        Eigen::MatrixXd far = Eigen::MatrixXd::Constant(2, 2, 50.0);
        DualSolution stunted = solve_dual_exact(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                                inst.beta, gen, 1e-6, &far, 1);
        CHECK(duality_gap(primal, stunted.value) > 0.1);
    }

    TEST_CASE("duality gap enforces matching tolerances") {
        CertificateInstance inst = chain_certificate_instance();
        auto gen = chi_square();
        PrimalSolution primal = solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                             inst.beta, gen, 1e-6);
        DualSolution dual = solve_dual_exact(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                             inst.beta, gen, 1e-5);
        CHECK_THROWS_AS(duality_gap(primal, dual), std::invalid_argument);
    }

    TEST_CASE("smoothing triggers exactly when the mixture vanishes on reachable pairs") {
        TabularMDP mdp = testsup::random_mdp(2, 2, 31, 0.85);
        TabularPolicy act0;
        act0.probs = Eigen::MatrixXd::Zero(2, 2);
        act0.probs.col(0).setOnes();
        JointVisitation dE = joint_visitation(mdp, act0);
        JointInitialDist d0j = on_policy_joint_initial(mdp, act0);

        SmoothedInputs sm = maybe_smooth(mdp, d0j, dE, dE, 0.5);
        CHECK(sm.applied);
        CHECK(sm.d_expert.tensor[1].minCoeff() > 0.0);
        CHECK(sm.d_expert.total_mass() == doctest::Approx(1.0).epsilon(1e-10));

        SmoothedInputs again = maybe_smooth(mdp, d0j, sm.d_expert, sm.rho, 0.5);
        CHECK_FALSE(again.applied);

        auto gen = chi_square();
        PrimalSolution sol = solve_primal(mdp, d0j, dE, dE, 0.5, gen, 1e-7);
        CHECK(sol.smoothed);
        CHECK(sol.feasibility_residual <= 1e-8);

        // Fully covered inputs stay untouched.
        CertificateInstance covered = small_instance(32);
        SmoothedInputs none = maybe_smooth(covered.mdp, covered.d0_joint, covered.d_expert,
                                           covered.rho, covered.beta);
        CHECK_FALSE(none.applied);
    }

    TEST_CASE("initial mass on an impossible pair is a data error") {
        CertificateInstance inst = chain_certificate_instance();
        auto gen = chi_square();
        JointInitialDist bad;
        bad.m = Eigen::MatrixXd::Zero(2, 2);
        bad.m(0, 0) = 1.0;  // the chain can never produce the pair (0,0)
        CHECK_THROWS_AS(solve_primal(inst.mdp, bad, inst.d_expert, inst.rho, inst.beta, gen, 1e-6),
                        DataError);
    }

    TEST_CASE("argument validation") {
        CertificateInstance inst = chain_certificate_instance();
        auto gen = chi_square();
        CHECK_THROWS_AS(solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho, 0.0, gen,
                                     1e-6),
                        std::invalid_argument);
        CHECK_THROWS_AS(solve_primal(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho, inst.beta,
                                     gen, -1.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(solve_dual_exact(inst.mdp, inst.d0_joint, inst.d_expert, inst.rho,
                                         inst.beta, gen, 0.0),
                        std::invalid_argument);
    }
}
