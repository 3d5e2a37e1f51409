#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dilo/approximator.hpp"
#include "dilo/dataset.hpp"
#include "dilo/divergence.hpp"
#include "dilo/mdp.hpp"

namespace dilo {

// How the two halves of the residual gradient are combined:
//  - semi:       g_f only (the successor value treated as a constant)
//  - full:       g_f + g_b (the true gradient)
//  - orthogonal: g_f plus eta times the component of g_b orthogonal to g_f
enum class GradMode { orthogonal, full, semi };

struct DiloConfig {
    double gamma = 0.99;
    double beta = 0.5;    // expert share of the mixture, (0,1]
    double eta = 0.5;     // orthogonal-gradient coefficient, >= 0
    double lambda = 0.5;  // pessimism weight, (0,1)
    double tau = 3.0;     // policy temperature, > 0
    double value_lr = 3e-4;
    double policy_lr = 3e-4;
    double clip_max = 100.0;  // weight clip for policy extraction
    int batch_size = 1024;    // 0 selects deterministic full-batch training
    int steps = 2000;
    GradMode grad_mode = GradMode::orthogonal;
    Optimizer::Kind optimizer = Optimizer::Kind::adam;
    bool d0_include_expert = true;  // replay d~0 over both datasets vs offline only
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError on out-of-range fields
};

// The loss and its pieces. total combines the UNWEIGHTED terms as
//   (1-lambda)*term_initial + lambda*term_conjugate + lambda*term_linear
// where, with residual y = gamma*V(s',s'') - V(s,s'),
//   term_initial   = beta*(1-gamma)*mean_{d0}[V(s,s')]
//   term_conjugate = mean_{mix}[conjugate_p(y)]
//   term_linear    = -(1-beta)*mean_{offline}[y].
struct DiloLossBreakdown {
    double total = 0.0;
    double term_initial = 0.0;
    double term_conjugate = 0.0;
    double term_linear = 0.0;
    double mean_residual_expert = 0.0;
    double mean_residual_offline = 0.0;
};

struct StepMetrics {
    int step = 0;
    DiloLossBreakdown loss;
    double grad_norm_forward = 0.0;
    double grad_norm_backward = 0.0;
    double grad_norm_combined = 0.0;
    double mean_w_expert = 0.0;
    double mean_w_offline = 0.0;
};

struct TrainResult {
    std::vector<StepMetrics> history;
};

// Loss evaluation only. Throws NumericError (naming the term) if any term is
// non-finite. The whole path consumes observations exclusively; actions are
// unreachable from here by construction.
DiloLossBreakdown dilo_loss(const ValueApproximator& v, const PairBatch& d0_batch,
                            const TripleBatch& mix_batch, const TripleBatch& offline_batch,
                            const DiloConfig& cfg);

// Loss plus the split parameter gradients. mix_weights, if given, replaces
// the uniform 1/n mixture weighting (used by full-batch training, where the
// expert and offline triple populations enter with exact weights beta/n_E and
// (1-beta)/n_O). Weights must sum to 1.
struct LossGrads {
    DiloLossBreakdown loss;
    Eigen::VectorXd g_forward;
    Eigen::VectorXd g_backward;
    double max_abs_value = 0.0;  // divergence detector input
    double mean_w_expert = 0.0;
    double mean_w_offline = 0.0;
};
LossGrads dilo_loss_grads(const ValueApproximator& v, const PairBatch& d0_batch,
                          const TripleBatch& mix_batch, const TripleBatch& offline_batch,
                          const DiloConfig& cfg,
                          const Eigen::VectorXd* mix_weights = nullptr);

// g_f + eta * (g_b - (<g_b,g_f>/<g_f,g_f>) g_f); when ||g_f|| <= 1e-12 the
// projection is skipped and g_f + eta*g_b is returned.
Eigen::VectorXd orthogonal_gradient(const Eigen::VectorXd& g_forward,
                                    const Eigen::VectorXd& g_backward, double eta);

// Train the dual variable on (expert observations, offline data). Sampled
// minibatches for batch_size > 0, deterministic full-batch updates for
// batch_size == 0. Aborts with DivergenceError when any sampled |V| exceeds
// 1e6. Loss history records the pre-step loss of every step.
TrainResult train_value(ValueApproximator& v, const TrajectoryDataset& expert,
                        const TrajectoryDataset& offline, const DiloConfig& cfg, Rng& rng);

// Visitation-ratio diagnostic w = max(0, f'^-1(y)) per row of a triple batch.
Eigen::VectorXd recover_ratio(const ValueApproximator& v, const TripleBatch& triples,
                              const DiloConfig& cfg);

// Implied reward r_i = V(s,s') - gamma*V(s',s'') (the negated residual).
double implied_reward(const ValueApproximator& v, const Eigen::VectorXd& s,
                      const Eigen::VectorXd& s_next, const Eigen::VectorXd& s_next2, double gamma);

// ---- exact tabular mode (used to certify strong duality) -------------------

struct DualSolution {
    double value = 0.0;
    Eigen::MatrixXd V;  // (s, s')
    double grad_inf_norm = 0.0;
    int iterations = 0;
    double tol = 0.0;
};

// Residuals with the exact inner expectation:
//   y[a](s,s') = gamma * sum_{s''} p(s''|s',a) V(s',s'') - V(s,s').
std::vector<Eigen::MatrixXd> exact_residuals(const TabularMDP& mdp, const Eigen::MatrixXd& V);

// The dual objective evaluated with exact expectations over the given
// tabular distributions (no sampling, no lambda weighting):
//   beta(1-gamma)<d0j,V> + <Mix, conjugate_p(y)> - (1-beta)<rho, y>.
double exact_dual_loss(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                       const JointVisitation& d_expert, const JointVisitation& rho, double beta,
                       const FGenerator& gen, const Eigen::MatrixXd& V);

// Minimize the exact dual objective to ||grad||_inf <= tol by damped Newton
// with an Armijo line search (gradient-descent fallback). The objective is
// convex and piecewise quadratic in the table entries, so this is exact up to
// the tolerance.
DualSolution solve_dual_exact(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                              const JointVisitation& d_expert, const JointVisitation& rho,
                              double beta, const FGenerator& gen, double tol,
                              const Eigen::MatrixXd* V_init = nullptr, int max_iterations = 500);

}  // namespace dilo
