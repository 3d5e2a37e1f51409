#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

#include "dilo/rng.hpp"

namespace dilo {

// Small fully connected network: rectifier hidden layers, linear output.
// Parameters are exposed as one flat vector (per layer: W column-major, then
// b) so optimizers and finite-difference checks can treat the model as a
// plain parameter array.
class Mlp {
public:
    Mlp() = default;
    Mlp(int input_dim, const std::vector<int>& hidden, int output_dim);

    // Uniform fan-in init U(-1/sqrt(fan_in), 1/sqrt(fan_in)) on hidden layers,
    // zeros on the final layer so the initial function is identically zero.
    void init(Rng& rng);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    int n_params() const;
    Eigen::VectorXd flat_params() const;
    void set_flat_params(const Eigen::VectorXd& p);

    struct Cache {
        std::vector<Eigen::MatrixXd> inputs;  // layer inputs (post-activation of previous)
        std::vector<Eigen::MatrixXd> pre;     // pre-activations
    };

    // Batch-major forward: X is (N, input_dim), result (N, output_dim).
    Eigen::MatrixXd forward(const Eigen::MatrixXd& X, Cache* cache = nullptr) const;

    // Reverse mode: dY is dLoss/dOutput (N, output_dim); returns the flat
    // parameter gradient summed over the batch. Rectifier kink uses
    // subgradient 0.
    Eigen::VectorXd backward(const Cache& cache, const Eigen::MatrixXd& dY) const;

    const std::vector<Eigen::MatrixXd>& weights() const { return W_; }
    const std::vector<int>& hidden_sizes() const { return hidden_; }

private:
    int input_dim_ = 0;
    int output_dim_ = 0;
    std::vector<int> hidden_;
    std::vector<Eigen::MatrixXd> W_;  // W[l] is (out, in)
    std::vector<Eigen::VectorXd> b_;
};

// The dual variable V(s,s'): an exact table over state indices or an MLP over
// the normalized concatenation [s; s'].
class ValueApproximator {
public:
    enum class Kind { table, network };

    static ValueApproximator make_table(int n_states);
    static ValueApproximator make_network(int obs_dim, const std::vector<int>& hidden, Rng& rng);

    Kind kind() const { return kind_; }
    int obs_dim() const { return obs_dim_; }
    int n_states() const { return n_states_; }

    // Per-dimension normalization of the concatenated (s, s') input, applied
    // inside every network evaluation. Stats come from the offline dataset.
    // Std entries are floored at 1e-8. No-op requirement for tables.
    void set_normalization(const Eigen::VectorXd& mean, const Eigen::VectorXd& std);

    double evaluate(const Eigen::VectorXd& s, const Eigen::VectorXd& s_next) const;

    struct BatchCache {
        Eigen::MatrixXd X;                      // normalized network input
        Mlp::Cache mlp;
        std::vector<std::pair<int, int>> cells;  // table mode
    };

    // Values for a batch of (s, s') rows. Cache enables backward_batch.
    Eigen::VectorXd evaluate_batch(const Eigen::MatrixXd& S, const Eigen::MatrixXd& Sp,
                                   BatchCache* cache = nullptr) const;

    // Flat parameter gradient of sum_i dv(i) * V(s_i, s'_i).
    Eigen::VectorXd backward_batch(const BatchCache& cache, const Eigen::VectorXd& dv) const;

    int n_params() const;
    Eigen::VectorXd params() const;
    void set_params(const Eigen::VectorXd& p);

    Eigen::MatrixXd& table();
    const Eigen::MatrixXd& table() const;

    void save(const std::string& path) const;
    static ValueApproximator load(const std::string& path);

private:
    Kind kind_ = Kind::table;
    int n_states_ = 0;
    Eigen::MatrixXd table_;
    int obs_dim_ = 0;
    Mlp net_;
    Eigen::VectorXd in_mean_, in_std_;
};

// Map a tabular observation (the state index as a 1-dim vector) back to its
// index; throws std::invalid_argument on dimension or range violations.
int state_index_from_obs(const Eigen::VectorXd& obs, int n_states);

// Row-softmax policy over discrete actions. Uncovered states keep uniform
// rows; their indices are recorded for reporting.
struct TabularSoftmaxPolicy {
    Eigen::MatrixXd logits;  // (s, a)
    std::vector<int> uncovered;

    Eigen::MatrixXd probs() const;
    int sample(int s, Rng& rng) const;
    int argmax(int s) const;
};

// Diagonal Gaussian policy: MLP mean over the normalized observation,
// state-independent log-std vector bounded to [-5, 2].
struct GaussianPolicy {
    Mlp mean_net;
    Eigen::VectorXd log_std;
    Eigen::VectorXd in_mean, in_std;

    static constexpr double log_std_min = -5.0;
    static constexpr double log_std_max = 2.0;

    Eigen::VectorXd mean(const Eigen::VectorXd& obs) const;
    Eigen::VectorXd sample(const Eigen::VectorXd& obs, Rng& rng) const;
    Eigen::VectorXd clamped_log_std() const;
};

using ParametricPolicy = std::variant<TabularSoftmaxPolicy, GaussianPolicy>;

void save_policy(const ParametricPolicy& policy, const std::string& path);
ParametricPolicy load_policy(const std::string& path);

// Adaptive-moment (or plain) gradient step on a flat parameter vector.
// Deterministic given gradients and state.
struct Optimizer {
    enum class Kind { adam, sgd };

    Kind kind = Kind::adam;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

private:
    long t_ = 0;
    Eigen::VectorXd m_, v_;
};

}  // namespace dilo
