#include "dilo/dual_trainer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "dilo/errors.hpp"
#include "dilo/util.hpp"

namespace dilo {

void DiloConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("dilo.gamma must lie in (0,1)");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("dilo.beta must lie in (0,1]");
    if (!(eta >= 0.0)) throw ConfigError("dilo.eta must be >= 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("dilo.lambda must lie in [0,1]");
    if (!(tau > 0.0)) throw ConfigError("dilo.tau must be > 0");
    if (!(value_lr > 0.0)) throw ConfigError("dilo.value_lr must be > 0");
    if (!(policy_lr > 0.0)) throw ConfigError("dilo.policy_lr must be > 0");
    if (!(clip_max > 0.0)) throw ConfigError("dilo.clip_max must be > 0");
    if (batch_size < 0) throw ConfigError("dilo.batch_size must be >= 0");
    if (steps < 1) throw ConfigError("dilo.steps must be >= 1");
}

namespace {

void check_finite(double value, const char* term) {
    if (!std::isfinite(value))
        throw NumericError(std::string("dilo loss: ") + term + " is non-finite");
}

struct CoreOut {
    DiloLossBreakdown loss;
    Eigen::VectorXd g_forward;
    Eigen::VectorXd g_backward;
    double max_abs_value = 0.0;
    double mean_w_expert = 0.0;
    double mean_w_offline = 0.0;
};

CoreOut loss_core(const ValueApproximator& v, const PairBatch& d0_batch,
                  const TripleBatch& mix_batch, const TripleBatch& offline_batch,
                  const DiloConfig& cfg, const Eigen::VectorXd* mix_weights, bool want_grads) {
    if (d0_batch.size() < 1 || mix_batch.size() < 1 || offline_batch.size() < 1)
        throw std::invalid_argument("dilo loss: every batch must be non-empty");
    if (mix_weights && mix_weights->size() != mix_batch.size())
        throw std::invalid_argument("dilo loss: mixture weight length mismatch");
    const FGenerator gen = chi_square();
    const int nm = mix_batch.size();
    const int no = offline_batch.size();

    ValueApproximator::BatchCache c0, cm1, cm2, co1, co2;
    Eigen::VectorXd v0 =
        v.evaluate_batch(d0_batch.s, d0_batch.s_next, want_grads ? &c0 : nullptr);
    Eigen::VectorXd vm1 =
        v.evaluate_batch(mix_batch.s, mix_batch.s_next, want_grads ? &cm1 : nullptr);
    Eigen::VectorXd vm2 =
        v.evaluate_batch(mix_batch.s_next, mix_batch.s_next2, want_grads ? &cm2 : nullptr);
    Eigen::VectorXd vo1 =
        v.evaluate_batch(offline_batch.s, offline_batch.s_next, want_grads ? &co1 : nullptr);
    Eigen::VectorXd vo2 =
        v.evaluate_batch(offline_batch.s_next, offline_batch.s_next2, want_grads ? &co2 : nullptr);

    CoreOut out;
    out.max_abs_value = std::max({v0.cwiseAbs().maxCoeff(), vm1.cwiseAbs().maxCoeff(),
                                  vm2.cwiseAbs().maxCoeff(), vo1.cwiseAbs().maxCoeff(),
                                  vo2.cwiseAbs().maxCoeff()});
    if (!std::isfinite(out.max_abs_value))
        throw NumericError("dilo loss: value outputs are non-finite");

    Eigen::VectorXd ym = cfg.gamma * vm2 - vm1;
    Eigen::VectorXd yo = cfg.gamma * vo2 - vo1;

    out.loss.term_initial = cfg.beta * (1.0 - cfg.gamma) * v0.mean();
    double conj = 0.0;
    for (int i = 0; i < nm; ++i) {
        double wi = mix_weights ? (*mix_weights)(i) : 1.0 / nm;
        conj += wi * conjugate_p(gen, ym(i));
    }
    out.loss.term_conjugate = conj;
    out.loss.term_linear = -(1.0 - cfg.beta) * yo.mean();
    check_finite(out.loss.term_initial, "term_initial");
    check_finite(out.loss.term_conjugate, "term_conjugate");
    check_finite(out.loss.term_linear, "term_linear");
    out.loss.total = (1.0 - cfg.lambda) * out.loss.term_initial +
                     cfg.lambda * out.loss.term_conjugate + cfg.lambda * out.loss.term_linear;

    double sum_ye = 0.0, sum_yo = 0.0, sum_we = 0.0, sum_wo = 0.0;
    int ne_rows = 0, no_rows = 0;
    for (int i = 0; i < nm; ++i) {
        double wi = ratio_from_residual(gen, ym(i));
        if (mix_batch.source[i] == 0) {
            sum_ye += ym(i);
            sum_we += wi;
            ++ne_rows;
        } else {
            sum_yo += ym(i);
            sum_wo += wi;
            ++no_rows;
        }
    }
    out.loss.mean_residual_expert = ne_rows > 0 ? sum_ye / ne_rows : 0.0;
    out.loss.mean_residual_offline = no_rows > 0 ? sum_yo / no_rows : 0.0;
    out.mean_w_expert = ne_rows > 0 ? sum_we / ne_rows : 0.0;
    out.mean_w_offline = no_rows > 0 ? sum_wo / no_rows : 0.0;

    if (want_grads) {
        Eigen::VectorXd u0 = Eigen::VectorXd::Constant(
            d0_batch.size(),
            (1.0 - cfg.lambda) * cfg.beta * (1.0 - cfg.gamma) / d0_batch.size());
        Eigen::VectorXd cmix(nm);
        for (int i = 0; i < nm; ++i) {
            double wi = mix_weights ? (*mix_weights)(i) : 1.0 / nm;
            cmix(i) = cfg.lambda * wi * conjugate_p_derivative(gen, ym(i));
        }
        Eigen::VectorXd uoff =
            Eigen::VectorXd::Constant(no, -cfg.lambda * (1.0 - cfg.beta) / no);
        // Forward half: the d0 term plus every -V(s,s') occurrence of a residual.
        out.g_forward = v.backward_batch(c0, u0);
        out.g_forward.noalias() += v.backward_batch(cm1, (-cmix).eval());
        out.g_forward.noalias() += v.backward_batch(co1, (-uoff).eval());
        // Backward half: every +gamma*V(s',s'') occurrence.
        out.g_backward = cfg.gamma * v.backward_batch(cm2, cmix);
        out.g_backward.noalias() += cfg.gamma * v.backward_batch(co2, uoff);
    }
    return out;
}

}  // namespace

DiloLossBreakdown dilo_loss(const ValueApproximator& v, const PairBatch& d0_batch,
                            const TripleBatch& mix_batch, const TripleBatch& offline_batch,
                            const DiloConfig& cfg) {
    return loss_core(v, d0_batch, mix_batch, offline_batch, cfg, nullptr, false).loss;
}

LossGrads dilo_loss_grads(const ValueApproximator& v, const PairBatch& d0_batch,
                          const TripleBatch& mix_batch, const TripleBatch& offline_batch,
                          const DiloConfig& cfg, const Eigen::VectorXd* mix_weights) {
    CoreOut out = loss_core(v, d0_batch, mix_batch, offline_batch, cfg, mix_weights, true);
    LossGrads lg;
    lg.loss = out.loss;
    lg.g_forward = std::move(out.g_forward);
    lg.g_backward = std::move(out.g_backward);
    lg.max_abs_value = out.max_abs_value;
    lg.mean_w_expert = out.mean_w_expert;
    lg.mean_w_offline = out.mean_w_offline;
    return lg;
}

Eigen::VectorXd orthogonal_gradient(const Eigen::VectorXd& g_forward,
                                    const Eigen::VectorXd& g_backward, double eta) {
    if (g_forward.size() != g_backward.size())
        throw std::invalid_argument("orthogonal_gradient: size mismatch");
    double nf = g_forward.norm();
    if (nf <= 1e-12) return g_forward + eta * g_backward;
    double coef = g_forward.dot(g_backward) / g_forward.squaredNorm();
    return g_forward + eta * (g_backward - coef * g_forward);
}

TrainResult train_value(ValueApproximator& v, const TrajectoryDataset& expert,
                        const TrajectoryDataset& offline, const DiloConfig& cfg, Rng& rng) {
    cfg.validate();
    expert.validate();
    offline.validate();

    const bool full_batch = cfg.batch_size == 0;
    PairBatch d0_batch;
    TripleBatch mix_batch;
    TripleBatch offline_batch;
    Eigen::VectorXd mix_weights;
    const Eigen::VectorXd* weights_ptr = nullptr;

    if (full_batch) {
        TripleBatch eb = all_triples(expert, 0);
        TripleBatch ob = all_triples(offline, 1);
        int ne = eb.size(), no = ob.size(), dim = static_cast<int>(eb.s.cols());
        mix_batch.s.resize(ne + no, dim);
        mix_batch.s_next.resize(ne + no, dim);
        mix_batch.s_next2.resize(ne + no, dim);
        mix_batch.s << eb.s, ob.s;
        mix_batch.s_next << eb.s_next, ob.s_next;
        mix_batch.s_next2 << eb.s_next2, ob.s_next2;
        mix_batch.source.assign(ne + no, 0);
        for (int i = ne; i < ne + no; ++i) mix_batch.source[i] = 1;
        // Exact mixture weights: each expert triple contributes beta/n_E, each
        // offline triple (1-beta)/n_O, so the conjugate term is the exact
        // expectation over Mix_beta of the two empirical triple distributions.
        mix_weights.resize(ne + no);
        mix_weights.head(ne).setConstant(cfg.beta / ne);
        mix_weights.tail(no).setConstant((1.0 - cfg.beta) / no);
        weights_ptr = &mix_weights;
        offline_batch = std::move(ob);

        PairBatch op = all_pairs(offline);
        if (cfg.d0_include_expert) {
            PairBatch ep = all_pairs(expert);
            int np_e = ep.size(), np_o = op.size();
            d0_batch.s.resize(np_e + np_o, dim);
            d0_batch.s_next.resize(np_e + np_o, dim);
            d0_batch.s << ep.s, op.s;
            d0_batch.s_next << ep.s_next, op.s_next;
            d0_batch.has_actions = false;
        } else {
            d0_batch = std::move(op);
            d0_batch.has_actions = false;
        }
    }

    Optimizer opt;
    opt.kind = cfg.optimizer;
    opt.lr = cfg.value_lr;
    TrainResult result;
    result.history.reserve(cfg.steps);
    for (int step = 0; step < cfg.steps; ++step) {
        if (!full_batch) {
            mix_batch = sample_mixture_triples(expert, offline, cfg.beta, cfg.batch_size, rng);
            offline_batch = sample_offline_triples(offline, cfg.batch_size, rng);
            d0_batch =
                sample_d0_pairs(expert, offline, cfg.batch_size, rng, cfg.d0_include_expert);
        }
        LossGrads lg = dilo_loss_grads(v, d0_batch, mix_batch, offline_batch, cfg, weights_ptr);
        if (!(lg.max_abs_value <= 1e6))
            throw DivergenceError("dual training diverged at step " + std::to_string(step) +
                                  ": |V| reached " + format_double(lg.max_abs_value));
        Eigen::VectorXd g;
        switch (cfg.grad_mode) {
            case GradMode::orthogonal:
                g = orthogonal_gradient(lg.g_forward, lg.g_backward, cfg.eta);
                break;
            case GradMode::full:
                g = lg.g_forward + lg.g_backward;
                break;
            case GradMode::semi:
                g = lg.g_forward;
                break;
        }
        Eigen::VectorXd params = v.params();
        opt.step(params, g);
        v.set_params(params);

        StepMetrics m;
        m.step = step;
        m.loss = lg.loss;
        m.grad_norm_forward = lg.g_forward.norm();
        m.grad_norm_backward = lg.g_backward.norm();
        m.grad_norm_combined = g.norm();
        m.mean_w_expert = lg.mean_w_expert;
        m.mean_w_offline = lg.mean_w_offline;
        result.history.push_back(m);
    }
    return result;
}

Eigen::VectorXd recover_ratio(const ValueApproximator& v, const TripleBatch& triples,
                              const DiloConfig& cfg) {
    const FGenerator gen = chi_square();
    Eigen::VectorXd v1 = v.evaluate_batch(triples.s, triples.s_next, nullptr);
    Eigen::VectorXd v2 = v.evaluate_batch(triples.s_next, triples.s_next2, nullptr);
    Eigen::VectorXd w(triples.size());
    for (int i = 0; i < triples.size(); ++i)
        w(i) = ratio_from_residual(gen, cfg.gamma * v2(i) - v1(i));
    return w;
}

double implied_reward(const ValueApproximator& v, const Eigen::VectorXd& s,
                      const Eigen::VectorXd& s_next, const Eigen::VectorXd& s_next2,
                      double gamma) {
    return v.evaluate(s, s_next) - gamma * v.evaluate(s_next, s_next2);
}

// ---- exact tabular mode -----------------------------------------------------

std::vector<Eigen::MatrixXd> exact_residuals(const TabularMDP& mdp, const Eigen::MatrixXd& V) {
    int S = mdp.n_states;
    if (V.rows() != S || V.cols() != S)
        throw std::invalid_argument("exact_residuals: V must be n_states x n_states");
    std::vector<Eigen::MatrixXd> y(mdp.n_actions);
    for (int a = 0; a < mdp.n_actions; ++a) {
        // ev(p) = E_{s'' ~ p(.|p,a)} V(p, s'')
        Eigen::VectorXd ev = (mdp.transition[a].array() * V.array()).rowwise().sum();
        y[a] = (mdp.gamma * ev.transpose()).replicate(S, 1) - V;
    }
    return y;
}

double exact_dual_loss(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                       const JointVisitation& d_expert, const JointVisitation& rho, double beta,
                       const FGenerator& gen, const Eigen::MatrixXd& V) {
    auto y = exact_residuals(mdp, V);
    int S = mdp.n_states;
    double total = beta * (1.0 - mdp.gamma) * (d0_joint.m.array() * V.array()).sum();
    for (int a = 0; a < mdp.n_actions; ++a) {
        Eigen::MatrixXd mix = beta * d_expert.tensor[a] + (1.0 - beta) * rho.tensor[a];
        for (int s = 0; s < S; ++s)
            for (int p = 0; p < S; ++p)
                if (mix(s, p) > 0.0) total += mix(s, p) * conjugate_p(gen, y[a](s, p));
        total -= (1.0 - beta) * (rho.tensor[a].array() * y[a].array()).sum();
    }
    return total;
}

namespace {

Eigen::MatrixXd exact_dual_grad(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                                const JointVisitation& d_expert, const JointVisitation& rho,
                                double beta, const FGenerator& gen, const Eigen::MatrixXd& V) {
    auto y = exact_residuals(mdp, V);
    int S = mdp.n_states;
    Eigen::MatrixXd G = beta * (1.0 - mdp.gamma) * d0_joint.m;
    for (int a = 0; a < mdp.n_actions; ++a) {
        Eigen::MatrixXd mix = beta * d_expert.tensor[a] + (1.0 - beta) * rho.tensor[a];
        Eigen::MatrixXd w(S, S);
        for (int s = 0; s < S; ++s)
            for (int p = 0; p < S; ++p) w(s, p) = ratio_from_residual(gen, y[a](s, p));
        Eigen::MatrixXd coef = mix.cwiseProduct(w) - (1.0 - beta) * rho.tensor[a];
        // Each y[a](s,p) reaches V through +gamma p(v|p,a) V(p,v) and -V(s,p).
        Eigen::VectorXd cp = coef.colwise().sum().transpose();
        G.noalias() += mdp.gamma * cp.asDiagonal() * mdp.transition[a];
        G -= coef;
    }
    return G;
}

Eigen::MatrixXd exact_dual_hessian(const TabularMDP& mdp, const JointVisitation& d_expert,
                                   const JointVisitation& rho, double beta,
                                   const Eigen::MatrixXd& V) {
    int S = mdp.n_states;
    int n = S * S;
    auto y = exact_residuals(mdp, V);
    // Column-major flattening, idx(s,p) = p*S + s, matching Eigen::Map below.
    auto idx = [S](int s, int p) { return p * S + s; };
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd avec(n);
    for (int a = 0; a < mdp.n_actions; ++a) {
        Eigen::MatrixXd mix = beta * d_expert.tensor[a] + (1.0 - beta) * rho.tensor[a];
        for (int s = 0; s < S; ++s) {
            for (int p = 0; p < S; ++p) {
                double m = mix(s, p);
                // The conjugate has curvature 1/2 on the active branch and 0
                // where the ratio clamp binds.
                if (m <= 0.0 || y[a](s, p) <= -2.0) continue;
                avec.setZero();
                for (int vv = 0; vv < S; ++vv)
                    avec(idx(p, vv)) += mdp.gamma * mdp.transition[a](p, vv);
                avec(idx(s, p)) -= 1.0;
                H.noalias() += (0.5 * m) * (avec * avec.transpose());
            }
        }
    }
    return H;
}

}  // namespace

DualSolution solve_dual_exact(const TabularMDP& mdp, const JointInitialDist& d0_joint,
                              const JointVisitation& d_expert, const JointVisitation& rho,
                              double beta, const FGenerator& gen, double tol,
                              const Eigen::MatrixXd* V_init, int max_iterations) {
    mdp.validate();
    d0_joint.validate();
    d_expert.validate(&mdp);
    rho.validate(&mdp);
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("solve_dual_exact: beta must lie in (0,1]");
    if (!(tol > 0.0)) throw std::invalid_argument("solve_dual_exact: tol must be > 0");
    int S = mdp.n_states;
    int n = S * S;
    Eigen::MatrixXd V = V_init ? *V_init : Eigen::MatrixXd::Zero(S, S);
    if (V.rows() != S || V.cols() != S)
        throw std::invalid_argument("solve_dual_exact: V_init must be n_states x n_states");

    double L = exact_dual_loss(mdp, d0_joint, d_expert, rho, beta, gen, V);
    int it = 0;
    for (; it < max_iterations; ++it) {
        Eigen::MatrixXd G = exact_dual_grad(mdp, d0_joint, d_expert, rho, beta, gen, V);
        if (G.cwiseAbs().maxCoeff() <= tol) break;
        Eigen::MatrixXd H = exact_dual_hessian(mdp, d_expert, rho, beta, V);
        H.diagonal().array() += 1e-12;
        Eigen::Map<const Eigen::VectorXd> gflat(G.data(), n);
        Eigen::VectorXd dx = H.ldlt().solve(-gflat);
        double slope = gflat.dot(dx);
        if (!dx.allFinite() || slope >= 0.0) {
            dx = -gflat;
            slope = -gflat.squaredNorm();
        }
        Eigen::Map<const Eigen::MatrixXd> dxm(dx.data(), S, S);
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            Eigen::MatrixXd Vtry = V + t * dxm;
            double Lnew = exact_dual_loss(mdp, d0_joint, d_expert, rho, beta, gen, Vtry);
            if (Lnew <= L + 1e-4 * t * slope) {
                V = std::move(Vtry);
                L = Lnew;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;  // stalled; the residual gradient below reports it
    }
    DualSolution sol;
    sol.V = std::move(V);
    sol.value = L;
    sol.iterations = it;
    sol.tol = tol;
    sol.grad_inf_norm = exact_dual_grad(mdp, d0_joint, d_expert, rho, beta, gen, sol.V)
                            .cwiseAbs()
                            .maxCoeff();
    return sol;
}

}  // namespace dilo
