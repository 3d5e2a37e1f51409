#include "dilo/approximator.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <stdexcept>

#include "dilo/errors.hpp"
#include "dilo/util.hpp"

namespace dilo {

Mlp::Mlp(int input_dim, const std::vector<int>& hidden, int output_dim)
    : input_dim_(input_dim), output_dim_(output_dim), hidden_(hidden) {
    if (input_dim < 1 || output_dim < 1)
        throw std::invalid_argument("Mlp: input and output dims must be positive");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("Mlp: hidden sizes must be positive");
    int in = input_dim;
    for (int h : hidden) {
        W_.emplace_back(Eigen::MatrixXd::Zero(h, in));
        b_.emplace_back(Eigen::VectorXd::Zero(h));
        in = h;
    }
    W_.emplace_back(Eigen::MatrixXd::Zero(output_dim, in));
    b_.emplace_back(Eigen::VectorXd::Zero(output_dim));
}

void Mlp::init(Rng& rng) {
    for (size_t l = 0; l + 1 < W_.size(); ++l) {
        double bound = 1.0 / std::sqrt(static_cast<double>(W_[l].cols()));
        for (int j = 0; j < W_[l].cols(); ++j)
            for (int i = 0; i < W_[l].rows(); ++i) W_[l](i, j) = rng.uniform(-bound, bound);
        b_[l].setZero();
    }
    W_.back().setZero();  // zero last layer: the initial function is 0 everywhere
    b_.back().setZero();
}

int Mlp::n_params() const {
    int n = 0;
    for (size_t l = 0; l < W_.size(); ++l) n += static_cast<int>(W_[l].size() + b_[l].size());
    return n;
}

Eigen::VectorXd Mlp::flat_params() const {
    Eigen::VectorXd p(n_params());
    int off = 0;
    for (size_t l = 0; l < W_.size(); ++l) {
        p.segment(off, W_[l].size()) = Eigen::Map<const Eigen::VectorXd>(W_[l].data(), W_[l].size());
        off += static_cast<int>(W_[l].size());
        p.segment(off, b_[l].size()) = b_[l];
        off += static_cast<int>(b_[l].size());
    }
    return p;
}

void Mlp::set_flat_params(const Eigen::VectorXd& p) {
    if (p.size() != n_params()) throw std::invalid_argument("Mlp: flat parameter size mismatch");
    int off = 0;
    for (size_t l = 0; l < W_.size(); ++l) {
        Eigen::Map<Eigen::VectorXd>(W_[l].data(), W_[l].size()) = p.segment(off, W_[l].size());
        off += static_cast<int>(W_[l].size());
        b_[l] = p.segment(off, b_[l].size());
        off += static_cast<int>(b_[l].size());
    }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& X, Cache* cache) const {
    if (X.cols() != input_dim_) throw std::invalid_argument("Mlp::forward: input dim mismatch");
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    Eigen::MatrixXd h = X;
    for (size_t l = 0; l < W_.size(); ++l) {
        if (cache) cache->inputs.push_back(h);
        Eigen::MatrixXd z = (h * W_[l].transpose()).rowwise() + b_[l].transpose();
        if (cache) cache->pre.push_back(z);
        h = (l + 1 < W_.size()) ? z.cwiseMax(0.0) : z;
    }
    return h;
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& dY) const {
    if (cache.inputs.size() != W_.size())
        throw std::invalid_argument("Mlp::backward: cache does not match this network");
    std::vector<Eigen::MatrixXd> dW(W_.size());
    std::vector<Eigen::VectorXd> db(W_.size());
    Eigen::MatrixXd delta = dY;
    for (int l = static_cast<int>(W_.size()) - 1; l >= 0; --l) {
        if (l + 1 < static_cast<int>(W_.size())) {
            // Through the rectifier; subgradient 0 at the kink (strict >).
            delta = delta.cwiseProduct(
                (cache.pre[l].array() > 0.0).cast<double>().matrix());
        }
        dW[l] = delta.transpose() * cache.inputs[l];
        db[l] = delta.colwise().sum();
        if (l > 0) delta = delta * W_[l];
    }
    Eigen::VectorXd g(n_params());
    int off = 0;
    for (size_t l = 0; l < W_.size(); ++l) {
        g.segment(off, dW[l].size()) = Eigen::Map<const Eigen::VectorXd>(dW[l].data(), dW[l].size());
        off += static_cast<int>(dW[l].size());
        g.segment(off, db[l].size()) = db[l];
        off += static_cast<int>(db[l].size());
    }
    return g;
}

ValueApproximator ValueApproximator::make_table(int n_states) {
    if (n_states < 1) throw std::invalid_argument("ValueApproximator: n_states must be >= 1");
    ValueApproximator v;
    v.kind_ = Kind::table;
    v.n_states_ = n_states;
    v.table_ = Eigen::MatrixXd::Zero(n_states, n_states);
    v.obs_dim_ = 1;
    return v;
}

ValueApproximator ValueApproximator::make_network(int obs_dim, const std::vector<int>& hidden,
                                                  Rng& rng) {
    if (obs_dim < 1) throw std::invalid_argument("ValueApproximator: obs_dim must be >= 1");
    ValueApproximator v;
    v.kind_ = Kind::network;
    v.obs_dim_ = obs_dim;
    v.net_ = Mlp(2 * obs_dim, hidden, 1);
    v.net_.init(rng);
    v.in_mean_ = Eigen::VectorXd::Zero(2 * obs_dim);
    v.in_std_ = Eigen::VectorXd::Ones(2 * obs_dim);
    return v;
}

void ValueApproximator::set_normalization(const Eigen::VectorXd& mean,
                                          const Eigen::VectorXd& std) {
    if (kind_ == Kind::table) return;
    if (mean.size() != 2 * obs_dim_ || std.size() != 2 * obs_dim_)
        throw std::invalid_argument("set_normalization: stats must cover the concatenated input");
    in_mean_ = mean;
    in_std_ = std.cwiseMax(1e-8);
}

int state_index_from_obs(const Eigen::VectorXd& obs, int n_states) {
    if (obs.size() != 1)
        throw std::invalid_argument("state_index_from_obs: tabular observations are 1-dim");
    long idx = std::lround(obs(0));
    if (idx < 0 || idx >= n_states)
        throw std::invalid_argument("state_index_from_obs: index out of range");
    return static_cast<int>(idx);
}

double ValueApproximator::evaluate(const Eigen::VectorXd& s, const Eigen::VectorXd& s_next) const {
    if (kind_ == Kind::table)
        return table_(state_index_from_obs(s, n_states_), state_index_from_obs(s_next, n_states_));
    if (s.size() != obs_dim_ || s_next.size() != obs_dim_)
        throw std::invalid_argument("ValueApproximator::evaluate: dimension mismatch");
    Eigen::MatrixXd X(1, 2 * obs_dim_);
    X.row(0).head(obs_dim_) = s;
    X.row(0).tail(obs_dim_) = s_next;
    X.row(0) = (X.row(0) - in_mean_.transpose()).cwiseQuotient(in_std_.transpose());
    return net_.forward(X)(0, 0);
}

Eigen::VectorXd ValueApproximator::evaluate_batch(const Eigen::MatrixXd& S,
                                                  const Eigen::MatrixXd& Sp,
                                                  BatchCache* cache) const {
    if (S.rows() != Sp.rows()) throw std::invalid_argument("evaluate_batch: row count mismatch");
    int n = static_cast<int>(S.rows());
    if (kind_ == Kind::table) {
        Eigen::VectorXd out(n);
        if (cache) cache->cells.resize(n);
        for (int i = 0; i < n; ++i) {
            int a = state_index_from_obs(S.row(i), n_states_);
            int b = state_index_from_obs(Sp.row(i), n_states_);
            out(i) = table_(a, b);
            if (cache) cache->cells[i] = {a, b};
        }
        return out;
    }
    if (S.cols() != obs_dim_ || Sp.cols() != obs_dim_)
        throw std::invalid_argument("evaluate_batch: dimension mismatch");
    Eigen::MatrixXd X(n, 2 * obs_dim_);
    X.leftCols(obs_dim_) = S;
    X.rightCols(obs_dim_) = Sp;
    X = (X.rowwise() - in_mean_.transpose()).array().rowwise() / in_std_.transpose().array();
    Eigen::MatrixXd Y;
    if (cache) {
        cache->X = X;
        Y = net_.forward(X, &cache->mlp);
    } else {
        Y = net_.forward(X);
    }
    return Y.col(0);
}

Eigen::VectorXd ValueApproximator::backward_batch(const BatchCache& cache,
                                                  const Eigen::VectorXd& dv) const {
    if (kind_ == Kind::table) {
        if (static_cast<size_t>(dv.size()) != cache.cells.size())
            throw std::invalid_argument("backward_batch: cache/dv size mismatch");
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n_states_, n_states_);
        for (int i = 0; i < dv.size(); ++i)
            g(cache.cells[i].first, cache.cells[i].second) += dv(i);
        return Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    }
    return net_.backward(cache.mlp, dv);
}

int ValueApproximator::n_params() const {
    return kind_ == Kind::table ? n_states_ * n_states_ : net_.n_params();
}

Eigen::VectorXd ValueApproximator::params() const {
    if (kind_ == Kind::table)
        return Eigen::Map<const Eigen::VectorXd>(table_.data(), table_.size());
    return net_.flat_params();
}

void ValueApproximator::set_params(const Eigen::VectorXd& p) {
    if (p.size() != n_params()) throw std::invalid_argument("set_params: size mismatch");
    if (kind_ == Kind::table)
        Eigen::Map<Eigen::VectorXd>(table_.data(), table_.size()) = p;
    else
        net_.set_flat_params(p);
}

Eigen::MatrixXd& ValueApproximator::table() {
    if (kind_ != Kind::table) throw std::invalid_argument("table(): not a table approximator");
    return table_;
}

const Eigen::MatrixXd& ValueApproximator::table() const {
    if (kind_ != Kind::table) throw std::invalid_argument("table(): not a table approximator");
    return table_;
}

// ---- checkpoint io ----------------------------------------------------------

static void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
    out << v.size();
    for (int i = 0; i < v.size(); ++i) out << ' ' << format_double(v(i));
    out << '\n';
}

static Eigen::VectorXd read_vector(std::istream& in, const std::string& path) {
    long n = -1;
    if (!(in >> n) || n < 0) throw DataError("checkpoint '" + path + "': bad vector length");
    Eigen::VectorXd v(n);
    // Token-wise strtod parse: stream extraction rejects the "-inf" that
    // zero-coverage logits legitimately produce.
    std::string tok;
    for (long i = 0; i < n; ++i) {
        if (!(in >> tok)) throw DataError("checkpoint '" + path + "': truncated vector");
        std::size_t pos = 0;
        try {
            v(i) = std::stod(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != tok.size())
            throw DataError("checkpoint '" + path + "': bad number '" + tok + "'");
    }
    return v;
}

static void write_int_list(std::ostream& out, const std::vector<int>& xs) {
    out << xs.size();
    for (int x : xs) out << ' ' << x;
    out << '\n';
}

static std::vector<int> read_int_list(std::istream& in, const std::string& path) {
    long n = -1;
    if (!(in >> n) || n < 0) throw DataError("checkpoint '" + path + "': bad list length");
    std::vector<int> xs(n);
    for (long i = 0; i < n; ++i)
        if (!(in >> xs[i])) throw DataError("checkpoint '" + path + "': truncated list");
    return xs;
}

void ValueApproximator::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint '" + path + "' for writing");
    out << "dilo-ckpt v1\n";
    if (kind_ == Kind::table) {
        out << "value-table\n" << n_states_ << '\n';
        write_vector(out, params());
    } else {
        out << "value-net\n" << obs_dim_ << '\n';
        write_int_list(out, net_.hidden_sizes());
        write_vector(out, in_mean_);
        write_vector(out, in_std_);
        write_vector(out, net_.flat_params());
    }
    if (!out) throw IoError("short write to checkpoint '" + path + "'");
}

static void expect_magic(std::istream& in, const std::string& path) {
    std::string l1, l2;
    if (!(in >> l1 >> l2) || l1 != "dilo-ckpt" || l2 != "v1")
        throw DataError("checkpoint '" + path + "': bad magic (expected 'dilo-ckpt v1')");
}

ValueApproximator ValueApproximator::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    expect_magic(in, path);
    std::string kind;
    in >> kind;
    if (kind == "value-table") {
        int n = 0;
        if (!(in >> n) || n < 1) throw DataError("checkpoint '" + path + "': bad table size");
        ValueApproximator v = make_table(n);
        Eigen::VectorXd p = read_vector(in, path);
        v.set_params(p);
        return v;
    }
    if (kind == "value-net") {
        int obs_dim = 0;
        if (!(in >> obs_dim) || obs_dim < 1)
            throw DataError("checkpoint '" + path + "': bad obs_dim");
        std::vector<int> hidden = read_int_list(in, path);
        Rng dummy(0);
        ValueApproximator v = make_network(obs_dim, hidden, dummy);
        Eigen::VectorXd mean = read_vector(in, path);
        Eigen::VectorXd std = read_vector(in, path);
        v.set_normalization(mean, std);
        v.net_.set_flat_params(read_vector(in, path));
        return v;
    }
    throw DataError("checkpoint '" + path + "': unknown kind '" + kind + "'");
}

// ---- policies ---------------------------------------------------------------

// std::exp element-wise: Eigen's vectorized exp clamps its argument to a
// finite range, turning the -inf logit of an impossible action into a
// denormal instead of an exact zero probability.
static Eigen::VectorXd softmax_row(const Eigen::VectorXd& row) {
    double m = row.maxCoeff();
    Eigen::VectorXd e(row.size());
    for (int a = 0; a < row.size(); ++a) e(a) = std::exp(row(a) - m);
    return e / e.sum();
}

Eigen::MatrixXd TabularSoftmaxPolicy::probs() const {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (int s = 0; s < logits.rows(); ++s) p.row(s) = softmax_row(logits.row(s));
    return p;
}

int TabularSoftmaxPolicy::sample(int s, Rng& rng) const {
    Eigen::VectorXd e = softmax_row(logits.row(s));
    double u = rng.uniform();
    double acc = 0.0;
    for (int a = 0; a < e.size(); ++a) {
        acc += e(a);
        if (u < acc) return a;
    }
    return static_cast<int>(e.size()) - 1;
}

int TabularSoftmaxPolicy::argmax(int s) const {
    int best = 0;
    for (int a = 1; a < logits.cols(); ++a)
        if (logits(s, a) > logits(s, best)) best = a;
    return best;
}

Eigen::VectorXd GaussianPolicy::clamped_log_std() const {
    return log_std.cwiseMax(log_std_min).cwiseMin(log_std_max);
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::VectorXd& obs) const {
    Eigen::MatrixXd X(1, obs.size());
    X.row(0) = (obs - in_mean).cwiseQuotient(in_std).transpose();
    return mean_net.forward(X).row(0);
}

Eigen::VectorXd GaussianPolicy::sample(const Eigen::VectorXd& obs, Rng& rng) const {
    Eigen::VectorXd mu = mean(obs);
    Eigen::VectorXd sigma = clamped_log_std().array().exp();
    for (int i = 0; i < mu.size(); ++i) mu(i) += sigma(i) * rng.gaussian();
    return mu;
}

void save_policy(const ParametricPolicy& policy, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint '" + path + "' for writing");
    out << "dilo-ckpt v1\n";
    if (std::holds_alternative<TabularSoftmaxPolicy>(policy)) {
        const auto& p = std::get<TabularSoftmaxPolicy>(policy);
        out << "policy-tabular\n" << p.logits.rows() << ' ' << p.logits.cols() << '\n';
        write_vector(out, Eigen::Map<const Eigen::VectorXd>(p.logits.data(), p.logits.size()));
        write_int_list(out, p.uncovered);
    } else {
        const auto& p = std::get<GaussianPolicy>(policy);
        out << "policy-gaussian\n"
            << p.mean_net.input_dim() << ' ' << p.mean_net.output_dim() << '\n';
        write_int_list(out, p.mean_net.hidden_sizes());
        write_vector(out, p.in_mean);
        write_vector(out, p.in_std);
        write_vector(out, p.mean_net.flat_params());
        write_vector(out, p.log_std);
    }
    if (!out) throw IoError("short write to checkpoint '" + path + "'");
}

ParametricPolicy load_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    expect_magic(in, path);
    std::string kind;
    in >> kind;
    if (kind == "policy-tabular") {
        int rows = 0, cols = 0;
        if (!(in >> rows >> cols) || rows < 1 || cols < 1)
            throw DataError("checkpoint '" + path + "': bad logits shape");
        Eigen::VectorXd flat = read_vector(in, path);
        if (flat.size() != static_cast<long>(rows) * cols)
            throw DataError("checkpoint '" + path + "': logits size mismatch");
        TabularSoftmaxPolicy p;
        p.logits = Eigen::Map<const Eigen::MatrixXd>(flat.data(), rows, cols);
        p.uncovered = read_int_list(in, path);
        return p;
    }
    if (kind == "policy-gaussian") {
        int in_dim = 0, out_dim = 0;
        if (!(in >> in_dim >> out_dim) || in_dim < 1 || out_dim < 1)
            throw DataError("checkpoint '" + path + "': bad gaussian dims");
        std::vector<int> hidden = read_int_list(in, path);
        GaussianPolicy p;
        p.mean_net = Mlp(in_dim, hidden, out_dim);
        p.in_mean = read_vector(in, path);
        p.in_std = read_vector(in, path);
        p.mean_net.set_flat_params(read_vector(in, path));
        p.log_std = read_vector(in, path);
        return p;
    }
    throw DataError("checkpoint '" + path + "': unknown kind '" + kind + "'");
}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (params.size() != grad.size()) throw std::invalid_argument("Optimizer::step: size mismatch");
    if (kind == Kind::sgd) {
        params -= lr * grad;
        return;
    }
    if (m_.size() != params.size()) {
        m_ = Eigen::VectorXd::Zero(params.size());
        v_ = Eigen::VectorXd::Zero(params.size());
        t_ = 0;
    }
    ++t_;
    m_ = beta1 * m_ + (1.0 - beta1) * grad;
    v_ = beta2 * v_ + (1.0 - beta2) * grad.cwiseProduct(grad);
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    Eigen::VectorXd mhat = m_ / c1;
    Eigen::VectorXd vhat = v_ / c2;
    params -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
}

}  // namespace dilo
