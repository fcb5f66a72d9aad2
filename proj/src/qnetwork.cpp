#include "morl/qnetwork.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace morl {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'R', 'L', 'Q', 'N', 'E', 'T'};
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

template <class T> void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T> T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ValidationError("checkpoint: truncated stream");
    return v;
}

} // namespace

Mlp::Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("Mlp: need at least input and output sizes");
    for (int s : sizes_)
        if (s <= 0) throw ConfigError("Mlp: layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const double bound = std::sqrt(6.0 / sizes_[l]);
        std::uniform_real_distribution<double> u(-bound, bound);
        Eigen::MatrixXd w(sizes_[l + 1], sizes_[l]);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
        W_.push_back(std::move(w));
        b_.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
    reset_optimizer();
}

void Mlp::reset_optimizer() {
    mW_.clear();
    vW_.clear();
    mb_.clear();
    vb_.clear();
    for (std::size_t l = 0; l < W_.size(); ++l) {
        mW_.push_back(Eigen::MatrixXd::Zero(W_[l].rows(), W_[l].cols()));
        vW_.push_back(Eigen::MatrixXd::Zero(W_[l].rows(), W_[l].cols()));
        mb_.push_back(Eigen::VectorXd::Zero(b_[l].size()));
        vb_.push_back(Eigen::VectorXd::Zero(b_[l].size()));
    }
    adam_t_ = 0;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < W_.size(); ++l) n += W_[l].size() + b_[l].size();
    return n;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < W_.size(); ++l) {
        Eigen::VectorXd z = W_[l] * a + b_[l];
        a = l + 1 < W_.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < W_.size(); ++l) {
        Eigen::MatrixXd z = (W_[l] * a).colwise() + b_[l];
        a = l + 1 < W_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    }
    return a;
}

double Mlp::loss(const Eigen::MatrixXd& X, std::span<const int> actions,
                 const Eigen::VectorXd& targets, double huber_delta) const {
    const Eigen::MatrixXd out = forward_batch(X);
    double total = 0.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double e = out(actions[j], j) - targets[j];
        const double ae = std::abs(e);
        total += ae <= huber_delta ? 0.5 * e * e : huber_delta * (ae - 0.5 * huber_delta);
    }
    return total / static_cast<double>(X.cols());
}

double Mlp::backprop(const Eigen::MatrixXd& X, std::span<const int> actions,
                     const Eigen::VectorXd& targets, double huber_delta,
                     std::vector<Eigen::MatrixXd>& dW, std::vector<Eigen::VectorXd>& db) const {
    const std::size_t L = W_.size();
    const Eigen::Index B = X.cols();
    if (static_cast<Eigen::Index>(actions.size()) != B || targets.size() != B)
        throw ValidationError("Mlp: batch shape mismatch");

    std::vector<Eigen::MatrixXd> act(L + 1); // act[0] = input, act[l+1] = layer output
    act[0] = X;
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd z = (W_[l] * act[l]).colwise() + b_[l];
        act[l + 1] = l + 1 < L ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    }

    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(act[L].rows(), B);
    double total = 0.0;
    for (Eigen::Index j = 0; j < B; ++j) {
        const double e = act[L](actions[j], j) - targets[j];
        const double ae = std::abs(e);
        total += ae <= huber_delta ? 0.5 * e * e : huber_delta * (ae - 0.5 * huber_delta);
        delta(actions[j], j) = std::clamp(e, -huber_delta, huber_delta) / static_cast<double>(B);
    }

    dW.resize(L);
    db.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        dW[l] = delta * act[l].transpose();
        db[l] = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = W_[l].transpose() * delta;
            delta = back.cwiseProduct((act[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return total / static_cast<double>(B);
}

std::vector<double> Mlp::gradient(const Eigen::MatrixXd& X, std::span<const int> actions,
                                  const Eigen::VectorXd& targets, double huber_delta) const {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    backprop(X, actions, targets, huber_delta, dW, db);
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (std::size_t l = 0; l < dW.size(); ++l) {
        flat.insert(flat.end(), dW[l].data(), dW[l].data() + dW[l].size());
        flat.insert(flat.end(), db[l].data(), db[l].data() + db[l].size());
    }
    return flat;
}

double Mlp::train_step(const Eigen::MatrixXd& X, std::span<const int> actions,
                       const Eigen::VectorXd& targets, double learning_rate, double huber_delta) {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    const double before = backprop(X, actions, targets, huber_delta, dW, db);
    ++adam_t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t_));
    const double step = learning_rate * std::sqrt(c2) / c1;
    for (std::size_t l = 0; l < W_.size(); ++l) {
        mW_[l] = kBeta1 * mW_[l] + (1.0 - kBeta1) * dW[l];
        vW_[l] = kBeta2 * vW_[l] + (1.0 - kBeta2) * dW[l].cwiseProduct(dW[l]);
        W_[l].array() -= step * mW_[l].array() / (vW_[l].array().sqrt() + kAdamEps);
        mb_[l] = kBeta1 * mb_[l] + (1.0 - kBeta1) * db[l];
        vb_[l] = kBeta2 * vb_[l] + (1.0 - kBeta2) * db[l].cwiseProduct(db[l]);
        b_[l].array() -= step * mb_[l].array() / (vb_[l].array().sqrt() + kAdamEps);
    }
    return before;
}

std::vector<double> Mlp::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (std::size_t l = 0; l < W_.size(); ++l) {
        flat.insert(flat.end(), W_[l].data(), W_[l].data() + W_[l].size());
        flat.insert(flat.end(), b_[l].data(), b_[l].data() + b_[l].size());
    }
    return flat;
}

void Mlp::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw ValidationError("Mlp: parameter count mismatch");
    std::size_t k = 0;
    for (std::size_t l = 0; l < W_.size(); ++l) {
        std::memcpy(W_[l].data(), flat.data() + k, W_[l].size() * sizeof(double));
        k += W_[l].size();
        std::memcpy(b_[l].data(), flat.data() + k, b_[l].size() * sizeof(double));
        k += b_[l].size();
    }
}

bool Mlp::finite() const {
    for (std::size_t l = 0; l < W_.size(); ++l)
        if (!W_[l].allFinite() || !b_[l].allFinite()) return false;
    return true;
}

void Mlp::copy_weights_from(const Mlp& other) {
    if (other.sizes_ != sizes_) throw ValidationError("Mlp: shape mismatch in weight copy");
    W_ = other.W_;
    b_ = other.b_;
}

bool Mlp::same_weights(const Mlp& other) const {
    if (sizes_ != other.sizes_) return false;
    for (std::size_t l = 0; l < W_.size(); ++l)
        if (W_[l] != other.W_[l] || b_[l] != other.b_[l]) return false;
    return true;
}

void Mlp::save(std::ostream& out, std::uint64_t config_hash) const {
    out.write(kMagic, sizeof(kMagic));
    put(out, kCheckpointVersion);
    put(out, config_hash);
    put(out, static_cast<std::uint32_t>(sizes_.size()));
    for (int s : sizes_) put(out, static_cast<std::int32_t>(s));
    for (double p : parameters()) put(out, p);
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

std::uint64_t Mlp::load(std::istream& in) {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ValidationError("checkpoint: bad magic");
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) throw ValidationError("checkpoint: unsupported version");
    const auto hash = get<std::uint64_t>(in);
    const auto n = get<std::uint32_t>(in);
    if (n < 2 || n > 64) throw ValidationError("checkpoint: bad layer count");
    std::vector<int> sizes(n);
    for (auto& s : sizes) {
        s = get<std::int32_t>(in);
        if (s <= 0) throw ValidationError("checkpoint: bad layer size");
    }
    Rng dummy(0);
    *this = Mlp(sizes, dummy);
    std::vector<double> flat(parameter_count());
    for (auto& p : flat) p = get<double>(in);
    set_parameters(flat);
    return hash;
}

} // namespace morl
