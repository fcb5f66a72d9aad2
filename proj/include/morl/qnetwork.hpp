#pragma once

#include "morl/common.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace morl {

/**
 * Fully connected ReLU network with a linear output layer, trained with Adam
 * on a Huber loss over the selected output of each sample.
 *
 * Batches are column major: one column per sample.
 */
class Mlp {
  public:
    Mlp() = default;
    /// sizes = {input, hidden..., output}; He-uniform initialization.
    Mlp(std::vector<int> sizes, Rng& rng);

    const std::vector<int>& sizes() const { return sizes_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    std::size_t parameter_count() const;

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X) const;

    /// Mean Huber loss of output[actions[j]] against targets[j].
    double loss(const Eigen::MatrixXd& X, std::span<const int> actions,
                const Eigen::VectorXd& targets, double huber_delta) const;
    /// Gradient of loss() in parameters() order.
    std::vector<double> gradient(const Eigen::MatrixXd& X, std::span<const int> actions,
                                 const Eigen::VectorXd& targets, double huber_delta) const;
    /// One Adam step on loss(); returns the loss before the step.
    double train_step(const Eigen::MatrixXd& X, std::span<const int> actions,
                      const Eigen::VectorXd& targets, double learning_rate, double huber_delta);

    /// Flat copy: W_0 (column major), b_0, W_1, b_1, ...
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);
    bool finite() const;

    /// Copies weights only; optimizer moments stay with *this.
    void copy_weights_from(const Mlp& other);

    /// Binary checkpoint: magic, format version, config hash, layer sizes, weights.
    void save(std::ostream& out, std::uint64_t config_hash) const;
    /// Returns the embedded config hash.
    std::uint64_t load(std::istream& in);

    bool same_weights(const Mlp& other) const;

  private:
    double backprop(const Eigen::MatrixXd& X, std::span<const int> actions,
                    const Eigen::VectorXd& targets, double huber_delta,
                    std::vector<Eigen::MatrixXd>& dW, std::vector<Eigen::VectorXd>& db) const;
    void reset_optimizer();

    std::vector<int> sizes_;
    std::vector<Eigen::MatrixXd> W_;
    std::vector<Eigen::VectorXd> b_;
    // Adam moments
    std::vector<Eigen::MatrixXd> mW_, vW_;
    std::vector<Eigen::VectorXd> mb_, vb_;
    long adam_t_ = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace morl
