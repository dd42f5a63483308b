#pragma once

// Small fully connected network refining per-object velocities. Shared by
// all objects; forward and backward passes are written out by hand.

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace vpcd {

/// Feature normalisation: velocities divided by `velocity`, positions mapped
/// from [0, width] x [0, height] to [-1, 1].
struct FeatureScale {
  double velocity = 4.0;
  double width = 64.0;
  double height = 64.0;
};

class VelocityNet {
 public:
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;  ///< input, then each hidden layer
  };
  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    void set_zero();
    Eigen::VectorXd flat() const;
  };

  VelocityNet() : VelocityNet(3, {96, 96}, 0) {}
  /// tanh hidden layers, linear output initialised to zero.
  VelocityNet(int history, std::vector<int> hidden, std::uint64_t seed);

  int history() const { return history_; }
  int input_size() const { return 4 * history_; }
  const std::vector<int>& hidden() const { return hidden_; }
  int parameter_count() const;

  Eigen::Vector2d forward(const Eigen::VectorXd& x) const;
  /// Column-per-sample forward pass; fills `tape` when given.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, Tape* tape = nullptr) const;
  /// Accumulates parameter gradients into `g` and returns d loss / d input.
  Eigen::MatrixXd backward_batch(const Tape& tape, const Eigen::MatrixXd& grad_out,
                                 Gradients& g) const;
  Gradients zero_gradients() const;

  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  FeatureScale scale;

 private:
  int history_ = 3;
  std::vector<int> hidden_;
  std::vector<Eigen::MatrixXd> weights_;  ///< out x in
  std::vector<Eigen::VectorXd> biases_;
};

}  // namespace vpcd
