#include "vpcd/velocity_net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace vpcd {

VelocityNet::VelocityNet(int history, std::vector<int> hidden, std::uint64_t seed)
    : history_(history), hidden_(std::move(hidden)) {
  if (history_ < 1) throw std::invalid_argument("VelocityNet: history must be >= 1");
  for (int h : hidden_)
    if (h < 1) throw std::invalid_argument("VelocityNet: hidden sizes must be >= 1");
  std::mt19937_64 rng(seed);
  int fan_in = input_size();
  for (int h : hidden_) {
    const double limit = std::sqrt(6.0 / (fan_in + h));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(h, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(h));
    fan_in = h;
  }
  weights_.push_back(Eigen::MatrixXd::Zero(2, fan_in));
  biases_.push_back(Eigen::VectorXd::Zero(2));
}

int VelocityNet::parameter_count() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return static_cast<int>(n);
}

Eigen::Vector2d VelocityNet::forward(const Eigen::VectorXd& x) const {
  return forward_batch(x, nullptr).col(0);
}

Eigen::MatrixXd VelocityNet::forward_batch(const Eigen::MatrixXd& x, Tape* tape) const {
  if (x.rows() != input_size()) throw std::invalid_argument("VelocityNet: bad input size");
  if (!x.allFinite()) throw std::invalid_argument("VelocityNet: non-finite input");
  if (tape != nullptr) {
    tape->activations.clear();
    tape->activations.push_back(x);
  }
  Eigen::MatrixXd a = x;
  const std::size_t last = weights_.size() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    Eigen::MatrixXd z = weights_[l] * a;
    z.colwise() += biases_[l];
    a = z.array().tanh().matrix();
    if (tape != nullptr) tape->activations.push_back(a);
  }
  Eigen::MatrixXd out = weights_[last] * a;
  out.colwise() += biases_[last];
  return out;
}

VelocityNet::Gradients VelocityNet::zero_gradients() const {
  Gradients g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
  }
  return g;
}

Eigen::MatrixXd VelocityNet::backward_batch(const Tape& tape, const Eigen::MatrixXd& grad_out,
                                            Gradients& g) const {
  const std::size_t layers = weights_.size();
  if (tape.activations.size() != layers) throw std::invalid_argument("VelocityNet: tape mismatch");
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& a_in = tape.activations[l];
    g.weights[l].noalias() += delta * a_in.transpose();
    g.biases[l] += delta.rowwise().sum();
    Eigen::MatrixXd back = weights_[l].transpose() * delta;
    if (l > 0) {
      // a_in = tanh(z): d a / d z = 1 - a^2.
      back.array() *= (1.0 - a_in.array().square());
    }
    delta = std::move(back);
  }
  return delta;
}

void VelocityNet::Gradients::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

Eigen::VectorXd VelocityNet::Gradients::flat() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  Eigen::VectorXd out(n);
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.segment(pos, weights[l].size()) = weights[l].reshaped();
    pos += weights[l].size();
    out.segment(pos, biases[l].size()) = biases[l];
    pos += biases[l].size();
  }
  return out;
}

Eigen::VectorXd VelocityNet::parameters() const {
  Eigen::VectorXd out(parameter_count());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.segment(pos, weights_[l].size()) = weights_[l].reshaped();
    pos += weights_[l].size();
    out.segment(pos, biases_[l].size()) = biases_[l];
    pos += biases_[l].size();
  }
  return out;
}

void VelocityNet::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("VelocityNet: parameter size mismatch");
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l].reshaped() = flat.segment(pos, weights_[l].size());
    pos += weights_[l].size();
    biases_[l] = flat.segment(pos, biases_[l].size());
    pos += biases_[l].size();
  }
}

}  // namespace vpcd
