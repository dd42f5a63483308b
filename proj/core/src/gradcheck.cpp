#include "vpcd/learning.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vpcd::learning {
namespace {

constexpr int kFrame = 16;
constexpr int kProto = 5;
constexpr double kFloor = 1e-6;

double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kFloor});
}

void record(GradcheckReport& rep, const std::string& block, double err) {
  auto it = std::find_if(rep.blocks.begin(), rep.blocks.end(),
                         [&](const auto& b) { return b.first == block; });
  if (it == rep.blocks.end()) {
    rep.blocks.emplace_back(block, err);
  } else {
    it->second = std::max(it->second, err);
  }
  if (err > rep.max_relative_error || rep.worst_block.empty()) {
    rep.max_relative_error = err;
    rep.worst_block = block;
  }
}

Prototype random_prototype(int id, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> app(0.2, 0.9);
  std::uniform_real_distribution<double> logit(-2.0, 2.0);
  Prototype p;
  p.id = id;
  p.appearance = Plane::NullaryExpr(kProto, kProto, [&] { return app(rng); });
  p.mask_logits = Plane::NullaryExpr(kProto, kProto, [&] { return logit(rng); });
  return p;
}

GradcheckReport check_decomp(std::uint64_t seed, const GradcheckOptions& opts) {
  std::mt19937_64 rng(seed);
  PrototypeSet protos{random_prototype(0, rng), random_prototype(1, rng)};
  // One integer patch placement and one sub-pixel Fourier placement.
  std::vector<ObjectInstance> sel;
  sel.push_back(place_prototype(protos[0], 0, {0.9, 0.3, 0.2}, 3, 4, kFrame, kFrame, EdgeMode::Clip));
  sel.push_back(place_prototype_fourier(protos[1], 1, {0.2, 0.5, 0.9}, 7.3, 6.6, kFrame, kFrame));

  DecompLossConfig cfg;
  RgbImage frame;
  if (opts.perfect_reconstruction) {
    cfg.lambda_sparsity = 0.0;
    cfg.lambda_mask_smooth = 0.0;
    frame = compose(sel, cfg.background, kFrame, kFrame);
  } else {
    cfg.lambda_sparsity = 1e-2;
    cfg.lambda_mask_smooth = 1e-2;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    frame = RgbImage(kFrame, kFrame);
    for (int c = 0; c < 3; ++c) frame.channel(c) = Plane::NullaryExpr(kFrame, kFrame, [&] { return u(rng); });
  }

  const DecompLoss analytic = decomp_loss(frame, sel, protos, cfg, opts.corrupt_adjoint_sign);
  GradcheckReport rep;
  const auto eval = [&] { return decomp_loss(frame, sel, protos, cfg).loss; };
  for (std::size_t i = 0; i < protos.size(); ++i) {
    for (int part = 0; part < 2; ++part) {
      Plane& target = part == 0 ? protos[i].appearance : protos[i].mask_logits;
      const Plane& grad = part == 0 ? analytic.grad_appearance[i] : analytic.grad_mask_logits[i];
      const std::string block = part == 0 ? "prototype/appearance" : "prototype/mask_logits";
      for (Eigen::Index k = 0; k < target.size(); ++k) {
        const double saved = target.data()[k];
        target.data()[k] = saved + opts.step;
        const double up = eval();
        target.data()[k] = saved - opts.step;
        const double down = eval();
        target.data()[k] = saved;
        record(rep, block, relative_error(grad.data()[k], (up - down) / (2.0 * opts.step)));
      }
    }
  }
  rep.passed = rep.max_relative_error < opts.tolerance;
  return rep;
}

GradcheckReport check_motion(MotionLossKind kind, std::uint64_t seed, const GradcheckOptions& opts) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VelocityNet net(3, {8}, seed);
  net.scale = {4.0, kFrame, kFrame};
  for (auto& w : net.weights()) w = w.unaryExpr([&](double) { return 0.5 * n01(rng); });
  for (auto& b : net.biases()) b = b.unaryExpr([&](double) { return 0.1 * n01(rng); });

  const Prototype proto = random_prototype(0, rng);
  constexpr int kSteps = 3;
  std::vector<ObjectWindow> objects;
  std::vector<FrameWindow> frames(1);
  for (int o = 0; o < 2; ++o) {
    ObjectWindow ow;
    ow.history = MotionHistory(3);
    Vec2 z{4.0 + 5.0 * o + u(rng), 5.0 + 3.0 * o + u(rng)};
    for (int k = 0; k < 3; ++k) {
      const spectral::PhaseDiff v{n01(rng), n01(rng)};
      z += Vec2{v.vx, v.vy};
      ow.history.push(v, z);
    }
    for (int k = 0; k < kSteps; ++k) {
      ow.targets.push_back({z.x + (k + 1) * n01(rng), z.y + (k + 1) * n01(rng)});
      ow.observed.push_back(k != 1 || o == 0);
    }
    const Rgb color{u(rng), u(rng), u(rng)};
    ow.base = place_prototype(proto, o, color, 3 + 6 * o, 4 + 2 * o, kFrame, kFrame, EdgeMode::Periodic);
    frames[0].objects.push_back(static_cast<int>(objects.size()));
    objects.push_back(std::move(ow));
  }
  for (int k = 0; k < kSteps; ++k) {
    RgbImage t(kFrame, kFrame);
    for (int c = 0; c < 3; ++c) t.channel(c) = Plane::NullaryExpr(kFrame, kFrame, [&] { return u(rng); });
    frames[0].targets.push_back(std::move(t));
  }
  std::vector<int> selection = kind == MotionLossKind::Position ? std::vector<int>{0, 1} : std::vector<int>{0};

  const MotionBatchLoss analytic = motion_loss(net, objects, frames, selection, kSteps, kind);
  Eigen::VectorXd g = analytic.grads.flat();
  if (opts.corrupt_adjoint_sign) g = -g;
  Eigen::VectorXd params = net.parameters();
  GradcheckReport rep;
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    for (int part = 0; part < 2; ++part) {
      const Eigen::Index size = part == 0 ? net.weights()[l].size() : net.biases()[l].size();
      const std::string block = std::string(part == 0 ? "net/W" : "net/b") + std::to_string(l);
      for (Eigen::Index k = 0; k < size; ++k, ++pos) {
        const double saved = params(pos);
        params(pos) = saved + opts.step;
        net.set_parameters(params);
        const double up = motion_loss(net, objects, frames, selection, kSteps, kind).loss;
        params(pos) = saved - opts.step;
        net.set_parameters(params);
        const double down = motion_loss(net, objects, frames, selection, kSteps, kind).loss;
        params(pos) = saved;
        record(rep, block, relative_error(g(pos), (up - down) / (2.0 * opts.step)));
      }
    }
  }
  net.set_parameters(params);
  rep.passed = rep.max_relative_error < opts.tolerance;
  return rep;
}

}  // namespace

GradcheckReport gradcheck(GradcheckComponent component, std::uint64_t seed, const GradcheckOptions& opts) {
  switch (component) {
    case GradcheckComponent::DecompLoss: return check_decomp(seed, opts);
    case GradcheckComponent::MotionFrameLoss: return check_motion(MotionLossKind::Frame, seed, opts);
    case GradcheckComponent::MotionPositionLoss: return check_motion(MotionLossKind::Position, seed, opts);
  }
  return {};
}

}  // namespace vpcd::learning
