#include "vpcd/learning.hpp"

#include "vpcd/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <stdexcept>

namespace vpcd::learning {
namespace {

Plane sigmoid(const Plane& x) { return 1.0 / (1.0 + (-x).exp()); }

// Full-frame image of a patch placed at (top, left).
Plane place(const Plane& patch, int top, int left, EdgeMode edge, int h, int w) {
  Plane out = Plane::Zero(h, w);
  Layer l;
  l.top = top;
  l.left = left;
  l.mask = patch;
  l.edge = edge;
  l.for_each_pixel(h, w, [&](int pr, int pc, int fr, int fc) { out(fr, fc) += patch(pr, pc); });
  return out;
}

// Adjoint of place(): reads the patch-sized window back.
Plane gather(const Plane& g, int top, int left, EdgeMode edge, int ph, int pw) {
  Plane out = Plane::Zero(ph, pw);
  Layer l;
  l.top = top;
  l.left = left;
  l.mask = Plane::Zero(ph, pw);
  l.edge = edge;
  l.for_each_pixel(static_cast<int>(g.rows()), static_cast<int>(g.cols()),
                   [&](int pr, int pc, int fr, int fc) { out(pr, pc) += g(fr, fc); });
  return out;
}

Plane pad(const Plane& p, int h, int w) {
  Plane out = Plane::Zero(h, w);
  out.topLeftCorner(p.rows(), p.cols()) = p;
  return out;
}

struct Placement {
  int proto = 0;  // index into the prototype set
  bool fourier = false;
  int top = 0;
  int left = 0;
  EdgeMode edge = EdgeMode::Clip;
  double dx = 0.0;
  double dy = 0.0;
  Rgb color{};
};

Plane forward_shift(const Plane& p, const Placement& pl, int h, int w) {
  if (pl.fourier) return spectral::fourier_shift(pad(p, h, w), pl.dx, pl.dy);
  return place(p, pl.top, pl.left, pl.edge, h, w);
}

Plane adjoint_shift(const Plane& g, const Placement& pl, int ph, int pw, bool corrupt) {
  if (pl.fourier) {
    const double s = corrupt ? 1.0 : -1.0;
    return spectral::fourier_shift(g, s * pl.dx, s * pl.dy).topLeftCorner(ph, pw);
  }
  if (corrupt) return gather(g, -pl.top, -pl.left, pl.edge, ph, pw);
  return gather(g, pl.top, pl.left, pl.edge, ph, pw);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Adds d TV / d p to `g`, scaled by `lambda`.
void tv_gradient(const Plane& p, double lambda, Plane& g) {
  for (int r = 0; r < p.rows(); ++r) {
    for (int c = 0; c < p.cols(); ++c) {
      if (c + 1 < p.cols()) {
        const double s = lambda * sign(p(r, c + 1) - p(r, c));
        g(r, c + 1) += s;
        g(r, c) -= s;
      }
      if (r + 1 < p.rows()) {
        const double s = lambda * sign(p(r + 1, c) - p(r, c));
        g(r + 1, c) += s;
        g(r, c) -= s;
      }
    }
  }
}

int parameter_size(const PrototypeSet& set) {
  int n = 0;
  for (const auto& p : set) n += 2 * static_cast<int>(p.appearance.size());
  return n;
}

Eigen::VectorXd flatten(const PrototypeSet& set) {
  Eigen::VectorXd out(parameter_size(set));
  Eigen::Index pos = 0;
  for (const auto& p : set) {
    out.segment(pos, p.appearance.size()) = p.appearance.reshaped<Eigen::RowMajor>();
    pos += p.appearance.size();
    out.segment(pos, p.mask_logits.size()) = p.mask_logits.reshaped<Eigen::RowMajor>();
    pos += p.mask_logits.size();
  }
  return out;
}

void unflatten(const Eigen::VectorXd& flat, PrototypeSet& set) {
  Eigen::Index pos = 0;
  for (auto& p : set) {
    p.appearance.reshaped<Eigen::RowMajor>() = flat.segment(pos, p.appearance.size());
    pos += p.appearance.size();
    p.mask_logits.reshaped<Eigen::RowMajor>() = flat.segment(pos, p.mask_logits.size());
    pos += p.mask_logits.size();
  }
}

Eigen::VectorXd flatten_grads(const DecompLoss& l) {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < l.grad_appearance.size(); ++i)
    n += l.grad_appearance[i].size() + l.grad_mask_logits[i].size();
  Eigen::VectorXd out(n);
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < l.grad_appearance.size(); ++i) {
    out.segment(pos, l.grad_appearance[i].size()) = l.grad_appearance[i].reshaped<Eigen::RowMajor>();
    pos += l.grad_appearance[i].size();
    out.segment(pos, l.grad_mask_logits[i].size()) = l.grad_mask_logits[i].reshaped<Eigen::RowMajor>();
    pos += l.grad_mask_logits[i].size();
  }
  return out;
}

struct Component {
  int channel = -1;
  int top = 0;
  int left = 0;
  Plane mask;  // component pixels inside its bounding box
  double error = 0.0;
};

// The connected component (4-neighbourhood, one colour channel) with the
// largest reconstruction error inside its bounding box.
Component worst_component(const RgbImage& frame, const RgbImage& recon, const ColorQuantizedFrame& q,
                          const Rgb& background, int max_size) {
  Component best;
  const int h = frame.height();
  const int w = frame.width();
  const int bg = q.nearest_channel(background);
  Eigen::ArrayXXi label(h, w);
  for (int j = 0; j < q.k(); ++j) {
    if (j == bg) continue;
    const Plane& ch = q.channels[static_cast<std::size_t>(j)];
    label.setConstant(-1);
    int next = 0;
    for (int r0 = 0; r0 < h; ++r0) {
      for (int c0 = 0; c0 < w; ++c0) {
        if (ch(r0, c0) < 0.5 || label(r0, c0) >= 0) continue;
        std::vector<std::pair<int, int>> stack{{r0, c0}}, pixels;
        label(r0, c0) = next;
        int top = r0, bottom = r0, left = c0, right = c0;
        bool touches_other = false;
        while (!stack.empty()) {
          const auto [r, c] = stack.back();
          stack.pop_back();
          pixels.emplace_back(r, c);
          top = std::min(top, r);
          bottom = std::max(bottom, r);
          left = std::min(left, c);
          right = std::max(right, c);
          const int nr[4] = {r - 1, r + 1, r, r};
          const int nc[4] = {c, c, c - 1, c + 1};
          for (int n = 0; n < 4; ++n) {
            if (nr[n] < 0 || nr[n] >= h || nc[n] < 0 || nc[n] >= w) continue;
            if (ch(nr[n], nc[n]) < 0.5) {
              const Plane& other = q.channels[static_cast<std::size_t>(bg)];
              touches_other = touches_other || other(nr[n], nc[n]) < 0.5;
              continue;
            }
            if (label(nr[n], nc[n]) >= 0) continue;
            label(nr[n], nc[n]) = next;
            stack.emplace_back(nr[n], nc[n]);
          }
        }
        ++next;
        const int bh = bottom - top + 1;
        const int bw = right - left + 1;
        if (bh > max_size || bw > max_size) continue;
        // Components touching the frame edge or another object may be cut off.
        if (top == 0 || left == 0 || bottom == h - 1 || right == w - 1 || touches_other) continue;
        double err = 0.0;
        for (int r = top; r <= bottom; ++r)
          for (int c = left; c <= right; ++c)
            for (int k = 0; k < 3; ++k) {
              const double d = frame.at(k, r, c) - recon.at(k, r, c);
              err += d * d;
            }
        if (err > best.error) {
          best.channel = j;
          best.top = top;
          best.left = left;
          best.error = err;
          best.mask = Plane::Zero(bh, bw);
          for (const auto& [r, c] : pixels) best.mask(r - top, c - left) = 1.0;
        }
      }
    }
  }
  return best;
}

Plane binarize(const Plane& p) { return (p > 0.5).cast<double>(); }

}  // namespace

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("Adam: learning rate must be > 0");
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != grad.size()) throw std::invalid_argument("Adam: size mismatch");
  if (m_.size() != params.size()) {
    m_ = Eigen::VectorXd::Zero(params.size());
    v_ = Eigen::VectorXd::Zero(params.size());
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void Adam::reset(Eigen::Index offset, Eigen::Index size) {
  if (m_.size() == 0) return;
  m_.segment(offset, size).setZero();
  v_.segment(offset, size).setZero();
}

void Adam::restore(long steps, Eigen::VectorXd m, Eigen::VectorXd v) {
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

void FrameBank::add(const RgbImage& frame) {
  Entry e;
  e.height = frame.height();
  e.width = frame.width();
  e.rgb.resize(static_cast<std::size_t>(e.height) * e.width * 3);
  std::size_t i = 0;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < e.height; ++r)
      for (int col = 0; col < e.width; ++col) e.rgb[i++] = io::to_byte(frame.at(c, r, col));
  frames_.push_back(std::move(e));
}

RgbImage FrameBank::get(std::size_t index) const {
  const Entry& e = frames_.at(index);
  RgbImage out(e.height, e.width);
  std::size_t i = 0;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < e.height; ++r)
      for (int col = 0; col < e.width; ++col) out.at(c, r, col) = io::from_byte(e.rgb[i++]);
  return out;
}

void DecompLossConfig::validate() const {
  if (lambda_sparsity < 0.0 || lambda_mask_smooth < 0.0)
    throw std::invalid_argument("decomp: regulariser weights must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("decomp: learning rate must be > 0");
  if (steps < 0) throw std::invalid_argument("decomp: steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("decomp: batch size must be >= 1");
  if (prototypes < 1) throw std::invalid_argument("decomp: prototype count must be >= 1");
  if (prototype_size < 1) throw std::invalid_argument("decomp: prototype size must be >= 1");
  if (max_objs < 1 || colors < 2 || peaks_per_pair < 1)
    throw std::invalid_argument("decomp: bad parsing parameters");
  if (reseed_interval < 1) throw std::invalid_argument("decomp: reseed interval must be >= 1");
}

double total_variation(const Plane& p) {
  double tv = 0.0;
  if (p.cols() > 1) tv += (p.rightCols(p.cols() - 1) - p.leftCols(p.cols() - 1)).abs().sum();
  if (p.rows() > 1) tv += (p.bottomRows(p.rows() - 1) - p.topRows(p.rows() - 1)).abs().sum();
  return tv;
}

DecompLoss decomp_loss(const RgbImage& frame, std::span<const ObjectInstance> selection,
                       const PrototypeSet& prototypes, const DecompLossConfig& cfg,
                       bool corrupt_adjoint_sign) {
  const int h = frame.height();
  const int w = frame.width();
  DecompLoss out;
  for (const auto& p : prototypes) {
    out.grad_appearance.push_back(Plane::Zero(p.height(), p.width()));
    out.grad_mask_logits.push_back(Plane::Zero(p.height(), p.width()));
  }

  std::vector<Placement> placements;
  for (const auto& obj : selection) {
    Placement pl;
    pl.proto = -1;
    for (std::size_t i = 0; i < prototypes.size(); ++i)
      if (prototypes[i].id == obj.prototype_id) pl.proto = static_cast<int>(i);
    if (pl.proto < 0) throw std::invalid_argument("decomp_loss: unknown prototype");
    const Prototype& p = prototypes[static_cast<std::size_t>(pl.proto)];
    pl.fourier = !(obj.layer.rows() == p.height() && obj.layer.cols() == p.width());
    pl.top = obj.layer.top;
    pl.left = obj.layer.left;
    pl.edge = obj.layer.edge;
    pl.dx = obj.offset.x;
    pl.dy = obj.offset.y;
    pl.color = obj.color;
    placements.push_back(pl);
  }

  const std::size_t n = placements.size();
  std::vector<Plane> masks_small;
  for (const auto& p : prototypes) masks_small.push_back(sigmoid(p.mask_logits));

  std::vector<Plane> shape(n), mask(n), trans(n);
  std::vector<std::array<Plane, 3>> behind(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pi = static_cast<std::size_t>(placements[i].proto);
    shape[i] = forward_shift(prototypes[pi].appearance, placements[i], h, w);
    mask[i] = forward_shift(masks_small[pi], placements[i], h, w);
  }
  Plane t = Plane::Ones(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    trans[i] = t;
    t *= (1.0 - mask[i]);
  }
  std::array<Plane, 3> canvas;
  for (int c = 0; c < 3; ++c)
    canvas[static_cast<std::size_t>(c)] = Plane::Constant(h, w, cfg.background[static_cast<std::size_t>(c)]);
  for (std::size_t i = n; i-- > 0;) {
    behind[i] = canvas;
    for (std::size_t c = 0; c < 3; ++c)
      canvas[c] = mask[i] * shape[i] * placements[i].color[c] + (1.0 - mask[i]) * canvas[c];
  }

  std::array<Plane, 3> g_canvas;
  for (std::size_t c = 0; c < 3; ++c) {
    const Plane d = frame.channel(static_cast<int>(c)) - canvas[c];
    out.reconstruction += d.square().sum();
    g_canvas[c] = -2.0 * d;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto pi = static_cast<std::size_t>(placements[i].proto);
    const Prototype& p = prototypes[pi];
    Plane g_shape = Plane::Zero(h, w);
    Plane g_mask = Plane::Zero(h, w);
    for (std::size_t c = 0; c < 3; ++c) {
      const double col = placements[i].color[c];
      g_shape += g_canvas[c] * trans[i] * mask[i] * col;
      g_mask += g_canvas[c] * trans[i] * (shape[i] * col - behind[i][c]);
    }
    out.grad_appearance[pi] += adjoint_shift(g_shape, placements[i], p.height(), p.width(), corrupt_adjoint_sign);
    const Plane m = masks_small[pi];
    out.grad_mask_logits[pi] +=
        adjoint_shift(g_mask, placements[i], p.height(), p.width(), corrupt_adjoint_sign) * m * (1.0 - m);
  }

  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    const Prototype& p = prototypes[i];
    out.sparsity += cfg.lambda_sparsity * p.appearance.abs().sum();
    out.grad_appearance[i] += cfg.lambda_sparsity * p.appearance.unaryExpr([](double v) { return sign(v); });
    const Plane& m = masks_small[i];
    out.smoothness += cfg.lambda_mask_smooth * total_variation(m);
    Plane gm = Plane::Zero(p.height(), p.width());
    tv_gradient(m, cfg.lambda_mask_smooth, gm);
    out.grad_mask_logits[i] += gm * m * (1.0 - m);
  }
  out.loss = out.reconstruction + out.sparsity + out.smoothness;
  return out;
}

PrototypeSet init_prototypes(int count, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(0.1, 0.3);
  PrototypeSet set;
  for (int i = 0; i < count; ++i) {
    Prototype p;
    p.id = i;
    p.appearance = Plane(size, size);
    for (Eigen::Index k = 0; k < p.appearance.size(); ++k) p.appearance(k) = noise(rng);
    p.mask_logits = Plane::Zero(size, size);
    set.push_back(std::move(p));
  }
  return set;
}

double aligned_iou(const Plane& a, const Plane& b) {
  const Plane ba = binarize(a);
  const Plane bb = binarize(b);
  const double na = ba.sum();
  const double nb = bb.sum();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  double best = 0.0;
  const int ha = static_cast<int>(ba.rows()), wa = static_cast<int>(ba.cols());
  const int hb = static_cast<int>(bb.rows()), wb = static_cast<int>(bb.cols());
  for (int dy = -(hb - 1); dy < ha; ++dy) {
    for (int dx = -(wb - 1); dx < wa; ++dx) {
      // b(r, c) lands on a(r + dy, c + dx).
      const int r0 = std::max(0, dy), r1 = std::min(ha, hb + dy);
      const int c0 = std::max(0, dx), c1 = std::min(wa, wb + dx);
      if (r0 >= r1 || c0 >= c1) continue;
      const double inter =
          (ba.block(r0, c0, r1 - r0, c1 - c0) * bb.block(r0 - dy, c0 - dx, r1 - r0, c1 - c0)).sum();
      best = std::max(best, inter / (na + nb - inter));
    }
  }
  return best;
}

DecompTrainResult train_decomposition(const FrameBank& frames, const DecompLossConfig& cfg,
                                      const DecompTrainState* resume, const Progress& progress) {
  cfg.validate();
  if (frames.size() == 0) throw std::invalid_argument("train_decomposition: no frames");
  DecompTrainResult result;
  DecompTrainState& st = result.state;
  if (resume != nullptr) {
    st = *resume;
  } else {
    st.prototypes = init_prototypes(cfg.prototypes, cfg.prototype_size, cfg.seed);
  }
  PrototypeSet& protos = st.prototypes;
  Eigen::VectorXd params = flatten(protos);
  Adam adam(cfg.learning_rate);
  if (resume != nullptr && st.adam_m.size() == params.size()) adam.restore(st.adam_steps, st.adam_m, st.adam_v);

  // The batch stream depends only on the seed and the step number, so a
  // resumed run sees the same frames as an uninterrupted one.
  const auto batch_rng = [&](int step) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(step), 0x5eedu};
    return std::mt19937_64(seq);
  };

  CandidateOptions copts;
  copts.peaks_per_pair = cfg.peaks_per_pair;
  copts.background = cfg.background;
  GreedyOptions gopts;
  gopts.max_objs = cfg.max_objs;
  gopts.background = cfg.background;

  std::vector<int> usage(protos.size(), 0);
  const RgbImage first = frames.get(0);
  const int h = first.height();
  const int w = first.width();

  for (int step = st.step; step < cfg.steps; ++step) {
    auto rng = batch_rng(step);
    std::uniform_int_distribution<std::size_t> pick(0, frames.size() - 1);
    const PrototypeSpectra spectra = PrototypeSpectra::compute(protos, h, w);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
    double loss = 0.0, recon = 0.0, sparsity = 0.0, smooth = 0.0, objects = 0.0;
    Component worst;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const RgbImage x = frames.get(pick(rng));
      const ColorQuantizedFrame q = quantize_colors(x, cfg.colors, 0);
      const auto candidates = generate_candidates(q, protos, copts);
      const Selection sel = greedy_select(x, candidates, gopts);
      const DecompLoss l = decomp_loss(x, sel.objects, protos, cfg);
      grad += flatten_grads(l);
      loss += l.loss;
      recon += l.reconstruction;
      sparsity += l.sparsity;
      smooth += l.smoothness;
      objects += static_cast<double>(sel.objects.size());
      for (const auto& o : sel.objects)
        for (std::size_t i = 0; i < protos.size(); ++i)
          if (protos[i].id == o.prototype_id) ++usage[i];
      if (cfg.reseed) {
        const RgbImage rec = compose(sel.objects, cfg.background, h, w);
        Component c = worst_component(x, rec, q, cfg.background, cfg.prototype_size);
        if (c.error > worst.error) worst = std::move(c);
      }
    }
    const double inv = 1.0 / cfg.batch_size;
    grad *= inv;
    loss *= inv;
    if (!std::isfinite(loss) || !grad.allFinite()) {
      result.diverged = true;
      break;
    }
    adam.step(params, grad);
    unflatten(params, protos);
    for (auto& p : protos) p.appearance = p.appearance.max(0.0).min(1.0);
    params = flatten(protos);
    st.step = step + 1;
    result.curve.push_back({st.step, loss, {recon * inv, sparsity * inv, smooth * inv, objects * inv}});
    if (progress) progress(st.step, loss);

    if (cfg.reseed && st.step % cfg.reseed_interval == 0) {
      int total = 0;
      for (int u : usage) total += u;
      int victim = -1;
      for (std::size_t i = 0; i < protos.size(); ++i) {
        bool replace = usage[i] < cfg.reseed_min_usage * total;
        for (std::size_t j = 0; j < protos.size() && !replace; ++j) {
          if (j == i || usage[j] < usage[i] || (usage[j] == usage[i] && j > i)) continue;
          replace = aligned_iou(protos[i].appearance, protos[j].appearance) >= cfg.duplicate_iou;
        }
        if (replace && (victim < 0 || usage[i] < usage[static_cast<std::size_t>(victim)]))
          victim = static_cast<int>(i);
      }
      if (victim >= 0 && worst.channel >= 0 && worst.error > 1.0) {
        Prototype& p = protos[static_cast<std::size_t>(victim)];
        const int s = cfg.prototype_size;
        p.appearance.setZero();
        p.mask_logits.setConstant(-3.0);
        const int oy = (s - static_cast<int>(worst.mask.rows())) / 2;
        const int ox = (s - static_cast<int>(worst.mask.cols())) / 2;
        p.appearance.block(oy, ox, worst.mask.rows(), worst.mask.cols()) = worst.mask;
        p.mask_logits.block(oy, ox, worst.mask.rows(), worst.mask.cols()) = worst.mask * 6.0 - 3.0;
        Eigen::Index offset = 0;
        for (int i = 0; i < victim; ++i) offset += 2 * protos[static_cast<std::size_t>(i)].appearance.size();
        adam.reset(offset, 2 * p.appearance.size());
        params = flatten(protos);
        ++result.reseeds;
      }
      std::fill(usage.begin(), usage.end(), 0);
    }
  }
  st.adam_steps = adam.steps();
  st.adam_m = adam.first_moment();
  st.adam_v = adam.second_moment();
  return result;
}

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& curve,
                    const std::vector<std::string>& component_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,loss";
  for (const auto& n : component_names) out << ',' << n;
  out << '\n' << std::setprecision(10);
  for (const auto& r : curve) {
    out << r.step << ',' << r.loss;
    for (double c : r.components) out << ',' << c;
    out << '\n';
  }
}

}  // namespace vpcd::learning
