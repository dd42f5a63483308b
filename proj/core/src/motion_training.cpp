#include "vpcd/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace vpcd::learning {
namespace {

using Mat = Eigen::MatrixXd;

// Full-frame template planes, mask and their spectra for Fourier rendering.
struct RenderBase {
  std::array<ComplexPlane, 3> color;
  ComplexPlane mask;
};

RenderBase render_base(const ObjectInstance& obj) {
  RenderBase b;
  const RgbImage t = obj.render_template();
  for (int c = 0; c < 3; ++c) b.color[static_cast<std::size_t>(c)] = spectral::fft2(t.channel(c));
  b.mask = spectral::fft2(obj.render_mask());
  return b;
}

// Shifted plane and its derivatives with respect to dx and dy.
struct Shifted {
  Plane value, ddx, ddy;
};

Shifted shift_with_derivatives(const ComplexPlane& spectrum, double dx, double dy) {
  const int h = static_cast<int>(spectrum.rows());
  const int w = static_cast<int>(spectrum.cols());
  const ComplexPlane shifted = spectrum * spectral::shift_ramp(h, w, dx, dy);
  const auto grid = spectral::make_frequency_grid(h, w);
  const std::complex<double> k(0.0, -2.0 * std::numbers::pi);
  Shifted s;
  s.value = spectral::ifft2(shifted);
  s.ddx = spectral::ifft2(shifted * (k * grid.fx.cast<std::complex<double>>()));
  s.ddy = spectral::ifft2(shifted * (k * grid.fy.cast<std::complex<double>>()));
  return s;
}

}  // namespace

void MotionLossConfig::validate() const {
  if (seed_frames < 2) throw std::invalid_argument("motion: seed_frames must be >= 2");
  if (predict_frames < 1) throw std::invalid_argument("motion: predict_frames must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("motion: learning rate must be > 0");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0))
    throw std::invalid_argument("motion: final_lr_fraction must be in (0, 1]");
  if (steps < 0) throw std::invalid_argument("motion: steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("motion: batch size must be >= 1");
  if (history < 1) throw std::invalid_argument("motion: history must be >= 1");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("motion: hidden sizes must be >= 1");
}

MotionBatchLoss motion_loss(const VelocityNet& net, std::span<const ObjectWindow> objects,
                            std::span<const FrameWindow> frames, std::span<const int> selection,
                            int steps, MotionLossKind kind) {
  if (steps < 1) throw std::invalid_argument("motion_loss: steps must be >= 1");
  MotionBatchLoss out;
  out.grads = net.zero_gradients();

  std::vector<int> batch;
  if (kind == MotionLossKind::Position) {
    batch.assign(selection.begin(), selection.end());
  } else {
    for (int f : selection)
      for (int o : frames[static_cast<std::size_t>(f)].objects) batch.push_back(o);
  }
  const int n = static_cast<int>(batch.size());
  if (n == 0) return out;
  const int hlen = net.history();
  const FeatureScale& sc = net.scale;

  // Entries 0..H-1 are the (padded) seeds, H + k is predicted step k.
  std::vector<Mat> V(static_cast<std::size_t>(hlen + steps), Mat::Zero(2, n));
  std::vector<Mat> Z(static_cast<std::size_t>(hlen + steps), Mat::Zero(2, n));
  for (int b = 0; b < n; ++b) {
    const ObjectWindow& ow = objects[static_cast<std::size_t>(batch[static_cast<std::size_t>(b)])];
    if (ow.history.length() != hlen) throw std::invalid_argument("motion_loss: history length mismatch");
    for (int e = 0; e < hlen; ++e) {
      const auto& [v, z] = ow.history.padded(e);
      V[static_cast<std::size_t>(e)].col(b) << v.vx, v.vy;
      Z[static_cast<std::size_t>(e)].col(b) << z.x, z.y;
    }
  }

  std::vector<VelocityNet::Tape> tapes(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    Mat x(4 * hlen, n);
    for (int i = 0; i < hlen; ++i) {
      const auto e = static_cast<std::size_t>(k + i);
      x.row(4 * i + 0) = V[e].row(0) / sc.velocity;
      x.row(4 * i + 1) = V[e].row(1) / sc.velocity;
      x.row(4 * i + 2) = (2.0 / sc.width) * Z[e].row(0).array() - 1.0;
      x.row(4 * i + 3) = (2.0 / sc.height) * Z[e].row(1).array() - 1.0;
    }
    const Mat r = net.forward_batch(x, &tapes[static_cast<std::size_t>(k)]);
    const auto last = static_cast<std::size_t>(k + hlen - 1);
    V[last + 1] = V[last] + r;
    Z[last + 1] = Z[last] + V[last + 1];
  }

  out.positions.assign(static_cast<std::size_t>(n), std::vector<Vec2>(static_cast<std::size_t>(steps)));
  for (int b = 0; b < n; ++b)
    for (int k = 0; k < steps; ++k) {
      const auto& z = Z[static_cast<std::size_t>(hlen + k)];
      out.positions[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)] = {z(0, b), z(1, b)};
    }

  std::vector<Mat> gV(V.size(), Mat::Zero(2, n));
  std::vector<Mat> gZ(Z.size(), Mat::Zero(2, n));

  if (kind == MotionLossKind::Position) {
    const double inv = 1.0 / n;
    for (int b = 0; b < n; ++b) {
      const ObjectWindow& ow = objects[static_cast<std::size_t>(batch[static_cast<std::size_t>(b)])];
      for (int k = 0; k < steps && k < static_cast<int>(ow.targets.size()); ++k) {
        if (!ow.observed[static_cast<std::size_t>(k)]) continue;
        const auto e = static_cast<std::size_t>(hlen + k);
        const double dx = Z[e](0, b) - ow.targets[static_cast<std::size_t>(k)].x;
        const double dy = Z[e](1, b) - ow.targets[static_cast<std::size_t>(k)].y;
        out.loss += inv * (dx * dx + dy * dy);
        gZ[e](0, b) += inv * 2.0 * dx;
        gZ[e](1, b) += inv * 2.0 * dy;
      }
    }
  } else {
    const double inv_windows = 1.0 / static_cast<double>(selection.size());
    int col = 0;
    for (int f : selection) {
      const FrameWindow& fw = frames[static_cast<std::size_t>(f)];
      const int m = static_cast<int>(fw.objects.size());
      std::vector<RenderBase> bases;
      for (int o : fw.objects) bases.push_back(render_base(objects[static_cast<std::size_t>(o)].base));
      for (int k = 0; k < steps && k < static_cast<int>(fw.targets.size()); ++k) {
        const RgbImage& target = fw.targets[static_cast<std::size_t>(k)];
        const int h = target.height();
        const int w = target.width();
        const double scale = inv_windows / (3.0 * h * w);
        const auto e = static_cast<std::size_t>(hlen + k);
        std::vector<std::array<Shifted, 3>> tmpl(static_cast<std::size_t>(m));
        std::vector<Shifted> mask(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
          const int b = col + i;
          const double dx = Z[e](0, b) - Z[static_cast<std::size_t>(hlen - 1)](0, b);
          const double dy = Z[e](1, b) - Z[static_cast<std::size_t>(hlen - 1)](1, b);
          for (std::size_t c = 0; c < 3; ++c)
            tmpl[static_cast<std::size_t>(i)][c] = shift_with_derivatives(bases[static_cast<std::size_t>(i)].color[c], dx, dy);
          mask[static_cast<std::size_t>(i)] = shift_with_derivatives(bases[static_cast<std::size_t>(i)].mask, dx, dy);
        }
        // Back-to-front composition with the canvas behind each layer kept.
        std::vector<std::array<Plane, 3>> behind(static_cast<std::size_t>(m));
        std::array<Plane, 3> canvas;
        for (std::size_t c = 0; c < 3; ++c) canvas[c] = Plane::Constant(h, w, fw.background[c]);
        for (int i = m; i-- > 0;) {
          const auto iu = static_cast<std::size_t>(i);
          behind[iu] = canvas;
          for (std::size_t c = 0; c < 3; ++c)
            canvas[c] = mask[iu].value * tmpl[iu][c].value + (1.0 - mask[iu].value) * canvas[c];
        }
        std::array<Plane, 3> g;
        for (std::size_t c = 0; c < 3; ++c) {
          const Plane d = canvas[c] - target.channel(static_cast<int>(c));
          out.loss += scale * d.square().sum();
          g[c] = 2.0 * scale * d;
        }
        Plane trans = Plane::Ones(h, w);
        for (int i = 0; i < m; ++i) {
          const auto iu = static_cast<std::size_t>(i);
          double gx = 0.0, gy = 0.0;
          Plane gm = Plane::Zero(h, w);
          for (std::size_t c = 0; c < 3; ++c) {
            const Plane gt = g[c] * trans * mask[iu].value;
            gx += (gt * tmpl[iu][c].ddx).sum();
            gy += (gt * tmpl[iu][c].ddy).sum();
            gm += g[c] * trans * (tmpl[iu][c].value - behind[iu][c]);
          }
          gx += (gm * mask[iu].ddx).sum();
          gy += (gm * mask[iu].ddy).sum();
          // D = Z_k - Z_seed; the seed position is a constant.
          gZ[e](0, col + i) += gx;
          gZ[e](1, col + i) += gy;
          trans *= (1.0 - mask[iu].value);
        }
      }
      col += m;
    }
  }

  // Backpropagation through the closed-loop unroll.
  for (int k = steps; k-- > 0;) {
    const auto e = static_cast<std::size_t>(hlen + k);
    // Z_e = Z_{e-1} + V_e
    gZ[e - 1] += gZ[e];
    gV[e] += gZ[e];
    // V_e = V_{e-1} + net(x_k)
    gV[e - 1] += gV[e];
    const Mat gx = net.backward_batch(tapes[static_cast<std::size_t>(k)], gV[e], out.grads);
    for (int i = 0; i < hlen; ++i) {
      const auto src = static_cast<std::size_t>(k + i);
      gV[src].row(0) += gx.row(4 * i + 0) / sc.velocity;
      gV[src].row(1) += gx.row(4 * i + 1) / sc.velocity;
      gZ[src].row(0) += gx.row(4 * i + 2) * (2.0 / sc.width);
      gZ[src].row(1) += gx.row(4 * i + 3) * (2.0 / sc.height);
    }
  }
  return out;
}

void extract_windows(const VideoParse& parse, std::span<const RgbImage> frames,
                     const MotionLossConfig& cfg, const Rgb& background,
                     std::vector<ObjectWindow>& objects, std::vector<FrameWindow>& windows) {
  const int t_count = static_cast<int>(parse.frames.size());
  const auto find = [&](int t, int id) -> const ObjectInstance* {
    const FrameParse& fp = parse.frames[static_cast<std::size_t>(t)];
    for (std::size_t j = 0; j < fp.objects.size(); ++j)
      if (fp.ids[j] == id) return &fp.objects[j];
    return nullptr;
  };
  for (int s = 0; s + cfg.seed_frames + cfg.predict_frames <= t_count; ++s) {
    const int last = s + cfg.seed_frames - 1;
    FrameWindow fw;
    fw.background = background;
    const FrameParse& lp = parse.frames[static_cast<std::size_t>(last)];
    for (std::size_t j = 0; j < lp.objects.size(); ++j) {
      const int id = lp.ids[j];
      std::vector<const ObjectInstance*> seeds;
      for (int t = s; t <= last; ++t) seeds.push_back(find(t, id));
      if (std::find(seeds.begin(), seeds.end(), nullptr) != seeds.end()) continue;
      ObjectWindow ow;
      ow.history = MotionHistory(cfg.history);
      for (std::size_t k = 1; k < seeds.size(); ++k) {
        const auto est = motion::estimate_velocity(*seeds[k - 1], *seeds[k], cfg.min_confidence);
        ow.history.push(est.velocity, seeds[k]->center_of_mass);
      }
      for (int k = 1; k <= cfg.predict_frames; ++k) {
        const ObjectInstance* o = find(last + k, id);
        ow.targets.push_back(o != nullptr ? o->center_of_mass : Vec2{});
        ow.observed.push_back(o != nullptr);
      }
      ow.base = *seeds.back();
      ow.window = static_cast<int>(windows.size());
      fw.objects.push_back(static_cast<int>(objects.size()));
      objects.push_back(std::move(ow));
    }
    if (cfg.loss == MotionLossKind::Frame && !frames.empty()) {
      for (int k = 1; k <= cfg.predict_frames; ++k) fw.targets.push_back(frames[static_cast<std::size_t>(last + k)]);
    }
    windows.push_back(std::move(fw));
  }
}

MotionDataset collect_motion_data(int sequence_count,
                                  const std::function<std::vector<RgbImage>(int)>& sequence,
                                  const PrototypeSet& prototypes, const MotionLossConfig& cfg,
                                  const ParseConfig& parse, const TrackerConfig& tracker) {
  cfg.validate();
  parse.validate();
  MotionDataset data;
  for (int i = 0; i < sequence_count; ++i) {
    const std::vector<RgbImage> frames = sequence(i);
    if (frames.empty()) {
      ++data.skipped_sequences;
      continue;
    }
    VideoParse vp;
    try {
      vp = parse_video(frames, prototypes, parse, tracker);
    } catch (const std::exception&) {
      ++data.skipped_sequences;
      continue;
    }
    double mean_residual = 0.0;
    for (const auto& f : vp.frames) mean_residual += f.residual;
    mean_residual /= static_cast<double>(vp.frames.size());
    if (mean_residual > cfg.max_parse_residual) {
      ++data.skipped_sequences;
      continue;
    }
    data.height = frames.front().height();
    data.width = frames.front().width();
    ++data.sequences;
    extract_windows(vp, cfg.loss == MotionLossKind::Frame ? std::span<const RgbImage>(frames)
                                                          : std::span<const RgbImage>(),
                    cfg, parse.background, data.objects, data.windows);
  }
  return data;
}

MotionTrainResult fit_motion(const MotionDataset& data, const MotionLossConfig& cfg, const Progress& progress) {
  cfg.validate();
  MotionTrainResult result{VelocityNet(cfg.history, cfg.hidden, cfg.seed), {}, 0, data.sequences,
                           data.skipped_sequences};
  result.net.scale.width = data.width;
  result.net.scale.height = data.height;
  const auto& objects = data.objects;
  const auto& windows = data.windows;
  // Frame windows without objects carry no signal.
  std::vector<int> usable_windows;
  for (std::size_t i = 0; i < windows.size(); ++i)
    if (!windows[i].objects.empty()) usable_windows.push_back(static_cast<int>(i));
  result.windows = static_cast<int>(objects.size());
  if (objects.empty()) throw std::runtime_error("train_motion: no training windows");
  if (cfg.loss == MotionLossKind::Frame && windows[static_cast<std::size_t>(usable_windows.front())].targets.empty())
    throw std::invalid_argument("train_motion: frame loss needs windows collected with frame targets");

  Adam adam(cfg.learning_rate);
  Eigen::VectorXd params = result.net.parameters();
  const int pool = cfg.loss == MotionLossKind::Position ? static_cast<int>(objects.size())
                                                        : static_cast<int>(usable_windows.size());
  for (int step = 0; step < cfg.steps; ++step) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(step), 0x707u};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<int> pick(0, pool - 1);
    std::vector<int> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int i = pick(rng);
      batch.push_back(cfg.loss == MotionLossKind::Position ? i : usable_windows[static_cast<std::size_t>(i)]);
    }
    const MotionBatchLoss l = motion_loss(result.net, objects, windows, batch, cfg.predict_frames, cfg.loss);
    const Eigen::VectorXd g = l.grads.flat();
    if (!std::isfinite(l.loss) || !g.allFinite()) throw std::runtime_error("train_motion: loss diverged");
    const double frac = cfg.steps > 1 ? static_cast<double>(step) / (cfg.steps - 1) : 1.0;
    const double f = cfg.final_lr_fraction;
    adam.set_learning_rate(cfg.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac))));
    adam.step(params, g);
    result.net.set_parameters(params);
    result.curve.push_back({step + 1, l.loss, {}});
    if (progress) progress(step + 1, l.loss);
  }
  return result;
}

MotionTrainResult train_motion(int sequence_count,
                               const std::function<std::vector<RgbImage>(int)>& sequence,
                               const PrototypeSet& prototypes, const MotionLossConfig& cfg,
                               const ParseConfig& parse, const TrackerConfig& tracker,
                               const Progress& progress) {
  return fit_motion(collect_motion_data(sequence_count, sequence, prototypes, cfg, parse, tracker), cfg,
                    progress);
}

}  // namespace vpcd::learning
