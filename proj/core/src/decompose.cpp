#include "vpcd/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

namespace vpcd {
namespace {

double squared_color_distance(const Rgb& a, const Rgb& b) {
  double s = 0.0;
  for (std::size_t c = 0; c < 3; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s;
}

int nearest_centroid(const Rgb& color, const std::vector<Rgb>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(centroids.size()); ++i) {
    const double d = squared_color_distance(color, centroids[static_cast<std::size_t>(i)]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

struct WeightedColor {
  Rgb color;
  double weight;
};

std::vector<Rgb> kmeans(const std::vector<WeightedColor>& points, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Rgb> centroids;
  centroids.reserve(static_cast<std::size_t>(k));

  // k-means++ seeding, weighted by pixel counts.
  {
    double total = 0.0;
    for (const auto& p : points) total += p.weight;
    std::uniform_real_distribution<double> u(0.0, total);
    double t = u(rng);
    std::size_t first = 0;
    for (; first + 1 < points.size(); ++first) {
      t -= points[first].weight;
      if (t <= 0.0) break;
    }
    centroids.push_back(points[first].color);
  }
  std::vector<double> d2(points.size());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, squared_color_distance(points[i].color, c));
      d2[i] = best * points[i].weight;
      total += d2[i];
    }
    if (total <= 0.0) break;
    std::uniform_real_distribution<double> u(0.0, total);
    double t = u(rng);
    std::size_t pick = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      t -= d2[i];
      if (t <= 0.0) break;
    }
    centroids.push_back(points[pick].color);
  }

  std::vector<int> assign(points.size(), -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int a = nearest_centroid(points[i].color, centroids);
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Rgb> sum(centroids.size(), Rgb{0.0, 0.0, 0.0});
    std::vector<double> weight(centroids.size(), 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto a = static_cast<std::size_t>(assign[i]);
      for (std::size_t c = 0; c < 3; ++c) sum[a][c] += points[i].weight * points[i].color[c];
      weight[a] += points[i].weight;
    }
    for (std::size_t j = 0; j < centroids.size(); ++j) {
      if (weight[j] <= 0.0) continue;
      for (std::size_t c = 0; c < 3; ++c) centroids[j][c] = sum[j][c] / weight[j];
    }
  }
  return centroids;
}

Vec2 weighted_center(const Plane& weights) {
  const double total = weights.sum();
  if (!(total > 0.0)) {
    return {0.5 * (static_cast<double>(weights.cols()) - 1.0),
            0.5 * (static_cast<double>(weights.rows()) - 1.0)};
  }
  double sx = 0.0;
  double sy = 0.0;
  for (int r = 0; r < weights.rows(); ++r) {
    for (int c = 0; c < weights.cols(); ++c) {
      sx += weights(r, c) * c;
      sy += weights(r, c) * r;
    }
  }
  return {sx / total, sy / total};
}

// Agreement of a clipped placement with the channel map: matched minus
// unmatched appearance mass over the visible part.
double clip_agreement(const Prototype& proto, const Plane& channel, int dx, int dy) {
  const int h = static_cast<int>(channel.rows());
  const int w = static_cast<int>(channel.cols());
  double s = 0.0;
  for (int r = 0; r < proto.height(); ++r) {
    const int fr = dy + r;
    if (fr < 0 || fr >= h) continue;
    for (int c = 0; c < proto.width(); ++c) {
      const int fc = dx + c;
      if (fc < 0 || fc >= w) continue;
      s += proto.appearance(r, c) * (2.0 * channel(fr, fc) - 1.0);
    }
  }
  return s;
}

}  // namespace

RgbImage ColorQuantizedFrame::reconstruct() const {
  RgbImage out(height(), width());
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    for (int c = 0; c < 3; ++c) out.channel(c) += channels[j] * centroids[j][static_cast<std::size_t>(c)];
  }
  return out;
}

int ColorQuantizedFrame::nearest_channel(const Rgb& color) const {
  return nearest_centroid(color, centroids);
}

ColorQuantizedFrame quantize_colors(const RgbImage& image, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("quantize_colors: k must be >= 2");
  if (image.empty()) throw std::invalid_argument("quantize_colors: empty image");
  if (!image.all_finite()) throw std::invalid_argument("quantize_colors: non-finite pixels");

  std::map<Rgb, double> histogram;
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c) histogram[image.pixel(r, c)] += 1.0;

  ColorQuantizedFrame out;
  out.original = image;
  std::vector<Rgb> centroids;
  if (static_cast<int>(histogram.size()) <= k) {
    for (const auto& [color, count] : histogram) centroids.push_back(color);
    out.degenerate_palette = static_cast<int>(histogram.size()) < k;
    while (static_cast<int>(centroids.size()) < k) centroids.push_back(centroids.back());
  } else {
    std::vector<WeightedColor> points;
    points.reserve(histogram.size());
    for (const auto& [color, count] : histogram) points.push_back({color, count});
    centroids = kmeans(points, k, seed);
    out.degenerate_palette = static_cast<int>(centroids.size()) < k;
    while (static_cast<int>(centroids.size()) < k) centroids.push_back(centroids.back());
  }
  std::stable_sort(centroids.begin(), centroids.end());
  out.centroids = centroids;

  out.channels.assign(static_cast<std::size_t>(k), Plane::Zero(image.height(), image.width()));
  std::map<Rgb, int> lookup;
  for (const auto& [color, count] : histogram) lookup[color] = nearest_centroid(color, centroids);
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c)
      out.channels[static_cast<std::size_t>(lookup[image.pixel(r, c)])](r, c) = 1.0;
  return out;
}

Vec2 Prototype::mask_center() const { return weighted_center(mask()); }

Plane Prototype::padded_appearance(int height, int width) const {
  if (this->height() > height || this->width() > width)
    throw std::invalid_argument("prototype larger than frame");
  Plane p = Plane::Zero(height, width);
  p.topLeftCorner(this->height(), this->width()) = appearance;
  return p;
}

const Prototype* find_prototype(const PrototypeSet& set, int id) {
  for (const auto& p : set)
    if (p.id == id) return &p;
  return nullptr;
}

RgbImage ObjectInstance::render_template() const {
  RgbImage out(frame_height, frame_width);
  layer.for_each_pixel(frame_height, frame_width, [&](int pr, int pc, int fr, int fc) {
    for (int c = 0; c < 3; ++c) out.at(c, fr, fc) = layer.color[static_cast<std::size_t>(c)](pr, pc);
  });
  return out;
}

Plane ObjectInstance::render_mask() const {
  Plane out = Plane::Zero(frame_height, frame_width);
  layer.for_each_pixel(frame_height, frame_width,
                       [&](int pr, int pc, int fr, int fc) { out(fr, fc) = layer.mask(pr, pc); });
  return out;
}

ObjectInstance place_prototype(const Prototype& proto, int channel, const Rgb& color, int dx,
                               int dy, int frame_height, int frame_width, EdgeMode edge,
                               double score) {
  ObjectInstance inst;
  inst.prototype_id = proto.id;
  inst.peak = {channel, ((dx % frame_width) + frame_width) % frame_width,
               ((dy % frame_height) + frame_height) % frame_height, score};
  inst.color = color;
  inst.layer.top = dy;
  inst.layer.left = dx;
  inst.layer.edge = edge;
  inst.layer.mask = proto.mask();
  for (std::size_t c = 0; c < 3; ++c) inst.layer.color[c] = proto.appearance * color[c];
  inst.offset = {static_cast<double>(dx), static_cast<double>(dy)};
  inst.center_of_mass = weighted_center(inst.layer.mask) + inst.offset;
  inst.frame_height = frame_height;
  inst.frame_width = frame_width;
  return inst;
}

ObjectInstance place_prototype_fourier(const Prototype& proto, int channel, const Rgb& color,
                                       double dx, double dy, int frame_height, int frame_width) {
  ObjectInstance inst;
  inst.prototype_id = proto.id;
  const int rdx = static_cast<int>(std::lround(dx));
  const int rdy = static_cast<int>(std::lround(dy));
  inst.peak = {channel, ((rdx % frame_width) + frame_width) % frame_width,
               ((rdy % frame_height) + frame_height) % frame_height, 0.0};
  inst.color = color;
  inst.layer.top = 0;
  inst.layer.left = 0;
  inst.layer.edge = EdgeMode::Periodic;
  const Plane shape = spectral::fourier_shift(proto.padded_appearance(frame_height, frame_width), dx, dy);
  Plane padded_mask = Plane::Zero(frame_height, frame_width);
  padded_mask.topLeftCorner(proto.height(), proto.width()) = proto.mask();
  inst.layer.mask = spectral::fourier_shift(padded_mask, dx, dy);
  for (std::size_t c = 0; c < 3; ++c) inst.layer.color[c] = shape * color[c];
  inst.offset = {dx, dy};
  inst.center_of_mass = proto.mask_center() + inst.offset;
  inst.frame_height = frame_height;
  inst.frame_width = frame_width;
  return inst;
}

PrototypeSpectra PrototypeSpectra::compute(const PrototypeSet& set, int height, int width) {
  PrototypeSpectra s;
  s.height = height;
  s.width = width;
  for (const auto& p : set) {
    s.ids.push_back(p.id);
    s.spectra.push_back(spectral::fft2(p.padded_appearance(height, width)));
  }
  return s;
}

const ComplexPlane* PrototypeSpectra::find(int id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return &spectra[i];
  return nullptr;
}

ChannelStack ChannelStack::from_frame(const ColorQuantizedFrame& frame, const CandidateOptions& opts) {
  ChannelStack s;
  const int bg = frame.nearest_channel(opts.background);
  for (int j = 0; j < frame.k(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    s.maps.push_back(frame.channels[ju]);
    s.colors.push_back(frame.centroids[ju]);
    const bool used = (frame.channels[ju] > 0.0).any();
    const bool is_bg = opts.skip_background_channel && j == bg;
    s.active.push_back(used && !is_bg);
    s.spectra.push_back(s.active.back() ? spectral::fft2(frame.channels[ju]) : ComplexPlane());
  }
  return s;
}

std::vector<ObjectInstance> generate_candidates(const ChannelStack& channels,
                                                const PrototypeSet& prototypes,
                                                const PrototypeSpectra& spectra,
                                                const CandidateOptions& opts,
                                                const std::vector<int>* only_ids) {
  std::vector<ObjectInstance> out;
  if (opts.peaks_per_pair < 1) throw std::invalid_argument("peaks_per_pair must be >= 1");
  const int h = channels.height();
  const int w = channels.width();
  for (const auto& proto : prototypes) {
    if (only_ids != nullptr &&
        std::find(only_ids->begin(), only_ids->end(), proto.id) == only_ids->end())
      continue;
    const ComplexPlane* fp = spectra.find(proto.id);
    if (fp == nullptr) throw std::invalid_argument("generate_candidates: missing prototype spectrum");
    const int radius = opts.nms_radius >= 0
                           ? opts.nms_radius
                           : (std::max(proto.height(), proto.width()) + 1) / 2;
    for (std::size_t j = 0; j < channels.maps.size(); ++j) {
      if (!channels.active[j]) continue;
      auto loc = spectral::phase_correlate_spectra(channels.spectra[j], *fp, opts.eps);
      const auto peaks = spectral::extract_peaks(loc.values, opts.peaks_per_pair, radius);
      for (const auto& pk : peaks) {
        int dx = pk.dx;
        int dy = pk.dy;
        if (opts.edge == EdgeMode::Clip) {
          // A peak near the far edge is ambiguous between an object leaving
          // on that side and one entering from the opposite side.
          const bool straddle_x = dx + proto.width() > w;
          const bool straddle_y = dy + proto.height() > h;
          if (straddle_x || straddle_y) {
            double best = -std::numeric_limits<double>::infinity();
            int bx = dx;
            int by = dy;
            for (int ox : {dx, dx - w}) {
              if (ox != dx && !straddle_x) continue;
              for (int oy : {dy, dy - h}) {
                if (oy != dy && !straddle_y) continue;
                const double a = clip_agreement(proto, channels.maps[j], ox, oy);
                if (a > best) {
                  best = a;
                  bx = ox;
                  by = oy;
                }
              }
            }
            dx = bx;
            dy = by;
          }
        }
        out.push_back(place_prototype(proto, static_cast<int>(j), channels.colors[j], dx, dy, h, w,
                                      opts.edge, pk.score));
      }
    }
  }
  return out;
}

std::vector<ObjectInstance> generate_candidates(const ColorQuantizedFrame& frame,
                                                const PrototypeSet& prototypes,
                                                const CandidateOptions& opts) {
  if (prototypes.empty()) return {};
  const auto stack = ChannelStack::from_frame(frame, opts);
  const auto spectra = PrototypeSpectra::compute(prototypes, frame.height(), frame.width());
  return generate_candidates(stack, prototypes, spectra, opts);
}

RgbImage compose(std::span<const ObjectInstance> instances, const Rgb& background, int height,
                 int width) {
  RgbImage canvas(height, width, background);
  for (auto it = instances.rbegin(); it != instances.rend(); ++it) {
    const Layer& layer = it->layer;
    layer.for_each_pixel(height, width, [&](int pr, int pc, int fr, int fc) {
      const double m = layer.mask(pr, pc);
      for (int c = 0; c < 3; ++c) {
        double& v = canvas.at(c, fr, fc);
        v = layer.color[static_cast<std::size_t>(c)](pr, pc) * m + v * (1.0 - m);
      }
    });
  }
  return canvas;
}

double reconstruction_error(const RgbImage& frame, std::span<const ObjectInstance> instances,
                            const Rgb& background) {
  const RgbImage recon = compose(instances, background, frame.height(), frame.width());
  return std::sqrt(frame.squared_distance(recon));
}

Selection greedy_select(const RgbImage& frame, std::span<const ObjectInstance> candidates,
                        const GreedyOptions& opts) {
  if (opts.max_objs < 0) throw std::invalid_argument("greedy_select: max_objs must be >= 0");
  const int h = frame.height();
  const int w = frame.width();
  Selection sel;

  // Appending a candidate behind the current selection changes the canvas by
  // transmittance * mask * (template - background) on its support only.
  RgbImage recon(h, w, opts.background);
  Plane trans = Plane::Ones(h, w);
  double sse = frame.squared_distance(recon);
  std::vector<bool> used(candidates.size(), false);
  const Rgb& bg = opts.background;

  while (static_cast<int>(sel.objects.size()) < opts.max_objs) {
    int best = -1;
    double best_delta = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      if (used[j]) continue;
      const Layer& layer = candidates[j].layer;
      double delta = 0.0;
      layer.for_each_pixel(h, w, [&](int pr, int pc, int fr, int fc) {
        const double t = trans(fr, fc) * layer.mask(pr, pc);
        if (t == 0.0) return;
        for (int c = 0; c < 3; ++c) {
          const auto cu = static_cast<std::size_t>(c);
          const double x = frame.at(c, fr, fc);
          const double old_v = recon.at(c, fr, fc);
          const double new_v = old_v + t * (layer.color[cu](pr, pc) - bg[cu]);
          delta += (x - new_v) * (x - new_v) - (x - old_v) * (x - old_v);
        }
      });
      bool better = delta < best_delta;
      if (!better && delta == best_delta && best >= 0) {
        better = candidates[j].peak.score > candidates[static_cast<std::size_t>(best)].peak.score;
      }
      if (better) {
        best = static_cast<int>(j);
        best_delta = delta;
      }
    }
    if (best < 0) break;
    const ObjectInstance& chosen = candidates[static_cast<std::size_t>(best)];
    if (opts.early_stop) {
      const double tol = 1e-12 * std::max(1.0, sse);
      const bool improves = best_delta < -tol;
      const bool tolerated = chosen.external && best_delta <= opts.slack;
      if (!improves && !tolerated) break;
    }
    used[static_cast<std::size_t>(best)] = true;
    const Layer& layer = chosen.layer;
    layer.for_each_pixel(h, w, [&](int pr, int pc, int fr, int fc) {
      const double m = layer.mask(pr, pc);
      const double t = trans(fr, fc) * m;
      for (int c = 0; c < 3; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        recon.at(c, fr, fc) += t * (layer.color[cu](pr, pc) - bg[cu]);
      }
      trans(fr, fc) *= (1.0 - m);
    });
    sse = std::max(0.0, sse + best_delta);
    ObjectInstance obj = chosen;
    obj.depth_rank = static_cast<int>(sel.objects.size()) + 1;
    sel.objects.push_back(std::move(obj));
    sel.candidate_indices.push_back(best);
    sel.error_trace.push_back(std::sqrt(sse));
  }
  sel.error = reconstruction_error(frame, sel.objects, opts.background);
  return sel;
}

}  // namespace vpcd
