#include "vpcd/motion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vpcd::motion {
namespace {

int wrap_index(int v, int n) { return ((v % n) + n) % n; }

}  // namespace

VelocityEstimate estimate_velocity(const ObjectInstance& prev, const ObjectInstance& curr,
                                   double min_confidence) {
  VelocityEstimate out;
  const Vec2 dz = curr.center_of_mass - prev.center_of_mass;
  const Plane a = prev.render_mask();
  const Plane b = curr.render_mask();
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("estimate_velocity: frame size mismatch");
  if (!(a.sum() > 1e-9) || !(b.sum() > 1e-9)) {
    out.velocity = {dz.x, dz.y};
    out.fallback = true;
    return out;
  }
  const auto loc = spectral::phase_correlate(b, a);
  const auto peaks = spectral::extract_peaks(loc.values, 1, 0);
  if (peaks.empty() || peaks.front().score < min_confidence) {
    out.velocity = {dz.x, dz.y};
    out.fallback = true;
    out.confidence = peaks.empty() ? 0.0 : peaks.front().score;
    return out;
  }
  const auto& pk = peaks.front();
  out.velocity = {static_cast<double>(spectral::wrap_signed(pk.dx, static_cast<int>(a.cols()))),
                  static_cast<double>(spectral::wrap_signed(pk.dy, static_cast<int>(a.rows())))};
  out.confidence = pk.score;
  return out;
}

void MotionHistory::push(const PhaseDiff& v, const Vec2& z) {
  entries_.emplace_back(v, z);
  while (static_cast<int>(entries_.size()) > length_) entries_.pop_front();
}

const std::pair<PhaseDiff, Vec2>& MotionHistory::padded(int i) const {
  if (entries_.empty()) throw std::logic_error("MotionHistory: no observations");
  const int pad = length_ - static_cast<int>(entries_.size());
  return entries_[static_cast<std::size_t>(std::max(0, i - pad))];
}

Eigen::VectorXd MotionHistory::features(const FeatureScale& scale) const {
  if (entries_.empty()) throw std::logic_error("MotionHistory: no observations");
  Eigen::VectorXd x(4 * length_);
  for (int i = 0; i < length_; ++i) {
    const auto& [v, z] = padded(i);
    x(4 * i + 0) = v.vx / scale.velocity;
    x(4 * i + 1) = v.vy / scale.velocity;
    x(4 * i + 2) = 2.0 * z.x / scale.width - 1.0;
    x(4 * i + 3) = 2.0 * z.y / scale.height - 1.0;
  }
  if (!x.allFinite()) throw std::invalid_argument("MotionHistory: non-finite features");
  return x;
}

PhaseDiff refine_velocity(const MotionHistory& history, const VelocityNet& net) {
  if (history.length() != net.history())
    throw std::invalid_argument("refine_velocity: history length does not match the network");
  const Eigen::Vector2d r = net.forward(history.features(net.scale));
  const PhaseDiff& last = history.last_velocity();
  return {last.vx + r(0), last.vy + r(1)};
}

ObjectInstance predict_instance(const ObjectInstance& obj, const PhaseDiff& v) {
  if (!std::isfinite(v.vx) || !std::isfinite(v.vy))
    throw std::invalid_argument("predict_instance: non-finite velocity");
  const int h = obj.frame_height;
  const int w = obj.frame_width;
  const auto grid = spectral::make_frequency_grid(h, w);
  const Plane phase = spectral::velocity_to_phase(v, grid);
  ObjectInstance out = obj;
  const RgbImage tmpl = obj.render_template();
  for (std::size_t c = 0; c < 3; ++c)
    out.layer.color[c] = spectral::apply_phase(tmpl.channel(static_cast<int>(c)), phase);
  out.layer.mask = spectral::apply_phase(obj.render_mask(), phase);
  out.layer.top = 0;
  out.layer.left = 0;
  out.layer.edge = EdgeMode::Periodic;
  out.offset = obj.offset + Vec2{v.vx, v.vy};
  out.center_of_mass = obj.center_of_mass + Vec2{v.vx, v.vy};
  out.peak.dx = wrap_index(static_cast<int>(std::lround(out.offset.x)), w);
  out.peak.dy = wrap_index(static_cast<int>(std::lround(out.offset.y)), h);
  return out;
}

ObjectInstance shift_instance(const ObjectInstance& obj, int dx, int dy) {
  ObjectInstance out = obj;
  out.layer.top += dy;
  out.layer.left += dx;
  const Vec2 d{static_cast<double>(dx), static_cast<double>(dy)};
  out.offset = obj.offset + d;
  out.center_of_mass = obj.center_of_mass + d;
  if (obj.frame_width > 0 && obj.frame_height > 0) {
    out.peak.dx = wrap_index(obj.peak.dx + dx, obj.frame_width);
    out.peak.dy = wrap_index(obj.peak.dy + dy, obj.frame_height);
  }
  return out;
}

void RolloutConfig::validate() const {
  if (seeds < 2) throw std::invalid_argument("rollout: at least 2 seed frames are required");
  if (horizon < 0) throw std::invalid_argument("rollout: horizon must be >= 0");
  parse.validate();
}

std::vector<SeedTrack> seed_tracks(const VideoParse& parse, int history, double min_confidence) {
  std::vector<SeedTrack> out;
  if (parse.frames.empty()) return out;
  const FrameParse& last = parse.frames.back();
  const int last_t = static_cast<int>(parse.frames.size()) - 1;
  for (std::size_t i = 0; i < last.objects.size(); ++i) {
    SeedTrack st;
    st.track_id = last.ids[i];
    st.depth = static_cast<int>(i);
    st.history = MotionHistory(history);
    for (int t = 0; t <= last_t; ++t) {
      const FrameParse& fp = parse.frames[static_cast<std::size_t>(t)];
      for (std::size_t j = 0; j < fp.objects.size(); ++j) {
        if (fp.ids[j] != st.track_id) continue;
        st.instances.push_back(fp.objects[j]);
        st.frames.push_back(t);
        break;
      }
    }
    if (st.instances.size() == 1) {
      st.history.push({}, st.instances.front().center_of_mass);
    } else {
      for (std::size_t k = 1; k < st.instances.size(); ++k) {
        const auto est = estimate_velocity(st.instances[k - 1], st.instances[k], min_confidence);
        const double gap = st.frames[k] - st.frames[k - 1];
        st.history.push({est.velocity.vx / gap, est.velocity.vy / gap}, st.instances[k].center_of_mass);
      }
    }
    out.push_back(std::move(st));
  }
  return out;
}

Rollout rollout_from_tracks(const std::vector<SeedTrack>& tracks, const VelocityNet* net,
                            const RolloutConfig& cfg, int height, int width) {
  cfg.validate();
  const bool refine = cfg.use_net && net != nullptr;
  Rollout out;

  struct State {
    MotionHistory history;
    PhaseDiff raw;
    Vec2 position;
    Vec2 displacement;
    const ObjectInstance* base;
    PredictedObject record;
  };
  std::vector<State> states;
  std::vector<ObjectInstance> seed_instances;
  std::vector<const SeedTrack*> ordered;
  for (const auto& t : tracks) ordered.push_back(&t);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const SeedTrack* a, const SeedTrack* b) { return a->depth < b->depth; });
  for (const SeedTrack* t : ordered) {
    if (t->instances.empty()) continue;
    State s{t->history, t->history.last_velocity(), t->history.last_position(), {},
            &t->instances.back(), {}};
    s.record.track_id = t->track_id;
    s.record.prototype_id = s.base->prototype_id;
    s.record.color = s.base->color;
    s.record.position = s.position;
    s.record.velocity = s.raw;
    s.record.instance = *s.base;
    out.seed_objects.push_back(s.record);
    seed_instances.push_back(*s.base);
    states.push_back(std::move(s));
  }
  out.seed_reconstruction = compose(seed_instances, cfg.parse.background, height, width);

  for (int k = 0; k < cfg.horizon; ++k) {
    std::vector<ObjectInstance> instances;
    std::vector<PredictedObject> step;
    for (auto& s : states) {
      PhaseDiff v = s.history.last_velocity();
      if (refine) v = refine_velocity(s.history, *net);
      s.position += Vec2{v.vx, v.vy};
      s.displacement += Vec2{v.vx, v.vy};
      ObjectInstance inst =
          cfg.subpixel_render
              ? predict_instance(*s.base, {s.displacement.x, s.displacement.y})
              : shift_instance(*s.base, static_cast<int>(std::lround(s.displacement.x)),
                               static_cast<int>(std::lround(s.displacement.y)));
      inst.center_of_mass = s.position;
      s.history.push(cfg.closed_loop ? v : s.raw, s.position);
      PredictedObject rec = s.record;
      rec.position = s.position;
      rec.velocity = v;
      rec.instance = inst;
      instances.push_back(std::move(inst));
      step.push_back(std::move(rec));
    }
    out.frames.push_back(compose(instances, cfg.parse.background, height, width));
    out.objects.push_back(std::move(step));
  }
  return out;
}

Rollout rollout(std::span<const RgbImage> seed_frames, const PrototypeSet& prototypes,
                const VelocityNet* net, const RolloutConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(seed_frames.size()) < cfg.seeds)
    throw std::invalid_argument("rollout: fewer frames than seeds");
  const auto seeds = seed_frames.first(static_cast<std::size_t>(cfg.seeds));
  VideoParse parse = parse_video(seeds, prototypes, cfg.parse, cfg.tracker);
  bool parsed = false;
  for (const auto& f : parse.frames) parsed = parsed || f.residual <= cfg.max_seed_residual;
  if (!parsed) {
    std::string msg = "rollout: seeds could not be parsed (mean residuals:";
    for (const auto& f : parse.frames) msg += " " + std::to_string(f.residual);
    throw std::runtime_error(msg + ")");
  }
  const int history = net != nullptr ? net->history() : 3;
  const auto tracks = seed_tracks(parse, history, cfg.min_confidence);
  Rollout out = rollout_from_tracks(tracks, net, cfg, seeds.front().height(), seeds.front().width());
  out.parse = std::move(parse);
  return out;
}

}  // namespace vpcd::motion
