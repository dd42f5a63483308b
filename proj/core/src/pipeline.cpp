#include "vpcd/pipeline.hpp"

#include "vpcd/motion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vpcd {
namespace {

CandidateOptions candidate_options(const ParseConfig& cfg) {
  CandidateOptions opts;
  opts.peaks_per_pair = cfg.peaks_per_pair;
  opts.nms_radius = cfg.nms_radius;
  opts.edge = cfg.edge;
  opts.background = cfg.background;
  return opts;
}

GreedyOptions greedy_options(const ParseConfig& cfg) {
  GreedyOptions g;
  g.max_objs = cfg.max_objs;
  g.early_stop = true;
  g.slack = cfg.external_slack;
  g.background = cfg.background;
  return g;
}

std::vector<int> all_ids(const PrototypeSet& prototypes) {
  std::vector<int> ids;
  for (const auto& p : prototypes) ids.push_back(p.id);
  return ids;
}

// An external template that duplicates a parsed object adds nothing and
// would spawn a phantom track; drop it.
void drop_external_duplicates(std::vector<ObjectInstance>& objects, const PrototypeSet& prototypes) {
  std::vector<ObjectInstance> kept;
  for (const auto& o : objects) {
    if (o.external) {
      const Prototype* p = find_prototype(prototypes, o.prototype_id);
      const double radius = p != nullptr ? 0.5 * std::max(p->height(), p->width()) : 5.0;
      bool duplicate = false;
      for (const auto& other : objects) {
        if (&other == &o || other.external) continue;
        if (color_distance(other.color, o.color) < 0.1 &&
            (other.center_of_mass - o.center_of_mass).norm() < radius)
          duplicate = true;
      }
      if (duplicate) continue;
    }
    kept.push_back(o);
  }
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].depth_rank = static_cast<int>(i) + 1;
  objects = std::move(kept);
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::FrameIndependent: return "frame-independent";
    case Variant::Aligned: return "aligned";
    case Variant::StateOnly: return "state-only";
    case Variant::TwoStage: return "two-stage";
    case Variant::Full: return "full";
  }
  return "full";
}

Variant variant_from_string(const std::string& s) {
  if (s == "frame-independent") return Variant::FrameIndependent;
  if (s == "aligned") return Variant::Aligned;
  if (s == "state-only") return Variant::StateOnly;
  if (s == "two-stage") return Variant::TwoStage;
  if (s == "full") return Variant::Full;
  throw std::invalid_argument("unknown variant: " + s);
}

void ParseConfig::validate() const {
  if (max_objs < 1) throw std::invalid_argument("parse: max_objs must be >= 1");
  if (!(err_thr >= 0.0)) throw std::invalid_argument("parse: err_thr must be >= 0");
  if (peaks_per_pair < 1) throw std::invalid_argument("parse: peaks_per_pair must be >= 1");
  if (colors < 2) throw std::invalid_argument("parse: colors must be >= 2");
  if (cold_start_frames < 1) throw std::invalid_argument("parse: cold_start_frames must be >= 1");
  if (!(external_slack >= 0.0)) throw std::invalid_argument("parse: external_slack must be >= 0");
}

ParseConfig parse_config_for(Variant v) {
  ParseConfig cfg;
  switch (v) {
    case Variant::FrameIndependent:
      cfg.state_conditioned = false;
      cfg.stage2_enabled = false;
      cfg.use_external_templates = false;
      cfg.align = false;
      break;
    case Variant::Aligned:
      cfg.state_conditioned = false;
      cfg.stage2_enabled = false;
      cfg.use_external_templates = false;
      break;
    case Variant::StateOnly:
      cfg.state_only = true;
      cfg.stage2_enabled = false;
      cfg.use_external_templates = false;
      break;
    case Variant::TwoStage:
      cfg.use_external_templates = false;
      break;
    case Variant::Full:
      break;
  }
  return cfg;
}

std::vector<ObjectInstance> create_candidates_with_state(const ChannelStack& channels,
                                                         const PrototypeSet& prototypes,
                                                         const PrototypeSpectra& spectra,
                                                         const std::vector<int>& active_ids,
                                                         const CandidateOptions& opts) {
  if (active_ids.empty()) return {};
  return generate_candidates(channels, prototypes, spectra, opts, &active_ids);
}

ChannelStack residual_channels(const RgbImage& frame, const RgbImage& reconstruction,
                               const ColorQuantizedFrame& quantized, const CandidateOptions& opts) {
  const int h = frame.height();
  const int w = frame.width();
  std::array<Plane, 3> r;
  for (int c = 0; c < 3; ++c) r[static_cast<std::size_t>(c)] = (frame.channel(c) - reconstruction.channel(c)).max(0.0).min(1.0);
  ChannelStack s;
  const int bg = quantized.nearest_channel(opts.background);
  for (int j = 0; j < quantized.k(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const Rgb& col = quantized.centroids[ju];
    const double norm2 = col[0] * col[0] + col[1] * col[1] + col[2] * col[2];
    Plane map = Plane::Zero(h, w);
    if (norm2 > 0.0 && !(opts.skip_background_channel && j == bg)) {
      const Plane proj = (r[0] * col[0] + r[1] * col[1] + r[2] * col[2]) / norm2;
      map = quantized.channels[ju] * proj.max(0.0).min(1.0);
    }
    const bool used = (map > 0.0).any();
    s.maps.push_back(map);
    s.colors.push_back(col);
    s.active.push_back(used);
    s.spectra.push_back(used ? spectral::fft2(map) : ComplexPlane());
  }
  return s;
}

std::vector<ObjectInstance> external_templates(const SceneState& state) {
  std::vector<ObjectInstance> out;
  for (const auto& t : state.tracks()) {
    const ObjectInstance& last = t.last_instance;
    if (last.prototype_id < 0 || last.frame_height == 0) continue;
    const Vec2 d = t.predicted_position() - last.center_of_mass;
    ObjectInstance inst = motion::shift_instance(last, static_cast<int>(std::lround(d.x)),
                                                 static_cast<int>(std::lround(d.y)));
    if (!(inst.render_mask().sum() > 0.5)) continue;  // left the frame
    inst.external = true;
    inst.peak.score = 0.0;
    inst.depth_rank = 0;
    out.push_back(std::move(inst));
  }
  return out;
}

FrameParse parse_frame(const RgbImage& frame, const SceneState& state,
                       const std::vector<ObjectInstance>& external,
                       const PrototypeSet& prototypes, const PrototypeSpectra& spectra,
                       const ParseConfig& cfg, int frame_index) {
  cfg.validate();
  if (!frame.all_finite()) throw std::invalid_argument("parse_frame: non-finite frame");
  FrameParse out;
  const CandidateOptions opts = candidate_options(cfg);
  const GreedyOptions gopts = greedy_options(cfg);
  const ColorQuantizedFrame q = quantize_colors(frame, cfg.colors, cfg.quantize_seed);
  out.degenerate_palette = q.degenerate_palette;
  const ChannelStack stack = ChannelStack::from_frame(q, opts);

  const bool cold = frame_index < cfg.cold_start_frames || !cfg.state_conditioned;
  const std::vector<int> everything = all_ids(prototypes);
  const std::vector<int> active = cold ? everything : state.active_prototypes();

  std::vector<ObjectInstance> pool = create_candidates_with_state(stack, prototypes, spectra, active, opts);
  out.stage1_candidates = static_cast<int>(pool.size());
  if (cfg.use_external_templates && frame_index >= cfg.cold_start_frames) {
    pool.insert(pool.end(), external.begin(), external.end());
    out.external_candidates = static_cast<int>(external.size());
  }

  Selection sel = greedy_select(frame, pool, gopts);
  drop_external_duplicates(sel.objects, prototypes);
  RgbImage recon = compose(sel.objects, cfg.background, frame.height(), frame.width());
  out.stage1_error = std::sqrt(frame.squared_distance(recon));
  out.stage1_residual = mean_pixel_residual(frame, recon);
  out.objects = std::move(sel.objects);
  out.error = out.stage1_error;
  out.residual = out.stage1_residual;

  if (cfg.runs_stage2() && out.stage1_residual > cfg.err_thr) {
    out.stage2_triggered = true;
    std::vector<int> inactive;
    const std::vector<int> state_ids = cold ? std::vector<int>{} : active;
    for (int id : everything)
      if (std::find(state_ids.begin(), state_ids.end(), id) == state_ids.end()) inactive.push_back(id);
    const ChannelStack rstack = residual_channels(frame, recon, q, opts);
    auto stage2 = create_candidates_with_state(rstack, prototypes, spectra, inactive, opts);
    out.stage2_candidates = static_cast<int>(stage2.size());
    pool.insert(pool.end(), stage2.begin(), stage2.end());
    Selection pooled = greedy_select(frame, pool, gopts);
    drop_external_duplicates(pooled.objects, prototypes);
    const RgbImage precon = compose(pooled.objects, cfg.background, frame.height(), frame.width());
    const double perr = std::sqrt(frame.squared_distance(precon));
    // Greedy is not monotone in its candidate set; keep the better selection.
    if (perr <= out.stage1_error) {
      out.objects = std::move(pooled.objects);
      out.error = perr;
      out.residual = mean_pixel_residual(frame, precon);
    }
  }
  out.ids.resize(out.objects.size());
  for (std::size_t i = 0; i < out.objects.size(); ++i) out.ids[i] = static_cast<int>(i) + 1;
  return out;
}

VideoParser::VideoParser(const PrototypeSet& prototypes, ParseConfig cfg, TrackerConfig tracker)
    : prototypes_(prototypes), cfg_(cfg), state_(tracker) {
  cfg_.validate();
  tracker.weights.validate();
}

FrameParse VideoParser::parse(const RgbImage& frame) {
  if (spectra_.height != frame.height() || spectra_.width != frame.width() ||
      spectra_.ids.size() != prototypes_.size())
    spectra_ = PrototypeSpectra::compute(prototypes_, frame.height(), frame.width());
  std::vector<ObjectInstance> external;
  if (cfg_.use_external_templates && t_ >= cfg_.cold_start_frames) external = external_templates(state_);
  FrameParse fp = parse_frame(frame, state_, external, prototypes_, spectra_, cfg_, t_);
  if (cfg_.align) fp.ids = state_.align(fp.objects, prototypes_, t_);
  ++t_;
  return fp;
}

VideoParse parse_video(std::span<const RgbImage> frames, const PrototypeSet& prototypes,
                       const ParseConfig& cfg, const TrackerConfig& tracker) {
  if (frames.empty()) throw std::invalid_argument("parse_video: no frames");
  VideoParser parser(prototypes, cfg, tracker);
  VideoParse out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    FrameParse fp = parser.parse(frames[t]);
    for (std::size_t i = 0; i < fp.objects.size(); ++i) {
      out.records.push_back({static_cast<int>(t), fp.ids[i], fp.objects[i].center_of_mass,
                             fp.objects[i].prototype_id, fp.objects[i].color});
    }
    out.frames.push_back(std::move(fp));
  }
  out.final_state = parser.state();
  return out;
}

}  // namespace vpcd
