#include "vpcd/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace vpcd::cli {
namespace {

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  std::size_t pos = 0;
  const double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return d;
}

long long to_int(const std::string& v) {
  std::size_t pos = 0;
  const long long i = std::stoll(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return i;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument(v);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::vector<int> to_int_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(to_int(trim(item))));
  return out;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

datagen::SceneSpec preset(const std::string& name) {
  if (name == "dynamics_bouncing") return datagen::dynamics_bouncing_spec();
  if (name == "dynamics_parabolic") return datagen::dynamics_parabolic_spec();
  if (name == "sprites_mot") return datagen::sprites_mot_spec();
  if (name == "space_invaders") return datagen::space_invaders_spec();
  if (name == "occlusion") return datagen::occlusion_spec();
  throw ValidationError("unknown dataset preset: " + name);
}

#define VPCD_DOUBLE(sec, name, member)                                                      \
  Field {                                                                                   \
    sec, name, [](RunConfig& c, const std::string& v) { c.member = to_double(v); },         \
        [](const RunConfig& c) { return fmt(static_cast<double>(c.member)); }               \
  }
#define VPCD_INT(sec, name, member)                                                         \
  Field {                                                                                   \
    sec, name, [](RunConfig& c, const std::string& v) { c.member = static_cast<int>(to_int(v)); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                         \
  }
#define VPCD_BOOL(sec, name, member)                                                        \
  Field {                                                                                   \
    sec, name, [](RunConfig& c, const std::string& v) { c.member = to_bool(v); },           \
        [](const RunConfig& c) { return fmt(static_cast<bool>(c.member)); }                 \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      // [run] seed and variant are applied before everything else.
      {"run", "seed", [](RunConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"run", "variant", [](RunConfig&, const std::string&) {},
       [](const RunConfig& c) { return to_string(c.variant); }},
      {"run", "out", [](RunConfig& c, const std::string& v) { c.out = v; }, [](const RunConfig& c) { return c.out; }},
      VPCD_INT("run", "jobs", jobs),

      {"data", "preset", [](RunConfig&, const std::string&) {}, [](const RunConfig& c) { return c.data.preset; }},
      {"data", "path", [](RunConfig& c, const std::string& v) { c.data.path = v; },
       [](const RunConfig& c) { return c.data.path; }},
      VPCD_INT("data", "train_count", data.train_count),
      VPCD_INT("data", "test_count", data.test_count),
      VPCD_INT("data", "height", data.spec.height),
      VPCD_INT("data", "width", data.spec.width),
      VPCD_INT("data", "sprite_size", data.spec.sprite_size),
      VPCD_INT("data", "min_objects", data.spec.min_objects),
      VPCD_INT("data", "max_objects", data.spec.max_objects),
      VPCD_INT("data", "length", data.spec.length),
      VPCD_DOUBLE("data", "min_speed", data.spec.min_speed),
      VPCD_DOUBLE("data", "max_speed", data.spec.max_speed),
      VPCD_BOOL("data", "integer_velocity", data.spec.integer_velocity),
      VPCD_DOUBLE("data", "gravity", data.spec.gravity),
      VPCD_DOUBLE("data", "spawn_probability", data.spec.spawn_probability),

      VPCD_INT("parse", "max_objs", parse.max_objs),
      VPCD_DOUBLE("parse", "err_thr", parse.err_thr),
      VPCD_INT("parse", "peaks_per_pair", parse.peaks_per_pair),
      VPCD_INT("parse", "nms_radius", parse.nms_radius),
      VPCD_INT("parse", "colors", parse.colors),
      VPCD_INT("parse", "cold_start_frames", parse.cold_start_frames),
      VPCD_DOUBLE("parse", "external_slack", parse.external_slack),
      VPCD_BOOL("parse", "use_external_templates", parse.use_external_templates),
      VPCD_BOOL("parse", "stage2_enabled", parse.stage2_enabled),
      VPCD_BOOL("parse", "state_only", parse.state_only),
      {"parse", "edge",
       [](RunConfig& c, const std::string& v) {
         if (v == "clip") c.parse.edge = EdgeMode::Clip;
         else if (v == "periodic") c.parse.edge = EdgeMode::Periodic;
         else throw std::invalid_argument(v);
       },
       [](const RunConfig& c) { return std::string(c.parse.edge == EdgeMode::Clip ? "clip" : "periodic"); }},

      VPCD_DOUBLE("tracker", "lambda_c", tracker.weights.lambda_c),
      VPCD_DOUBLE("tracker", "lambda_p", tracker.weights.lambda_p),
      VPCD_DOUBLE("tracker", "lambda_z", tracker.weights.lambda_z),
      VPCD_DOUBLE("tracker", "gate", tracker.weights.gate),
      VPCD_INT("tracker", "max_missed", tracker.max_missed),
      VPCD_INT("tracker", "history", tracker.history),
      VPCD_BOOL("tracker", "predicted_gating", tracker.predicted_gating),

      VPCD_DOUBLE("decomp", "lambda_sparsity", decomp.lambda_sparsity),
      VPCD_DOUBLE("decomp", "lambda_mask_smooth", decomp.lambda_mask_smooth),
      VPCD_DOUBLE("decomp", "learning_rate", decomp.learning_rate),
      VPCD_INT("decomp", "steps", decomp.steps),
      VPCD_INT("decomp", "batch_size", decomp.batch_size),
      VPCD_INT("decomp", "prototypes", decomp.prototypes),
      VPCD_INT("decomp", "prototype_size", decomp.prototype_size),
      VPCD_INT("decomp", "max_objs", decomp.max_objs),
      VPCD_BOOL("decomp", "reseed", decomp.reseed),
      VPCD_INT("decomp", "reseed_interval", decomp.reseed_interval),

      VPCD_INT("motion", "seed_frames", motion.seed_frames),
      VPCD_INT("motion", "predict_frames", motion.predict_frames),
      {"motion", "loss",
       [](RunConfig& c, const std::string& v) {
         if (v == "position") c.motion.loss = learning::MotionLossKind::Position;
         else if (v == "frame") c.motion.loss = learning::MotionLossKind::Frame;
         else throw std::invalid_argument(v);
       },
       [](const RunConfig& c) {
         return std::string(c.motion.loss == learning::MotionLossKind::Position ? "position" : "frame");
       }},
      VPCD_DOUBLE("motion", "learning_rate", motion.learning_rate),
      VPCD_DOUBLE("motion", "final_lr_fraction", motion.final_lr_fraction),
      VPCD_INT("motion", "steps", motion.steps),
      VPCD_INT("motion", "batch_size", motion.batch_size),
      {"motion", "hidden", [](RunConfig& c, const std::string& v) { c.motion.hidden = to_int_list(v); },
       [](const RunConfig& c) { return fmt_list(c.motion.hidden); }},
      VPCD_DOUBLE("motion", "min_confidence", motion.min_confidence),
      VPCD_DOUBLE("motion", "max_parse_residual", motion.max_parse_residual),

      VPCD_DOUBLE("eval", "match_radius", eval.match_radius),
      VPCD_DOUBLE("eval", "min_visibility", eval.min_visibility),
      VPCD_INT("eval", "seeds", eval.seeds),
      VPCD_INT("eval", "horizon", eval.horizon),
      VPCD_BOOL("eval", "netless", eval.netless),
      VPCD_BOOL("eval", "subpixel_render", eval.subpixel_render),
      VPCD_BOOL("eval", "closed_loop", eval.closed_loop),
      VPCD_BOOL("eval", "gt_passthrough", eval.gt_passthrough),
      VPCD_INT("eval", "max_sequences", eval.max_sequences),
      VPCD_INT("eval", "strips", eval.strips),
      VPCD_DOUBLE("eval", "penalty_distance", eval.penalty_distance),
  };
  return f;
}

#undef VPCD_DOUBLE
#undef VPCD_INT
#undef VPCD_BOOL

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (section == f.section && key == f.key) return &f;
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  try {
    data.spec.validate();
    parse.validate();
    tracker.weights.validate();
    decomp.validate();
    motion.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  if (jobs < 1) throw ValidationError("run: jobs must be >= 1");
  if (out.empty()) throw ValidationError("run: out must not be empty");
  if (data.train_count < 0 || data.test_count < 0) throw ValidationError("data: counts must be >= 0");
  if (tracker.max_missed < 0 || tracker.history < 1) throw ValidationError("tracker: bad lifecycle settings");
  if (decomp.prototype_size > data.spec.height || decomp.prototype_size > data.spec.width)
    throw ValidationError("decomp: prototypes larger than the frame");
  if (!(eval.match_radius > 0.0)) throw ValidationError("eval: match_radius must be > 0");
  if (eval.seeds < 2) throw ValidationError("eval: at least 2 seed frames are required");
  if (eval.horizon < 0) throw ValidationError("eval: horizon must be >= 0");
  if (eval.seeds + eval.horizon > data.spec.length)
    throw ValidationError("eval: seeds + horizon exceed the sequence length");
  if (motion.seed_frames + motion.predict_frames > data.spec.length)
    throw ValidationError("motion: window longer than the sequences");
}

std::string RunConfig::to_ini() const {
  std::string out_text;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      section = f.section;
      out_text += (out_text.empty() ? "[" : "\n[") + section + "]\n";
    }
    out_text += std::string(f.key) + " = " + f.get(*this) + "\n";
  }
  return out_text;
}

RunConfig parse_config(const std::string& text, const Overrides& overrides) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ValidationError("config: key outside a section: " + section);
    for (const auto& [key, _] : body)
      if (find_field(section, key) == nullptr) throw ValidationError("config: unknown key [" + section + "] " + key);
  }
  const auto value = [&](const char* section, const char* key) -> std::optional<std::string> {
    const auto sec = tree.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  };

  RunConfig cfg;
  try {
    const std::string variant = overrides.variant ? *overrides.variant : value("run", "variant").value_or("full");
    cfg.variant = variant_from_string(variant);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  cfg.parse = parse_config_for(cfg.variant);
  cfg.data.preset = value("data", "preset").value_or(cfg.data.preset);
  cfg.data.spec = preset(cfg.data.preset);

  for (const auto& f : fields()) {
    const auto v = value(f.section, f.key);
    if (!v) continue;
    try {
      f.set(cfg, *v);
    } catch (const std::exception&) {
      throw ValidationError(std::string("config: bad value for [") + f.section + "] " + f.key + ": '" + *v + "'");
    }
  }
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.out) cfg.out = *overrides.out;
  if (overrides.horizon) cfg.eval.horizon = *overrides.horizon;
  if (overrides.seeds) cfg.eval.seeds = *overrides.seeds;
  // Unset horizon predicts to the end of the sequence.
  if (!overrides.horizon && !value("eval", "horizon")) cfg.eval.horizon = cfg.data.spec.length - cfg.eval.seeds;
  if (overrides.netless) cfg.eval.netless = *overrides.netless;
  if (overrides.jobs) cfg.jobs = *overrides.jobs;

  cfg.data.spec.seed = cfg.seed;
  cfg.data.spec.name = cfg.data.preset;
  cfg.decomp.seed = cfg.seed;
  cfg.motion.seed = cfg.seed;
  cfg.decomp.background = cfg.data.spec.background;
  cfg.parse.background = cfg.data.spec.background;
  cfg.decomp.colors = cfg.parse.colors;
  cfg.decomp.peaks_per_pair = cfg.parse.peaks_per_pair;
  cfg.motion.history = cfg.tracker.history;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::filesystem::path dataset_dir(const RunConfig& cfg) {
  if (!cfg.data.path.empty()) return cfg.data.path;
  if (const char* root = std::getenv(kDataRootEnv); root != nullptr && *root != '\0')
    return std::filesystem::path(root) / (cfg.data.preset + "-seed" + std::to_string(cfg.seed));
  return std::filesystem::path(cfg.out) / "data";
}

}  // namespace vpcd::cli
