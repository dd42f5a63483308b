#include "vpcd/datagen.hpp"

#include "vpcd/image_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace vpcd::datagen {
namespace {

using nlohmann::json;

// Hand-drawn 11x11 invader bitmaps; the last one is the ship.
const char* const kInvaderArt[7][11] = {
    {"...........", "..#.....#..", "...#...#...", "..#######..", ".##.###.##.", "###########",
     "#.#######.#", "#.#.....#.#", "...##.##...", "...........", "..........."},
    {"...........", ".....#.....", "....###....", "...#####...", "..##.#.##..", "..#######..",
     "....#.#....", "...#.#.#...", "..#.#.#.#..", "...........", "..........."},
    {"...........", "...#####...", ".#########.", "###########", "###..#..###", "###########",
     "..###.###..", ".##.....##.", "..##...##..", "...........", "..........."},
    {"...........", "...........", "....###....", "..#######..", ".##.#.#.##.", "###########",
     "..##...##..", "...#...#...", "...........", "...........", "..........."},
    {"...........", "..#######..", ".#########.", ".##..#..##.", ".#########.", "..##...##..",
     "...#####...", "...#.#.#...", "...........", "...........", "..........."},
    {".#.......#.", "..#.....#..", "..#######..", ".##.###.##.", "###########", ".#########.",
     ".#.#...#.#.", "#..#...#..#", "...........", "...........", "..........."},
    {"...........", "...........", "...........", ".....#.....", "....###....", "....###....",
     ".#########.", "###########", "###########", "###########", "..........."},
};

Plane dynamics_shape(int index, int s) {
  Plane p = Plane::Zero(s, s);
  const double m = 0.5 * (s - 1);
  const int arm = std::max(1, s / 8);
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) {
      const double dr = r - m;
      const double dc = c - m;
      const double d = std::hypot(dr, dc);
      bool on = false;
      switch (index) {
        case 0: on = d <= 0.48 * s; break;                                   // disk
        case 1: on = r >= 1 && r <= s - 2 && c >= 1 && c <= s - 2; break;    // square
        case 2: on = std::abs(dc) <= 0.5 * r; break;                         // triangle
        case 3: on = std::abs(dr) + std::abs(dc) <= m; break;                // diamond
        case 4: on = std::abs(dr) <= arm || std::abs(dc) <= arm; break;      // cross
        case 5: on = d >= 0.27 * s && d <= 0.48 * s; break;                  // ring
        case 6: on = c <= (s * 4) / 11 - 1 || r >= s - (s * 4) / 11; break;  // L-shape
        case 7: on = r >= (s * 3) / 11 && r <= s - 1 - (s * 3) / 11; break;  // bar
        default: throw std::out_of_range("dynamics_shape: index");
      }
      p(r, c) = on ? 1.0 : 0.0;
    }
  }
  return p;
}

Plane invader_shape(int index, int s) {
  Plane p = Plane::Zero(s, s);
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) {
      const int sr = r * 11 / s;
      const int sc = c * 11 / s;
      p(r, c) = kInvaderArt[index][sr][sc] == '#' ? 1.0 : 0.0;
    }
  }
  return p;
}

double snap(double v) { return std::floor(v + 0.5); }

// Bitmap COM in (x, y) patch coordinates.
Vec2 bitmap_center(const Plane& shape) {
  double sx = 0.0, sy = 0.0, n = 0.0;
  for (int r = 0; r < shape.rows(); ++r)
    for (int c = 0; c < shape.cols(); ++c)
      if (shape(r, c) > 0.5) {
        sx += c;
        sy += r;
        n += 1.0;
      }
  if (n == 0.0) return {0.5 * (shape.cols() - 1), 0.5 * (shape.rows() - 1)};
  return {sx / n, sy / n};
}

struct Actor {
  ObjectTruth truth;
  bool parabolic = false;
  bool bounce_x = true;
  bool bounce_y = true;
  bool alive = true;
};

class Simulator {
 public:
  Simulator(const SceneSpec& spec, int index)
      : spec_(spec), bank_(spec), shapes_(static_cast<int>(make_shapes(spec.shapes, spec.sprite_size).size())) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(index)};
    rng_.seed(seq);
  }

  Sequence run() {
    init();
    Sequence out;
    for (int t = 0; t < spec_.length; ++t) {
      if (t > 0) step();
      FrameTruth ft = snapshot();
      out.frames.push_back(render_frame(ft, bank_, spec_));
      out.truth.push_back(std::move(ft));
    }
    return out;
  }

 private:
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int uniform_int(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }

  int free_color() {
    const int n = static_cast<int>(spec_.palette.size());
    std::vector<int> unused;
    for (int i = 0; i < n; ++i) {
      bool taken = false;
      for (const auto& a : actors_)
        if (a.alive && a.truth.color_index == i) taken = true;
      if (!taken) unused.push_back(i);
    }
    if (unused.empty()) return uniform_int(0, n - 1);
    return unused[static_cast<std::size_t>(uniform_int(0, static_cast<int>(unused.size()) - 1))];
  }

  Vec2 sample_velocity() {
    if (spec_.max_speed <= 0.0) return {};
    const double speed = uniform(spec_.min_speed, spec_.max_speed);
    const double angle = uniform(0.0, 2.0 * std::numbers::pi);
    Vec2 v{speed * std::cos(angle), speed * std::sin(angle)};
    if (!spec_.integer_velocity) return v;
    v = {snap(v.x), snap(v.y)};
    while (v.norm() > spec_.max_speed + 1e-12) {
      if (std::abs(v.x) >= std::abs(v.y)) v.x -= std::copysign(1.0, v.x);
      else v.y -= std::copysign(1.0, v.y);
    }
    if (v.x == 0.0 && v.y == 0.0 && spec_.max_speed >= 1.0) {
      if (std::abs(std::cos(angle)) >= std::abs(std::sin(angle))) v.x = std::cos(angle) >= 0 ? 1.0 : -1.0;
      else v.y = std::sin(angle) >= 0 ? 1.0 : -1.0;
    }
    return v;
  }

  bool overlaps(const Vec2& pos, int w, int h) const {
    for (const auto& a : actors_) {
      if (!a.alive) continue;
      const auto& s = bank_.shape(a.truth.shape);
      const double ax = a.truth.position.x;
      const double ay = a.truth.position.y;
      if (pos.x < ax + s.cols() && ax < pos.x + w && pos.y < ay + s.rows() && ay < pos.y + h)
        return true;
    }
    return false;
  }

  Vec2 sample_inside(int w, int h) {
    Vec2 pos;
    for (int attempt = 0; attempt < 100; ++attempt) {
      pos = {static_cast<double>(uniform_int(0, spec_.width - w)),
             static_cast<double>(uniform_int(0, spec_.height - h))};
      if (!overlaps(pos, w, h)) break;
    }
    return pos;
  }

  Actor& add(int shape, const Vec2& pos, const Vec2& vel, int color_index) {
    Actor a;
    a.truth.id = next_id_++;
    a.truth.shape = shape;
    a.truth.color_index = color_index;
    a.truth.color = spec_.palette[static_cast<std::size_t>(color_index)];
    a.truth.position = pos;
    a.truth.velocity = vel;
    actors_.push_back(a);
    return actors_.back();
  }

  int random_shape(int first, int count) { return first + uniform_int(0, count - 1); }

  void init() {
    const int s = spec_.sprite_size;
    const int count = uniform_int(spec_.min_objects, spec_.max_objects);
    switch (spec_.law) {
      case MotionLaw::Bounce:
      case MotionLaw::Linear:
      case MotionLaw::Parabolic: {
        for (int i = 0; i < count; ++i) {
          const int shape = random_shape(0, shapes_);
          const Vec2 pos = sample_inside(s, s);
          Actor& a = add(shape, pos, sample_velocity(), free_color());
          a.parabolic = spec_.law == MotionLaw::Parabolic;
          a.bounce_x = a.bounce_y = spec_.law != MotionLaw::Linear;
        }
        break;
      }
      case MotionLaw::Invader: {
        // Ship along the bottom edge, aliens above it.
        const int ship = shapes_ - 1;
        const double vx = std::max(1.0, snap(uniform(spec_.min_speed, spec_.max_speed)));
        Actor& a = add(ship, {static_cast<double>(uniform_int(0, spec_.width - s)),
                              static_cast<double>(spec_.height - s)},
                       {chance(0.5) ? vx : -vx, 0.0}, free_color());
        a.bounce_x = true;
        for (int i = 1; i < count; ++i) spawn_alien(true);
        break;
      }
      case MotionLaw::Occlusion: {
        const int ow = spec_.occluder_width;
        const int oh = spec_.occluder_height;
        const Vec2 occ{static_cast<double>((spec_.width - ow) / 2),
                       static_cast<double>((spec_.height - oh) / 2)};
        Actor& o = add(-1, occ, {}, free_color());
        o.bounce_x = o.bounce_y = false;
        const int shape = random_shape(0, shapes_);
        const double vx = std::max(1.0, snap(uniform(spec_.min_speed, spec_.max_speed)));
        const Vec2 pos{2.0, occ.y + static_cast<double>((oh - s) / 2)};
        add(shape, pos, {vx, 0.0}, free_color());
        for (int i = 2; i < count; ++i) {
          const Vec2 p = sample_inside(s, s);
          add(random_shape(0, shapes_), p, sample_velocity(), free_color());
        }
        break;
      }
    }
  }

  void spawn_alien(bool inside) {
    const int s = spec_.sprite_size;
    const int aliens = shapes_ - 1;
    const double speed = uniform(spec_.min_speed, spec_.max_speed);
    double vy = std::max(0.5, 0.5 * speed);
    double vx = uniform(-0.5, 0.5) * speed;
    if (spec_.integer_velocity) {
      vy = std::max(1.0, snap(vy));
      vx = snap(vx);
    }
    const double y = inside ? static_cast<double>(uniform_int(0, std::max(0, spec_.height / 2 - s)))
                            : -static_cast<double>(s) + vy;
    const Vec2 pos{static_cast<double>(uniform_int(0, spec_.width - s)), y};
    Actor& a = add(random_shape(0, aliens), {pos.x, snap(pos.y)}, {vx, vy}, free_color());
    a.parabolic = chance(spec_.invader_parabolic_fraction);
    a.bounce_x = true;
    a.bounce_y = false;
  }

  void spawn_linear() {
    const int s = spec_.sprite_size;
    Vec2 v = sample_velocity();
    if (v.x == 0.0 && v.y == 0.0) v = {1.0, 0.0};
    Vec2 pos;
    // Enter through the edge the velocity points away from.
    const bool horizontal = std::abs(v.x) >= std::abs(v.y);
    if (horizontal) {
      pos.x = v.x > 0 ? -s + std::max(1.0, std::abs(v.x)) : spec_.width - std::max(1.0, std::abs(v.x));
      pos.y = static_cast<double>(uniform_int(0, spec_.height - s));
    } else {
      pos.y = v.y > 0 ? -s + std::max(1.0, std::abs(v.y)) : spec_.height - std::max(1.0, std::abs(v.y));
      pos.x = static_cast<double>(uniform_int(0, spec_.width - s));
    }
    Actor& a = add(random_shape(0, shapes_), pos, v, free_color());
    a.bounce_x = a.bounce_y = false;
  }

  int alive_count() const {
    int n = 0;
    for (const auto& a : actors_) n += a.alive ? 1 : 0;
    return n;
  }

  void move(Actor& a) {
    const Plane& shape = bank_.shape(a.truth.shape);
    const double max_x = spec_.width - shape.cols();
    const double max_y = spec_.height - shape.rows();
    Vec2& p = a.truth.position;
    Vec2& v = a.truth.velocity;
    if (a.parabolic) v.y += spec_.gravity;
    p += v;
    if (a.bounce_x) {
      if (p.x < 0.0) {
        p.x = -p.x;
        v.x = -v.x;
      } else if (p.x > max_x) {
        p.x = 2.0 * max_x - p.x;
        v.x = -v.x;
      }
    }
    if (a.bounce_y) {
      if (p.y < 0.0) {
        p.y = -p.y;
        v.y = -v.y;
      } else if (p.y > max_y) {
        p.y = 2.0 * max_y - p.y;
        v.y = -v.y;
      }
    }
  }

  bool outside(const Actor& a) const {
    const Plane& shape = bank_.shape(a.truth.shape);
    const Vec2& p = a.truth.position;
    return p.x + shape.cols() <= 0.0 || p.x >= spec_.width || p.y + shape.rows() <= 0.0 ||
           p.y >= spec_.height;
  }

  void step() {
    for (auto& a : actors_)
      if (a.alive) move(a);
    if (spec_.law == MotionLaw::Linear || spec_.law == MotionLaw::Invader) {
      for (auto& a : actors_)
        if (a.alive && outside(a)) a.alive = false;
      if (alive_count() < spec_.max_objects && chance(spec_.spawn_probability)) {
        if (spec_.law == MotionLaw::Linear) spawn_linear();
        else spawn_alien(false);
      }
    }
  }

  FrameTruth snapshot() const {
    FrameTruth ft;
    int depth = 0;
    for (const auto& a : actors_) {
      if (!a.alive) continue;
      ObjectTruth o = a.truth;
      o.left = static_cast<int>(snap(o.position.x));
      o.top = static_cast<int>(snap(o.position.y));
      o.center = o.position + bank_.center_of_mass(o.shape);
      o.depth = depth++;
      ft.objects.push_back(o);
    }
    // Visible fraction against front objects and the frame boundary.
    for (auto& o : ft.objects) {
      const Plane mask = object_mask(ft, o.id, bank_, spec_);
      const double total = (bank_.shape(o.shape) > 0.5).cast<double>().sum();
      o.visibility = total > 0.0 ? mask.sum() / total : 0.0;
    }
    return ft;
  }

  const SceneSpec& spec_;
  ShapeBank bank_;
  int shapes_;
  std::mt19937_64 rng_;
  std::vector<Actor> actors_;
  int next_id_ = 1;
};

json rgb_json(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }
Rgb rgb_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json spec_json(const SceneSpec& s) {
  json palette = json::array();
  for (const auto& c : s.palette) palette.push_back(rgb_json(c));
  return {{"name", s.name},
          {"height", s.height},
          {"width", s.width},
          {"sprite_size", s.sprite_size},
          {"shapes", to_string(s.shapes)},
          {"law", to_string(s.law)},
          {"min_objects", s.min_objects},
          {"max_objects", s.max_objects},
          {"length", s.length},
          {"min_speed", s.min_speed},
          {"max_speed", s.max_speed},
          {"integer_velocity", s.integer_velocity},
          {"gravity", s.gravity},
          {"spawn_probability", s.spawn_probability},
          {"invader_parabolic_fraction", s.invader_parabolic_fraction},
          {"occluder_width", s.occluder_width},
          {"occluder_height", s.occluder_height},
          {"palette", palette},
          {"background", rgb_json(s.background)},
          {"seed", s.seed}};
}

SceneSpec spec_from(const json& j) {
  SceneSpec s;
  s.name = j.at("name").get<std::string>();
  s.height = j.at("height").get<int>();
  s.width = j.at("width").get<int>();
  s.sprite_size = j.at("sprite_size").get<int>();
  s.shapes = shape_set_from_string(j.at("shapes").get<std::string>());
  s.law = motion_law_from_string(j.at("law").get<std::string>());
  s.min_objects = j.at("min_objects").get<int>();
  s.max_objects = j.at("max_objects").get<int>();
  s.length = j.at("length").get<int>();
  s.min_speed = j.at("min_speed").get<double>();
  s.max_speed = j.at("max_speed").get<double>();
  s.integer_velocity = j.at("integer_velocity").get<bool>();
  s.gravity = j.at("gravity").get<double>();
  s.spawn_probability = j.at("spawn_probability").get<double>();
  s.invader_parabolic_fraction = j.at("invader_parabolic_fraction").get<double>();
  s.occluder_width = j.at("occluder_width").get<int>();
  s.occluder_height = j.at("occluder_height").get<int>();
  s.palette.clear();
  for (const auto& c : j.at("palette")) s.palette.push_back(rgb_from(c));
  s.background = rgb_from(j.at("background"));
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

std::string sequence_name(int index) {
  std::ostringstream os;
  os << "seq_" << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

std::string frame_name(int t) {
  std::ostringstream os;
  os << "frame_" << std::setw(3) << std::setfill('0') << t << ".png";
  return os.str();
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string to_string(MotionLaw law) {
  switch (law) {
    case MotionLaw::Linear: return "linear";
    case MotionLaw::Bounce: return "bounce";
    case MotionLaw::Parabolic: return "parabolic";
    case MotionLaw::Invader: return "invader";
    case MotionLaw::Occlusion: return "occlusion";
  }
  return "bounce";
}

MotionLaw motion_law_from_string(const std::string& s) {
  if (s == "linear") return MotionLaw::Linear;
  if (s == "bounce") return MotionLaw::Bounce;
  if (s == "parabolic") return MotionLaw::Parabolic;
  if (s == "invader") return MotionLaw::Invader;
  if (s == "occlusion") return MotionLaw::Occlusion;
  throw std::invalid_argument("unknown motion law: " + s);
}

std::string to_string(ShapeSet set) {
  switch (set) {
    case ShapeSet::Sprites: return "sprites";
    case ShapeSet::Dynamics: return "dynamics";
    case ShapeSet::Invaders: return "invaders";
  }
  return "dynamics";
}

ShapeSet shape_set_from_string(const std::string& s) {
  if (s == "sprites") return ShapeSet::Sprites;
  if (s == "dynamics") return ShapeSet::Dynamics;
  if (s == "invaders") return ShapeSet::Invaders;
  throw std::invalid_argument("unknown shape set: " + s);
}

std::vector<Plane> make_shapes(ShapeSet set, int size) {
  if (size < 3) throw std::invalid_argument("make_shapes: sprite size must be >= 3");
  std::vector<Plane> out;
  switch (set) {
    case ShapeSet::Sprites:
      for (int i = 0; i < 4; ++i) out.push_back(dynamics_shape(i, size));
      break;
    case ShapeSet::Dynamics:
      for (int i = 0; i < 8; ++i) out.push_back(dynamics_shape(i, size));
      break;
    case ShapeSet::Invaders:
      for (int i = 0; i < 7; ++i) out.push_back(invader_shape(i, size));
      break;
  }
  return out;
}

std::vector<std::string> shape_names(ShapeSet set) {
  static const std::vector<std::string> dynamics{"disk",  "square", "triangle", "diamond",
                                                 "cross", "ring",   "l_shape",  "bar"};
  switch (set) {
    case ShapeSet::Sprites: return {dynamics.begin(), dynamics.begin() + 4};
    case ShapeSet::Dynamics: return dynamics;
    case ShapeSet::Invaders:
      return {"alien_crab", "alien_squid", "alien_octopus", "alien_saucer", "alien_skull",
              "alien_beetle", "ship"};
  }
  return dynamics;
}

void SceneSpec::validate() const {
  if (height < 1 || width < 1) throw std::invalid_argument("scene: frame size must be positive");
  if (sprite_size < 3) throw std::invalid_argument("scene: sprite size must be >= 3");
  if (sprite_size > height || sprite_size > width)
    throw std::invalid_argument("scene: sprite larger than frame");
  if (law == MotionLaw::Occlusion &&
      (occluder_width > width || occluder_height > height || occluder_height < sprite_size))
    throw std::invalid_argument("scene: occluder must fit in the frame and cover a sprite");
  if (min_objects < 0 || max_objects < min_objects)
    throw std::invalid_argument("scene: bad object count range");
  if (max_objects < 1) throw std::invalid_argument("scene: max_objects must be >= 1");
  if (length < 1) throw std::invalid_argument("scene: length must be >= 1");
  if (min_speed < 0.0 || max_speed < min_speed) throw std::invalid_argument("scene: bad speed range");
  if (displacement_bound() >= sprite_size)
    throw std::invalid_argument("scene: per-frame displacement must stay below the sprite size");
  if (gravity < 0.0) throw std::invalid_argument("scene: gravity must be >= 0");
  if (spawn_probability < 0.0 || spawn_probability > 1.0)
    throw std::invalid_argument("scene: spawn probability must be in [0, 1]");
  if (palette.empty()) throw std::invalid_argument("scene: empty palette");
  for (const auto& c : palette)
    for (double v : c)
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("scene: palette outside [0, 1]");
}

double SceneSpec::displacement_bound() const {
  const bool falls = law == MotionLaw::Parabolic || law == MotionLaw::Invader;
  if (!falls || gravity == 0.0) return max_speed;
  // Energy bound over a fall through the whole frame, plus one gravity step.
  return std::sqrt(max_speed * max_speed + 2.0 * gravity * std::max(height, width)) + gravity;
}

SceneSpec dynamics_bouncing_spec() { return {}; }

SceneSpec dynamics_parabolic_spec() {
  SceneSpec s;
  s.name = "dynamics_parabolic";
  s.law = MotionLaw::Parabolic;
  return s;
}

SceneSpec sprites_mot_spec() {
  SceneSpec s;
  s.name = "sprites_mot";
  s.shapes = ShapeSet::Sprites;
  s.law = MotionLaw::Linear;
  s.min_objects = 1;
  s.max_objects = 3;
  s.length = 20;
  s.min_speed = 1.0;
  return s;
}

SceneSpec space_invaders_spec() {
  SceneSpec s;
  s.name = "space_invaders";
  s.shapes = ShapeSet::Invaders;
  s.law = MotionLaw::Invader;
  s.min_objects = 3;
  s.max_objects = 4;
  s.min_speed = 1.0;
  s.max_speed = 2.0;
  s.gravity = 0.1;
  return s;
}

SceneSpec occlusion_spec() {
  SceneSpec s;
  s.name = "occlusion";
  s.law = MotionLaw::Occlusion;
  s.min_objects = 2;
  s.max_objects = 2;
  s.min_speed = 2.0;
  s.max_speed = 2.0;
  return s;
}

ShapeBank::ShapeBank(const SceneSpec& spec)
    : shapes_(make_shapes(spec.shapes, spec.sprite_size)),
      occluder_(Plane::Ones(spec.occluder_height, spec.occluder_width)) {}

const Plane& ShapeBank::shape(int index) const {
  if (index == -1) return occluder_;
  if (index < 0 || index >= size()) throw std::out_of_range("ShapeBank: bad shape index");
  return shapes_[static_cast<std::size_t>(index)];
}

Vec2 ShapeBank::center_of_mass(int index) const { return bitmap_center(shape(index)); }

namespace {

// Back-to-front indices (largest depth first).
std::vector<std::size_t> paint_order(const FrameTruth& truth) {
  std::vector<std::size_t> order(truth.objects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return truth.objects[a].depth > truth.objects[b].depth;
  });
  return order;
}

template <typename Fn>
void paint(const ObjectTruth& o, const ShapeBank& bank, const SceneSpec& spec, Fn&& fn) {
  const Plane& s = bank.shape(o.shape);
  for (int r = 0; r < s.rows(); ++r) {
    const int fr = o.top + r;
    if (fr < 0 || fr >= spec.height) continue;
    for (int c = 0; c < s.cols(); ++c) {
      const int fc = o.left + c;
      if (fc < 0 || fc >= spec.width) continue;
      if (s(r, c) > 0.5) fn(fr, fc);
    }
  }
}

}  // namespace

RgbImage render_frame(const FrameTruth& truth, const ShapeBank& bank, const SceneSpec& spec) {
  RgbImage img(spec.height, spec.width, spec.background);
  for (std::size_t i : paint_order(truth)) {
    const auto& o = truth.objects[i];
    paint(o, bank, spec, [&](int r, int c) { img.set_pixel(r, c, o.color); });
  }
  return img;
}

Eigen::ArrayXXi label_map(const FrameTruth& truth, const ShapeBank& bank, const SceneSpec& spec) {
  Eigen::ArrayXXi labels = Eigen::ArrayXXi::Zero(spec.height, spec.width);
  for (std::size_t i : paint_order(truth)) {
    const auto& o = truth.objects[i];
    paint(o, bank, spec, [&](int r, int c) { labels(r, c) = o.id; });
  }
  return labels;
}

Plane object_mask(const FrameTruth& truth, int object_id, const ShapeBank& bank,
                  const SceneSpec& spec) {
  return (label_map(truth, bank, spec) == object_id).cast<double>();
}

Sequence generate_sequence(const SceneSpec& spec, int index) {
  spec.validate();
  Simulator sim(spec, index);
  return sim.run();
}

std::vector<Sequence> generate_sequences(const SceneSpec& spec, int count, int first_index) {
  std::vector<Sequence> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) out.push_back(generate_sequence(spec, first_index + i));
  return out;
}

namespace {

void write_sequence(const SceneSpec& spec, const ShapeBank& bank, int index, const std::filesystem::path& dir) {
  const Sequence seq = generate_sequence(spec, index);
  const auto seq_dir = dir / sequence_name(index);
  std::filesystem::create_directories(seq_dir);
  json frames = json::array();
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    io::write_png(seq_dir / frame_name(static_cast<int>(t)), seq.frames[t]);
    const Eigen::ArrayXXi labels = label_map(seq.truth[t], bank, spec);
    json objects = json::array();
    for (const auto& o : seq.truth[t].objects) {
      const Plane mask = (labels == o.id).cast<double>();
      objects.push_back({{"id", o.id},
                         {"shape", o.shape},
                         {"color_index", o.color_index},
                         {"color", rgb_json(o.color)},
                         {"position", {o.position.x, o.position.y}},
                         {"left", o.left},
                         {"top", o.top},
                         {"center", {o.center.x, o.center.y}},
                         {"velocity", {o.velocity.x, o.velocity.y}},
                         {"visibility", o.visibility},
                         {"depth", o.depth},
                         {"mask_rle", io::encode_rle(mask)}});
    }
    frames.push_back({{"index", t}, {"image", frame_name(static_cast<int>(t))}, {"objects", objects}});
  }
  const json gt = {{"height", spec.height}, {"width", spec.width}, {"frames", frames}};
  write_text(seq_dir / "ground_truth.json", gt.dump(1) + "\n");
}

}  // namespace

void generate(const SceneSpec& spec, int count, const std::filesystem::path& dir, int first_index, int jobs) {
  spec.validate();
  if (count < 0) throw std::invalid_argument("generate: negative sequence count");
  if (jobs < 1) throw std::invalid_argument("generate: jobs must be >= 1");
  std::filesystem::create_directories(dir);
  const ShapeBank bank(spec);
  // Every sequence has its own RNG stream, so the split across workers does
  // not change the output.
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        write_sequence(spec, bank, first_index + i, dir);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::min(jobs, count); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  json names = json::array();
  for (int i = 0; i < count; ++i) names.push_back(sequence_name(first_index + i));
  const json manifest = {{"spec", spec_json(spec)},
                         {"count", count},
                         {"first_index", first_index},
                         {"sequences", names}};
  write_text(dir / "dataset.json", manifest.dump(2) + "\n");
}

Sequence load_sequence(const std::filesystem::path& dir) {
  const json gt = read_json(dir / "ground_truth.json");
  Sequence seq;
  for (const auto& f : gt.at("frames")) {
    seq.frames.push_back(io::read_png(dir / f.at("image").get<std::string>()));
    FrameTruth ft;
    for (const auto& o : f.at("objects")) {
      ObjectTruth t;
      t.id = o.at("id").get<int>();
      t.shape = o.at("shape").get<int>();
      t.color_index = o.at("color_index").get<int>();
      t.color = rgb_from(o.at("color"));
      t.position = {o.at("position").at(0).get<double>(), o.at("position").at(1).get<double>()};
      t.left = o.at("left").get<int>();
      t.top = o.at("top").get<int>();
      t.center = {o.at("center").at(0).get<double>(), o.at("center").at(1).get<double>()};
      t.velocity = {o.at("velocity").at(0).get<double>(), o.at("velocity").at(1).get<double>()};
      t.visibility = o.at("visibility").get<double>();
      t.depth = o.at("depth").get<int>();
      ft.objects.push_back(t);
    }
    seq.truth.push_back(std::move(ft));
  }
  return seq;
}

SceneSpec load_dataset_spec(const std::filesystem::path& dataset_dir) {
  return spec_from(read_json(dataset_dir / "dataset.json").at("spec"));
}

std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& dataset_dir) {
  const json manifest = read_json(dataset_dir / "dataset.json");
  std::vector<std::filesystem::path> out;
  for (const auto& name : manifest.at("sequences")) out.push_back(dataset_dir / name.get<std::string>());
  return out;
}

std::string spec_to_json(const SceneSpec& spec) { return spec_json(spec).dump(2); }

SceneSpec spec_from_json(const std::string& text) { return spec_from(json::parse(text)); }

}  // namespace vpcd::datagen
