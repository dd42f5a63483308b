#pragma once

// Deterministic synthetic video generators with full ground truth.

#include "vpcd/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vpcd::datagen {

enum class MotionLaw {
  Linear,     ///< constant velocity, objects enter and leave through the edges
  Bounce,     ///< constant speed, reflection at the frame boundary
  Parabolic,  ///< per-frame gravity on vy, reflection at the boundary
  Invader,    ///< aliens drifting downwards, a ship moving sideways
  Occlusion,  ///< scripted: one mover passing behind a static occluder
};

enum class ShapeSet { Sprites, Dynamics, Invaders };

std::string to_string(MotionLaw law);
MotionLaw motion_law_from_string(const std::string& s);
std::string to_string(ShapeSet set);
ShapeSet shape_set_from_string(const std::string& s);

/// Binary sprite bitmaps. Dynamics: disk, square, triangle, diamond, cross,
/// ring, L-shape, bar. Sprites: the first four. Invaders: six aliens + ship.
std::vector<Plane> make_shapes(ShapeSet set, int size);
std::vector<std::string> shape_names(ShapeSet set);

struct SceneSpec {
  std::string name = "dynamics_bouncing";
  int height = 64;
  int width = 64;
  int sprite_size = 11;
  ShapeSet shapes = ShapeSet::Dynamics;
  MotionLaw law = MotionLaw::Bounce;
  int min_objects = 3;
  int max_objects = 3;
  int length = 30;
  double min_speed = 0.5;
  double max_speed = 2.5;
  /// Round sampled velocity components to whole pixels per frame.
  bool integer_velocity = true;
  double gravity = 0.15;
  /// Linear law: chance per frame of spawning an object when below max.
  double spawn_probability = 0.25;
  /// Invader law: chance an alien follows a parabolic path.
  double invader_parabolic_fraction = 0.5;
  /// Occlusion law: size of the static occluder.
  int occluder_width = 21;
  int occluder_height = 13;
  std::vector<Rgb> palette{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, 1.0, 0.0}};
  Rgb background{0.0, 0.0, 0.0};
  std::uint64_t seed = 0;

  void validate() const;
  /// Largest per-frame displacement the law can produce.
  double displacement_bound() const;
};

SceneSpec dynamics_bouncing_spec();
SceneSpec dynamics_parabolic_spec();
SceneSpec sprites_mot_spec();
SceneSpec space_invaders_spec();
SceneSpec occlusion_spec();

struct ObjectTruth {
  int id = 0;
  int shape = 0;        ///< index into the shape list, -1 for the occluder
  int color_index = 0;  ///< index into the palette
  Rgb color{0.0, 0.0, 0.0};
  Vec2 position;        ///< real-valued top-left of the sprite box
  int left = 0;         ///< rendered (snapped) top-left
  int top = 0;
  Vec2 center;          ///< centre of mass of the sprite at its real position
  Vec2 velocity;
  double visibility = 0.0;  ///< visible fraction of the sprite pixels
  int depth = 0;            ///< 0 = frontmost
};

struct FrameTruth {
  std::vector<ObjectTruth> objects;
};

struct Sequence {
  std::vector<RgbImage> frames;
  std::vector<FrameTruth> truth;
};

/// Sprite bitmaps referenced by ObjectTruth::shape (plus the occluder).
class ShapeBank {
 public:
  explicit ShapeBank(const SceneSpec& spec);
  const Plane& shape(int index) const;
  int size() const { return static_cast<int>(shapes_.size()); }
  Vec2 center_of_mass(int index) const;

 private:
  std::vector<Plane> shapes_;
  Plane occluder_;
};

/// Renders a frame from its ground truth (exact, back to front).
RgbImage render_frame(const FrameTruth& truth, const ShapeBank& bank, const SceneSpec& spec);

/// Per-pixel id of the visible object; 0 for background.
Eigen::ArrayXXi label_map(const FrameTruth& truth, const ShapeBank& bank, const SceneSpec& spec);

/// Visible pixels of one object (binary).
Plane object_mask(const FrameTruth& truth, int object_id, const ShapeBank& bank,
                  const SceneSpec& spec);

Sequence generate_sequence(const SceneSpec& spec, int index);
std::vector<Sequence> generate_sequences(const SceneSpec& spec, int count, int first_index = 0);

/// Writes `count` sequences under `dir` (one directory per sequence with PNG
/// frames and ground_truth.json) plus dataset.json, using `jobs` threads.
void generate(const SceneSpec& spec, int count, const std::filesystem::path& dir,
              int first_index = 0, int jobs = 1);

/// Reads a sequence directory written by generate().
Sequence load_sequence(const std::filesystem::path& dir);
SceneSpec load_dataset_spec(const std::filesystem::path& dataset_dir);
std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& dataset_dir);

/// JSON (de)serialisation of specs; used by dataset.json.
std::string spec_to_json(const SceneSpec& spec);
SceneSpec spec_from_json(const std::string& text);

}  // namespace vpcd::datagen
