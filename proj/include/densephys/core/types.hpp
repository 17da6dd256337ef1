#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "densephys/core/errors.hpp"

namespace dpn {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

/// Ground-truth physical parameters of a tabletop object.
struct PhysProps {
  double mass = 0.0;       // kg
  double friction = 0.0;   // sliding coefficient against the table
  double restitution = 0.5;

  void validate() const {
    if (!(mass > 0.0)) throw ConfigError("mass must be positive");
    if (!(friction > 0.0)) throw ConfigError("friction must be positive");
    if (!(restitution >= 0.0 && restitution <= 1.0))
      throw ConfigError("restitution must lie in [0, 1]");
  }
};

enum class Material { kPlastic, kWood, kMetal };

inline const char* to_string(Material m) {
  switch (m) {
    case Material::kPlastic: return "plastic";
    case Material::kWood: return "wood";
    case Material::kMetal: return "metal";
  }
  return "unknown";
}

inline Material material_from_string(const std::string& name) {
  if (name == "plastic") return Material::kPlastic;
  if (name == "wood") return Material::kWood;
  if (name == "metal") return Material::kMetal;
  throw ConfigError("unknown material name: " + name);
}

/// Mass and friction intervals that define one material category.
struct MaterialClass {
  Material label;
  double mass_lo, mass_hi;
  double friction_lo, friction_hi;

  bool contains(const PhysProps& p) const {
    return p.mass >= mass_lo && p.mass <= mass_hi &&
           p.friction >= friction_lo && p.friction <= friction_hi;
  }
};

/// The three categories used by the material-decoding experiments.  Plastic
/// and wood share a mass range but differ in friction; plastic and metal
/// share a friction range but differ in mass, so no single property
/// separates all three.
inline const std::array<MaterialClass, 3>& material_classes() {
  static const std::array<MaterialClass, 3> kClasses = {{
      {Material::kPlastic, 0.11, 0.14, 0.4, 0.6},
      {Material::kWood, 0.11, 0.14, 0.8, 1.0},
      {Material::kMetal, 0.17, 0.20, 0.4, 0.6},
  }};
  return kClasses;
}

inline const MaterialClass& material_class(Material m) {
  return material_classes()[static_cast<std::size_t>(m)];
}

/// Discrete property values used for 30-way regression-by-classification.
/// Both grids hold exactly 30 evenly spaced values including the endpoints.
struct PropertyGrid {
  static constexpr int kClasses = 30;

  static const std::array<double, kClasses>& friction_values() {
    static const auto kValues = linspace(0.4, 0.7);
    return kValues;
  }

  static const std::array<double, kClasses>& mass_values() {
    static const auto kValues = linspace(0.11, 0.2);
    return kValues;
  }

 private:
  static std::array<double, kClasses> linspace(double lo, double hi) {
    std::array<double, kClasses> out{};
    for (int i = 0; i < kClasses; ++i)
      out[i] = lo + (hi - lo) * static_cast<double>(i) / (kClasses - 1);
    return out;
  }
};

/// Planar footprint of an object: an axis-aligned rectangle or a disc.
struct Shape {
  enum class Kind { kRect, kDisc };

  Kind kind = Kind::kRect;
  double width = 0.0;   // metres, rect only
  double height = 0.0;  // metres, rect only
  double radius = 0.0;  // metres, disc only

  static Shape rect(double w, double h) {
    Shape s;
    s.kind = Kind::kRect;
    s.width = w;
    s.height = h;
    return s;
  }

  static Shape disc(double r) {
    Shape s;
    s.kind = Kind::kDisc;
    s.radius = r;
    return s;
  }

  /// Half extent of the axis-aligned bounding box along x.
  double half_x() const {
    return kind == Kind::kRect ? width * 0.5 : radius;
  }

  /// Half extent of the axis-aligned bounding box along y.
  double half_y() const {
    return kind == Kind::kRect ? height * 0.5 : radius;
  }

  /// Radius of the smallest circle containing the footprint.
  double bounding_radius() const {
    return kind == Kind::kRect ? 0.5 * std::hypot(width, height) : radius;
  }

  /// Whether the point (dx, dy), relative to the shape centre, is inside.
  bool contains_local(double dx, double dy) const {
    if (kind == Kind::kRect)
      return std::abs(dx) <= width * 0.5 && std::abs(dy) <= height * 0.5;
    return dx * dx + dy * dy <= radius * radius;
  }
};

/// Uniform extruded height of every sliding object; rendered depth images
/// report this value over each footprint.
inline constexpr double kObjectHeight = 0.04;

struct ObjectState {
  int id = 0;
  Shape shape;
  Vec2 position;
  PhysProps props;
  std::optional<Material> material;
  std::optional<int> friction_index;  // row in PropertyGrid::friction_values
  std::optional<int> mass_index;      // row in PropertyGrid::mass_values
};

/// Launcher ramp fixed at one table edge.  A cylinder released from rest at
/// `height` exits at the foot, a distance `base_distance` from the origin,
/// moving horizontally toward the centre.
struct RampConfig {
  double base_distance = 0.5;  // metres from origin to the ramp foot
  double height = 0.15;        // metres of drop along the ramp
};

/// The projectile used by collision actions.  It enters from a ramp, strikes
/// the target, and is removed before the next depth image is taken.
struct CylinderSpec {
  double radius = 0.02;  // metres
  double height = 0.04;  // metres
  double mass = 0.4;     // kg
};

inline bool footprints_overlap(const ObjectState& a, const ObjectState& b,
                               double clearance = 0.0) {
  const Vec2 d = b.position - a.position;
  const bool a_rect = a.shape.kind == Shape::Kind::kRect;
  const bool b_rect = b.shape.kind == Shape::Kind::kRect;
  if (!a_rect && !b_rect)
    return d.norm() < a.shape.radius + b.shape.radius + clearance;
  if (a_rect && b_rect)
    return std::abs(d.x) < a.shape.half_x() + b.shape.half_x() + clearance &&
           std::abs(d.y) < a.shape.half_y() + b.shape.half_y() + clearance;
  const ObjectState& rect = a_rect ? a : b;
  const ObjectState& disc = a_rect ? b : a;
  const double cx = std::clamp(disc.position.x,
                               rect.position.x - rect.shape.half_x(),
                               rect.position.x + rect.shape.half_x());
  const double cy = std::clamp(disc.position.y,
                               rect.position.y - rect.shape.half_y(),
                               rect.position.y + rect.shape.half_y());
  return std::hypot(disc.position.x - cx, disc.position.y - cy) <
         disc.shape.radius + clearance;
}

/// Distance from point p to the segment a..b.
inline double segment_point_distance(const Vec2& a, const Vec2& b,
                                     const Vec2& p) {
  const Vec2 ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

/// Full state of the tabletop: the objects, the square workspace that
/// contains them, and the two launcher ramps at the left and right edges.
struct SceneState {
  std::vector<ObjectState> objects;
  double workspace_side = 1.0;
  RampConfig ramp;  // both ramps share one geometry, mirrored in x
  CylinderSpec cylinder;

  double half_side() const { return workspace_side * 0.5; }

  const ObjectState* find(int id) const {
    for (const auto& obj : objects)
      if (obj.id == id) return &obj;
    return nullptr;
  }

  ObjectState* find(int id) {
    for (auto& obj : objects)
      if (obj.id == id) return &obj;
    return nullptr;
  }

  bool in_workspace(const ObjectState& obj) const {
    const double hx = obj.shape.half_x();
    const double hy = obj.shape.half_y();
    const double h = half_side();
    return obj.position.x - hx >= -h && obj.position.x + hx <= h &&
           obj.position.y - hy >= -h && obj.position.y + hy <= h;
  }

  void validate() const {
    if (objects.empty()) throw ConfigError("scene has no objects");
    if (!(workspace_side > 0.0))
      throw ConfigError("workspace side must be positive");
    for (std::size_t i = 0; i < objects.size(); ++i) {
      objects[i].props.validate();
      if (!in_workspace(objects[i]))
        throw ConfigError("object " + std::to_string(objects[i].id) +
                          " extends outside the workspace");
      for (std::size_t j = i + 1; j < objects.size(); ++j)
        if (footprints_overlap(objects[i], objects[j]))
          throw ConfigError("objects " + std::to_string(objects[i].id) +
                            " and " + std::to_string(objects[j].id) +
                            " overlap");
    }
  }
};

}  // namespace dpn
