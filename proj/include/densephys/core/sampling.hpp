#pragma once

#include <string>
#include <vector>

#include "densephys/core/errors.hpp"
#include "densephys/core/rng.hpp"
#include "densephys/core/types.hpp"

namespace dpn {

inline constexpr int kMaxPlacementTries = 1000;

/// Minimum gap between freshly placed footprints, metres.
inline constexpr double kPlacementClearance = 0.02;

/// Footprint size ranges.  Objects are deliberately large relative to the
/// workspace so their silhouettes span many pixels at every supported grid
/// resolution.
inline constexpr double kDiscRadiusLo = 0.14;
inline constexpr double kDiscRadiusHi = 0.18;
inline constexpr double kRectSideLo = 0.20;
inline constexpr double kRectSideHi = 0.30;

inline Shape sample_shape(Xoshiro256ss& rng) {
  if (rng.bernoulli(0.5))
    return Shape::disc(rng.uniform_real(kDiscRadiusLo, kDiscRadiusHi));
  return Shape::rect(rng.uniform_real(kRectSideLo, kRectSideHi),
                     rng.uniform_real(kRectSideLo, kRectSideHi));
}

/// Uniform mass and friction from a material category's intervals.
inline PhysProps sample_props(const MaterialClass& mc, Xoshiro256ss& rng) {
  PhysProps p;
  p.mass = rng.uniform_real(mc.mass_lo, mc.mass_hi);
  p.friction = rng.uniform_real(mc.friction_lo, mc.friction_hi);
  return p;
}

/// Uniform draw from the 30-value property grids; the chosen row indices
/// are recorded so decoders can be trained against exact class labels.
inline PhysProps sample_props_grid(Xoshiro256ss& rng, int* friction_index,
                                   int* mass_index) {
  const int fi =
      static_cast<int>(rng.uniform_index(PropertyGrid::kClasses));
  const int mi =
      static_cast<int>(rng.uniform_index(PropertyGrid::kClasses));
  if (friction_index) *friction_index = fi;
  if (mass_index) *mass_index = mi;
  PhysProps p;
  p.friction = PropertyGrid::friction_values()[fi];
  p.mass = PropertyGrid::mass_values()[mi];
  return p;
}

/// Places `obj` uniformly at random inside the workspace, rejecting
/// positions that overlap already placed objects.  Throws
/// SceneTooCrowdedError after kMaxPlacementTries rejections.
inline void place_object(ObjectState& obj, const SceneState& scene,
                         Xoshiro256ss& rng) {
  const double h = scene.half_side();
  const double hx = obj.shape.half_x();
  const double hy = obj.shape.half_y();
  if (hx >= h || hy >= h)
    throw SceneTooCrowdedError("object larger than the workspace");
  for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
    obj.position.x = rng.uniform_real(-h + hx, h - hx);
    obj.position.y = rng.uniform_real(-h + hy, h - hy);
    bool clear = true;
    for (const auto& other : scene.objects) {
      if (footprints_overlap(obj, other, kPlacementClearance)) {
        clear = false;
        break;
      }
    }
    if (clear) return;
  }
  throw SceneTooCrowdedError("no free position for object " +
                             std::to_string(obj.id) + " after " +
                             std::to_string(kMaxPlacementTries) + " tries");
}

/// Scene with one object per material category, in shuffled order, each
/// with a random shape and random properties from its category.
inline SceneState sample_material_scene(double workspace_side,
                                        Xoshiro256ss& rng) {
  SceneState scene;
  scene.workspace_side = workspace_side;
  std::vector<Material> mats = {Material::kPlastic, Material::kWood,
                                Material::kMetal};
  shuffle(mats, rng);
  for (std::size_t i = 0; i < mats.size(); ++i) {
    ObjectState obj;
    obj.id = static_cast<int>(i);
    obj.material = mats[i];
    obj.props = sample_props(material_class(mats[i]), rng);
    obj.shape = sample_shape(rng);
    place_object(obj, scene, rng);
    scene.objects.push_back(obj);
  }
  scene.validate();
  return scene;
}

/// Scene with `count` objects, each with properties drawn from the discrete
/// 30-value grids and the chosen rows recorded on the object.
inline SceneState sample_grid_scene(int count, double workspace_side,
                                    Xoshiro256ss& rng) {
  if (count < 1) throw ConfigError("scene needs at least one object");
  SceneState scene;
  scene.workspace_side = workspace_side;
  for (int i = 0; i < count; ++i) {
    ObjectState obj;
    obj.id = i;
    int fi = 0, mi = 0;
    obj.props = sample_props_grid(rng, &fi, &mi);
    obj.friction_index = fi;
    obj.mass_index = mi;
    obj.shape = sample_shape(rng);
    place_object(obj, scene, rng);
    scene.objects.push_back(obj);
  }
  scene.validate();
  return scene;
}

}  // namespace dpn
