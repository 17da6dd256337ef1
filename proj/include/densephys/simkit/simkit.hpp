#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "densephys/core/config.hpp"
#include "densephys/core/errors.hpp"
#include "densephys/core/types.hpp"
#include "densephys/simkit/actions.hpp"

namespace dpn {

/// Distance a body launched at speed v slides before friction mu stops it.
inline double slide_distance(double v, double mu, double g) {
  if (v <= 0.0) return 0.0;
  return v * v / (2.0 * mu * g);
}

/// Exit speed of a uniform cylinder rolling without slipping from rest down
/// a drop of `height`: translational share of the potential energy is 2/3.
inline double ramp_exit_speed(double height, double g) {
  return std::sqrt(4.0 * g * height / 3.0);
}

/// One-dimensional impact of a moving body (mass m_c, speed v_c) on a
/// resting body (mass m_o) with restitution e.  Returns the post-impact
/// speeds {v_c_after, v_o_after} along the incoming direction.
inline std::pair<double, double> collide_1d(double m_c, double v_c,
                                            double m_o, double e) {
  const double total = m_c + m_o;
  const double v_c_after = (m_c - e * m_o) * v_c / total;
  const double v_o_after = m_c * (1.0 + e) * v_c / total;
  return {v_c_after, v_o_after};
}

/// One interaction: the scene before and after, the action taken, and each
/// object's displacement (indexed like scene.objects; only the target
/// moves).
struct Transition {
  SceneState before;
  SceneState after;
  ActionSpec action;
  std::vector<Vec2> displacements;

  const Vec2& displacement_of(int id) const {
    for (std::size_t i = 0; i < before.objects.size(); ++i)
      if (before.objects[i].id == id) return displacements[i];
    throw ActionInvalidError("no object with id " + std::to_string(id));
  }
};

namespace detail {

inline const ObjectState& require_target(const SceneState& scene, int id) {
  const ObjectState* obj = scene.find(id);
  if (!obj)
    throw ActionInvalidError("no object with id " + std::to_string(id));
  return *obj;
}

/// Rejects motions whose swept bounding circle touches another object or
/// whose end position leaves the workspace.
inline void check_path(const SceneState& scene, const ObjectState& target,
                       const Vec2& displacement) {
  ObjectState moved = target;
  moved.position = target.position + displacement;
  if (!scene.in_workspace(moved))
    throw ActionInvalidError("target would leave the workspace");
  const double r_target = target.shape.bounding_radius();
  for (const auto& other : scene.objects) {
    if (other.id == target.id) continue;
    const double gap = segment_point_distance(target.position, moved.position,
                                              other.position);
    if (gap < r_target + other.shape.bounding_radius())
      throw ActionInvalidError("swept path intersects object " +
                               std::to_string(other.id));
  }
}

/// Rejects collision launches whose cylinder would hit another object
/// before reaching the target.
inline void check_corridor(const SceneState& scene, const ObjectState& target,
                           int side) {
  for (const auto& other : scene.objects) {
    if (other.id == target.id) continue;
    const bool between = side > 0 ? other.position.x > target.position.x
                                  : other.position.x < target.position.x;
    if (!between) continue;
    const double lane = std::abs(other.position.y - target.position.y);
    if (lane < scene.cylinder.radius + other.shape.bounding_radius())
      throw ActionInvalidError("cylinder path blocked by object " +
                               std::to_string(other.id));
  }
}

inline Transition finish(const SceneState& scene, const ActionSpec& action,
                         int target_id, const Vec2& displacement) {
  Transition tr;
  tr.before = scene;
  tr.after = scene;
  tr.action = action;
  tr.displacements.assign(scene.objects.size(), Vec2{});
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (scene.objects[i].id == target_id) {
      tr.displacements[i] = displacement;
      tr.after.objects[i].position =
          scene.objects[i].position + displacement;
    }
  }
  return tr;
}

}  // namespace detail

/// Launched slide: exit speed is set by the flywheels (scaled by
/// speed_scale), so the travelled distance depends only on friction.
inline Transition apply_slide(const SceneState& scene,
                              const SlideAction& action,
                              const RunConfig& cfg) {
  const ObjectState& target = detail::require_target(scene, action.target_id);
  if (action.dir_index < 0 || action.dir_index >= kDirectionCount)
    throw ActionInvalidError("direction index out of range");
  if (action.speed_index < 0 ||
      action.speed_index >= static_cast<int>(kLaunchSpeeds.size()))
    throw ActionInvalidError("speed index out of range");
  const double v = cfg.speed_scale * kLaunchSpeeds[action.speed_index];
  const double d = slide_distance(v, target.props.friction, cfg.gravity);
  const double theta = dir_theta(action.dir_index);
  const Vec2 displacement = {d * std::cos(theta), d * std::sin(theta)};
  detail::check_path(scene, target, displacement);
  return detail::finish(scene, ActionSpec(action), action.target_id,
                        displacement);
}

/// Ramp collision: the cylinder rolls down, crosses the table at constant
/// speed, and transfers momentum; the target then slides to rest under its
/// own friction.  The cylinder is removed before the next observation.
inline Transition apply_collide(const SceneState& scene,
                                const CollideAction& action,
                                const RunConfig& cfg) {
  const ObjectState& target = detail::require_target(scene, action.target_id);
  if (action.side != 1 && action.side != -1)
    throw ActionInvalidError("side must be +1 or -1");
  detail::check_corridor(scene, target, action.side);
  const double v_impact = ramp_exit_speed(scene.ramp.height, cfg.gravity);
  const auto [v_cyl_after, v_target] =
      collide_1d(scene.cylinder.mass, v_impact, target.props.mass,
                 target.props.restitution);
  const double d = slide_distance(v_target, target.props.friction,
                                  cfg.gravity);
  const Vec2 displacement = {-action.side * d, 0.0};
  detail::check_path(scene, target, displacement);
  return detail::finish(scene, ActionSpec(action), action.target_id,
                        displacement);
}

/// Quasi-static push: displacement equals the commanded push length in the
/// commanded direction, revealing nothing about mass or friction.
inline Transition apply_slow_push(const SceneState& scene,
                                  const SlowPushAction& action,
                                  const RunConfig& cfg) {
  const ObjectState& target = detail::require_target(scene, action.target_id);
  if (action.dir_index < 0 || action.dir_index >= kDirectionCount)
    throw ActionInvalidError("direction index out of range");
  if (action.len_index < 0 ||
      action.len_index >= static_cast<int>(kPushLengths.size()))
    throw ActionInvalidError("push length index out of range");
  const double theta = dir_theta(action.dir_index);
  const double d = action.push_len();
  const Vec2 displacement = {d * std::cos(theta), d * std::sin(theta)};
  detail::check_path(scene, target, displacement);
  return detail::finish(scene, ActionSpec(action), action.target_id,
                        displacement);
}

/// Applies one action to the scene.  Pure: identical inputs always produce
/// identical transitions.  Throws ActionInvalidError for ill-formed or
/// physically inadmissible actions.
inline Transition step_scene(const SceneState& scene, const ActionSpec& action,
                             const RunConfig& cfg) {
  return std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, SlideAction>)
          return apply_slide(scene, a, cfg);
        else if constexpr (std::is_same_v<T, CollideAction>)
          return apply_collide(scene, a, cfg);
        else
          return apply_slow_push(scene, a, cfg);
      },
      action);
}

/// Non-throwing wrapper used by rejection samplers.
inline bool try_step(const SceneState& scene, const ActionSpec& action,
                     const RunConfig& cfg, Transition* out) {
  try {
    Transition tr = step_scene(scene, action, cfg);
    if (out) *out = std::move(tr);
    return true;
  } catch (const ActionInvalidError&) {
    return false;
  }
}

}  // namespace dpn
