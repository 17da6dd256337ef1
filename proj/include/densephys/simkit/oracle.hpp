#pragma once

#include <cmath>
#include <variant>

#include "densephys/core/config.hpp"
#include "densephys/core/types.hpp"
#include "densephys/simkit/actions.hpp"
#include "densephys/simkit/simkit.hpp"

namespace dpn {

/// Explicit-Euler reference integrator.  It reproduces the same dynamics as
/// step_scene by timestepping instead of closed forms, so the two can be
/// checked against each other.  Validity rules are not re-checked here;
/// callers pass actions that step_scene accepts.
namespace oracle {

/// Integrates a straight-line slide from speed v0 under constant
/// deceleration mu*g; returns the travelled distance.
inline double integrate_slide(double v0, double mu, double g, double dt) {
  double v = v0;
  double d = 0.0;
  while (v > 0.0) {
    d += v * dt;
    v -= mu * g * dt;
  }
  return d;
}

inline Transition step(const SceneState& scene, const ActionSpec& action,
                       const RunConfig& cfg, double dt = 1e-4) {
  const int target_id = target_of(action);
  const ObjectState* target = scene.find(target_id);
  if (!target)
    throw ActionInvalidError("no object with id " + std::to_string(target_id));

  Vec2 displacement{};
  if (const auto* slide = std::get_if<SlideAction>(&action)) {
    const double v0 = cfg.speed_scale * kLaunchSpeeds[slide->speed_index];
    const double d =
        integrate_slide(v0, target->props.friction, cfg.gravity, dt);
    const double theta = dir_theta(slide->dir_index);
    displacement = {d * std::cos(theta), d * std::sin(theta)};
  } else if (const auto* coll = std::get_if<CollideAction>(&action)) {
    // Roll-down and approach conserve speed; timestep the cylinder until it
    // touches the target's near edge, transfer momentum, then timestep the
    // target's sliding decay.
    const double v_impact = ramp_exit_speed(scene.ramp.height, cfg.gravity);
    const double contact_x =
        target->position.x +
        coll->side * (target->shape.half_x() + scene.cylinder.radius);
    double x = coll->side * scene.ramp.base_distance;
    while (coll->side > 0 ? x > contact_x : x < contact_x)
      x -= coll->side * v_impact * dt;
    const auto [v_cyl_after, v_target] =
        collide_1d(scene.cylinder.mass, v_impact, target->props.mass,
                   target->props.restitution);
    const double d =
        integrate_slide(v_target, target->props.friction, cfg.gravity, dt);
    displacement = {-coll->side * d, 0.0};
  } else {
    const auto& push = std::get<SlowPushAction>(action);
    // Constant-speed carriage; timestep until the commanded length is
    // covered, clipping the final step to land exactly on it.
    const double speed = 0.05;
    const double theta = dir_theta(push.dir_index);
    double d = 0.0;
    while (d < push.push_len()) d = std::min(d + speed * dt, push.push_len());
    displacement = {d * std::cos(theta), d * std::sin(theta)};
  }

  Transition tr;
  tr.before = scene;
  tr.after = scene;
  tr.action = action;
  tr.displacements.assign(scene.objects.size(), Vec2{});
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (scene.objects[i].id == target_id) {
      tr.displacements[i] = displacement;
      tr.after.objects[i].position = scene.objects[i].position + displacement;
    }
  }
  return tr;
}

}  // namespace oracle
}  // namespace dpn
