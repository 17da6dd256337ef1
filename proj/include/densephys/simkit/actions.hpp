#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>

#include "densephys/core/errors.hpp"

namespace dpn {

/// Launch speeds available to the sliding launcher, metres per second at
/// unit speed scale.
inline constexpr std::array<double, 4> kLaunchSpeeds = {0.96, 1.28, 1.44,
                                                        1.6};

/// Travel lengths available to the slow pusher, metres.
inline constexpr std::array<double, 4> kPushLengths = {0.025, 0.05, 0.075,
                                                       0.1};

/// Number of evenly spaced launch directions.
inline constexpr int kDirectionCount = 16;

inline double dir_theta(int dir_index) {
  return 2.0 * std::numbers::pi * dir_index / kDirectionCount;
}

/// Launch the target from a flywheel launcher: it leaves with a known
/// velocity and decelerates under its own sliding friction.
struct SlideAction {
  int target_id = 0;
  int dir_index = 0;    // 0..kDirectionCount-1
  int speed_index = 0;  // row in kLaunchSpeeds

  bool operator==(const SlideAction&) const = default;
};

/// Roll the standard cylinder down one of the two edge ramps, aimed at the
/// target's y-coordinate; momentum transfer sets the target moving.
struct CollideAction {
  int target_id = 0;
  int side = 1;  // +1: ramp at +x, -1: ramp at -x

  bool operator==(const CollideAction&) const = default;
};

/// Quasi-static push: the target is translated by exactly the push length,
/// independent of its mass and friction.
struct SlowPushAction {
  int target_id = 0;
  int dir_index = 0;  // 0..kDirectionCount-1
  int len_index = 0;  // row in kPushLengths

  double push_len() const { return kPushLengths[len_index]; }

  bool operator==(const SlowPushAction&) const = default;
};

using ActionSpec = std::variant<SlideAction, CollideAction, SlowPushAction>;

enum class ActionKind { kSlide = 0, kCollide = 1, kSlowPush = 2 };

inline ActionKind kind_of(const ActionSpec& action) {
  if (std::holds_alternative<SlideAction>(action)) return ActionKind::kSlide;
  if (std::holds_alternative<CollideAction>(action))
    return ActionKind::kCollide;
  return ActionKind::kSlowPush;
}

inline int target_of(const ActionSpec& action) {
  return std::visit([](const auto& a) { return a.target_id; }, action);
}

inline const char* to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::kSlide: return "slide";
    case ActionKind::kCollide: return "collide";
    case ActionKind::kSlowPush: return "slow-push";
  }
  return "unknown";
}

inline ActionKind action_kind_from_string(const std::string& name) {
  if (name == "slide") return ActionKind::kSlide;
  if (name == "collide") return ActionKind::kCollide;
  if (name == "slow-push") return ActionKind::kSlowPush;
  throw ConfigError("unknown action kind: " + name);
}

}  // namespace dpn
