#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "densephys/core/config.hpp"
#include "densephys/core/errors.hpp"
#include "densephys/core/rng.hpp"
#include "densephys/core/types.hpp"
#include "densephys/simkit/actions.hpp"
#include "densephys/simkit/simkit.hpp"

namespace dpn {

/// Slot layout of the encoded action vector.  The base encoding is 26 wide;
/// action_width 37 appends zero padding.
///   [0..2]   action type, one-hot (slide, collide, slow-push)
///   [3..18]  launch or push direction, one-hot over 16 directions
///   [19..22] launch speed or push length, one-hot over 4 rows
///   [23..24] ramp side, one-hot (slot 23: side -1, slot 24: side +1)
///   [25]     target y-coordinate, normalised to [0, 1]
inline constexpr int kActionBaseWidth = 26;
inline constexpr int kTypeOffset = 0;
inline constexpr int kDirOffset = 3;
inline constexpr int kSpeedOffset = 19;
inline constexpr int kSideOffset = 23;
inline constexpr int kTargetYSlot = 25;

struct ActionVector {
  std::vector<float> values;

  int width() const { return static_cast<int>(values.size()); }
};

/// Encodes an action against the scene it applies to.  Slots that do not
/// apply to the action's type stay zero; the target-y slot is set for every
/// type because each mechanism addresses its target by y-coordinate.
inline ActionVector encode_action(const ActionSpec& action,
                                  const SceneState& scene,
                                  const RunConfig& cfg) {
  ActionVector vec;
  vec.values.assign(cfg.action_width, 0.0f);
  const ObjectState* target = scene.find(target_of(action));
  if (!target)
    throw ActionInvalidError("no object with id " +
                             std::to_string(target_of(action)));
  const double y_norm =
      (target->position.y + scene.workspace_side * 0.5) /
      scene.workspace_side;
  vec.values[kTargetYSlot] = static_cast<float>(y_norm);
  if (const auto* slide = std::get_if<SlideAction>(&action)) {
    vec.values[kTypeOffset + 0] = 1.0f;
    vec.values[kDirOffset + slide->dir_index] = 1.0f;
    vec.values[kSpeedOffset + slide->speed_index] = 1.0f;
  } else if (const auto* coll = std::get_if<CollideAction>(&action)) {
    vec.values[kTypeOffset + 1] = 1.0f;
    vec.values[kSideOffset + (coll->side > 0 ? 1 : 0)] = 1.0f;
  } else {
    const auto& push = std::get<SlowPushAction>(action);
    vec.values[kTypeOffset + 2] = 1.0f;
    vec.values[kDirOffset + push.dir_index] = 1.0f;
    vec.values[kSpeedOffset + push.len_index] = 1.0f;
  }
  return vec;
}

namespace detail {

inline int one_hot_index(const ActionVector& vec, int offset, int count,
                         const char* what) {
  int found = -1;
  for (int i = 0; i < count; ++i) {
    const float v = vec.values[offset + i];
    if (v != 0.0f && v != 1.0f)
      throw FormatError(std::string("action vector ") + what +
                        " slot is not 0/1");
    if (v == 1.0f) {
      if (found >= 0)
        throw FormatError(std::string("action vector ") + what +
                          " has two hot slots");
      found = i;
    }
  }
  if (found < 0)
    throw FormatError(std::string("action vector ") + what +
                      " has no hot slot");
  return found;
}

}  // namespace detail

/// Inverts encode_action.  The target is recovered as the scene object
/// whose y-coordinate is closest to the decoded target-y slot.
inline ActionSpec decode_action(const ActionVector& vec,
                                const SceneState& scene,
                                const RunConfig& cfg) {
  if (vec.width() != cfg.action_width)
    throw FormatError("action vector has width " +
                      std::to_string(vec.width()) + ", expected " +
                      std::to_string(cfg.action_width));
  for (int i = kActionBaseWidth; i < vec.width(); ++i)
    if (vec.values[i] != 0.0f)
      throw FormatError("action vector padding is not zero");
  if (scene.objects.empty())
    throw ActionInvalidError("cannot decode against an empty scene");

  const double y =
      vec.values[kTargetYSlot] * scene.workspace_side -
      scene.workspace_side * 0.5;
  int target_id = scene.objects.front().id;
  double best = 1e30;
  for (const auto& obj : scene.objects) {
    const double d = std::abs(obj.position.y - y);
    if (d < best) {
      best = d;
      target_id = obj.id;
    }
  }

  const int type = detail::one_hot_index(vec, kTypeOffset, 3, "type");
  if (type == 0) {
    SlideAction a;
    a.target_id = target_id;
    a.dir_index =
        detail::one_hot_index(vec, kDirOffset, kDirectionCount, "direction");
    a.speed_index = detail::one_hot_index(
        vec, kSpeedOffset, static_cast<int>(kLaunchSpeeds.size()), "speed");
    return a;
  }
  if (type == 1) {
    CollideAction a;
    a.target_id = target_id;
    a.side = detail::one_hot_index(vec, kSideOffset, 2, "side") == 1 ? 1 : -1;
    return a;
  }
  SlowPushAction a;
  a.target_id = target_id;
  a.dir_index =
      detail::one_hot_index(vec, kDirOffset, kDirectionCount, "direction");
  a.len_index = detail::one_hot_index(
      vec, kSpeedOffset, static_cast<int>(kPushLengths.size()), "length");
  return a;
}

/// Interaction policy that balances coverage over (action type, object)
/// pairs: a pair chosen a times has weight (1/2)^a, so under-used pairs are
/// exponentially preferred while every pair keeps positive probability.
class BalancedRandomPolicy {
 public:
  BalancedRandomPolicy(std::vector<ActionKind> kinds, int n_objects)
      : kinds_(std::move(kinds)), n_objects_(n_objects) {
    if (kinds_.empty()) throw ConfigError("policy needs at least one kind");
    if (n_objects_ < 1) throw ConfigError("policy needs at least one object");
    counts_.assign(kinds_.size() * n_objects_, 0);
  }

  const std::vector<ActionKind>& kinds() const { return kinds_; }
  int count(int kind_idx, int obj_idx) const {
    return counts_[kind_idx * n_objects_ + obj_idx];
  }

  /// Selection probabilities, indexed kind-major like count().
  std::vector<double> probabilities() const {
    std::vector<double> p(counts_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      p[i] = std::pow(0.5, counts_[i]);
      total += p[i];
    }
    for (auto& v : p) v /= total;
    return p;
  }

  /// Draws a (kind, object) pair and records the usage.  `masked` entries
  /// (same indexing) are excluded; throws NoValidActionError if everything
  /// is masked.
  std::pair<int, int> select(Xoshiro256ss& rng,
                             const std::vector<std::uint8_t>& masked = {}) {
    double total = 0.0;
    std::vector<double> w(counts_.size(), 0.0);
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (!masked.empty() && masked[i]) continue;
      w[i] = std::pow(0.5, counts_[i]);
      total += w[i];
    }
    if (total <= 0.0)
      throw NoValidActionError("every (kind, object) pair is masked");
    double u = rng.uniform01() * total;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      if (u < w[i]) {
        pick = i;
        break;
      }
      u -= w[i];
      pick = i;
    }
    ++counts_[pick];
    return {static_cast<int>(pick) / n_objects_,
            static_cast<int>(pick) % n_objects_};
  }

 private:
  std::vector<ActionKind> kinds_;
  int n_objects_;
  std::vector<int> counts_;
};

inline constexpr int kMaxParameterTries = 100;

/// Draws action parameters for a chosen kind and target until step_scene
/// accepts them.  Throws NoValidActionError after kMaxParameterTries
/// rejections.
inline ActionSpec sample_parameters(ActionKind kind, int target_id,
                                    const SceneState& scene,
                                    const RunConfig& cfg, Xoshiro256ss& rng) {
  for (int attempt = 0; attempt < kMaxParameterTries; ++attempt) {
    ActionSpec action;
    switch (kind) {
      case ActionKind::kSlide: {
        SlideAction a;
        a.target_id = target_id;
        a.dir_index = static_cast<int>(rng.uniform_index(kDirectionCount));
        a.speed_index =
            static_cast<int>(rng.uniform_index(kLaunchSpeeds.size()));
        action = a;
        break;
      }
      case ActionKind::kCollide: {
        CollideAction a;
        a.target_id = target_id;
        a.side = rng.bernoulli(0.5) ? 1 : -1;
        action = a;
        break;
      }
      case ActionKind::kSlowPush: {
        SlowPushAction a;
        a.target_id = target_id;
        a.dir_index = static_cast<int>(rng.uniform_index(kDirectionCount));
        a.len_index =
            static_cast<int>(rng.uniform_index(kPushLengths.size()));
        action = a;
        break;
      }
    }
    if (try_step(scene, action, cfg, nullptr)) return action;
  }
  throw NoValidActionError(
      std::string("no admissible ") + to_string(kind) + " for object " +
      std::to_string(target_id) + " after " +
      std::to_string(kMaxParameterTries) + " tries");
}

/// One policy step: select a (kind, object) pair, then sample parameters.
/// Pairs whose parameter sampling fails are masked out for this step only;
/// the error propagates only if every pair fails.
inline ActionSpec policy_step(BalancedRandomPolicy& policy,
                              const SceneState& scene, const RunConfig& cfg,
                              Xoshiro256ss& rng) {
  const int kinds = static_cast<int>(policy.kinds().size());
  const int objects = static_cast<int>(scene.objects.size());
  std::vector<std::uint8_t> masked(kinds * objects, 0);
  for (;;) {
    const auto [kind_idx, obj_idx] = policy.select(rng, masked);
    const int target_id = scene.objects[obj_idx].id;
    try {
      return sample_parameters(policy.kinds()[kind_idx], target_id, scene,
                               cfg, rng);
    } catch (const NoValidActionError&) {
      masked[kind_idx * objects + obj_idx] = 1;
    }
  }
}

/// Parses a policy name: "all" or a comma-separated subset of
/// slide,collide,slow-push.
inline std::vector<ActionKind> parse_policy_kinds(const std::string& name) {
  if (name == "all")
    return {ActionKind::kSlide, ActionKind::kCollide, ActionKind::kSlowPush};
  std::vector<ActionKind> kinds;
  std::string::size_type pos = 0;
  while (pos <= name.size()) {
    const auto comma = name.find(',', pos);
    const std::string part =
        name.substr(pos, comma == std::string::npos ? std::string::npos
                                                    : comma - pos);
    if (part.empty()) throw ConfigError("empty policy component in " + name);
    const ActionKind kind = action_kind_from_string(part);
    if (std::find(kinds.begin(), kinds.end(), kind) != kinds.end())
      throw ConfigError("policy kind repeated: " + part);
    kinds.push_back(kind);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return kinds;
}

inline std::string policy_name(const std::vector<ActionKind>& kinds) {
  std::string out;
  for (const auto kind : kinds) {
    if (!out.empty()) out += ',';
    out += to_string(kind);
  }
  return out;
}

}  // namespace dpn
