#pragma once

#include <stdexcept>
#include <string>

namespace dpn {

/// Base class for all library errors so callers can catch one type.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Configuration file is malformed or a value fails validation.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

/// An action references a missing object or would produce an invalid state
/// (target leaves the workspace, swept path intersects another object).
struct ActionInvalidError : Error {
  explicit ActionInvalidError(const std::string& msg)
      : Error("action invalid: " + msg) {}
};

/// Rejection sampling could not place the requested objects without overlap.
struct SceneTooCrowdedError : Error {
  explicit SceneTooCrowdedError(const std::string& msg)
      : Error("scene too crowded: " + msg) {}
};

/// Connected components in a rendered depth image do not match the scene's
/// object count, so pixels cannot be labeled.
struct SegmentationMismatchError : Error {
  explicit SegmentationMismatchError(const std::string& msg)
      : Error("segmentation mismatch: " + msg) {}
};

/// Parameter sampling for a chosen action type and target ran out of retries.
struct NoValidActionError : Error {
  explicit NoValidActionError(const std::string& msg)
      : Error("no valid action: " + msg) {}
};

/// A binary episode or checkpoint file is truncated, has a bad magic number,
/// fails its checksum, or declares lengths that disagree with its size.
struct FormatError : Error {
  explicit FormatError(const std::string& msg) : Error("format: " + msg) {}
};

/// Training produced a non-finite loss or parameter.
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& msg)
      : Error("divergence: " + msg) {}
};

}  // namespace dpn
