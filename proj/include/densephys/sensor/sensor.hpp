#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "densephys/core/config.hpp"
#include "densephys/core/errors.hpp"
#include "densephys/core/types.hpp"
#include "densephys/simkit/simkit.hpp"

namespace dpn {

/// Mapping between the square workspace and a square pixel grid.  Pixel
/// (row, col) covers the world cell whose centre is world_x(col),
/// world_y(row); row 0 lies at the -y edge.
struct GridSpec {
  int size = 64;
  double mpp = 1.0 / 64.0;  // metres per pixel
  double origin = -0.5;     // world coordinate of the grid's low edge

  static GridSpec from_config(const RunConfig& cfg) {
    GridSpec g;
    g.size = cfg.grid_size;
    g.mpp = cfg.metres_per_pixel();
    g.origin = -cfg.workspace_side * 0.5;
    return g;
  }

  double world_x(int col) const { return origin + (col + 0.5) * mpp; }
  double world_y(int row) const { return origin + (row + 0.5) * mpp; }
  int col_of(double x) const {
    return static_cast<int>(std::floor((x - origin) / mpp));
  }
  int row_of(double y) const {
    return static_cast<int>(std::floor((y - origin) / mpp));
  }
  int pixels() const { return size * size; }
  int index(int row, int col) const { return row * size + col; }

  bool operator==(const GridSpec&) const = default;
};

/// Top-down height image: 0 on the empty table, the object height over each
/// footprint.
struct DepthImage {
  GridSpec spec;
  std::vector<float> values;  // row-major, size*size

  float at(int row, int col) const { return values[spec.index(row, col)]; }
  float& at(int row, int col) { return values[spec.index(row, col)]; }
};

/// Dense pixel displacement field between two frames.  Plane 0 holds the
/// column displacement, plane 1 the row displacement, both in pixels.
struct FlowImage {
  GridSpec spec;
  std::vector<float> values;  // plane-major, 2*size*size

  float dcol(int row, int col) const { return values[spec.index(row, col)]; }
  float drow(int row, int col) const {
    return values[spec.pixels() + spec.index(row, col)];
  }
  float& dcol(int row, int col) { return values[spec.index(row, col)]; }
  float& drow(int row, int col) {
    return values[spec.pixels() + spec.index(row, col)];
  }
};

/// Pixel-set of one object in a frame, with its image centroid in world
/// coordinates and, once matched, the scene object it belongs to.
struct Silhouette {
  int object_id = -1;
  std::vector<std::uint8_t> mask;  // row-major, size*size, 0 or 1
  int pixel_count = 0;
  Vec2 centroid;
  int row_lo = 0, row_hi = -1, col_lo = 0, col_hi = -1;  // inclusive bbox
};

namespace detail {

/// Visits the pixels whose centres fall inside the object's footprint.
template <typename Fn>
void rasterize(const ObjectState& obj, const GridSpec& spec, Fn&& fn) {
  const double hx = obj.shape.half_x();
  const double hy = obj.shape.half_y();
  const int col_lo =
      std::max(0, spec.col_of(obj.position.x - hx));
  const int col_hi =
      std::min(spec.size - 1, spec.col_of(obj.position.x + hx));
  const int row_lo =
      std::max(0, spec.row_of(obj.position.y - hy));
  const int row_hi =
      std::min(spec.size - 1, spec.row_of(obj.position.y + hy));
  for (int r = row_lo; r <= row_hi; ++r) {
    const double dy = spec.world_y(r) - obj.position.y;
    for (int c = col_lo; c <= col_hi; ++c) {
      const double dx = spec.world_x(c) - obj.position.x;
      if (obj.shape.contains_local(dx, dy)) fn(r, c);
    }
  }
}

}  // namespace detail

inline DepthImage render_depth(const SceneState& scene, const GridSpec& spec) {
  DepthImage img;
  img.spec = spec;
  img.values.assign(spec.pixels(), 0.0f);
  for (const auto& obj : scene.objects)
    detail::rasterize(obj, spec, [&](int r, int c) {
      img.at(r, c) = static_cast<float>(kObjectHeight);
    });
  return img;
}

/// The empty-table reference frame subtracted before segmentation.
inline DepthImage render_background(const GridSpec& spec) {
  DepthImage img;
  img.spec = spec;
  img.values.assign(spec.pixels(), 0.0f);
  return img;
}

/// Default threshold for treating a pixel as foreground, metres of height
/// difference against the background frame.
inline constexpr double kSilhouetteTau = 0.5 * kObjectHeight;

/// Connected components (4-neighbourhood) of pixels that differ from the
/// background by more than tau.  Components come back unmatched
/// (object_id -1), ordered by their first pixel in row-major order.
inline std::vector<Silhouette> silhouette(const DepthImage& depth,
                                          const DepthImage& background,
                                          double tau = kSilhouetteTau) {
  if (!(depth.spec == background.spec))
    throw SegmentationMismatchError("depth and background grids differ");
  const GridSpec& spec = depth.spec;
  std::vector<std::uint8_t> fg(spec.pixels(), 0);
  for (int i = 0; i < spec.pixels(); ++i)
    fg[i] = std::abs(depth.values[i] - background.values[i]) > tau ? 1 : 0;

  std::vector<Silhouette> out;
  std::vector<int> stack;
  std::vector<std::uint8_t> seen(spec.pixels(), 0);
  for (int start = 0; start < spec.pixels(); ++start) {
    if (!fg[start] || seen[start]) continue;
    Silhouette sil;
    sil.mask.assign(spec.pixels(), 0);
    sil.row_lo = spec.size;
    sil.col_lo = spec.size;
    double sum_x = 0.0, sum_y = 0.0;
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int r = idx / spec.size;
      const int c = idx % spec.size;
      sil.mask[idx] = 1;
      ++sil.pixel_count;
      sum_x += spec.world_x(c);
      sum_y += spec.world_y(r);
      sil.row_lo = std::min(sil.row_lo, r);
      sil.row_hi = std::max(sil.row_hi, r);
      sil.col_lo = std::min(sil.col_lo, c);
      sil.col_hi = std::max(sil.col_hi, c);
      const int nbrs[4] = {idx - spec.size, idx + spec.size, idx - 1,
                           idx + 1};
      const bool row_ok[4] = {r > 0, r < spec.size - 1, c > 0,
                              c < spec.size - 1};
      for (int k = 0; k < 4; ++k) {
        if (row_ok[k] && fg[nbrs[k]] && !seen[nbrs[k]]) {
          seen[nbrs[k]] = 1;
          stack.push_back(nbrs[k]);
        }
      }
    }
    sil.centroid = {sum_x / sil.pixel_count, sum_y / sil.pixel_count};
    out.push_back(std::move(sil));
  }
  return out;
}

/// Assigns each component the id of the nearest scene object by centroid.
/// Throws SegmentationMismatchError if counts differ or the assignment is
/// not one-to-one.
inline void match_silhouettes(std::vector<Silhouette>& sils,
                              const SceneState& scene) {
  if (sils.size() != scene.objects.size())
    throw SegmentationMismatchError(
        "found " + std::to_string(sils.size()) + " components for " +
        std::to_string(scene.objects.size()) + " objects");
  std::vector<int> used(scene.objects.size(), 0);
  for (auto& sil : sils) {
    double best = 1e30;
    int best_idx = -1;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const double d = (scene.objects[i].position - sil.centroid).norm();
      if (d < best) {
        best = d;
        best_idx = static_cast<int>(i);
      }
    }
    if (used[best_idx]++)
      throw SegmentationMismatchError(
          "two components match object " +
          std::to_string(scene.objects[best_idx].id));
    sil.object_id = scene.objects[best_idx].id;
  }
}

/// Components of a rendered scene frame, matched to scene objects.
inline std::vector<Silhouette> silhouette(const DepthImage& depth,
                                          const DepthImage& background,
                                          const SceneState& scene,
                                          double tau = kSilhouetteTau) {
  std::vector<Silhouette> sils = silhouette(depth, background, tau);
  match_silhouettes(sils, scene);
  return sils;
}

/// Ground-truth flow of a transition: the rigid displacement of each moved
/// object written over its before-frame footprint, zero everywhere else.
inline FlowImage gt_flow(const Transition& tr, const GridSpec& spec) {
  FlowImage flow;
  flow.spec = spec;
  flow.values.assign(2 * spec.pixels(), 0.0f);
  for (std::size_t i = 0; i < tr.before.objects.size(); ++i) {
    const Vec2& d = tr.displacements[i];
    if (d.x == 0.0 && d.y == 0.0) continue;
    const float dc = static_cast<float>(d.x / spec.mpp);
    const float dr = static_cast<float>(d.y / spec.mpp);
    detail::rasterize(tr.before.objects[i], spec, [&](int r, int c) {
      flow.dcol(r, c) = dc;
      flow.drow(r, c) = dr;
    });
  }
  return flow;
}

/// Forward-warps a mask by a flow field with nearest-neighbour rounding;
/// pixels carried outside the grid are dropped.
inline std::vector<std::uint8_t> warp_mask(const std::vector<std::uint8_t>& mask,
                                           const FlowImage& flow) {
  const GridSpec& spec = flow.spec;
  std::vector<std::uint8_t> out(spec.pixels(), 0);
  for (int r = 0; r < spec.size; ++r) {
    for (int c = 0; c < spec.size; ++c) {
      if (!mask[spec.index(r, c)]) continue;
      const int rr = r + static_cast<int>(std::lround(flow.drow(r, c)));
      const int cc = c + static_cast<int>(std::lround(flow.dcol(r, c)));
      if (rr >= 0 && rr < spec.size && cc >= 0 && cc < spec.size)
        out[spec.index(rr, cc)] = 1;
    }
  }
  return out;
}

/// Intersection over union of two equally sized binary masks.
inline double mask_iou(const std::vector<std::uint8_t>& a,
                       const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size())
    throw SegmentationMismatchError("mask sizes differ");
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ai = a[i] != 0, bi = b[i] != 0;
    inter += ai && bi;
    uni += ai || bi;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace dpn
