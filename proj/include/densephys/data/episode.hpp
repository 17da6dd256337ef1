#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "densephys/core/errors.hpp"
#include "densephys/core/types.hpp"

namespace dpn {

/// Ground-truth labels for one object in a recorded episode.  Grid-sampled
/// scenes carry the 30-way property rows; material-sampled scenes carry the
/// material name instead and leave the rows at -1.
struct ObjectLabel {
  int id = 0;
  int friction_index = -1;
  int mass_index = -1;
  std::string material;
};

/// One interaction step: the action encoding, the depth image the action was
/// taken in, and the ground-truth flow to the next frame.  The follow-up
/// depth is the next step's `depth_before` (or the episode's `final_depth`
/// for the last step).
struct StepRecord {
  std::string kind;
  int target = 0;
  Vec2 displacement;
  std::vector<float> avec;
  std::vector<float> depth_before;
  std::vector<float> flow;
};

/// A recorded multi-step interaction sequence on one scene.
struct EpisodeData {
  std::uint32_t grid = 0;
  std::uint32_t action_width = 0;
  std::uint64_t seed = 0;
  std::vector<ObjectLabel> objects;
  std::vector<StepRecord> steps;
  std::vector<float> final_depth;
};

namespace detail {

inline void append_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

inline void append_f32(std::vector<unsigned char>& out,
                       const std::vector<float>& v) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  out.insert(out.end(), bytes, bytes + v.size() * sizeof(float));
}

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void read_f32(const unsigned char*& p, std::vector<float>& out,
                     std::size_t count) {
  out.resize(count);
  std::memcpy(out.data(), p, count * sizeof(float));
  p += count * sizeof(float);
}

}  // namespace detail

inline constexpr char kEpisodeMagic[4] = {'D', 'P', 'S', 'Q'};
inline constexpr std::uint32_t kEpisodeVersion = 1;

/// Serialises an episode: magic, version, length-prefixed JSON header,
/// 32-bit little-endian float payload, CRC-32 of everything after the magic.
inline std::vector<unsigned char> serialize_episode(const EpisodeData& ep) {
  nlohmann::json meta;
  meta["grid"] = ep.grid;
  meta["action_width"] = ep.action_width;
  meta["seed"] = ep.seed;
  meta["objects"] = nlohmann::json::array();
  for (const auto& obj : ep.objects)
    meta["objects"].push_back({{"id", obj.id},
                               {"friction_index", obj.friction_index},
                               {"mass_index", obj.mass_index},
                               {"material", obj.material}});
  meta["steps"] = nlohmann::json::array();
  for (const auto& step : ep.steps)
    meta["steps"].push_back({{"kind", step.kind},
                             {"target", step.target},
                             {"dx", step.displacement.x},
                             {"dy", step.displacement.y}});
  const std::string meta_text = meta.dump();

  std::vector<unsigned char> out;
  out.insert(out.end(), kEpisodeMagic, kEpisodeMagic + 4);
  detail::append_u32(out, kEpisodeVersion);
  detail::append_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out.insert(out.end(), meta_text.begin(), meta_text.end());
  for (const auto& step : ep.steps) {
    detail::append_f32(out, step.avec);
    detail::append_f32(out, step.depth_before);
    detail::append_f32(out, step.flow);
  }
  detail::append_f32(out, ep.final_depth);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, out.data() + 4, static_cast<uInt>(out.size() - 4)));
  detail::append_u32(out, crc);
  return out;
}

inline EpisodeData parse_episode(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kEpisodeMagic, 4) != 0)
    throw FormatError("episode: bad magic");
  const std::uint32_t version = detail::read_u32(bytes.data() + 4);
  if (version != kEpisodeVersion)
    throw FormatError("episode: unsupported version " +
                      std::to_string(version));
  const std::uint32_t stored_crc =
      detail::read_u32(bytes.data() + bytes.size() - 4);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, bytes.data() + 4, static_cast<uInt>(bytes.size() - 8)));
  if (crc != stored_crc) throw FormatError("episode: checksum mismatch");
  const std::uint32_t meta_len = detail::read_u32(bytes.data() + 8);
  if (12 + static_cast<std::size_t>(meta_len) + 4 > bytes.size())
    throw FormatError("episode: header length exceeds file");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.begin() + 12,
                                 bytes.begin() + 12 + meta_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("episode: header is not valid JSON: ") +
                      e.what());
  }

  EpisodeData ep;
  try {
    ep.grid = meta.at("grid").get<std::uint32_t>();
    ep.action_width = meta.at("action_width").get<std::uint32_t>();
    ep.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& obj : meta.at("objects")) {
      ObjectLabel label;
      label.id = obj.at("id").get<int>();
      label.friction_index = obj.at("friction_index").get<int>();
      label.mass_index = obj.at("mass_index").get<int>();
      label.material = obj.at("material").get<std::string>();
      ep.objects.push_back(std::move(label));
    }
    for (const auto& step : meta.at("steps")) {
      StepRecord rec;
      rec.kind = step.at("kind").get<std::string>();
      rec.target = step.at("target").get<int>();
      rec.displacement = {step.at("dx").get<double>(),
                          step.at("dy").get<double>()};
      ep.steps.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("episode: header field missing: ") +
                      e.what());
  }

  const std::size_t pixels =
      static_cast<std::size_t>(ep.grid) * static_cast<std::size_t>(ep.grid);
  const std::size_t per_step = ep.action_width + 3 * pixels;
  const std::size_t floats = ep.steps.size() * per_step + pixels;
  const std::size_t expected = 12 + meta_len + floats * sizeof(float) + 4;
  if (bytes.size() != expected)
    throw FormatError("episode: payload size " + std::to_string(bytes.size()) +
                      " does not match header (expected " +
                      std::to_string(expected) + ")");

  const unsigned char* p = bytes.data() + 12 + meta_len;
  for (auto& step : ep.steps) {
    detail::read_f32(p, step.avec, ep.action_width);
    detail::read_f32(p, step.depth_before, pixels);
    detail::read_f32(p, step.flow, 2 * pixels);
  }
  detail::read_f32(p, ep.final_depth, pixels);
  return ep;
}

inline void write_episode(const std::string& path, const EpisodeData& ep) {
  const auto bytes = serialize_episode(ep);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("episode: cannot open " + path + " for write");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("episode: write failed for " + path);
}

inline EpisodeData read_episode(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("episode: cannot open " + path);
  std::vector<unsigned char> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_episode(bytes);
}

}  // namespace dpn
