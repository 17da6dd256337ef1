#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "densephys/core/errors.hpp"
#include "densephys/data/episode.hpp"
#include "densephys/nn/tensor.hpp"

namespace dpn {

inline constexpr char kCheckpointMagic[4] = {'D', 'P', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serialises named tensors (parameters and batch-norm buffers alike) with a
/// caller-supplied metadata object: magic, version, length-prefixed JSON
/// manifest listing name/shape/offset per tensor, 32-bit little-endian float
/// payload, CRC-32 of everything after the magic.
template <typename S>
std::vector<unsigned char> serialize_checkpoint(
    const std::vector<ParamRef<S>>& tensors, const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["meta"] = meta;
  manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    manifest["tensors"].push_back(
        {{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.size;
  }
  const std::string text = manifest.dump();

  std::vector<unsigned char> out;
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
  detail::append_u32(out, kCheckpointVersion);
  detail::append_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  std::vector<float> payload;
  payload.reserve(offset);
  for (const auto& t : tensors)
    for (std::size_t i = 0; i < t.size; ++i)
      payload.push_back(static_cast<float>(t.value[i]));
  detail::append_f32(out, payload);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, out.data() + 4, static_cast<uInt>(out.size() - 4)));
  detail::append_u32(out, crc);
  return out;
}

/// Restores tensors by name from serialised bytes.  The stored tensor set
/// must exactly match the requested one, and every shape must agree; floats
/// round-trip bit-exactly when S is float.  Returns the stored metadata.
template <typename S>
nlohmann::json deserialize_checkpoint(const std::vector<unsigned char>& bytes,
                                      std::vector<ParamRef<S>>& tensors) {
  if (bytes.size() < 16 ||
      std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic");
  if (detail::read_u32(bytes.data() + 4) != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version");
  const std::uint32_t stored_crc =
      detail::read_u32(bytes.data() + bytes.size() - 4);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, bytes.data() + 4, static_cast<uInt>(bytes.size() - 8)));
  if (crc != stored_crc) throw FormatError("checkpoint: checksum mismatch");
  const std::uint32_t text_len = detail::read_u32(bytes.data() + 8);
  if (12 + static_cast<std::size_t>(text_len) + 4 > bytes.size())
    throw FormatError("checkpoint: manifest length exceeds file");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + 12,
                                     bytes.begin() + 12 + text_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: manifest is not JSON: ") +
                      e.what());
  }

  struct Entry {
    std::vector<int> shape;
    std::size_t offset = 0;
  };
  std::map<std::string, Entry> stored;
  std::size_t total = 0;
  try {
    for (const auto& t : manifest.at("tensors")) {
      Entry e;
      e.shape = t.at("shape").get<std::vector<int>>();
      e.offset = t.at("offset").get<std::size_t>();
      std::size_t count = 1;
      for (int d : e.shape) count *= static_cast<std::size_t>(d);
      total += count;
      stored[t.at("name").get<std::string>()] = std::move(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: manifest field missing: ") +
                      e.what());
  }
  const std::size_t expected = 12 + text_len + total * sizeof(float) + 4;
  if (bytes.size() != expected)
    throw FormatError("checkpoint: payload size does not match manifest");
  if (stored.size() != tensors.size())
    throw FormatError("checkpoint: stores " + std::to_string(stored.size()) +
                      " tensors, model has " +
                      std::to_string(tensors.size()));

  const unsigned char* payload = bytes.data() + 12 + text_len;
  for (auto& t : tensors) {
    const auto it = stored.find(t.name);
    if (it == stored.end())
      throw FormatError("checkpoint: missing tensor " + t.name);
    if (it->second.shape != t.shape)
      throw FormatError("checkpoint: shape mismatch for " + t.name);
    std::vector<float> buf(t.size);
    std::memcpy(buf.data(), payload + it->second.offset * sizeof(float),
                t.size * sizeof(float));
    for (std::size_t i = 0; i < t.size; ++i)
      t.value[i] = static_cast<S>(buf[i]);
  }
  return manifest.at("meta");
}

template <typename S>
void write_checkpoint(const std::string& path,
                      const std::vector<ParamRef<S>>& tensors,
                      const nlohmann::json& meta) {
  const auto bytes = serialize_checkpoint(tensors, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw FormatError("checkpoint: cannot open " + path + " for write");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("checkpoint: write failed for " + path);
}

template <typename S>
nlohmann::json read_checkpoint(const std::string& path,
                               std::vector<ParamRef<S>>& tensors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path);
  std::vector<unsigned char> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, tensors);
}

/// Convenience over a model: parameters plus buffers, in declaration order.
template <typename Net>
auto checkpoint_tensors(Net& net) {
  auto tensors = net.params();
  for (auto& b : net.buffers()) tensors.push_back(b);
  return tensors;
}

}  // namespace dpn
