#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "densephys/core/config.hpp"
#include "densephys/core/rng.hpp"
#include "densephys/core/sampling.hpp"
#include "densephys/data/episode.hpp"
#include "densephys/policy/policy.hpp"
#include "densephys/sensor/sensor.hpp"
#include "densephys/simkit/simkit.hpp"

namespace dpn {

/// Recipe for one dataset: how many episodes, how long each is, what kind of
/// scene it plays out on, and which action kinds the policy may use.
struct GenSpec {
  int episodes = 1;
  int steps = 10;
  int objects = 1;
  bool material_scene = false;
  std::vector<ActionKind> kinds = {ActionKind::kSlide, ActionKind::kCollide,
                                   ActionKind::kSlowPush};
  std::uint64_t master_seed = 0;
};

inline constexpr int kMaxEpisodeTries = 50;

/// Plays out one policy-driven episode and records every step.  Episode
/// `index` draws from its own seed stream, so any episode can be regenerated
/// alone and regeneration is byte-identical regardless of scheduling.  A
/// scene can wedge itself (every remaining action invalid for every object);
/// such episodes are abandoned and redrawn from a retry stream.
inline EpisodeData generate_episode(const RunConfig& cfg, const GenSpec& spec,
                                    std::uint64_t index) {
  for (int attempt = 0; attempt < kMaxEpisodeTries; ++attempt) {
    std::string tag = "gen/ep/" + std::to_string(index);
    if (attempt > 0) tag += "/retry/" + std::to_string(attempt);
    auto rng = seeded_rng(spec.master_seed, tag);
    SceneState scene =
        spec.material_scene
            ? sample_material_scene(cfg.workspace_side, rng)
            : sample_grid_scene(spec.objects, cfg.workspace_side, rng);

    EpisodeData ep;
    ep.grid = static_cast<std::uint32_t>(cfg.grid_size);
    ep.action_width = static_cast<std::uint32_t>(cfg.action_width);
    ep.seed = fnv1a64(tag, SplitMix64(spec.master_seed).next());
    for (const auto& obj : scene.objects) {
      ObjectLabel label;
      label.id = obj.id;
      if (obj.friction_index) label.friction_index = *obj.friction_index;
      if (obj.mass_index) label.mass_index = *obj.mass_index;
      if (obj.material) label.material = to_string(*obj.material);
      ep.objects.push_back(std::move(label));
    }

    const GridSpec gs = GridSpec::from_config(cfg);
    BalancedRandomPolicy policy(spec.kinds,
                                static_cast<int>(scene.objects.size()));
    try {
      for (int t = 0; t < spec.steps; ++t) {
        const ActionSpec action = policy_step(policy, scene, cfg, rng);
        const Transition tr = step_scene(scene, action, cfg);
        StepRecord rec;
        rec.kind = to_string(kind_of(action));
        rec.target = target_of(action);
        rec.displacement = tr.displacement_of(rec.target);
        rec.avec = encode_action(action, scene, cfg).values;
        rec.depth_before = render_depth(scene, gs).values;
        rec.flow = gt_flow(tr, gs).values;
        ep.steps.push_back(std::move(rec));
        scene = tr.after;
      }
    } catch (const NoValidActionError&) {
      continue;
    }
    ep.final_depth = render_depth(scene, gs).values;
    return ep;
  }
  throw NoValidActionError("episode " + std::to_string(index) +
                           " wedged on every attempt");
}

inline std::string episode_filename(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ep_%05llu.dpsq",
                static_cast<unsigned long long>(index));
  return buf;
}

/// Writes a dataset directory: one DPSQ file per episode plus a manifest
/// recording the generating configuration.  Episodes are generated across
/// `threads` workers; the output bytes do not depend on the thread count.
inline void write_dataset(const std::string& dir, const RunConfig& cfg,
                          const GenSpec& spec, int threads = 1) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int n = spec.episodes;
  threads = std::max(1, std::min(threads, n));
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += threads) {
          const EpisodeData ep =
              generate_episode(cfg, spec, static_cast<std::uint64_t>(i));
          write_episode((fs::path(dir) / episode_filename(i)).string(), ep);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);

  nlohmann::json manifest;
  manifest["format"] = "DPSQ/1";
  manifest["config"] = cfg.serialize();
  manifest["config_hash"] = cfg.hash();
  manifest["master_seed"] = spec.master_seed;
  manifest["episodes"] = spec.episodes;
  manifest["steps"] = spec.steps;
  manifest["objects"] = spec.objects;
  manifest["material_scene"] = spec.material_scene;
  manifest["policy"] = policy_name(spec.kinds);
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out)
    throw FormatError("dataset: cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

/// Loads every episode listed by a dataset directory, in index order.
inline std::vector<EpisodeData> read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw FormatError("dataset: missing manifest in " + dir);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset: bad manifest: ") + e.what());
  }
  const int n = manifest.at("episodes").get<int>();
  std::vector<EpisodeData> episodes;
  episodes.reserve(n);
  for (int i = 0; i < n; ++i)
    episodes.push_back(read_episode(
        (fs::path(dir) / episode_filename(static_cast<std::uint64_t>(i)))
            .string()));
  return episodes;
}

}  // namespace dpn
