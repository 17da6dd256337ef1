#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "densephys/core/errors.hpp"
#include "densephys/core/rng.hpp"

namespace dpn {

/// Run-wide settings shared by simulation, rendering, model, and training.
/// Defaults describe the desk-scale configuration that the test suite and
/// the bundled experiments run at.
struct RunConfig {
  int grid_size = 64;           // depth image is grid_size x grid_size
  double workspace_side = 1.0;  // metres, square tabletop
  double gravity = 9.81;        // m/s^2
  double speed_scale = 1.0;     // multiplies every launch speed
  int residual_depth = 8;       // residual blocks in the visual tower
  int action_width = 26;        // encoded action vector length (26 or 37)
  std::uint64_t seed = 0;
  int epochs = 10;
  int batch = 8;
  double lr0 = 1e-3;            // initial learning rate
  double lr_decay = 0.9;        // per-epoch multiplicative decay
  double beta1 = 0.9;
  double beta2 = 0.95;
  bool bptt = false;            // backpropagate through the recurrent carry

  double metres_per_pixel() const { return workspace_side / grid_size; }

  void validate() const {
    if (grid_size < 32) throw ConfigError("grid_size must be at least 32");
    if (!(workspace_side > 0.0))
      throw ConfigError("workspace_side must be positive");
    if (!(gravity > 0.0)) throw ConfigError("gravity must be positive");
    if (!(speed_scale > 0.0))
      throw ConfigError("speed_scale must be positive");
    if (residual_depth < 1)
      throw ConfigError("residual_depth must be at least 1");
    if (action_width != 26 && action_width != 37)
      throw ConfigError("action_width must be 26 or 37");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch < 1) throw ConfigError("batch must be at least 1");
    if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0))
      throw ConfigError("lr_decay must lie in (0, 1]");
    if (!(beta1 >= 0.0 && beta1 < 1.0))
      throw ConfigError("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("beta2 must lie in [0, 1)");
  }

  /// Canonical key=value rendering; also the basis for config_hash().
  std::string serialize() const {
    std::ostringstream out;
    out.precision(17);
    out << "grid_size = " << grid_size << '\n'
        << "workspace_side = " << workspace_side << '\n'
        << "gravity = " << gravity << '\n'
        << "speed_scale = " << speed_scale << '\n'
        << "residual_depth = " << residual_depth << '\n'
        << "action_width = " << action_width << '\n'
        << "seed = " << seed << '\n'
        << "epochs = " << epochs << '\n'
        << "batch = " << batch << '\n'
        << "lr0 = " << lr0 << '\n'
        << "lr_decay = " << lr_decay << '\n'
        << "beta1 = " << beta1 << '\n'
        << "beta2 = " << beta2 << '\n'
        << "bptt = " << (bptt ? "true" : "false") << '\n';
    return out.str();
  }

  std::uint64_t hash() const { return fnv1a64(serialize()); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value;
  in >> value;
  std::string rest;
  if (!in || (in >> rest && !rest.empty()))
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad value for " + key + ": '" + text + "'");
}

}  // namespace detail

/// Parses `key = value` lines.  Blank lines and lines starting with '#' are
/// ignored.  Unknown or repeated keys are errors; values are validated
/// before the config is returned.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, bool> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        " is not of the form key = value");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (seen[key])
      throw ConfigError("key repeated: " + key);
    seen[key] = true;
    if (key == "grid_size")
      cfg.grid_size = detail::parse_number<int>(key, value);
    else if (key == "workspace_side")
      cfg.workspace_side = detail::parse_number<double>(key, value);
    else if (key == "gravity")
      cfg.gravity = detail::parse_number<double>(key, value);
    else if (key == "speed_scale")
      cfg.speed_scale = detail::parse_number<double>(key, value);
    else if (key == "residual_depth")
      cfg.residual_depth = detail::parse_number<int>(key, value);
    else if (key == "action_width")
      cfg.action_width = detail::parse_number<int>(key, value);
    else if (key == "seed")
      cfg.seed = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "epochs")
      cfg.epochs = detail::parse_number<int>(key, value);
    else if (key == "batch")
      cfg.batch = detail::parse_number<int>(key, value);
    else if (key == "lr0")
      cfg.lr0 = detail::parse_number<double>(key, value);
    else if (key == "lr_decay")
      cfg.lr_decay = detail::parse_number<double>(key, value);
    else if (key == "beta1")
      cfg.beta1 = detail::parse_number<double>(key, value);
    else if (key == "beta2")
      cfg.beta2 = detail::parse_number<double>(key, value);
    else if (key == "bptt")
      cfg.bptt = detail::parse_bool(key, value);
    else
      throw ConfigError("unknown key: " + key);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace dpn
