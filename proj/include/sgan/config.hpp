#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "sgan/inpainting.hpp"
#include "sgan/masks.hpp"
#include "sgan/training.hpp"

namespace sgan {

using ConfigValue = std::variant<bool, std::int64_t, double, std::string>;
using ConfigTable = std::map<std::string, ConfigValue>;

/// Parses a flat TOML subset: `key = value` lines with dotted keys, optional
/// `[section]` headers (prefixing later keys), `#` comments, and values that
/// are basic strings, booleans, integers or floats.
ConfigTable parse_config(const std::string& text);
ConfigTable read_config_file(const std::filesystem::path& path);

struct RunConfig {
  std::uint64_t seed = 0;
  Index resolution = 64;

  TrainConfig train;
  InpaintConfig inpaint;

  MaskKind mask = MaskKind::Central;
  double mask_fraction = 0.5625;

  std::vector<MaskKind> eval_kinds;
  int n = 5;
  int jobs = 1;

  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path out = "out";

  /// Sets one dotted key ("train.iterations", "seed", ...). Unknown keys and
  /// ill-typed values raise UsageError.
  void set(const std::string& key, const ConfigValue& value);
  void merge(const ConfigTable& table);
  /// Copies the shared fields (seed, resolution, paths) into the sections.
  void resolve();
  nlohmann::json to_json() const;
};

/// Writes the resolved config as `<dir>/<name>` (pretty JSON).
void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& dir,
                           const std::string& name = "config.resolved.json");

}  // namespace sgan
