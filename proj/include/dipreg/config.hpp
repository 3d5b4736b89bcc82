#pragma once

#include "dipreg/baseline.hpp"
#include "dipreg/engine.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace dipreg {

/// Flat `key = value` configuration text: one pair per line, `#` starts a
/// comment, blank lines ignored. Keys are listed in the README.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text,
                           const std::string& origin = "<config>");
KeyValues load_key_values(const std::filesystem::path& path);

/// One parsed configuration file; the same file configures either
/// method, with `method = dip|baseline` as an optional discriminator.
struct FileConfig {
  std::optional<std::string> method;
  RunConfig run;            // dip settings
  BaselineConfig baseline;  // baseline settings
};

/// Applies key/values on top of the defaults. Unknown keys or malformed
/// values are rejected with a message naming the key.
FileConfig config_from_key_values(const KeyValues& kv);

}  // namespace dipreg
