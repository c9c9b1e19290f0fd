#pragma once

// Run configuration as a sectioned key = value text file:
//
//   seed = 42
//   [cluster]
//   delta = 10
//
// Keys are addressed as "section.key". Unknown keys are rejected.

#include <string>
#include <string_view>
#include <vector>

#include "owl/protocol.hpp"

namespace owl::config {

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// All recognised keys in serialization order.
const std::vector<std::string>& known_keys();

/// Sets one key from its textual value.
void set_value(protocol::RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_value(const protocol::RunConfig& cfg, const std::string& key);

/// Applies a "key=value" override.
void apply_override(protocol::RunConfig& cfg, std::string_view assignment);

/// Parses config text on top of the defaults.
protocol::RunConfig parse_config(std::string_view text);
protocol::RunConfig load_config(const std::string& path);

std::string serialize_config(const protocol::RunConfig& cfg);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace owl::config
