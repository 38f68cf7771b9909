#pragma once

// JSON forms of configuration and state types.

#include "advspec/nn.hpp"
#include "json.hpp"

namespace advspec {

using Json = nlohmann::json;

Json to_json(const LayerSpec& spec);
LayerSpec layer_spec_from_json(const Json& j);

Json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);

Json to_json(const AdamOptions& options);
AdamOptions adam_options_from_json(const Json& j);

Json to_json(const AdamState& state);
AdamState adam_state_from_json(const Json& j);

// Reads `key` from an object if present, else keeps `value`. Throws
// std::invalid_argument naming `path.key` on a type mismatch.
template <class T>
void read_optional(const Json& j, const std::string& key, T& value, const std::string& path = "") {
  if (!j.contains(key)) return;
  try {
    value = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument((path.empty() ? key : path + "." + key) + ": " + e.what());
  }
}

}  // namespace advspec
