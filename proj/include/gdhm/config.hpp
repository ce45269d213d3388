#pragma once

#include <json.hpp>

#include <string>

#include "gdhm/common.hpp"

namespace gdhm {

// JSON-backed configuration with dotted-path access and CLI overrides
// ("--set trainer.total_iters=10").
class Config {
public:
  Config() : j_(nlohmann::json::object()) {}
  explicit Config(nlohmann::json j) : j_(std::move(j)) {}

  static Config from_file(const std::string& path);
  void save(const std::string& path) const;

  // Deep-merges `overlay` on top of this config (objects merged recursively,
  // scalars/arrays replaced).
  void merge(const Config& overlay);

  template <typename T>
  T get(const std::string& dotted, const T& fallback) const {
    const nlohmann::json* n = find(dotted);
    if (!n || n->is_null()) return fallback;
    try {
      return n->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw data_error("config: bad type at '" + dotted + "'");
    }
  }

  bool has(const std::string& dotted) const { return find(dotted) != nullptr; }
  const nlohmann::json* find(const std::string& dotted) const;
  void set(const std::string& dotted, nlohmann::json value);

  // Parses value as JSON when possible, falling back to a raw string.
  void set_from_string(const std::string& dotted, const std::string& value);

  uint64_t hash() const { return fnv1a_str(j_.dump()); }
  std::string dump(int indent = 2) const { return j_.dump(indent); }
  const nlohmann::json& json() const { return j_; }

private:
  nlohmann::json j_;
};

}  // namespace gdhm
