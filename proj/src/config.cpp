#include "gdhm/config.hpp"

#include <fstream>
#include <sstream>

namespace gdhm {

namespace {

void merge_json(nlohmann::json& base, const nlohmann::json& overlay) {
  if (!base.is_object() || !overlay.is_object()) {
    base = overlay;
    return;
  }
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (base.contains(it.key()))
      merge_json(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string item;
  while (std::getline(ss, item, '.')) parts.push_back(item);
  return parts;
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("config: cannot open " + path);
  try {
    nlohmann::json j;
    f >> j;
    return Config(std::move(j));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("config: parse error in " + path + ": " + e.what());
  }
}

void Config::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw data_error("config: cannot write " + path);
  f << j_.dump(2) << "\n";
}

void Config::merge(const Config& overlay) { merge_json(j_, overlay.j_); }

const nlohmann::json* Config::find(const std::string& dotted) const {
  const nlohmann::json* n = &j_;
  for (const auto& part : split_path(dotted)) {
    if (!n->is_object() || !n->contains(part)) return nullptr;
    n = &(*n)[part];
  }
  return n;
}

void Config::set(const std::string& dotted, nlohmann::json value) {
  nlohmann::json* n = &j_;
  const auto parts = split_path(dotted);
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!n->contains(parts[i]) || !(*n)[parts[i]].is_object())
      (*n)[parts[i]] = nlohmann::json::object();
    n = &(*n)[parts[i]];
  }
  (*n)[parts.back()] = std::move(value);
}

void Config::set_from_string(const std::string& dotted, const std::string& value) {
  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // keep as string
  set(dotted, std::move(parsed));
}

}  // namespace gdhm
