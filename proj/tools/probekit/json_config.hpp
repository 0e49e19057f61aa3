#pragma once

// CLI11 config formatter for JSON files. Keys are flag names without the
// leading dashes ("data-dir" or "data_dir"). Keys at the top level apply to
// the subcommand being run; an object keyed by a subcommand name on the active
// path ({"pca": {"fit": {...}}}) overrides the outer values. Objects for
// other subcommands are ignored.

#include <istream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace probekit::cli {

class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool /*write_description*/,
                        std::string /*prefix*/) const override {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto& name = opt->get_lnames().front();
      std::vector<std::string> values = opt->reduced_results();
      if (values.empty() && default_also && !opt->get_default_str().empty()) {
        values = {opt->get_default_str()};
      }
      if (values.empty()) continue;
      if (values.size() == 1) {
        j[name] = values.front();
      } else {
        j[name] = values;
      }
    }
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::parse_error& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a JSON object");

    std::vector<std::string> path;
    for (const CLI::App* app = root_; app != nullptr;) {
      const auto subs = app->get_subcommands();
      if (subs.empty()) break;
      app = subs.front();
      path.push_back(app->get_name());
    }

    std::map<std::string, const nlohmann::json*> values;
    const nlohmann::json* level = &j;
    for (std::size_t depth = 0;; ++depth) {
      for (const auto& [key, value] : level->items()) {
        if (!value.is_object()) values[normalize(key)] = &value;
      }
      if (depth == path.size()) break;
      const auto it = level->find(path[depth]);
      if (it == level->end() || !it->is_object()) break;
      level = &*it;
    }

    std::vector<CLI::ConfigItem> items;
    for (const auto& [name, value] : values) {
      CLI::ConfigItem item;
      item.parents = path;
      item.name = name;
      if (value->is_array()) {
        for (const auto& v : *value) item.inputs.push_back(scalar(v, name));
      } else {
        item.inputs.push_back(scalar(*value, name));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string normalize(std::string key) {
    for (auto& c : key) {
      if (c == '_') c = '-';
    }
    return key;
  }

  static std::string scalar(const nlohmann::json& v, const std::string& name) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("config key '" + name + "' must hold a string, number, boolean or array");
  }

  const CLI::App* root_;
};

}  // namespace probekit::cli
