#pragma once

// CLI11 config reader for JSON files. Nested objects map to subcommand
// sections, the same way TOML tables do in CLI11's native reader.

#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace viewgrasp::cli {

class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const std::string name = opt->get_lnames()[0];
      if (opt->count() > 0) {
        j[name] = opt->results().size() == 1 ? nlohmann::json(opt->results()[0]) : nlohmann::json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      if (sub->get_name().empty()) continue;
      j[sub->get_name()] = nlohmann::json::parse(to_config(sub, default_also, false, ""));
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("JSON config must be an object");
    return items(j, "", {});
  }

 private:
  static std::string scalar(const nlohmann::json& v, const std::string& name) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("unsupported JSON value for '" + name + "'");
  }

  static std::vector<CLI::ConfigItem> items(const nlohmann::json& j, const std::string& name,
                                            std::vector<std::string> prefix) {
    std::vector<CLI::ConfigItem> out;
    if (j.is_object()) {
      if (!name.empty()) prefix.push_back(name);
      for (auto it = j.begin(); it != j.end(); ++it) {
        auto sub = items(*it, it.key(), prefix);
        out.insert(out.end(), sub.begin(), sub.end());
      }
      return out;
    }
    CLI::ConfigItem item;
    item.name = name;
    item.parents = prefix;
    if (j.is_array()) {
      for (const auto& v : j) item.inputs.push_back(scalar(v, name));
    } else {
      item.inputs = {scalar(j, name)};
    }
    out.push_back(std::move(item));
    return out;
  }
};

}  // namespace viewgrasp::cli
