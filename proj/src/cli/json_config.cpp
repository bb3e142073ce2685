#include "json_config.hpp"

#include <json.hpp>

namespace itdre::cli {

namespace {

using json = nlohmann::json;

std::string scalar_text(const json& v, const std::string& key) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? "true" : "false";
    }
    if (v.is_number()) {
        return v.dump();
    }
    throw CLI::ConfigError(key + ": expected a string, number or boolean");
}

void collect(const json& obj, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : obj.items()) {
        if (value.is_object()) {
            auto sub = parents;
            sub.push_back(key);
            collect(value, sub, out);
            continue;
        }
        CLI::ConfigItem item;
        item.parents = parents;
        item.name = key;
        if (value.is_array()) {
            for (const auto& e : value) {
                item.inputs.push_back(scalar_text(e, key));
            }
        } else {
            item.inputs.push_back(scalar_text(value, key));
        }
        out.push_back(std::move(item));
    }
}

json option_value(const CLI::Option* opt) {
    const auto& res = opt->results();
    if (opt->get_expected_max() > 1 || res.size() > 1) {
        return res;
    }
    if (res.empty()) {
        return nullptr;
    }
    return res.front();
}

json app_to_json(const CLI::App* app) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
        if (opt->get_lnames().empty() || !opt->get_configurable()) {
            continue;
        }
        const auto& name = opt->get_lnames().front();
        if (opt->count() > 0) {
            j[name] = option_value(opt);
        } else if (!opt->get_default_str().empty()) {
            j[name] = opt->get_default_str();
        }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
        if (sub->parsed()) {
            j[sub->get_name()] = app_to_json(sub);
        }
    }
    return j;
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
    return app_to_json(app).dump(2);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
    json doc;
    try {
        doc = json::parse(input);
    } catch (const json::exception& e) {
        throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw CLI::ConfigError("config must be a JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    collect(doc, {}, items);
    return items;
}

}  // namespace itdre::cli
