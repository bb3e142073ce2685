#pragma once

#include <CLI11.hpp>

namespace itdre::cli {

/// CLI11 config reader for a single JSON document. Top-level keys map to
/// global flags, nested objects to subcommand sections.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                          std::string prefix) const override;
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

}  // namespace itdre::cli
