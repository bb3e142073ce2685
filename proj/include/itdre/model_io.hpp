#pragma once

#include "itdre/solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace itdre {

inline constexpr int kModelFormatVersion = 1;

/// Base64 of the little-endian IEEE-754 bytes of each value.
std::string encode_doubles(const double* data, std::size_t count);
std::vector<double> decode_doubles(const std::string& text);

/// Versioned model document:
/// {version, family, kernel, weighting, lambda, t, p_count,
///  anchors: {rows, cols, data}, coeffs, kulsif: {alpha, beta} | null}.
nlohmann::json model_to_json(const RatioModel& model);
RatioModel model_from_json(const nlohmann::json& doc);

nlohmann::json report_to_json(const FitReport& report);

void save_model(const RatioModel& model, const std::filesystem::path& path);
RatioModel load_model(const std::filesystem::path& path);

}  // namespace itdre
