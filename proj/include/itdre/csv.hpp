#pragma once

#include "itdre/kernels.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace itdre {

/// Two-sample dataset; label +1 rows are P-draws, -1 rows are Q-draws.
struct Dataset {
    Points x_p;
    Points x_q;
};

/// CSV with header `label,x1,...,xd`. P rows come first. Values use %.17g so
/// reading back is exact.
void write_dataset_csv(const std::filesystem::path& path, const Points& x_p, const Points& x_q);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// CSV keyed by an id column, e.g. `sample_id,c1,...,ck`.
struct IdTable {
    std::vector<std::string> columns;  // value columns, id column excluded
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
};

/// Reads a keyed table. `id_column` must be the first header field. With a
/// nonempty `expected`, the value columns must match it exactly.
IdTable read_id_table(const std::filesystem::path& path, const std::string& id_column = "sample_id",
                      const std::vector<std::string>& expected = {});
void write_id_table(const std::filesystem::path& path, const IdTable& table,
                    const std::string& id_column = "sample_id");

/// Round-trip exact decimal form of a double.
std::string format_double(double v);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace itdre
