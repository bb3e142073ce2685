#include "itdre/csv.hpp"

#include "itdre/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace itdre {

namespace {

using Kind = ParseError::Kind;

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) {
        ++b;
    }
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(std::string_view(line).substr(start)));
            return out;
        }
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
}

double parse_cell(const std::string& cell, const std::string& file, std::size_t row, const std::string& column) {
    if (cell.empty()) {
        throw ParseError(Kind::bad_value, file, row, fmt::format("empty cell in column '{}'", column));
    }
    const std::string lower = [&] {
        std::string s = cell;
        for (char& c : s) {
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        return s;
    }();
    if (lower.find("nan") != std::string::npos || lower.find("inf") != std::string::npos) {
        throw ParseError(Kind::non_finite, file, row, fmt::format("non-finite value '{}' in column '{}'", cell, column));
    }
    double v = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (*first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw ParseError(Kind::bad_value, file, row, fmt::format("cannot parse '{}' in column '{}'", cell, column));
    }
    if (!std::isfinite(v)) {
        throw ParseError(Kind::non_finite, file, row, fmt::format("non-finite value '{}' in column '{}'", cell, column));
    }
    return v;
}

struct RawCsv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

RawCsv read_raw(const std::filesystem::path& path) {
    const std::string file = path.string();
    std::ifstream in(path);
    if (!in) {
        throw ParseError(Kind::io, file, 0, "cannot open file");
    }
    RawCsv raw;
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        throw ParseError(Kind::missing_column, file, 0, "missing header");
    }
    raw.header = split_fields(line);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        ++row;
        auto fields = split_fields(line);
        if (fields.size() != raw.header.size()) {
            throw ParseError(Kind::shape_mismatch, file, row,
                             fmt::format("expected {} fields, found {}", raw.header.size(), fields.size()));
        }
        raw.rows.push_back(std::move(fields));
    }
    return raw;
}

}  // namespace

std::string format_double(double v) {
    return fmt::format("{:.17g}", v);
}

void write_dataset_csv(const std::filesystem::path& path, const Points& x_p, const Points& x_q) {
    if (x_p.cols() != x_q.cols()) {
        throw InvalidInput("dataset: P and Q dimensions differ");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput(fmt::format("cannot write {}", path.string()));
    }
    out << "label";
    for (Eigen::Index k = 0; k < x_p.cols(); ++k) {
        out << ",x" << (k + 1);
    }
    out << '\n';
    auto emit = [&](const Points& x, const char* label) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            out << label;
            for (Eigen::Index k = 0; k < x.cols(); ++k) {
                out << ',' << format_double(x(i, k));
            }
            out << '\n';
        }
    };
    emit(x_p, "1");
    emit(x_q, "-1");
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    const std::string file = path.string();
    const RawCsv raw = read_raw(path);
    if (raw.header.empty() || raw.header[0] != "label") {
        throw ParseError(Kind::missing_column, file, 0, "first column must be 'label'");
    }
    const auto d = static_cast<Eigen::Index>(raw.header.size() - 1);
    if (d < 1) {
        throw ParseError(Kind::missing_column, file, 0, "no feature columns");
    }
    std::vector<std::size_t> p_rows;
    std::vector<std::size_t> q_rows;
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const std::string& lab = raw.rows[r][0];
        if (lab == "1" || lab == "+1") {
            p_rows.push_back(r);
        } else if (lab == "-1") {
            q_rows.push_back(r);
        } else {
            throw ParseError(Kind::bad_value, file, r + 1, fmt::format("label '{}' is not 1 or -1", lab));
        }
    }
    auto fill = [&](const std::vector<std::size_t>& idx) {
        Points x(static_cast<Eigen::Index>(idx.size()), d);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (Eigen::Index k = 0; k < d; ++k) {
                x(static_cast<Eigen::Index>(i), k) =
                    parse_cell(raw.rows[idx[i]][static_cast<std::size_t>(k + 1)], file, idx[i] + 1,
                               raw.header[static_cast<std::size_t>(k + 1)]);
            }
        }
        return x;
    };
    return Dataset{fill(p_rows), fill(q_rows)};
}

IdTable read_id_table(const std::filesystem::path& path, const std::string& id_column,
                      const std::vector<std::string>& expected) {
    const std::string file = path.string();
    const RawCsv raw = read_raw(path);
    if (raw.header[0] != id_column) {
        throw ParseError(Kind::missing_column, file, 0, fmt::format("first column must be '{}'", id_column));
    }
    IdTable t;
    t.columns.assign(raw.header.begin() + 1, raw.header.end());
    if (t.columns.empty()) {
        throw ParseError(Kind::missing_column, file, 0, "no value columns");
    }
    if (!expected.empty() && t.columns != expected) {
        for (const auto& want : expected) {
            if (std::find(t.columns.begin(), t.columns.end(), want) == t.columns.end()) {
                throw ParseError(Kind::missing_column, file, 0, fmt::format("missing column '{}'", want));
            }
        }
        throw ParseError(Kind::shape_mismatch, file, 0, "unexpected value columns");
    }
    t.values.resize(static_cast<Eigen::Index>(raw.rows.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        if (raw.rows[r][0].empty()) {
            throw ParseError(Kind::bad_value, file, r + 1, "empty id");
        }
        t.ids.push_back(raw.rows[r][0]);
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                parse_cell(raw.rows[r][c + 1], file, r + 1, t.columns[c]);
        }
    }
    return t;
}

void write_id_table(const std::filesystem::path& path, const IdTable& table, const std::string& id_column) {
    if (static_cast<Eigen::Index>(table.ids.size()) != table.values.rows() ||
        static_cast<Eigen::Index>(table.columns.size()) != table.values.cols()) {
        throw InvalidInput("id table: shape does not match ids/columns");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput(fmt::format("cannot write {}", path.string()));
    }
    out << id_column;
    for (const auto& c : table.columns) {
        out << ',' << c;
    }
    out << '\n';
    for (std::size_t r = 0; r < table.ids.size(); ++r) {
        out << table.ids[r];
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
            out << ',' << format_double(table.values(static_cast<Eigen::Index>(r), c));
        }
        out << '\n';
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput(fmt::format("cannot write {}", path.string()));
    }
    out << doc.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(Kind::io, path.string(), 0, "cannot open file");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(Kind::bad_value, path.string(), 0, e.what());
    }
}

}  // namespace itdre
