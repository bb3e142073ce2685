#include "itdre/errors.hpp"

#include <fmt/format.h>

namespace itdre {

const char* to_string(ParseError::Kind kind) {
    switch (kind) {
        case ParseError::Kind::io: return "io";
        case ParseError::Kind::missing_column: return "missing_column";
        case ParseError::Kind::shape_mismatch: return "shape_mismatch";
        case ParseError::Kind::non_finite: return "non_finite";
        case ParseError::Kind::bad_value: return "bad_value";
        case ParseError::Kind::unmatched_id: return "unmatched_id";
        case ParseError::Kind::negative_weight: return "negative_weight";
    }
    return "unknown";
}

ParseError::ParseError(Kind kind, std::string file, std::size_t row, const std::string& detail)
    : std::runtime_error(row == 0 ? fmt::format("{}: {} ({})", file, detail, to_string(kind))
                                  : fmt::format("{}:{}: {} ({})", file, row, detail, to_string(kind))),
      kind_(kind), file_(std::move(file)), row_(row) {}

}  // namespace itdre
