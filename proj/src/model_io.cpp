#include "itdre/model_io.hpp"

#include "itdre/errors.hpp"

#include <fmt/format.h>
#include <sodium.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace itdre {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void to_little_endian(unsigned char* bytes) {
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(double));
    }
}

using json = nlohmann::json;

json kernel_to_json(const KernelSpec& k) {
    if (k.is_gaussian()) {
        return {{"type", "gaussian"}, {"bandwidth", k.bandwidth()}};
    }
    return {{"type", "periodic_sobolev"}, {"order", k.order()}};
}

KernelSpec kernel_from_json(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "gaussian") {
        return KernelSpec::gaussian(j.at("bandwidth").get<double>());
    }
    if (type == "periodic_sobolev") {
        return KernelSpec::periodic_sobolev(j.at("order").get<int>());
    }
    throw InvalidInput(fmt::format("model: unknown kernel type '{}'", type));
}

}  // namespace

std::string encode_doubles(const double* data, std::size_t count) {
    std::vector<unsigned char> bytes(count * sizeof(double));
    for (std::size_t i = 0; i < count; ++i) {
        std::memcpy(bytes.data() + i * sizeof(double), data + i, sizeof(double));
        to_little_endian(bytes.data() + i * sizeof(double));
    }
    const int variant = sodium_base64_VARIANT_ORIGINAL;
    std::string out(sodium_base64_ENCODED_LEN(bytes.size(), variant), '\0');
    sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
    out.resize(std::strlen(out.c_str()));
    return out;
}

std::vector<double> decode_doubles(const std::string& text) {
    std::vector<unsigned char> bytes(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    if (sodium_base642bin(bytes.data(), bytes.size(), text.data(), text.size(), nullptr, &len, nullptr,
                          sodium_base64_VARIANT_ORIGINAL) != 0) {
        throw InvalidInput("model: malformed base64 payload");
    }
    if (len % sizeof(double) != 0) {
        throw InvalidInput("model: base64 payload is not a whole number of doubles");
    }
    std::vector<double> out(len / sizeof(double));
    for (std::size_t i = 0; i < out.size(); ++i) {
        to_little_endian(bytes.data() + i * sizeof(double));
        std::memcpy(&out[i], bytes.data() + i * sizeof(double), sizeof(double));
    }
    return out;
}

json model_to_json(const RatioModel& model) {
    const Points& anchors = model.anchors();
    json doc;
    doc["version"] = kModelFormatVersion;
    doc["family"] = std::string(to_string(model.family()));
    doc["kernel"] = kernel_to_json(model.kernel());
    doc["weighting"] = std::string(to_string(model.weighting()));
    doc["lambda"] = model.lambda();
    doc["t"] = model.iterations();
    doc["p_count"] = model.p_count();
    doc["anchors"] = {{"rows", anchors.rows()},
                      {"cols", anchors.cols()},
                      {"data", encode_doubles(anchors.data(), static_cast<std::size_t>(anchors.size()))}};
    doc["coeffs"] = encode_doubles(model.coeffs().data(), static_cast<std::size_t>(model.coeffs().size()));
    if (model.family() == LossFamily::kulsif) {
        const Eigen::VectorXd alpha = model.q_coeffs();
        const Eigen::VectorXd beta = model.p_coeffs();
        doc["kulsif"] = {{"alpha", encode_doubles(alpha.data(), static_cast<std::size_t>(alpha.size()))},
                         {"beta", encode_doubles(beta.data(), static_cast<std::size_t>(beta.size()))}};
    } else {
        doc["kulsif"] = nullptr;
    }
    return doc;
}

RatioModel model_from_json(const json& doc) {
    try {
        const int version = doc.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw InvalidInput(fmt::format("model: unsupported format version {}", version));
        }
        const auto family = parse_family(doc.at("family").get<std::string>());
        if (!family) {
            throw InvalidInput("model: unknown loss family");
        }
        const auto weighting = parse_weighting(doc.at("weighting").get<std::string>());
        if (!weighting) {
            throw InvalidInput("model: unknown sample weighting");
        }
        const auto& a = doc.at("anchors");
        const auto rows = a.at("rows").get<Eigen::Index>();
        const auto cols = a.at("cols").get<Eigen::Index>();
        const std::vector<double> data = decode_doubles(a.at("data").get<std::string>());
        if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
            throw InvalidInput("model: anchor payload size does not match rows x cols");
        }
        auto anchors = std::make_shared<Points>(rows, cols);
        std::copy(data.begin(), data.end(), anchors->data());
        const std::vector<double> c = decode_doubles(doc.at("coeffs").get<std::string>());
        Eigen::VectorXd coeffs = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
        return RatioModel(kernel_from_json(doc.at("kernel")), *family, std::move(anchors), std::move(coeffs),
                          doc.at("lambda").get<double>(), doc.at("t").get<int>(), *weighting,
                          doc.at("p_count").get<Eigen::Index>());
    } catch (const json::exception& e) {
        throw InvalidInput(fmt::format("model: {}", e.what()));
    }
}

json report_to_json(const FitReport& report) {
    json its = json::array();
    for (const auto& r : report.iterations) {
        its.push_back({{"iteration", r.iteration},
                       {"objective", r.objective},
                       {"gradient_norm", r.gradient_norm},
                       {"tolerance", r.tolerance},
                       {"cg_iterations", r.cg_iterations},
                       {"hit_cap", r.hit_cap},
                       {"stalled", r.stalled}});
    }
    return {{"iterations", its}, {"clamp_events", report.clamp_events}, {"wall_seconds", report.wall_seconds}};
}

void save_model(const RatioModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw InvalidInput(fmt::format("cannot write model file {}", path.string()));
    }
    out << model_to_json(model).dump(2) << '\n';
}

RatioModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(ParseError::Kind::io, path.string(), 0, "cannot open model file");
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(ParseError::Kind::bad_value, path.string(), 0, e.what());
    }
    return model_from_json(doc);
}

}  // namespace itdre
