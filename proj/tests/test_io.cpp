#include "fixtures.hpp"

#include "itdre/csv.hpp"
#include "itdre/errors.hpp"
#include "itdre/model_io.hpp"
#include "itdre/solver.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <limits>

using namespace itdre;
using itdre::fixtures::random_points;
using itdre::fixtures::TempDir;
using itdre::fixtures::write_text;

namespace {

ParseError::Kind parse_kind(const std::filesystem::path& path) {
    try {
        read_dataset_csv(path);
    } catch (const ParseError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no ParseError for " << path;
    return ParseError::Kind::io;
}

bool bit_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

}  // namespace

TEST(DatasetCsv, RoundTripIsExact) {
    TempDir dir;
    Points xp = random_points(17, 3, 1, 0.0, 1e-7);
    const Points xq = random_points(9, 3, 2, 1e5);
    xp(0, 0) = std::numeric_limits<double>::denorm_min();
    xp(1, 1) = -0.0;
    write_dataset_csv(dir / "d.csv", xp, xq);
    const Dataset back = read_dataset_csv(dir / "d.csv");
    EXPECT_TRUE(bit_equal(back.x_p, xp));
    EXPECT_TRUE(bit_equal(back.x_q, xq));
    EXPECT_EQ(fixtures::read_text(dir / "d.csv").substr(0, 15), "label,x1,x2,x3\n");
}

TEST(DatasetCsv, InterleavedLabels) {
    TempDir dir;
    write_text(dir / "d.csv", "label,x1\n-1,0.5\n1,1.5\n+1,2\n-1, 3 \n");
    const Dataset d = read_dataset_csv(dir / "d.csv");
    EXPECT_TRUE(d.x_p == make_points({{1.5}, {2.0}}));
    EXPECT_TRUE(d.x_q == make_points({{0.5}, {3.0}}));
}

TEST(DatasetCsv, ParseErrors) {
    TempDir dir;
    write_text(dir / "header.csv", "y,x1\n1,0\n");
    EXPECT_EQ(parse_kind(dir / "header.csv"), ParseError::Kind::missing_column);
    write_text(dir / "nofeat.csv", "label\n1\n");
    EXPECT_EQ(parse_kind(dir / "nofeat.csv"), ParseError::Kind::missing_column);
    write_text(dir / "empty.csv", "");
    EXPECT_EQ(parse_kind(dir / "empty.csv"), ParseError::Kind::missing_column);
    write_text(dir / "nan.csv", "label,x1\n1,nan\n");
    EXPECT_EQ(parse_kind(dir / "nan.csv"), ParseError::Kind::non_finite);
    write_text(dir / "inf.csv", "label,x1\n1,-Infinity\n");
    EXPECT_EQ(parse_kind(dir / "inf.csv"), ParseError::Kind::non_finite);
    write_text(dir / "overflow.csv", "label,x1\n1,1e400\n");
    EXPECT_NE(parse_kind(dir / "overflow.csv"), ParseError::Kind::io);
    write_text(dir / "text.csv", "label,x1\n1,abc\n");
    EXPECT_EQ(parse_kind(dir / "text.csv"), ParseError::Kind::bad_value);
    write_text(dir / "label.csv", "label,x1\n0,1\n");
    EXPECT_EQ(parse_kind(dir / "label.csv"), ParseError::Kind::bad_value);
    write_text(dir / "ragged.csv", "label,x1,x2\n1,1,2\n-1,1\n");
    EXPECT_EQ(parse_kind(dir / "ragged.csv"), ParseError::Kind::shape_mismatch);
    EXPECT_EQ(parse_kind(dir / "missing.csv"), ParseError::Kind::io);

    try {
        read_dataset_csv(dir / "ragged.csv");
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 2u);
        EXPECT_NE(std::string(e.what()).find("ragged.csv"), std::string::npos);
    }
}

TEST(IdTable, ExpectedColumns) {
    TempDir dir;
    write_text(dir / "t.csv", "sample_id,weight\na,1\n");
    EXPECT_NO_THROW(read_id_table(dir / "t.csv", "sample_id", {"weight"}));
    EXPECT_THROW(read_id_table(dir / "t.csv", "sample_id", {"label"}), ParseError);
    EXPECT_THROW(read_id_table(dir / "t.csv", "id"), ParseError);
    write_text(dir / "blank.csv", "sample_id,weight\n,1\n");
    EXPECT_THROW(read_id_table(dir / "blank.csv"), ParseError);
}

TEST(Base64, RoundTripAndRejectsMalformed) {
    const std::vector<double> v = {0.0, -0.0, 1.0 / 3.0, std::numeric_limits<double>::max(),
                                   std::numeric_limits<double>::denorm_min(), -2.5e-300};
    const std::string text = encode_doubles(v.data(), v.size());
    const std::vector<double> back = decode_doubles(text);
    ASSERT_EQ(back.size(), v.size());
    EXPECT_EQ(std::memcmp(back.data(), v.data(), v.size() * sizeof(double)), 0);
    EXPECT_TRUE(decode_doubles(encode_doubles(nullptr, 0)).empty());
    EXPECT_EQ(encode_doubles(v.data() + 2, 0), "");
    // 1.0 in little-endian bytes
    const double one = 1.0;
    EXPECT_EQ(encode_doubles(&one, 1), "AAAAAAAA8D8=");
    EXPECT_THROW(decode_doubles("not base64!"), InvalidInput);
    EXPECT_THROW(decode_doubles("AAAA"), InvalidInput);
}

TEST(ModelJson, RoundTripIsBitIdentical) {
    const Points xp = random_points(12, 2, 3);
    const Points xq = random_points(15, 2, 4, 0.5);
    const TrainingSet data(xp, xq, KernelSpec::gaussian(0.7));
    TempDir dir;
    for (LossFamily family : {LossFamily::kulsif, LossFamily::lr, LossFamily::exp, LossFamily::sq}) {
        const RatioModel m = itdre::fit(data, family, 0.1, 2).model();
        save_model(m, dir / "m.json");
        const RatioModel back = load_model(dir / "m.json");
        EXPECT_TRUE(bit_equal(back.coeffs(), m.coeffs())) << to_string(family);
        EXPECT_TRUE(bit_equal(back.anchors(), m.anchors()));
        EXPECT_EQ(back.family(), family);
        EXPECT_EQ(back.lambda(), m.lambda());
        EXPECT_EQ(back.iterations(), 2);
        EXPECT_EQ(back.p_count(), 12);
        const Points probe = random_points(20, 2, 5);
        EXPECT_TRUE(bit_equal(back.predict_ratios(probe), m.predict_ratios(probe)));
        const auto doc = model_to_json(m);
        EXPECT_EQ(doc.at("version").get<int>(), kModelFormatVersion);
        EXPECT_EQ(doc.at("kulsif").is_null(), family != LossFamily::kulsif);
    }
    const RatioModel sob(KernelSpec::periodic_sobolev(4), LossFamily::kulsif,
                         std::make_shared<Points>(make_points({{0.1}, {0.7}})), Eigen::Vector2d(0.25, -0.5), 1e-3, 3,
                         SampleWeighting::class_balanced, 1);
    const RatioModel back = model_from_json(model_to_json(sob));
    EXPECT_TRUE(back.kernel() == sob.kernel());
    EXPECT_EQ(back.weighting(), SampleWeighting::class_balanced);
    EXPECT_EQ(back.predict_ratio(std::vector<double>{0.3}), sob.predict_ratio(std::vector<double>{0.3}));
}

TEST(ModelJson, RejectsBadDocuments) {
    const RatioModel m(KernelSpec::gaussian(1.0), LossFamily::lr, std::make_shared<Points>(make_points({{0.0}})),
                       Eigen::VectorXd::Ones(1), 0.1, 1, SampleWeighting::pooled, 1);
    auto doc = model_to_json(m);
    doc["version"] = kModelFormatVersion + 1;
    EXPECT_THROW(model_from_json(doc), InvalidInput);
    doc = model_to_json(m);
    doc["coeffs"] = "@@@";
    EXPECT_THROW(model_from_json(doc), InvalidInput);
    doc = model_to_json(m);
    doc["anchors"]["rows"] = 2;
    EXPECT_THROW(model_from_json(doc), InvalidInput);
    doc = model_to_json(m);
    doc["family"] = "hinge";
    EXPECT_THROW(model_from_json(doc), InvalidInput);
    doc = model_to_json(m);
    doc.erase("lambda");
    EXPECT_THROW(model_from_json(doc), InvalidInput);

    TempDir dir;
    write_text(dir / "bad.json", "{ not json");
    EXPECT_THROW(load_model(dir / "bad.json"), ParseError);
    EXPECT_THROW(load_model(dir / "absent.json"), ParseError);
}
