#include <gtest/gtest.h>

#include <sstream>

#include "compscore/compscore.hpp"
#include "compscore/io.hpp"

using namespace compscore;

namespace {

LoadedData load_string(const std::string& s, DataKind k = DataKind::automatic) {
    std::istringstream in(s);
    return load_table(parse_csv(in), k);
}

} // namespace

TEST(Csv, ProportionsDetected) {
    const auto d = load_string("a,b,c\n0.2,0.3,0.5\n0.1,0.1,0.8\n");
    EXPECT_FALSE(d.is_counts());
    EXPECT_EQ(d.proportions.n(), 2);
    EXPECT_EQ(d.proportions.names()[2], "c");
    EXPECT_DOUBLE_EQ(d.proportions.proportions()(1, 2), 0.8);
}

TEST(Csv, CountsDetectedFromIntegers) {
    const auto d = load_string("a,b\n3,7\n0,10\n");
    ASSERT_TRUE(d.is_counts());
    EXPECT_EQ(d.counts->totals()(0), 10);
    EXPECT_DOUBLE_EQ(d.proportions.proportions()(0, 0), 0.3);
}

TEST(Csv, OneHotRowsStayProportions) {
    // integral but every row sums to one
    const auto d = load_string("a,b\n1,0\n0,1\n");
    EXPECT_FALSE(d.is_counts());
}

TEST(Csv, TotalColumnMustMatch) {
    const auto d = load_string("a,b,total\n3,7,10\n", DataKind::automatic);
    ASSERT_TRUE(d.is_counts());
    EXPECT_EQ(d.proportions.p(), 2);
    EXPECT_THROW(load_string("a,b,total\n3,7,11\n"), Error);
}

TEST(Csv, MalformedInput) {
    EXPECT_THROW(load_string("a,b\n0.5,x\n"), Error);
    EXPECT_THROW(load_string("a,b\n0.5\n"), Error);
    EXPECT_THROW(load_string("a,b\n"), Error);
    EXPECT_THROW(load_string("a,b\n-0.5,1.5\n"), Error);
}

TEST(RowList, ParsesRangesOneBased) {
    const auto r = parse_row_list("3,17,40-42,3");
    const std::vector<Eigen::Index> expect{2, 16, 39, 40, 41};
    EXPECT_EQ(r, expect);
    EXPECT_TRUE(parse_row_list("").empty());
    EXPECT_THROW(parse_row_list("0"), Error);
    EXPECT_THROW(parse_row_list("5-2"), Error);
    EXPECT_THROW(parse_row_list("a"), Error);
}

TEST(FitConfig, Defaults) {
    const auto c = fit_config_from_json(json{{"schema_version", 1}});
    EXPECT_EQ(c.family, Family::hybrid);
    EXPECT_EQ(c.weight_kind, WeightKind::capped_min);
    EXPECT_FALSE(c.cap.has_value());
    EXPECT_EQ(c.estimator, "continuous");
}

TEST(FitConfig, ParsesWeightAndBeta) {
    const auto c = fit_config_from_json(json::parse(R"({"schema_version": 1, "beta": [-0.8, -0.85, 0, -0.2, 0],
        "estimate_linear": false, "weight": {"kind": "capped-product", "a_c": 0.001}})"));
    ASSERT_TRUE(c.beta.has_value());
    EXPECT_EQ(c.beta->size(), 5);
    EXPECT_FALSE(c.estimate_linear);
    EXPECT_EQ(c.weight_kind, WeightKind::capped_product);
    EXPECT_DOUBLE_EQ(*c.cap, 0.001);
    const auto a = fit_config_from_json(json::parse(R"({"schema_version": 1, "weight": {"a_c": "auto"}})"));
    EXPECT_FALSE(a.cap.has_value());
}

TEST(FitConfig, RejectsBadInput) {
    EXPECT_THROW(fit_config_from_json(json{{"schema_version", 1}, {"colour", "red"}}), Error);
    EXPECT_THROW(fit_config_from_json(json::object()), Error);
    EXPECT_THROW(fit_config_from_json(json{{"schema_version", 2}}), Error);
    EXPECT_THROW(fit_config_from_json(json{{"schema_version", 1}, {"estimator", "magic"}}), Error);
    EXPECT_THROW(fit_config_from_json(json::parse(R"({"schema_version": 1, "weight": {"a_c": "big"}})")), Error);
    EXPECT_THROW(fit_config_from_json(json::parse(R"({"schema_version": 1, "weight": {"kind": "max"}})")), Error);
}

TEST(ModelJson, RoundTrip) {
    const auto& pr = preset(6);
    const std::vector<std::string> names{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
    const json j = model_to_json(pr.spec, names);
    const auto [back, got] = fitted_model_from_json(j);
    EXPECT_EQ(got, names);
    EXPECT_EQ(back.family, pr.spec.family);
    EXPECT_EQ(back.packed(), pr.spec.packed());
    EXPECT_EQ(back.estimated, pr.spec.estimated);
    const json again = model_to_json(back, got);
    EXPECT_EQ(again.dump(), j.dump());
}

TEST(ModelJson, FixedLabelsRoundTrip) {
    const auto& pr = preset(3);
    const auto back = model_from_json(model_to_json(pr.spec));
    EXPECT_EQ(back.estimated, pr.spec.estimated);
    EXPECT_THROW(model_from_json(json::parse(R"({"family": "dirichlet", "shape": [1, 2], "fixed": ["zz"]})")), Error);
}

TEST(StudyConfigJson, PresetAndOverrides) {
    const auto f = study_config_from_json(json::parse(
        R"({"schema_version": 1, "model": 3, "estimators": [1, 2], "n": 500, "replicates": 12, "seed": 9})"));
    EXPECT_EQ(f.config.n, 500);
    EXPECT_EQ(f.config.replicates, 12);
    EXPECT_EQ(f.config.seed, 9u);
    EXPECT_EQ(f.config.estimators, (std::vector<int>{1, 2}));
    EXPECT_THROW(study_config_from_json(json::parse(R"({"schema_version": 1, "model": 3, "bogus": 1})")), Error);
    EXPECT_THROW(study_config_from_json(json::parse(R"({"schema_version": 1})")), Error);
}

TEST(StudyConfigJson, CustomModelWithCounts) {
    const auto f = study_config_from_json(json::parse(R"({"schema_version": 1,
        "model": {"family": "truncated-gaussian", "shape": [0, 0, 0], "interaction": [[-20, 2], [2, -30]]},
        "m": 500, "estimators": [1, 5]})"));
    EXPECT_TRUE(f.config.discrete);
    EXPECT_EQ(f.config.total, 500);
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(-2.5), "-2.5");
    EXPECT_EQ(format_double(std::nan("")), "nan");
    const double x = 1.0 / 3.0;
    EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(FitOutput, TableAndJsonAgree) {
    const auto& pr = preset(9);
    Rng rng(2, 0);
    const auto data = sample_model(pr.spec, 2000, rng);
    FitOptions o;
    o.weight = WeightSpec::make(WeightKind::capped_min, pr.cap_min);
    const auto r = dirichlet_fit(data, pr.spec, o);
    std::ostringstream table;
    write_fit_table(table, r);
    std::istringstream in(table.str());
    const auto t = parse_csv(in);
    ASSERT_EQ(t.rows.size(), 10u);
    EXPECT_EQ(t.header[0], "parameter");
    const json j = fit_to_json(r, data.names(), json::object());
    EXPECT_EQ(j["parameters"].size(), 10u);
    EXPECT_DOUBLE_EQ(std::stod(t.rows[0][1]), j["parameters"][0]["estimate"].get<double>());
    EXPECT_EQ(j["estimator"], "dirichlet");
}
