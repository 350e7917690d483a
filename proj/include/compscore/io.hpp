#pragma once

// CSV datasets and JSON configuration / result documents.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compscore/diagnostics.hpp"
#include "compscore/errors.hpp"
#include "compscore/model.hpp"
#include "compscore/presets.hpp"
#include "compscore/score_matching.hpp"
#include "compscore/simulation.hpp"
#include "compscore/weights.hpp"

namespace compscore {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- CSV

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

inline double parse_double(const std::string& s, std::size_t row, std::size_t col) {
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        fail(ErrorCode::invalid_data,
             "row " + std::to_string(row) + ", column " + std::to_string(col) + ": '" + s + "' is not a number");
    return v;
}

inline std::int64_t parse_count(const std::string& s, std::size_t row, std::size_t col) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        fail(ErrorCode::invalid_data,
             "row " + std::to_string(row) + ", column " + std::to_string(col) + ": '" + s + "' is not an integer count");
    return v;
}

inline bool looks_integral(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    return true;
}

} // namespace detail

inline CsvTable parse_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = detail::split_csv_line(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            fail(ErrorCode::invalid_data, "CSV row " + std::to_string(t.rows.size() + 1) + " has " +
                                              std::to_string(fields.size()) + " fields, header has " +
                                              std::to_string(t.header.size()));
        t.rows.push_back(std::move(fields));
    }
    if (!have_header) fail(ErrorCode::invalid_data, "CSV input is empty");
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::invalid_data, "cannot read '" + path + "'");
    return parse_csv(in);
}

enum class DataKind { automatic, counts, proportions };

inline DataKind parse_data_kind(const std::string& s) {
    if (s == "auto") return DataKind::automatic;
    if (s == "counts") return DataKind::counts;
    if (s == "proportions") return DataKind::proportions;
    fail(ErrorCode::configuration, "data_kind must be auto, counts or proportions");
}

struct LoadedData {
    std::optional<CountDataset> counts;
    ContinuousDataset proportions;
    bool is_counts() const { return counts.has_value(); }
};

// Counts when a `total` column is present or every entry is an integer and
// some row sums to more than one; proportions otherwise.
inline LoadedData load_table(const CsvTable& t, DataKind kind = DataKind::automatic) {
    std::vector<std::string> names;
    std::optional<std::size_t> total_col;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c] == "total") {
            if (total_col) fail(ErrorCode::invalid_data, "more than one total column");
            total_col = c;
        } else {
            names.push_back(t.header[c]);
        }
    }
    if (t.rows.empty()) fail(ErrorCode::invalid_data, "dataset must contain at least one row");
    if (kind == DataKind::automatic) {
        bool integral = true;
        for (const auto& r : t.rows)
            for (const auto& f : r) integral = integral && detail::looks_integral(f);
        bool big = false;
        if (integral) {
            for (std::size_t i = 0; i < t.rows.size() && !big; ++i) {
                std::int64_t s = 0;
                for (std::size_t c = 0; c < t.header.size(); ++c)
                    if (!total_col || c != *total_col) s += detail::parse_count(t.rows[i][c], i + 1, c + 1);
                big = s > 1;
            }
        }
        kind = (total_col || (integral && big)) ? DataKind::counts : DataKind::proportions;
    }
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    const auto p = static_cast<Eigen::Index>(names.size());
    LoadedData out;
    if (kind == DataKind::counts) {
        CountMatrix x(n, p);
        CountVector m(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index j = 0;
            for (std::size_t c = 0; c < t.header.size(); ++c) {
                const auto& f = t.rows[static_cast<std::size_t>(i)][c];
                if (total_col && c == *total_col) m(i) = detail::parse_count(f, static_cast<std::size_t>(i) + 1, c + 1);
                else x(i, j++) = detail::parse_count(f, static_cast<std::size_t>(i) + 1, c + 1);
            }
        }
        out.counts = CountDataset(std::move(x), total_col ? std::optional<CountVector>(m) : std::nullopt, names);
        out.proportions = counts_to_proportions(*out.counts);
    } else {
        if (total_col) fail(ErrorCode::invalid_data, "a total column only makes sense for count data");
        RowMatrix u(n, p);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < p; ++j)
                u(i, j) = detail::parse_double(t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                                               static_cast<std::size_t>(i) + 1, static_cast<std::size_t>(j) + 1);
        out.proportions = ContinuousDataset(std::move(u), Provenance::observed, names);
    }
    return out;
}

inline LoadedData load_data(const std::string& path, DataKind kind = DataKind::automatic) {
    return load_table(read_csv(path), kind);
}

inline std::string format_double(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline void write_proportions_csv(std::ostream& out, const RowMatrix& u, const std::vector<std::string>& names) {
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << "\n";
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        for (Eigen::Index j = 0; j < u.cols(); ++j) out << (j ? "," : "") << format_double(u(i, j));
        out << "\n";
    }
}

inline void write_counts_csv(std::ostream& out, const CountDataset& d) {
    for (std::size_t j = 0; j < d.names().size(); ++j) out << (j ? "," : "") << d.names()[j];
    out << ",total\n";
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        for (Eigen::Index j = 0; j < d.p(); ++j) out << (j ? "," : "") << d.counts()(i, j);
        out << "," << d.totals()(i) << "\n";
    }
}

// "3,17,40-42" (1-based, inclusive ranges) -> sorted 0-based indices.
inline std::vector<Eigen::Index> parse_row_list(const std::string& s) {
    std::set<Eigen::Index> rows;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto dash = item.find('-');
        auto num = [&](const std::string& x) {
            if (!detail::looks_integral(x)) fail(ErrorCode::configuration, "bad row index '" + x + "'");
            const auto v = std::stoll(x);
            if (v < 1) fail(ErrorCode::configuration, "row indices are 1-based");
            return static_cast<Eigen::Index>(v - 1);
        };
        if (dash == std::string::npos) {
            rows.insert(num(item));
        } else {
            const auto a = num(item.substr(0, dash)), b = num(item.substr(dash + 1));
            if (b < a) fail(ErrorCode::configuration, "bad row range '" + item + "'");
            for (auto r = a; r <= b; ++r) rows.insert(r);
        }
    }
    return {rows.begin(), rows.end()};
}

// ---------------------------------------------------------------- JSON helpers

namespace detail {

inline json to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
    return a;
}

inline json to_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
    return a;
}

inline Eigen::VectorXd vector_from(const json& j, const std::string& what) {
    if (!j.is_array()) fail(ErrorCode::configuration, what + " must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) fail(ErrorCode::configuration, what + " must contain only numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline Eigen::MatrixXd matrix_from(const json& j, const std::string& what) {
    if (!j.is_array()) fail(ErrorCode::configuration, what + " must be an array of rows");
    const auto r = static_cast<Eigen::Index>(j.size());
    Eigen::MatrixXd m(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        const auto row = vector_from(j[static_cast<std::size_t>(i)], what);
        if (row.size() != r) fail(ErrorCode::configuration, what + " must be square");
        m.row(i) = row.transpose();
    }
    return m;
}

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) fail(ErrorCode::configuration, where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) fail(ErrorCode::configuration, "unknown key '" + it.key() + "' in " + where);
}

inline void check_schema(const json& j, const std::string& where) {
    if (!j.contains("schema_version")) fail(ErrorCode::configuration, where + " lacks schema_version");
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != 1)
        fail(ErrorCode::configuration, where + ": unsupported schema_version (expected 1)");
}

} // namespace detail

inline json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::configuration, "cannot read '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, "'" + path + "' is not valid JSON: " + e.what());
    }
}

inline json weight_to_json(const WeightSpec& w) {
    json j;
    j["kind"] = std::string(to_string(w.kind));
    if (is_capped(w.kind)) j["a_c"] = w.cap;
    return j;
}

inline json model_to_json(const ModelSpec& m, const std::vector<std::string>& names = {}) {
    json j;
    j["family"] = std::string(to_string(m.family));
    j["p"] = m.p;
    if (!names.empty()) j["categories"] = names;
    j["interaction"] = detail::to_json(m.interaction);
    j["linear"] = detail::to_json(m.linear);
    j["shape"] = detail::to_json(m.shape);
    json fixed = json::array();
    const auto labels = m.parameter_labels();
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!m.estimated[i]) fixed.push_back(labels[i]);
    j["fixed"] = fixed;
    return j;
}

inline ModelSpec model_from_json(const json& j) {
    detail::check_keys(j, {"family", "p", "categories", "interaction", "linear", "shape", "fixed"}, "model");
    if (!j.contains("family") || !j.contains("shape")) fail(ErrorCode::configuration, "model needs family and shape");
    ModelSpec m;
    m.family = parse_family(j["family"].get<std::string>());
    m.shape = detail::vector_from(j["shape"], "shape");
    m.p = static_cast<int>(m.shape.size());
    if (j.contains("p") && j["p"].get<int>() != m.p) fail(ErrorCode::configuration, "model p disagrees with shape");
    if (m.p < 2) fail(ErrorCode::invalid_dimension, "model dimension p must be >= 2");
    m.interaction = j.contains("interaction") ? detail::matrix_from(j["interaction"], "interaction")
                                              : Eigen::MatrixXd::Zero(m.p - 1, m.p - 1);
    m.linear = j.contains("linear") ? detail::vector_from(j["linear"], "linear") : Eigen::VectorXd::Zero(m.p - 1);
    const auto labels = m.parameter_labels();
    m.estimated.assign(labels.size(), true);
    if (j.contains("fixed")) {
        for (const auto& f : j["fixed"]) {
            const auto it = std::find(labels.begin(), labels.end(), f.get<std::string>());
            if (it == labels.end()) fail(ErrorCode::configuration, "unknown parameter label '" + f.get<std::string>() + "'");
            m.estimated[static_cast<std::size_t>(it - labels.begin())] = false;
        }
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------- fit config

struct FitConfig {
    Family family = Family::hybrid;
    std::optional<Eigen::VectorXd> beta;
    bool estimate_linear = true;
    std::map<std::string, double> fixed;
    WeightKind weight_kind = WeightKind::capped_min;
    std::optional<double> cap; // empty: automatic
    double cap_quantile = 0.9;
    std::string estimator = "continuous";
    double ridge = 0.0;
    DataKind data_kind = DataKind::automatic;
    json raw;
};

inline FitConfig fit_config_from_json(const json& j) {
    detail::check_keys(j,
                       {"schema_version", "family", "beta", "estimate_linear", "fixed", "weight", "a_c_quantile",
                        "estimator", "ridge", "data_kind"},
                       "fit config");
    detail::check_schema(j, "fit config");
    FitConfig c;
    c.raw = j;
    try {
        if (j.contains("family")) c.family = parse_family(j["family"].get<std::string>());
        if (j.contains("beta")) c.beta = detail::vector_from(j["beta"], "beta");
        if (j.contains("estimate_linear")) c.estimate_linear = j["estimate_linear"].get<bool>();
        if (j.contains("fixed")) {
            if (!j["fixed"].is_object()) fail(ErrorCode::configuration, "fixed must map labels to values");
            for (auto it = j["fixed"].begin(); it != j["fixed"].end(); ++it) c.fixed[it.key()] = it.value().get<double>();
        }
        if (j.contains("weight")) {
            const auto& w = j["weight"];
            detail::check_keys(w, {"kind", "a_c"}, "weight");
            if (w.contains("kind")) c.weight_kind = parse_weight_kind(w["kind"].get<std::string>());
            if (w.contains("a_c")) {
                if (w["a_c"].is_string()) {
                    if (w["a_c"].get<std::string>() != "auto")
                        fail(ErrorCode::configuration, "weight.a_c must be a number or \"auto\"");
                } else {
                    c.cap = w["a_c"].get<double>();
                }
            }
        }
        if (j.contains("a_c_quantile")) c.cap_quantile = j["a_c_quantile"].get<double>();
        if (j.contains("estimator")) c.estimator = j["estimator"].get<std::string>();
        if (j.contains("ridge")) c.ridge = j["ridge"].get<double>();
        if (j.contains("data_kind")) c.data_kind = parse_data_kind(j["data_kind"].get<std::string>());
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("fit config: ") + e.what());
    }
    if (c.estimator != "continuous" && c.estimator != "factorial")
        fail(ErrorCode::configuration, "estimator must be continuous or factorial");
    return c;
}

// Model template for a fit of p categories: beta, mask and fixed values.
inline ModelSpec fit_model_template(const FitConfig& c, int p) {
    ModelSpec m;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(p);
    switch (c.family) {
    case Family::dirichlet:
        if (c.beta && c.beta->size() != p) fail(ErrorCode::invalid_dimension, "beta must have one entry per category");
        m = make_dirichlet(c.beta.value_or(zero));
        break;
    case Family::truncated_gaussian:
        if (c.beta && c.beta->cwiseAbs().maxCoeff() != 0.0)
            fail(ErrorCode::invalid_family, "truncated-gaussian model requires beta = 0");
        m = make_truncated_gaussian(Eigen::MatrixXd::Zero(p - 1, p - 1), Eigen::VectorXd::Zero(p - 1));
        break;
    case Family::hybrid:
        if (!c.beta) fail(ErrorCode::configuration, "hybrid fits need beta (one fixed shape value per category)");
        if (c.beta->size() != p) fail(ErrorCode::invalid_dimension, "beta must have one entry per category");
        m = make_hybrid(Eigen::MatrixXd::Zero(p - 1, p - 1), Eigen::VectorXd::Zero(p - 1), *c.beta);
        break;
    }
    if (c.family != Family::dirichlet && !c.estimate_linear) fix_linear_terms(m);
    const auto labels = m.parameter_labels();
    Eigen::VectorXd packed = m.packed();
    for (const auto& [label, value] : c.fixed) {
        const auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) fail(ErrorCode::configuration, "unknown parameter label '" + label + "' in fixed");
        const auto i = it - labels.begin();
        m.estimated[static_cast<std::size_t>(i)] = false;
        packed(i) = value;
    }
    m.unpack(packed);
    m.validate();
    return m;
}

inline json fit_to_json(const FitResult& r, const std::vector<std::string>& names, const json& config_echo) {
    json j;
    j["schema_version"] = 1;
    j["family"] = std::string(to_string(r.family));
    j["estimator"] = r.estimator;
    j["n"] = r.n;
    j["p"] = static_cast<int>(r.shape.size());
    j["categories"] = names;
    j["weight"] = weight_to_json(r.weight);
    j["ridge"] = r.ridge;
    j["condition_number"] = std::isfinite(r.condition) ? json(r.condition) : json(nullptr);
    j["scaled_condition_number"] = std::isfinite(r.scaled_condition) ? json(r.scaled_condition) : json(nullptr);
    j["objective"] = r.objective;
    j["renormalized_rows"] = r.renormalized_rows;
    json ex = json::object();
    for (const auto& [deg, c] : r.excluded_rows_by_degree) ex[std::to_string(deg)] = c;
    j["excluded_rows_by_degree"] = ex;
    const auto z = r.z_scores();
    json params = json::array();
    std::vector<std::string> free_labels;
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        json p;
        p["label"] = r.labels[i];
        p["estimate"] = r.estimate(ii);
        p["estimated"] = static_cast<bool>(r.estimated[i]);
        if (r.estimated[i]) {
            p["se"] = r.se(ii);
            p["z"] = z(ii);
            free_labels.push_back(r.labels[i]);
        } else {
            p["se"] = nullptr;
            p["z"] = nullptr;
        }
        params.push_back(p);
    }
    j["parameters"] = params;
    j["covariance_sqrt_n"] = {{"labels", free_labels}, {"matrix", detail::to_json(r.covariance)}};
    j["model"] = model_to_json(r.model(), names);
    j["config"] = config_echo;
    return j;
}

// parameter, estimate, se, estimate/SE for estimated entries.
inline void write_fit_table(std::ostream& out, const FitResult& r) {
    out << "parameter,estimate,se,estimate_over_se\n";
    const auto z = r.z_scores();
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        if (!r.estimated[i]) continue;
        const auto ii = static_cast<Eigen::Index>(i);
        out << r.labels[i] << "," << format_double(r.estimate(ii)) << "," << format_double(r.se(ii)) << ","
            << format_double(z(ii)) << "\n";
    }
}

// Accepts either a fit document (uses its "model") or a bare model object.
inline std::pair<ModelSpec, std::vector<std::string>> fitted_model_from_json(const json& j) {
    const json& m = j.contains("model") ? j["model"] : j;
    std::vector<std::string> names;
    if (m.contains("categories")) names = m["categories"].get<std::vector<std::string>>();
    return {model_from_json(m), names};
}

// ---------------------------------------------------------------- study config

struct BaselineRow {
    std::string label;
    std::string parameter;
    double se = 0.0;
    double rmse = 0.0;
    double rbias = 0.0;
};

struct StudyFile {
    StudyConfig config;
    std::optional<std::string> baseline_csv;
    json raw;
};

inline StudyFile study_config_from_json(const json& j) {
    detail::check_keys(j,
                       {"schema_version", "model", "estimators", "n", "m", "replicates", "seed", "cap_min",
                        "cap_product", "threads", "baseline_csv", "warmup"},
                       "study config");
    detail::check_schema(j, "study config");
    if (!j.contains("model")) fail(ErrorCode::configuration, "study config needs a model (preset id or object)");
    StudyFile f;
    f.raw = j;
    StudyConfig& c = f.config;
    try {
        const auto& m = j["model"];
        if (m.is_number_integer()) {
            c = StudyConfig::from_preset(m.get<int>());
        } else {
            json spec = m;
            c.discrete = false;
            if (spec.contains("discrete")) {
                c.discrete = spec["discrete"].get<bool>();
                spec.erase("discrete");
            }
            c.model = model_from_json(spec);
            c.model_label = "custom";
        }
        if (j.contains("estimators")) c.estimators = j["estimators"].get<std::vector<int>>();
        if (j.contains("n")) c.n = j["n"].get<Eigen::Index>();
        if (j.contains("m")) {
            c.total = j["m"].get<std::int64_t>();
            if (!m.is_number_integer()) c.discrete = true;
        }
        if (c.discrete && c.total < 1) c.total = 2000;
        if (j.contains("replicates")) c.replicates = j["replicates"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("cap_min")) c.cap_min = j["cap_min"].get<double>();
        if (j.contains("cap_product")) c.cap_product = j["cap_product"].get<double>();
        if (j.contains("threads")) c.threads = j["threads"].get<int>();
        if (j.contains("warmup")) c.sampler.warmup = j["warmup"].get<std::int64_t>();
        if (j.contains("baseline_csv")) f.baseline_csv = j["baseline_csv"].get<std::string>();
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("study config: ") + e.what());
    }
    c.validate();
    return f;
}

inline std::vector<BaselineRow> read_baseline_csv(const std::string& path) {
    const auto t = read_csv(path);
    const std::vector<std::string> want{"estimator", "parameter", "se", "rmse", "rbias"};
    if (t.header != want) fail(ErrorCode::configuration, "baseline CSV header must be estimator,parameter,se,rmse,rbias");
    std::vector<BaselineRow> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        out.push_back({r[0], r[1], detail::parse_double(r[2], i + 1, 3), detail::parse_double(r[3], i + 1, 4),
                       detail::parse_double(r[4], i + 1, 5)});
    }
    return out;
}

inline void write_summary_csv(std::ostream& out, const StudySummary& s, const std::vector<BaselineRow>& baseline = {}) {
    out << "estimator,parameter,truth,mean,bias,se,rmse,rbias,coverage,se_p5,se_p50,se_p95,used,failed\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& r : s.rows) {
        out << r.estimator << "," << r.parameter << "," << format_double(r.truth) << "," << format_double(r.mean) << ","
            << format_double(r.bias) << "," << format_double(r.se) << "," << format_double(r.rmse) << ","
            << format_double(r.rbias) << "," << opt(r.coverage) << "," << opt(r.se_p5) << "," << opt(r.se_p50) << ","
            << opt(r.se_p95) << "," << r.used << "," << r.failed << "\n";
    }
    for (const auto& b : baseline) {
        double truth = 0.0;
        for (std::size_t k = 0; k < s.labels.size(); ++k)
            if (s.labels[k] == b.parameter) truth = s.truth(static_cast<Eigen::Index>(k));
        out << "baseline:" << b.label << "," << b.parameter << "," << format_double(truth) << ",,,"
            << format_double(b.se) << "," << format_double(b.rmse) << "," << format_double(b.rbias) << ",,,,,,\n";
    }
}

inline void write_replicates_csv(std::ostream& out, const StudySummary& s) {
    out << "replicate,estimator,ok";
    for (const auto& l : s.labels) out << "," << l;
    for (const auto& l : s.labels) out << ",se_" << l;
    out << ",error\n";
    for (const auto& r : s.records) {
        out << r.replicate << "," << r.estimator << "," << (r.ok ? 1 : 0);
        for (std::size_t k = 0; k < s.labels.size(); ++k)
            out << "," << (r.estimate.size() ? format_double(r.estimate(static_cast<Eigen::Index>(k))) : "");
        for (std::size_t k = 0; k < s.labels.size(); ++k)
            out << "," << (r.se.size() ? format_double(r.se(static_cast<Eigen::Index>(k))) : "");
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << "," << err << "\n";
    }
}

inline json summary_to_json(const StudySummary& s) {
    json j;
    j["schema_version"] = 1;
    j["model"] = s.model_label;
    j["n"] = s.n;
    j["m"] = s.total;
    j["replicates"] = s.replicates;
    j["seed"] = s.seed;
    j["failures"] = s.failures;
    json rows = json::array();
    for (const auto& r : s.rows) {
        json x;
        x["estimator"] = r.estimator;
        x["parameter"] = r.parameter;
        x["truth"] = r.truth;
        x["mean"] = r.mean;
        x["bias"] = r.bias;
        x["se"] = r.se;
        x["rmse"] = r.rmse;
        x["rbias"] = r.rbias;
        x["coverage"] = r.coverage ? json(*r.coverage) : json(nullptr);
        rows.push_back(x);
    }
    j["rows"] = rows;
    return j;
}

// ---------------------------------------------------------------- diagnostics

inline json report_to_json(const DiagnosticReport& r) {
    json j;
    j["schema_version"] = 1;
    j["grid_total"] = r.grid_total;
    j["n_observed"] = r.n_observed;
    j["n_simulated"] = r.n_simulated;
    j["ks_two_sample"] = true;
    j["ties_present"] = r.ties_present;
    json cats = json::array();
    for (const auto& m : r.marginals) {
        json c;
        c["category"] = m.name;
        c["ks_statistic"] = m.ks.statistic;
        c["ks_p_value"] = m.ks.p_value;
        c["ties"] = m.ks.ties;
        c["degenerate"] = m.degenerate;
        c["observed_mean"] = m.observed_mean;
        c["observed_sd"] = m.observed_sd;
        c["simulated_mean"] = m.simulated_mean;
        c["simulated_sd"] = m.simulated_sd;
        cats.push_back(c);
    }
    j["categories"] = cats;
    j["sampler"] = {{"attempted", r.sampler.attempted},
                    {"accepted", r.sampler.accepted},
                    {"envelope", r.sampler.envelope},
                    {"updates", r.sampler.updates}};
    return j;
}

inline void write_qq_csv(std::ostream& out, const DiagnosticReport& r) {
    out << "category,probability,observed,simulated\n";
    for (std::size_t j = 0; j < r.marginals.size(); ++j)
        for (const auto& q : r.qq[j])
            out << r.marginals[j].name << "," << format_double(q.probability) << "," << format_double(q.observed) << ","
                << format_double(q.simulated) << "\n";
}

} // namespace compscore
