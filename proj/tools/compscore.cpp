// compscore: fit, simulate, diagnose and benchmark truncated compositional
// models from the command line.
//
// Exit status: 0 ok, 2 invalid input or configuration, 3 numerical failure,
// 4 sampler failure. Failures print one line "error: <code>: <reason>".

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "compscore/compscore.hpp"
#include "compscore/io.hpp"

#ifndef COMPSCORE_VERSION
#define COMPSCORE_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace compscore;

namespace {

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::invalid_data, "cannot read '" + path + "'");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char b[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(b, sizeof(b), "%02x", md[i]);
        hex += b;
    }
    return hex;
}

// Collects files in a temporary sibling directory and renames it into place
// only when the command succeeds.
class OutputDir {
public:
    OutputDir(const std::string& target, bool force) : target_(fs::absolute(target)), force_(force) {
        if (target.empty()) fail(ErrorCode::configuration, "--out is required");
        if (fs::exists(target_) && !force_)
            fail(ErrorCode::configuration, "output directory '" + target + "' already exists (use --force)");
        const fs::path parent = target_.parent_path();
        if (!parent.empty() && !fs::exists(parent)) fs::create_directories(parent);
        std::random_device rd;
        for (int attempt = 0; attempt < 100; ++attempt) {
            tmp_ = target_;
            tmp_ += ".tmp-" + std::to_string(rd());
            if (fs::create_directory(tmp_)) return;
        }
        fail(ErrorCode::configuration, "cannot create a temporary output directory next to '" + target + "'");
    }

    ~OutputDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(tmp_, ec);
        }
    }

    std::ofstream open(const std::string& name) {
        files_.push_back(name);
        std::ofstream out(tmp_ / name, std::ios::binary);
        if (!out) fail(ErrorCode::configuration, "cannot write '" + name + "'");
        return out;
    }

    const std::vector<std::string>& files() const { return files_; }

    void commit() {
        if (fs::exists(target_)) {
            fs::path old = target_;
            old += ".old";
            fs::remove_all(old);
            fs::rename(target_, old);
            fs::rename(tmp_, target_);
            fs::remove_all(old);
        } else {
            fs::rename(tmp_, target_);
        }
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path tmp_;
    bool force_;
    bool committed_ = false;
    std::vector<std::string> files_;
};

struct Manifest {
    std::string subcommand;
    json config;
    std::vector<std::pair<std::string, std::string>> inputs; // path, digest
    std::optional<std::uint64_t> seed;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void input(const std::string& path) { inputs.emplace_back(path, sha256_file(path)); }

    void write(OutputDir& out) {
        json j;
        j["subcommand"] = subcommand;
        j["tool_version"] = COMPSCORE_VERSION;
        j["seed"] = seed ? json(*seed) : json(nullptr);
        j["config"] = config;
        json in = json::array();
        for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"sha256", d}});
        j["inputs"] = in;
        j["outputs"] = out.files();
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        j["wall_clock_seconds"] = dt.count();
        auto f = out.open("manifest.json");
        f << j.dump(2) << "\n";
    }
};

void note(const std::string& msg) { std::cerr << "note: " << msg << "\n"; }

LoadedData load_with_exclusions(const std::string& path, DataKind kind, const std::string& exclude) {
    LoadedData d = load_data(path, kind);
    if (d.proportions.renormalized_rows() > 0)
        note(std::to_string(d.proportions.renormalized_rows()) + " row(s) renormalised to sum to one");
    if (!exclude.empty()) {
        const auto rows = parse_row_list(exclude);
        if (d.counts) {
            d.counts = d.counts->without_rows(rows);
            d.proportions = counts_to_proportions(*d.counts);
        } else {
            d.proportions = d.proportions.without_rows(rows);
        }
        note("excluded " + std::to_string(rows.size()) + " row(s)");
    }
    return d;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
    std::string data, config, out, weight, estimator, exclude, ac;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    bool force = false;
};

int cmd_fit(const FitArgs& a) {
    Manifest man;
    man.subcommand = "fit";
    man.seed = a.seed;
    if (a.data.empty() || a.config.empty()) fail(ErrorCode::configuration, "fit needs --data and --config");
    FitConfig cfg = fit_config_from_json(parse_json_file(a.config));
    if (!a.weight.empty()) cfg.weight_kind = parse_weight_kind(a.weight);
    if (!a.ac.empty()) {
        if (a.ac == "auto") cfg.cap.reset();
        else {
            try {
                cfg.cap = std::stod(a.ac);
            } catch (const std::exception&) {
                fail(ErrorCode::configuration, "--ac must be a number or 'auto'");
            }
        }
    }
    if (!a.estimator.empty()) cfg.estimator = a.estimator;
    if (cfg.estimator != "continuous" && cfg.estimator != "factorial")
        fail(ErrorCode::configuration, "--estimator must be continuous or factorial");

    const LoadedData data = load_with_exclusions(a.data, cfg.data_kind, a.exclude);
    const int p = data.proportions.p();
    const ModelSpec tmpl = fit_model_template(cfg, p);

    FitOptions opt;
    opt.ridge = cfg.ridge;
    opt.reduce.threads = a.threads;
    double cap = 1.0;
    if (is_capped(cfg.weight_kind)) {
        if (cfg.cap) {
            cap = *cfg.cap;
        } else {
            cap = heuristic_cap(data.proportions, cfg.weight_kind, cfg.cap_quantile);
            note("automatic a_c = " + format_double(cap) + " (quantile " + format_double(cfg.cap_quantile) +
                 " of uncapped weights)");
        }
    }
    opt.weight = WeightSpec::make(cfg.weight_kind, cap);

    FitResult r;
    if (cfg.estimator == "factorial") {
        if (!data.counts) fail(ErrorCode::configuration, "the factorial estimator needs count data");
        if (tmpl.family == Family::dirichlet)
            fail(ErrorCode::configuration, "the factorial estimator applies to hybrid and truncated-gaussian models");
        r = fit_hybrid_factorial(*data.counts, tmpl, opt);
        for (const auto& [deg, c] : r.excluded_rows_by_degree)
            note("degree " + std::to_string(deg) + " moments exclude " + std::to_string(c) + " row(s) with total < " +
                 std::to_string(deg));
    } else if (tmpl.family == Family::dirichlet) {
        r = dirichlet_fit(data.proportions, tmpl, opt);
    } else {
        r = fit_hybrid(data.proportions, tmpl, opt);
    }

    json echo = cfg.raw;
    echo["weight"] = weight_to_json(opt.weight);
    echo["estimator"] = cfg.estimator;
    echo["excluded_input_rows"] = a.exclude;
    man.config = echo;
    man.input(a.data);
    man.input(a.config);

    OutputDir out(a.out, a.force);
    {
        auto f = out.open("fit.json");
        f << fit_to_json(r, data.proportions.names(), echo).dump(2) << "\n";
    }
    {
        auto f = out.open("estimates.csv");
        write_fit_table(f, r);
    }
    man.write(out);
    out.commit();
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config, out;
    int preset = 0;
    long long n = 0;
    long long m = -1;
    std::uint64_t seed = 1;
    bool force = false;
};

int cmd_simulate(const SimulateArgs& a) {
    Manifest man;
    man.subcommand = "simulate";
    man.seed = a.seed;
    ModelSpec spec;
    std::vector<std::string> names;
    bool discrete = false;
    std::int64_t total = 0;
    Eigen::Index n = 0;
    json echo;
    if (a.preset > 0) {
        if (!a.config.empty()) fail(ErrorCode::configuration, "give either --preset or --config, not both");
        const auto& pr = preset(a.preset);
        spec = pr.spec;
        names = pr.names;
        discrete = pr.discrete;
        total = pr.default_total;
        n = pr.default_n;
        echo["preset"] = a.preset;
    } else {
        if (a.config.empty()) fail(ErrorCode::configuration, "simulate needs --preset or --config");
        const json j = parse_json_file(a.config);
        std::tie(spec, names) = fitted_model_from_json(j);
        man.input(a.config);
        echo["model_file"] = a.config;
        n = 1000;
    }
    if (a.n > 0) n = a.n;
    if (a.m == 0) discrete = false;
    if (a.m > 0) {
        discrete = true;
        total = a.m;
    }
    if (names.empty()) names = default_category_names(spec.p);
    echo["model"] = model_to_json(spec, names);
    echo["n"] = n;
    echo["m"] = discrete ? json(total) : json(nullptr);
    man.config = echo;

    Rng rng(a.seed, stream_id("simulate"));
    RejectionStats stats;
    auto latent = sample_model(spec, n, rng, &stats);
    const ContinuousDataset named(latent.proportions(), Provenance::observed, names);

    OutputDir out(a.out, a.force);
    if (discrete) {
        auto compound = sample_multinomial_compound(named, total, rng);
        auto f = out.open("counts.csv");
        write_counts_csv(f, compound.counts);
        auto g = out.open("latent.csv");
        write_proportions_csv(g, named.proportions(), names);
    } else {
        auto f = out.open("data.csv");
        write_proportions_csv(f, named.proportions(), names);
    }
    {
        json side;
        side["schema_version"] = 1;
        side["model"] = model_to_json(spec, names);
        side["seed"] = a.seed;
        side["n"] = n;
        side["m"] = discrete ? json(total) : json(nullptr);
        side["rejection"] = {{"attempted", stats.attempted},
                             {"accepted", stats.accepted},
                             {"envelope", stats.envelope},
                             {"updates", stats.updates},
                             {"envelope_trace", stats.envelope_trace}};
        auto f = out.open("simulate.json");
        f << side.dump(2) << "\n";
    }
    man.write(out);
    out.commit();
    return 0;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
    std::string data, config, out, exclude;
    long long n_sim = 100000;
    long long grid = -1;
    std::uint64_t seed = 1;
    bool dirichlet_moment = false;
    bool force = false;
};

int cmd_diagnose(const DiagnoseArgs& a) {
    Manifest man;
    man.subcommand = "diagnose";
    man.seed = a.seed;
    if (a.data.empty()) fail(ErrorCode::configuration, "diagnose needs --data");
    const LoadedData data = load_with_exclusions(a.data, DataKind::automatic, a.exclude);
    ModelSpec spec;
    json echo;
    if (a.dirichlet_moment) {
        if (!a.config.empty()) fail(ErrorCode::configuration, "give either --config or --dirichlet-moment, not both");
        spec = make_dirichlet(dirichlet_moment_fit(data.proportions));
        echo["model_source"] = "dirichlet-moment";
    } else {
        if (a.config.empty()) fail(ErrorCode::configuration, "diagnose needs --config (a fit or model JSON)");
        spec = fitted_model_from_json(parse_json_file(a.config)).first;
        man.input(a.config);
        echo["model_source"] = a.config;
    }
    std::int64_t grid = 0;
    if (a.grid >= 0) {
        grid = a.grid;
    } else if (data.counts) {
        std::vector<std::int64_t> m(data.counts->totals().data(), data.counts->totals().data() + data.counts->n());
        std::nth_element(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(m.size() / 2), m.end());
        grid = m[m.size() / 2];
    }
    echo["model"] = model_to_json(spec, data.proportions.names());
    echo["n_sim"] = a.n_sim;
    echo["grid_total"] = grid;
    echo["excluded_input_rows"] = a.exclude;
    man.config = echo;
    man.input(a.data);

    Rng rng(a.seed, stream_id("diagnose"));
    const auto rep = marginal_report(data.proportions, spec, grid, a.n_sim, rng);
    for (const auto& m : rep.marginals)
        if (m.degenerate) note("category " + m.name + " is zero in every observed row");

    OutputDir out(a.out, a.force);
    {
        json j = report_to_json(rep);
        j["model"] = model_to_json(spec, data.proportions.names());
        auto f = out.open("report.json");
        f << j.dump(2) << "\n";
    }
    {
        auto f = out.open("qq.csv");
        write_qq_csv(f, rep);
    }
    man.write(out);
    out.commit();
    return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool force = false;
};

int cmd_bench(const BenchArgs& a) {
    Manifest man;
    man.subcommand = "bench";
    if (a.config.empty()) fail(ErrorCode::configuration, "bench needs --config");
    json raw = parse_json_file(a.config);
    if (a.seed) raw["seed"] = *a.seed;
    if (a.threads) raw["threads"] = *a.threads;
    const StudyFile study = study_config_from_json(raw);
    std::vector<BaselineRow> baseline;
    man.input(a.config);
    if (study.baseline_csv) {
        fs::path b(*study.baseline_csv);
        if (b.is_relative()) b = fs::path(a.config).parent_path() / b;
        baseline = read_baseline_csv(b.string());
        man.input(b.string());
    }
    man.seed = study.config.seed;
    man.config = raw;

    const auto summary = run_study(study.config);
    for (std::size_t e = 0; e < summary.failures.size(); ++e)
        if (summary.failures[e] > 0)
            note("estimator " + std::to_string(study.config.estimators[e]) + ": " +
                 std::to_string(summary.failures[e]) + " replicate(s) failed and were excluded");

    OutputDir out(a.out, a.force);
    {
        auto f = out.open("summary.csv");
        write_summary_csv(f, summary, baseline);
    }
    {
        auto f = out.open("replicates.csv");
        write_replicates_csv(f, summary);
    }
    {
        auto f = out.open("summary.json");
        f << summary_to_json(summary).dump(2) << "\n";
    }
    man.write(out);
    out.commit();
    return 0;
}

int cmd_presets_list() {
    std::cout << "id,family,p,discrete,m,n,a_c_capped_min,a_c_capped_product,description\n";
    for (const auto& p : presets()) {
        std::cout << p.id << "," << to_string(p.spec.family) << "," << p.spec.p << "," << (p.discrete ? 1 : 0) << ","
                  << p.default_total << "," << p.default_n << "," << format_double(p.cap_min) << ","
                  << format_double(p.cap_product) << ",\"" << p.description << "\"\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Score matching for truncated compositional models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", COMPSCORE_VERSION);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit a model to a CSV dataset");
    fit->add_option("--data", fa.data, "CSV of proportions or counts")->required();
    fit->add_option("--config", fa.config, "fit config JSON")->required();
    fit->add_option("--out", fa.out, "output directory")->required();
    fit->add_option("--weight", fa.weight, "weight kind override")
        ->check(CLI::IsMember({"product", "capped-product", "min", "capped-min"}));
    fit->add_option("--ac", fa.ac, "weight cap a_c, or 'auto'");
    fit->add_option("--estimator", fa.estimator, "continuous or factorial")
        ->check(CLI::IsMember({"continuous", "factorial"}));
    fit->add_option("--exclude-rows", fa.exclude, "1-based rows to drop, e.g. 3,17,40-42");
    fit->add_option("--threads", fa.threads, "worker threads")->check(CLI::PositiveNumber);
    fit->add_option("--seed", fa.seed, "recorded in the manifest; fitting is deterministic");
    fit->add_flag("--force", fa.force, "replace an existing output directory");

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Draw a dataset from a preset or model JSON");
    sim->add_option("--preset", sa.preset, "model preset id (1-16)");
    sim->add_option("--config", sa.config, "model or fit JSON");
    sim->add_option("--n", sa.n, "rows to draw");
    sim->add_option("--m", sa.m, "multinomial total; 0 disables the count layer");
    sim->add_option("--seed", sa.seed, "random seed");
    sim->add_option("--out", sa.out, "output directory")->required();
    sim->add_flag("--force", sa.force, "replace an existing output directory");

    DiagnoseArgs da;
    auto* diag = app.add_subcommand("diagnose", "Compare observed marginals with simulations from a fitted model");
    diag->add_option("--data", da.data, "observed CSV")->required();
    diag->add_option("--config", da.config, "fit.json or model JSON");
    diag->add_flag("--dirichlet-moment", da.dirichlet_moment, "use a Dirichlet moment fit of the data as the model");
    diag->add_option("--n-sim", da.n_sim, "simulated rows")->check(CLI::PositiveNumber);
    diag->add_option("--grid-total", da.grid, "round simulated values to the 1/m grid (0: no rounding)");
    diag->add_option("--exclude-rows", da.exclude, "1-based rows to drop");
    diag->add_option("--seed", da.seed, "random seed");
    diag->add_option("--out", da.out, "output directory")->required();
    diag->add_flag("--force", da.force, "replace an existing output directory");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Run a replicated simulation study");
    bench->add_option("--config", ba.config, "study config JSON")->required();
    bench->add_option("--seed", ba.seed, "override the study seed");
    bench->add_option("--threads", ba.threads, "worker threads")->check(CLI::PositiveNumber);
    bench->add_option("--out", ba.out, "output directory")->required();
    bench->add_flag("--force", ba.force, "replace an existing output directory");

    auto* pre = app.add_subcommand("presets", "Model presets");
    pre->require_subcommand(1);
    auto* pre_list = pre->add_subcommand("list", "List the model presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: configuration: " << msg << "\n";
        return 2;
    }

    try {
        if (*fit) return cmd_fit(fa);
        if (*sim) return cmd_simulate(sa);
        if (*diag) return cmd_diagnose(da);
        if (*bench) return cmd_bench(ba);
        if (*pre_list) return cmd_presets_list();
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << to_string(e.code()) << ": " << msg << "\n";
        return exit_status(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: configuration: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
