#pragma once

// Replicated simulate -> estimate studies with per-parameter SE, RMSE and
// rbias summaries.
//
// Estimator roster:
//   hybrid / truncated-gaussian models
//     1 capped-min, 2 capped-product, 3 product, 4 min  (u = x/m for counts)
//     5 factorial moments with the product weight (counts only)
//   dirichlet models
//     1-4 dirichlet score matching with the same four weights
//     6 moment matching

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "compscore/dirichlet.hpp"
#include "compscore/errors.hpp"
#include "compscore/model.hpp"
#include "compscore/presets.hpp"
#include "compscore/rng.hpp"
#include "compscore/samplers.hpp"
#include "compscore/score_matching.hpp"
#include "compscore/weights.hpp"

namespace compscore {

struct StudyConfig {
    ModelSpec model;
    std::string model_label = "custom";
    bool discrete = false;
    std::int64_t total = 2000; // multinomial m when discrete
    std::vector<int> estimators{1};
    Eigen::Index n = 1000;
    int replicates = 100;
    std::uint64_t seed = 1;
    double cap_min = 1.0;
    double cap_product = 1.0;
    int threads = 1;
    double max_failure_rate = 0.2;
    SamplerOptions sampler;

    static StudyConfig from_preset(int id) {
        const auto& p = preset(id);
        StudyConfig c;
        c.model = p.spec;
        c.model_label = "model " + std::to_string(id);
        c.discrete = p.discrete;
        c.total = p.discrete ? p.default_total : 0;
        c.n = p.default_n;
        c.cap_min = p.cap_min;
        c.cap_product = p.cap_product;
        return c;
    }

    void validate() const {
        model.validate();
        if (replicates < 2) fail(ErrorCode::configuration, "a study needs at least 2 replicates");
        if (n < 1) fail(ErrorCode::configuration, "sample size must be positive");
        if (discrete && total < 1) fail(ErrorCode::configuration, "multinomial total must be positive");
        if (estimators.empty()) fail(ErrorCode::configuration, "no estimators requested");
        WeightSpec::make(WeightKind::capped_min, cap_min);
        WeightSpec::make(WeightKind::capped_product, cap_product);
        for (int e : estimators) {
            if (e < 1 || e > 6) fail(ErrorCode::configuration, "estimators are numbered 1-6");
            if (model.family == Family::dirichlet) {
                if (e == 5) fail(ErrorCode::configuration, "estimator 5 is not defined for dirichlet models");
            } else {
                if (e == 6) fail(ErrorCode::configuration, "estimator 6 applies to dirichlet models only");
                if (e == 5 && !discrete)
                    fail(ErrorCode::configuration, "estimator 5 needs count data (a multinomial model)");
            }
        }
    }
};

inline WeightSpec estimator_weight(int estimator, const StudyConfig& c) {
    switch (estimator) {
    case 1: return WeightSpec::make(WeightKind::capped_min, c.cap_min);
    case 2: return WeightSpec::make(WeightKind::capped_product, c.cap_product);
    case 3:
    case 5: return WeightSpec::make(WeightKind::product);
    case 4: return WeightSpec::make(WeightKind::min);
    default: break;
    }
    fail(ErrorCode::configuration, "estimator " + std::to_string(estimator) + " has no weight function");
}

struct ReplicateRecord {
    int replicate = 0;
    int estimator = 0;
    bool ok = false;
    std::string error;
    Eigen::VectorXd estimate; // full parameter vector (beta for dirichlet)
    Eigen::VectorXd se;       // empty for estimator 6
};

struct SummaryRow {
    std::string estimator; // "1".."6" or an external baseline label
    std::string parameter;
    double truth = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    double se = 0.0; // SD of estimates across replicates (divisor R)
    double rmse = 0.0;
    double rbias = 0.0;
    std::optional<double> coverage; // share of nominal 95% intervals covering the truth
    std::optional<double> se_p5, se_p50, se_p95; // estimated-SE percentiles (estimator 1)
    int used = 0;
    int failed = 0;
};

struct StudySummary {
    std::string model_label;
    Eigen::Index n = 0;
    std::int64_t total = 0;
    int replicates = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> labels;
    Eigen::VectorXd truth;
    std::vector<SummaryRow> rows;
    std::vector<ReplicateRecord> records;
    std::vector<int> failures; // per requested estimator

    const SummaryRow& row(int estimator, const std::string& parameter) const {
        for (const auto& r : rows)
            if (r.estimator == std::to_string(estimator) && r.parameter == parameter) return r;
        fail(ErrorCode::configuration, "no summary row for estimator " + std::to_string(estimator) + ", " + parameter);
    }
};

namespace detail {

inline double quantile7(std::vector<double> v, double prob) {
    std::sort(v.begin(), v.end());
    const double pos = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline ReplicateRecord run_estimator(int estimator, const StudyConfig& c, const ContinuousDataset& props,
                                     const std::optional<CountDataset>& counts) {
    ReplicateRecord rec;
    rec.estimator = estimator;
    try {
        if (c.model.family == Family::dirichlet) {
            if (estimator == 6) {
                rec.estimate = dirichlet_moment_fit(props);
            } else {
                FitOptions opt;
                opt.weight = estimator_weight(estimator, c);
                const auto fit = dirichlet_fit(props, c.model, opt);
                rec.estimate = fit.estimate;
                rec.se = fit.se;
            }
        } else {
            FitOptions opt;
            opt.weight = estimator_weight(estimator, c);
            const auto fit = estimator == 5 ? fit_hybrid_factorial(*counts, c.model, opt) : fit_hybrid(props, c.model, opt);
            rec.estimate = fit.estimate;
            rec.se = fit.se;
        }
        rec.ok = rec.estimate.allFinite();
        if (!rec.ok) rec.error = "non-finite estimate";
    } catch (const Error& e) {
        rec.ok = false;
        rec.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    return rec;
}

} // namespace detail

// Data for one replicate: latent proportions and, for discrete models, counts.
inline std::pair<ContinuousDataset, std::optional<CountDataset>> simulate_replicate(const StudyConfig& c, int replicate) {
    Rng rng(c.seed, stream_id("replicate", static_cast<std::uint64_t>(replicate)));
    auto latent = sample_model(c.model, c.n, rng, nullptr, c.sampler);
    if (!c.discrete) return {std::move(latent), std::nullopt};
    auto compound = sample_multinomial_compound(latent, c.total, rng);
    return {counts_to_proportions(compound.counts), std::move(compound.counts)};
}

inline StudySummary summarize(const StudyConfig& c, std::vector<ReplicateRecord> records) {
    StudySummary s;
    s.model_label = c.model_label;
    s.n = c.n;
    s.total = c.discrete ? c.total : 0;
    s.replicates = c.replicates;
    s.seed = c.seed;
    s.labels = c.model.parameter_labels();
    s.truth = c.model.packed();
    const std::vector<bool>& est = c.model.estimated;

    for (int e : c.estimators) {
        std::vector<const ReplicateRecord*> ok;
        int failed = 0;
        for (const auto& r : records) {
            if (r.estimator != e) continue;
            if (r.ok) ok.push_back(&r);
            else ++failed;
        }
        s.failures.push_back(failed);
        if (static_cast<double>(failed) > c.max_failure_rate * c.replicates)
            fail(ErrorCode::study_failed, "estimator " + std::to_string(e) + " failed in " + std::to_string(failed) +
                                              " of " + std::to_string(c.replicates) + " replicates");
        if (ok.size() < 2) fail(ErrorCode::study_failed, "too few successful replicates for a summary");
        const double R = static_cast<double>(ok.size());
        for (std::size_t k = 0; k < s.labels.size(); ++k) {
            if (!est[k]) continue;
            const auto kk = static_cast<Eigen::Index>(k);
            SummaryRow row;
            row.estimator = std::to_string(e);
            row.parameter = s.labels[k];
            row.truth = s.truth(kk);
            row.used = static_cast<int>(ok.size());
            row.failed = failed;
            double sum = 0.0;
            for (auto* r : ok) sum += r->estimate(kk);
            row.mean = sum / R;
            double ss = 0.0, sq = 0.0;
            for (auto* r : ok) {
                const double x = r->estimate(kk);
                ss += (x - row.mean) * (x - row.mean);
                sq += (x - row.truth) * (x - row.truth);
            }
            row.bias = row.mean - row.truth;
            row.se = std::sqrt(ss / R);
            row.rmse = std::sqrt(sq / R);
            row.rbias = row.se > 0.0 ? row.bias / row.se : 0.0;
            if (ok.front()->se.size() > 0) {
                int cover = 0;
                std::vector<double> ses;
                for (auto* r : ok) {
                    const double se = r->se(kk);
                    ses.push_back(se);
                    if (std::abs(r->estimate(kk) - row.truth) <= 1.959963984540054 * se) ++cover;
                }
                row.coverage = cover / R;
                if (e == 1) {
                    row.se_p5 = detail::quantile7(ses, 0.05);
                    row.se_p50 = detail::quantile7(ses, 0.50);
                    row.se_p95 = detail::quantile7(ses, 0.95);
                }
            }
            s.rows.push_back(row);
        }
    }
    s.records = std::move(records);
    return s;
}

inline StudySummary run_study(const StudyConfig& c) {
    c.validate();
    const auto R = static_cast<std::size_t>(c.replicates);
    const std::size_t E = c.estimators.size();
    std::vector<ReplicateRecord> records(R * E);
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (true) {
            const int r = next.fetch_add(1);
            if (r >= c.replicates) return;
            try {
                const auto [props, counts] = simulate_replicate(c, r);
                for (std::size_t e = 0; e < E; ++e) {
                    auto rec = detail::run_estimator(c.estimators[e], c, props, counts);
                    rec.replicate = r;
                    records[static_cast<std::size_t>(r) * E + e] = std::move(rec);
                }
            } catch (...) {
                // sampler failures abort the study
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(c.replicates);
                return;
            }
        }
    };
    const int nt = std::max(1, std::min(c.threads, c.replicates));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
    return summarize(c, std::move(records));
}

} // namespace compscore
