#pragma once

// Model checking: simulate from a fitted model, round to the count grid and
// compare each marginal with the observed proportions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compscore/errors.hpp"
#include "compscore/model.hpp"
#include "compscore/rng.hpp"
#include "compscore/samplers.hpp"

namespace compscore {

// round(u * m) / m, halves away from zero.
inline double round_to_grid(double u, std::int64_t m) {
    if (m < 1) fail(ErrorCode::configuration, "grid total must be at least 1");
    const double md = static_cast<double>(m);
    return std::round(u * md) / md;
}

// Rounded rows need not sum to one, so the result is a plain matrix.
inline RowMatrix round_to_grid(const RowMatrix& u, std::int64_t m) {
    RowMatrix out(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i)
        for (Eigen::Index j = 0; j < u.cols(); ++j) out(i, j) = round_to_grid(u(i, j), m);
    return out;
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool ties = false; // some value occurs more than once in the pooled sample
};

// Kolmogorov distribution tail P(K > lambda).
inline double kolmogorov_tail(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {
        const double pi = std::numbers::pi;
        double s = 0.0;
        for (int k = 1; k <= 20; ++k) {
            const double t = (2.0 * k - 1.0) * pi / lambda;
            s += std::exp(-t * t / 8.0);
        }
        return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

// Two-sample statistic sup |F_obs - F_sim| with the asymptotic p-value.
inline KsResult ks_compare(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) fail(ErrorCode::invalid_data, "KS comparison needs two nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    KsResult r;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (j == b.size() || (i < a.size() && a[i] <= b[j])) x = a[i];
        else x = b[j];
        std::size_t ci = 0, cj = 0;
        while (i < a.size() && a[i] == x) ++i, ++ci;
        while (j < b.size() && b[j] == x) ++j, ++cj;
        if (ci + cj > 1) r.ties = true;
        r.statistic = std::max(r.statistic, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double en = std::sqrt(na * nb / (na + nb));
    r.p_value = kolmogorov_tail((en + 0.12 + 0.11 / en) * r.statistic);
    return r;
}

inline KsResult ks_compare(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return ks_compare(std::vector<double>(a.data(), a.data() + a.size()),
                      std::vector<double>(b.data(), b.data() + b.size()));
}

struct MarginalDiagnostic {
    std::string name;
    KsResult ks;
    double observed_mean = 0.0;
    double observed_sd = 0.0;
    double simulated_mean = 0.0;
    double simulated_sd = 0.0;
    bool degenerate = false; // observed category is zero in every row
};

struct QuantilePair {
    double probability;
    double observed;
    double simulated;
};

struct DiagnosticReport {
    std::int64_t grid_total = 0; // 0: simulated values were not rounded
    Eigen::Index n_observed = 0;
    Eigen::Index n_simulated = 0;
    bool ties_present = false;
    std::vector<MarginalDiagnostic> marginals;
    std::vector<std::vector<QuantilePair>> qq; // per category
    RejectionStats sampler;
};

namespace detail {

inline double sample_sd(const Eigen::VectorXd& x) {
    if (x.size() < 2) return 0.0;
    const double m = x.mean();
    return std::sqrt((x.array() - m).square().sum() / static_cast<double>(x.size() - 1));
}

// type-7 quantile of sorted data
inline double sorted_quantile(const std::vector<double>& s, double prob) {
    const double pos = prob * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

} // namespace detail

// Compare observed marginals with a simulated sample that is already drawn.
inline DiagnosticReport compare_marginals(const RowMatrix& observed, const RowMatrix& simulated,
                                          const std::vector<std::string>& names, int qq_points = 99) {
    if (observed.cols() != simulated.cols()) fail(ErrorCode::invalid_dimension, "observed and simulated widths differ");
    DiagnosticReport rep;
    rep.n_observed = observed.rows();
    rep.n_simulated = simulated.rows();
    for (Eigen::Index j = 0; j < observed.cols(); ++j) {
        MarginalDiagnostic m;
        m.name = names.empty() ? "c" + std::to_string(j + 1) : names[static_cast<std::size_t>(j)];
        const Eigen::VectorXd o = observed.col(j), s = simulated.col(j);
        m.ks = ks_compare(o, s);
        m.observed_mean = o.mean();
        m.observed_sd = detail::sample_sd(o);
        m.simulated_mean = s.mean();
        m.simulated_sd = detail::sample_sd(s);
        m.degenerate = o.cwiseAbs().maxCoeff() == 0.0;
        rep.ties_present = rep.ties_present || m.ks.ties;
        rep.marginals.push_back(m);
        std::vector<QuantilePair> qq;
        if (qq_points > 0) {
            std::vector<double> os(o.data(), o.data() + o.size()), ss(s.data(), s.data() + s.size());
            std::sort(os.begin(), os.end());
            std::sort(ss.begin(), ss.end());
            for (int k = 1; k <= qq_points; ++k) {
                const double prob = static_cast<double>(k) / (qq_points + 1);
                qq.push_back({prob, detail::sorted_quantile(os, prob), detail::sorted_quantile(ss, prob)});
            }
        }
        rep.qq.push_back(std::move(qq));
    }
    return rep;
}

// Simulate n_sim rows from the fitted model, round to the 1/m grid (m = 0
// skips rounding), and compare marginals with the observed data.
inline DiagnosticReport marginal_report(const ContinuousDataset& observed, const ModelSpec& fitted, std::int64_t grid_total,
                                        Eigen::Index n_sim, Rng& rng, const SamplerOptions& opt = {}) {
    if (fitted.p != observed.p()) fail(ErrorCode::invalid_dimension, "fitted model dimension does not match the data");
    if (n_sim < 1) fail(ErrorCode::configuration, "simulation size must be positive");
    RejectionStats stats;
    const auto sim = sample_model(fitted, n_sim, rng, &stats, opt);
    const RowMatrix simulated = grid_total > 0 ? round_to_grid(sim.proportions(), grid_total) : sim.proportions();
    auto rep = compare_marginals(observed.proportions(), simulated, observed.names());
    rep.grid_total = grid_total;
    rep.sampler = stats;
    return rep;
}

} // namespace compscore
