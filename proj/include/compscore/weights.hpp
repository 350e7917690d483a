#pragma once

// Boundary-vanishing weight functions h^2 on the sphere orthant.
//
//   product         prod z_j^2
//   capped-product  min(prod z_j^2, a_c^2)
//   min             min(z_1^2, ..., z_p^2)
//   capped-min      min(z_1^2, ..., z_p^2, a_c^2)
//
// Everything here takes u = z^2 where convenient; the estimators never need z.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compscore/errors.hpp"
#include "compscore/model.hpp"

namespace compscore {

enum class WeightKind { product, capped_product, min, capped_min };

inline std::string_view to_string(WeightKind k) {
    switch (k) {
    case WeightKind::product: return "product";
    case WeightKind::capped_product: return "capped-product";
    case WeightKind::min: return "min";
    case WeightKind::capped_min: return "capped-min";
    }
    return "product";
}

inline WeightKind parse_weight_kind(std::string_view s) {
    if (s == "product") return WeightKind::product;
    if (s == "capped-product") return WeightKind::capped_product;
    if (s == "min") return WeightKind::min;
    if (s == "capped-min") return WeightKind::capped_min;
    fail(ErrorCode::configuration, "unknown weight kind '" + std::string(s) + "'");
}

inline bool is_product_kind(WeightKind k) {
    return k == WeightKind::product || k == WeightKind::capped_product;
}

inline bool is_capped(WeightKind k) {
    return k == WeightKind::capped_product || k == WeightKind::capped_min;
}

// Uncapped kinds carry cap = 1, which never binds: prod z_j^2 <= p^-p and
// min z_j^2 <= 1/p.
struct WeightSpec {
    WeightKind kind = WeightKind::capped_min;
    double cap = 1.0;

    static WeightSpec make(WeightKind kind, double cap = 1.0) {
        WeightSpec w{kind, is_capped(kind) ? cap : 1.0};
        w.validate();
        return w;
    }

    void validate() const {
        if (!(cap > 0.0 && cap <= 1.0))
            fail(ErrorCode::configuration, "weight cap a_c must lie in (0, 1], got " + std::to_string(cap));
    }

    double cap_sq() const { return cap * cap; }
};

// h^2 at one observation plus what the d2 terms need: whether the cap binds
// (gradient of h^2 vanishes) and, for min kinds, the argmin coordinate.
struct WeightValue {
    double h2 = 0.0;
    bool cap_binds = false;
    int argmin = -1;
};

inline WeightValue evaluate_weight(std::span<const double> u, const WeightSpec& w) {
    WeightValue out;
    const double cap2 = w.cap_sq();
    if (is_product_kind(w.kind)) {
        double prod = 1.0;
        for (double v : u) prod *= v;
        out.cap_binds = !(prod < cap2);
        out.h2 = out.cap_binds ? cap2 : prod;
        return out;
    }
    // lowest index wins ties
    int arg = 0;
    for (int j = 1; j < static_cast<int>(u.size()); ++j)
        if (u[static_cast<std::size_t>(j)] < u[static_cast<std::size_t>(arg)]) arg = j;
    const double m = u[static_cast<std::size_t>(arg)];
    out.cap_binds = !(m < cap2);
    out.h2 = out.cap_binds ? cap2 : m;
    out.argmin = arg;
    return out;
}

namespace detail {

inline std::vector<double> squares(std::span<const double> z) {
    std::vector<double> u(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) u[j] = z[j] * z[j];
    return u;
}

} // namespace detail

// h^2(z) for a point z on the sphere orthant.
inline double eval_h_sq(std::span<const double> z, const WeightSpec& w) {
    const auto u = detail::squares(z);
    return evaluate_weight(u, w).h2;
}

// 1 when the cap does not bind, 0 when it does. Only defined for capped kinds.
inline int cap_indicator(std::span<const double> z, const WeightSpec& w) {
    if (!is_capped(w.kind))
        fail(ErrorCode::not_applicable, "cap indicator is only defined for capped weight kinds");
    const auto u = detail::squares(z);
    return evaluate_weight(u, w).cap_binds ? 0 : 1;
}

// Euclidean distance from u to the boundary of the simplex:
// sqrt(p/(p-1)) * min_j u_j.
inline double boundary_distance(std::span<const double> u) {
    const auto p = static_cast<double>(u.size());
    if (u.size() < 2) fail(ErrorCode::invalid_dimension, "boundary distance needs p >= 2");
    return std::sqrt(p / (p - 1.0)) * *std::min_element(u.begin(), u.end());
}

// Automated cap choice: a_c^2 is the given quantile of the uncapped weights
// over the sample. Not part of the estimator theory; offered for reproducible
// batch runs when no cap is supplied.
inline double heuristic_cap(const ContinuousDataset& data, WeightKind kind, double quantile = 0.9) {
    if (!(quantile > 0.0 && quantile < 1.0))
        fail(ErrorCode::configuration, "cap quantile must lie in (0, 1)");
    const WeightSpec uncapped{is_product_kind(kind) ? WeightKind::product : WeightKind::min, 1.0};
    const auto& u = data.proportions();
    std::vector<double> h(static_cast<std::size_t>(u.rows()));
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        const std::span<const double> row(u.row(i).data(), static_cast<std::size_t>(u.cols()));
        h[static_cast<std::size_t>(i)] = evaluate_weight(row, uncapped).h2;
    }
    std::sort(h.begin(), h.end());
    // type-7 quantile
    const double pos = quantile * static_cast<double>(h.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, h.size() - 1);
    const double value = h[lo] + (pos - static_cast<double>(lo)) * (h[hi] - h[lo]);
    if (!(value > 0.0))
        fail(ErrorCode::invalid_data, "cannot choose a cap: uncapped weights are zero at the requested quantile");
    return std::min(1.0, std::sqrt(value));
}

} // namespace compscore
