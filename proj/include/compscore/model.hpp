#pragma once

// Domain types shared by every estimator: model parameters, the canonical
// parameter ordering, validated datasets and the simplex <-> sphere maps.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "compscore/errors.hpp"

namespace compscore {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

enum class Family { hybrid, truncated_gaussian, dirichlet };

inline std::string_view to_string(Family f) {
    switch (f) {
    case Family::hybrid: return "hybrid";
    case Family::truncated_gaussian: return "truncated-gaussian";
    case Family::dirichlet: return "dirichlet";
    }
    return "hybrid";
}

inline Family parse_family(std::string_view s) {
    if (s == "hybrid") return Family::hybrid;
    if (s == "truncated-gaussian" || s == "tgaussian") return Family::truncated_gaussian;
    if (s == "dirichlet") return Family::dirichlet;
    fail(ErrorCode::configuration, "unknown model family '" + std::string(s) + "'");
}

// Sufficient statistic of the pairwise-interaction model on the sphere scale.
//   quartic:   z_j^4
//   cross:     2 z_j^2 z_k^2   (j < k)
//   quadratic: z_j^2
// Coordinates are zero based; k is -1 unless kind == cross.
enum class StatKind { quartic, cross, quadratic };

struct Statistic {
    StatKind kind;
    int j;
    int k;
};

namespace detail {

inline std::string index_label(char prefix, int j, int k, int p) {
    // a11, a12, b3 for small p; comma separated once indices reach two digits
    const bool wide = p > 10;
    std::string s(1, prefix);
    s += std::to_string(j + 1);
    if (k >= 0) {
        if (wide) s += ',';
        s += std::to_string(k + 1);
    }
    return s;
}

} // namespace detail

class ParameterIndexMap {
public:
    explicit ParameterIndexMap(int p) : p_(p) {
        if (p < 2) {
            fail(ErrorCode::invalid_dimension,
                 "dimension p must be >= 2, got " + std::to_string(p));
        }
        const int r = p - 1;
        for (int j = 0; j < r; ++j) stats_.push_back({StatKind::quartic, j, -1});
        for (int j = 0; j < r; ++j)
            for (int k = j + 1; k < r; ++k) stats_.push_back({StatKind::cross, j, k});
        for (int j = 0; j < r; ++j) stats_.push_back({StatKind::quadratic, j, -1});
        for (const auto& s : stats_) {
            switch (s.kind) {
            case StatKind::quartic: labels_.push_back(detail::index_label('a', s.j, s.j, p)); break;
            case StatKind::cross: labels_.push_back(detail::index_label('a', s.j, s.k, p)); break;
            case StatKind::quadratic: labels_.push_back(detail::index_label('b', s.j, -1, p)); break;
            }
        }
    }

    int p() const { return p_; }
    int q() const { return static_cast<int>(stats_.size()); }
    const Statistic& stat(int i) const { return stats_[static_cast<std::size_t>(i)]; }
    const std::vector<Statistic>& stats() const { return stats_; }
    const std::string& label(int i) const { return labels_[static_cast<std::size_t>(i)]; }
    const std::vector<std::string>& labels() const { return labels_; }

    int diagonal_index(int j) const { return j; }
    int linear_index(int j) const { return (p_ - 1) + cross_count() + j; }
    int cross_index(int j, int k) const {
        if (j > k) std::swap(j, k);
        const int r = p_ - 1;
        // row-major offset of (j, k) among pairs j < k < r
        const int before = j * r - j * (j + 1) / 2;
        return r + before + (k - j - 1);
    }
    int interaction_index(int j, int k) const {
        return j == k ? diagonal_index(j) : cross_index(j, k);
    }

    int index_of(std::string_view label) const {
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == label) return static_cast<int>(i);
        fail(ErrorCode::configuration, "unknown parameter label '" + std::string(label) + "'");
    }

private:
    int cross_count() const { return (p_ - 1) * (p_ - 2) / 2; }

    int p_;
    std::vector<Statistic> stats_;
    std::vector<std::string> labels_;
};

inline ParameterIndexMap index_map(int p) { return ParameterIndexMap(p); }

// Parameters (A*_L, b_L, beta) of
//   f(u) ~ prod u_j^beta_j exp(u' A* u + b' u)
// with the last row/column of A* and b_p fixed at zero.
struct ModelSpec {
    Family family = Family::hybrid;
    int p = 0;
    Eigen::MatrixXd interaction; // A*_L, (p-1) x (p-1), symmetric
    Eigen::VectorXd linear;      // b_L, p-1
    Eigen::VectorXd shape;       // beta, p
    // Which parameters are estimated. Hybrid and truncated-gaussian: indexed by
    // ParameterIndexMap (size q). Dirichlet: indexed by category (size p).
    std::vector<bool> estimated;

    int q() const { return (p - 1) + p * (p - 1) / 2; }

    std::vector<std::string> parameter_labels() const {
        if (family == Family::dirichlet) {
            std::vector<std::string> out;
            for (int j = 0; j < p; ++j) out.push_back("beta" + std::to_string(j + 1));
            return out;
        }
        return ParameterIndexMap(p).labels();
    }

    // Parameter vector pi in index-map order (hybrid) or beta (dirichlet).
    Eigen::VectorXd packed() const {
        if (family == Family::dirichlet) return shape;
        const ParameterIndexMap map(p);
        Eigen::VectorXd pi(map.q());
        for (int i = 0; i < map.q(); ++i) {
            const auto& s = map.stat(i);
            switch (s.kind) {
            case StatKind::quartic: pi(i) = interaction(s.j, s.j); break;
            case StatKind::cross: pi(i) = interaction(s.j, s.k); break;
            case StatKind::quadratic: pi(i) = linear(s.j); break;
            }
        }
        return pi;
    }

    void unpack(const Eigen::VectorXd& pi) {
        if (family == Family::dirichlet) {
            shape = pi;
            return;
        }
        const ParameterIndexMap map(p);
        for (int i = 0; i < map.q(); ++i) {
            const auto& s = map.stat(i);
            switch (s.kind) {
            case StatKind::quartic: interaction(s.j, s.j) = pi(i); break;
            case StatKind::cross:
                interaction(s.j, s.k) = pi(i);
                interaction(s.k, s.j) = pi(i);
                break;
            case StatKind::quadratic: linear(s.j) = pi(i); break;
            }
        }
    }

    // Full p x p A* with zero last row and column.
    Eigen::MatrixXd full_interaction() const {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
        a.topLeftCorner(p - 1, p - 1) = interaction;
        return a;
    }

    Eigen::VectorXd full_linear() const {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
        b.head(p - 1) = linear;
        return b;
    }

    void validate() const {
        if (p < 2) fail(ErrorCode::invalid_dimension, "model dimension p must be >= 2");
        if (interaction.rows() != p - 1 || interaction.cols() != p - 1)
            fail(ErrorCode::invalid_dimension, "interaction matrix must be (p-1)x(p-1)");
        if (linear.size() != p - 1) fail(ErrorCode::invalid_dimension, "linear vector must have p-1 entries");
        if (shape.size() != p) fail(ErrorCode::invalid_dimension, "shape vector must have p entries");
        if (!interaction.allFinite() || !linear.allFinite() || !shape.allFinite())
            fail(ErrorCode::invalid_data, "model parameters must be finite");
        const double scale = std::max(1.0, interaction.cwiseAbs().maxCoeff());
        if ((interaction - interaction.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            fail(ErrorCode::invalid_data, "interaction matrix must be symmetric");
        for (int j = 0; j < p; ++j)
            if (!(shape(j) > -1.0))
                fail(ErrorCode::invalid_data, "shape parameter beta" + std::to_string(j + 1) + " must exceed -1");
        if (family == Family::truncated_gaussian && shape.cwiseAbs().maxCoeff() != 0.0)
            fail(ErrorCode::invalid_family, "truncated-gaussian model requires beta = 0");
        if (family == Family::dirichlet &&
            (interaction.cwiseAbs().maxCoeff() != 0.0 || linear.cwiseAbs().maxCoeff() != 0.0))
            fail(ErrorCode::invalid_family, "dirichlet model requires A* = 0 and b = 0");
        const std::size_t expected = family == Family::dirichlet ? static_cast<std::size_t>(p)
                                                                 : static_cast<std::size_t>(q());
        if (estimated.size() != expected)
            fail(ErrorCode::invalid_dimension, "estimation mask has wrong length");
    }
};

inline ModelSpec make_hybrid(const Eigen::MatrixXd& a_l, const Eigen::VectorXd& b_l,
                             const Eigen::VectorXd& beta) {
    ModelSpec m;
    m.family = Family::hybrid;
    m.p = static_cast<int>(beta.size());
    m.interaction = a_l;
    m.linear = b_l;
    m.shape = beta;
    m.estimated.assign(static_cast<std::size_t>(m.q()), true);
    m.validate();
    return m;
}

inline ModelSpec make_truncated_gaussian(const Eigen::MatrixXd& a_l, const Eigen::VectorXd& b_l) {
    ModelSpec m = make_hybrid(a_l, b_l, Eigen::VectorXd::Zero(a_l.rows() + 1));
    m.family = Family::truncated_gaussian;
    m.validate();
    return m;
}

inline ModelSpec make_dirichlet(const Eigen::VectorXd& beta) {
    ModelSpec m;
    m.family = Family::dirichlet;
    m.p = static_cast<int>(beta.size());
    if (m.p < 2) fail(ErrorCode::invalid_dimension, "model dimension p must be >= 2");
    m.interaction = Eigen::MatrixXd::Zero(m.p - 1, m.p - 1);
    m.linear = Eigen::VectorXd::Zero(m.p - 1);
    m.shape = beta;
    m.estimated.assign(static_cast<std::size_t>(m.p), true);
    m.validate();
    return m;
}

// Marks every linear term b_j as fixed (at its current value).
inline void fix_linear_terms(ModelSpec& m) {
    if (m.family == Family::dirichlet) return;
    const ParameterIndexMap map(m.p);
    for (int j = 0; j < m.p - 1; ++j) m.estimated[static_cast<std::size_t>(map.linear_index(j))] = false;
}

inline std::vector<std::string> default_category_names(int p) {
    std::vector<std::string> names;
    for (int j = 0; j < p; ++j) names.push_back("c" + std::to_string(j + 1));
    return names;
}

enum class Provenance { observed, from_counts };

// n x p proportions; every row on the simplex.
class ContinuousDataset {
public:
    static constexpr double exact_tolerance = 1e-9;
    static constexpr double reject_tolerance = 1e-6;

    ContinuousDataset() = default;

    explicit ContinuousDataset(RowMatrix u, Provenance provenance = Provenance::observed,
                               std::vector<std::string> names = {})
        : u_(std::move(u)), provenance_(provenance), names_(std::move(names)) {
        if (u_.rows() < 1) fail(ErrorCode::invalid_data, "dataset must contain at least one row");
        if (u_.cols() < 2) fail(ErrorCode::invalid_dimension, "dataset must have at least two categories");
        if (names_.empty()) names_ = default_category_names(static_cast<int>(u_.cols()));
        if (names_.size() != static_cast<std::size_t>(u_.cols()))
            fail(ErrorCode::invalid_data, "category name count does not match column count");
        for (Eigen::Index i = 0; i < u_.rows(); ++i) {
            for (Eigen::Index j = 0; j < u_.cols(); ++j) {
                const double v = u_(i, j);
                if (!std::isfinite(v) || v < 0.0)
                    fail(ErrorCode::invalid_data, "row " + std::to_string(i + 1) +
                                                      " has a negative or non-finite proportion");
            }
            const double s = u_.row(i).sum();
            const double dev = std::abs(s - 1.0);
            if (dev > reject_tolerance)
                fail(ErrorCode::invalid_data, "row " + std::to_string(i + 1) + " sums to " +
                                                  std::to_string(s) + ", not 1");
            if (dev > exact_tolerance) {
                u_.row(i) /= s;
                ++renormalized_;
            }
        }
    }

    const RowMatrix& proportions() const { return u_; }
    Eigen::Index n() const { return u_.rows(); }
    int p() const { return static_cast<int>(u_.cols()); }
    Provenance provenance() const { return provenance_; }
    const std::vector<std::string>& names() const { return names_; }
    int renormalized_rows() const { return renormalized_; }

    ContinuousDataset without_rows(const std::vector<Eigen::Index>& rows) const {
        std::vector<bool> drop(static_cast<std::size_t>(n()), false);
        for (auto r : rows) {
            if (r < 0 || r >= n()) fail(ErrorCode::invalid_data, "excluded row index out of range");
            drop[static_cast<std::size_t>(r)] = true;
        }
        RowMatrix kept(n() - static_cast<Eigen::Index>(std::count(drop.begin(), drop.end(), true)), p());
        Eigen::Index out = 0;
        for (Eigen::Index i = 0; i < n(); ++i)
            if (!drop[static_cast<std::size_t>(i)]) kept.row(out++) = u_.row(i);
        return ContinuousDataset(std::move(kept), provenance_, names_);
    }

private:
    RowMatrix u_;
    Provenance provenance_ = Provenance::observed;
    std::vector<std::string> names_;
    int renormalized_ = 0;
};

// n x p counts with known row totals m_i = sum_j x_ij.
class CountDataset {
public:
    CountDataset() = default;

    CountDataset(CountMatrix x, std::optional<CountVector> totals = std::nullopt,
                 std::vector<std::string> names = {})
        : x_(std::move(x)), names_(std::move(names)) {
        if (x_.rows() < 1) fail(ErrorCode::invalid_data, "dataset must contain at least one row");
        if (x_.cols() < 2) fail(ErrorCode::invalid_dimension, "dataset must have at least two categories");
        if (names_.empty()) names_ = default_category_names(static_cast<int>(x_.cols()));
        if (names_.size() != static_cast<std::size_t>(x_.cols()))
            fail(ErrorCode::invalid_data, "category name count does not match column count");
        if ((x_.array() < 0).any()) fail(ErrorCode::invalid_data, "counts must be nonnegative");
        m_ = x_.rowwise().sum();
        if (totals) {
            if (totals->size() != x_.rows())
                fail(ErrorCode::invalid_data, "totals vector length does not match row count");
            for (Eigen::Index i = 0; i < x_.rows(); ++i)
                if ((*totals)(i) != m_(i))
                    fail(ErrorCode::invalid_total, "row " + std::to_string(i + 1) +
                                                       ": counts do not sum to the stated total");
        }
        for (Eigen::Index i = 0; i < x_.rows(); ++i)
            if (m_(i) < 1)
                fail(ErrorCode::invalid_total, "row " + std::to_string(i + 1) + " has total count 0");
    }

    const CountMatrix& counts() const { return x_; }
    const CountVector& totals() const { return m_; }
    Eigen::Index n() const { return x_.rows(); }
    int p() const { return static_cast<int>(x_.cols()); }
    const std::vector<std::string>& names() const { return names_; }

    CountDataset without_rows(const std::vector<Eigen::Index>& rows) const {
        std::vector<bool> drop(static_cast<std::size_t>(n()), false);
        for (auto r : rows) {
            if (r < 0 || r >= n()) fail(ErrorCode::invalid_data, "excluded row index out of range");
            drop[static_cast<std::size_t>(r)] = true;
        }
        CountMatrix kept(n() - static_cast<Eigen::Index>(std::count(drop.begin(), drop.end(), true)), p());
        Eigen::Index out = 0;
        for (Eigen::Index i = 0; i < n(); ++i)
            if (!drop[static_cast<std::size_t>(i)]) kept.row(out++) = x_.row(i);
        return CountDataset(std::move(kept), std::nullopt, names_);
    }

private:
    CountMatrix x_;
    CountVector m_;
    std::vector<std::string> names_;
};

// z_ij = sqrt(u_ij): rows land on the positive orthant of the unit sphere.
inline RowMatrix sqrt_transform(const ContinuousDataset& data) {
    return data.proportions().array().sqrt().matrix();
}

inline ContinuousDataset counts_to_proportions(const CountDataset& data) {
    RowMatrix u(data.n(), data.p());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double m = static_cast<double>(data.totals()(i));
        if (m <= 0.0) fail(ErrorCode::invalid_total, "row " + std::to_string(i + 1) + " has total count 0");
        for (int j = 0; j < data.p(); ++j) u(i, j) = static_cast<double>(data.counts()(i, j)) / m;
    }
    return ContinuousDataset(std::move(u), Provenance::from_counts, data.names());
}

} // namespace compscore
