#pragma once

// Sources of expectations E[prod u_j^alpha_j].
//
// The empirical provider averages monomials of observed proportions. The
// factorial provider works from multinomial counts: for a row with total m,
//   prod_j x_j (x_j - 1) ... (x_j - alpha_j + 1) / (m (m - 1) ... (m - |alpha| + 1))
// is unbiased for prod u_j^alpha_j given the latent u, provided m >= |alpha|.
// Rows with too small a total are left out of that multi-index's average.

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "compscore/errors.hpp"
#include "compscore/model.hpp"
#include "compscore/polynomial.hpp"

namespace compscore {

class MomentProvider {
public:
    virtual ~MomentProvider() = default;
    virtual Eigen::Index n() const = 0;
    virtual int p() const = 0;
    // Estimate of E[u^alpha].
    virtual double expect(const MultiIndex& alpha) const = 0;
    // Row i's contribution; averaging row_term over rows reproduces expect().
    virtual double row_term(Eigen::Index i, const MultiIndex& alpha) const = 0;
};

class EmpiricalMomentProvider : public MomentProvider {
public:
    explicit EmpiricalMomentProvider(const ContinuousDataset& data) : u_(data.proportions()) {}

    Eigen::Index n() const override { return u_.rows(); }
    int p() const override { return static_cast<int>(u_.cols()); }

    double expect(const MultiIndex& alpha) const override {
        double s = 0.0, c = 0.0;
        for (Eigen::Index i = 0; i < n(); ++i) {
            const double y = row_term(i, alpha) - c;
            const double t = s + y;
            c = (t - s) - y;
            s = t;
        }
        return s / static_cast<double>(n());
    }

    double row_term(Eigen::Index i, const MultiIndex& alpha) const override {
        double v = 1.0;
        for (std::size_t j = 0; j < alpha.size(); ++j)
            for (int e = 0; e < alpha[j]; ++e) v *= u_(i, static_cast<Eigen::Index>(j));
        return v;
    }

private:
    RowMatrix u_;
};

class FactorialMomentProvider : public MomentProvider {
public:
    explicit FactorialMomentProvider(const CountDataset& data) : x_(data.counts()), m_(data.totals()) {}

    Eigen::Index n() const override { return x_.rows(); }
    int p() const override { return static_cast<int>(x_.cols()); }

    static double falling(std::int64_t x, int k) {
        double v = 1.0;
        for (int r = 0; r < k; ++r) v *= static_cast<double>(x - r);
        return v;
    }

    bool eligible(Eigen::Index i, const MultiIndex& alpha) const { return m_(i) >= total_degree(alpha); }

    // Rows whose total is too small for a multi-index of this degree.
    Eigen::Index excluded_rows(int degree) const {
        Eigen::Index c = 0;
        for (Eigen::Index i = 0; i < n(); ++i)
            if (m_(i) < degree) ++c;
        return c;
    }

    double expect(const MultiIndex& alpha) const override {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(alpha);
            if (it != cache_.end()) return it->second;
        }
        double s = 0.0, c = 0.0;
        Eigen::Index used = 0;
        for (Eigen::Index i = 0; i < n(); ++i) {
            if (!eligible(i, alpha)) continue;
            const double y = raw_term(i, alpha) - c;
            const double t = s + y;
            c = (t - s) - y;
            s = t;
            ++used;
        }
        if (used == 0)
            fail(ErrorCode::insufficient_totals,
                 "no row has a total count of at least " + std::to_string(total_degree(alpha)) +
                     ", needed for a moment of degree " + std::to_string(total_degree(alpha)));
        const double v = s / static_cast<double>(used);
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.emplace(alpha, v);
        return v;
    }

    // Ineligible rows contribute the eligible-row mean, so the plain row
    // average still equals expect().
    double row_term(Eigen::Index i, const MultiIndex& alpha) const override {
        return eligible(i, alpha) ? raw_term(i, alpha) : expect(alpha);
    }

private:
    double raw_term(Eigen::Index i, const MultiIndex& alpha) const {
        double num = 1.0;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
            if (alpha[j] == 0) continue;
            num *= falling(x_(i, static_cast<Eigen::Index>(j)), alpha[j]);
            if (num == 0.0) return 0.0;
        }
        return num / falling(m_(i), total_degree(alpha));
    }

    CountMatrix x_;
    CountVector m_;
    mutable std::mutex mutex_;
    mutable std::map<MultiIndex, double> cache_;
};

} // namespace compscore
