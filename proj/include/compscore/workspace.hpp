#pragma once

// Per-observation term sources and their deterministic parallel reduction.
//
// Every estimator in the library is the minimiser of
//   Psi(pi) = 1/2 pi' W pi - pi' d,   d = d1 + d2 + d6,  d6 = -V pi2,
// where W, d1, d2, V are sample averages of per-observation terms. A source
// yields those terms for observation i; reduce() averages them with blocked
// compensated summation so the result does not depend on the thread count.

#include <atomic>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "compscore/errors.hpp"
#include "compscore/kernels.hpp"
#include "compscore/model.hpp"
#include "compscore/moments.hpp"
#include "compscore/polynomial.hpp"
#include "compscore/weights.hpp"

namespace compscore {

struct ObservationTerms {
    Eigen::MatrixXd R;  // q x q
    Eigen::VectorXd d1; // q
    Eigen::VectorXd d2; // q
    Eigen::MatrixXd V;  // q x v (v = 0 when the model has no log statistics)
};

class ObservationSource {
public:
    virtual ~ObservationSource() = default;
    virtual Eigen::Index n() const = 0;
    virtual int q() const = 0;
    virtual int v_columns() const = 0;
    virtual void terms(Eigen::Index i, ObservationTerms& out) const = 0;
};

namespace detail {

inline void copy_terms(const HybridTerms<double>& h, ObservationTerms& out) {
    out.R = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        h.R.data(), h.q, h.q);
    out.d1 = Eigen::Map<const Eigen::VectorXd>(h.d1.data(), h.q);
    out.d2 = Eigen::Map<const Eigen::VectorXd>(h.d2.data(), h.q);
    out.V = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        h.V.data(), h.q, h.p);
}

} // namespace detail

// Hybrid / truncated-Gaussian terms evaluated at observed proportions.
class HybridContinuousSource : public ObservationSource {
public:
    HybridContinuousSource(const ContinuousDataset& data, const WeightSpec& weight)
        : map_(data.p()), u_(data.proportions()), weight_(weight) {
        weight_.validate();
    }

    Eigen::Index n() const override { return u_.rows(); }
    int q() const override { return map_.q(); }
    int v_columns() const override { return map_.p(); }
    const ParameterIndexMap& map() const { return map_; }

    void terms(Eigen::Index i, ObservationTerms& out) const override {
        const std::span<const double> u(u_.row(i).data(), static_cast<std::size_t>(u_.cols()));
        const WeightValue w = evaluate_weight(u, weight_);
        const int p = map_.p();
        auto d2 = [&](int k) -> double {
            if (w.cap_binds) return 0.0;
            const auto& s = map_.stat(k);
            if (is_product_kind(weight_.kind)) return -2.0 * w.h2 * product_boundary_term<double>(s, u, p, 1.0);
            return -min_boundary_term(s, u, w.argmin);
        };
        HybridTerms<double> h;
        hybrid_observation<double>(map_, u, w.h2, 1.0, d2, h);
        detail::copy_terms(h, out);
    }

private:
    ParameterIndexMap map_;
    RowMatrix u_;
    WeightSpec weight_;
};

// The hybrid terms under the uncapped product weight are polynomials in u.
// Each entry is expanded once per p into monomials; expectations then come
// from any MomentProvider.
struct PolynomialTermTable {
    int q = 0;
    int p = 0;
    std::vector<MultiIndex> monomials;
    // Entries laid out as R (q*q, row-major), d1 (q), d2 (q), V (q*p, row-major).
    std::vector<std::vector<std::pair<int, double>>> entries;

    std::size_t size() const { return entries.size(); }
};

inline std::shared_ptr<const PolynomialTermTable> polynomial_term_table(int p) {
    static std::mutex mutex;
    static std::map<int, std::shared_ptr<const PolynomialTermTable>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(p); it != cache.end()) return it->second;

    const ParameterIndexMap map(p);
    std::vector<Polynomial> u;
    for (int j = 0; j < p; ++j) u.push_back(Polynomial::variable(p, j));
    const Polynomial one(p, 1.0);
    Polynomial h2 = one;
    for (const auto& v : u) h2 *= v;
    const std::span<const Polynomial> us(u);
    auto d2 = [&](int k) { return -2.0 * (h2 * product_boundary_term<Polynomial>(map.stat(k), us, p, one)); };
    HybridTerms<Polynomial> h;
    hybrid_observation<Polynomial>(map, us, h2, one, d2, h);

    auto table = std::make_shared<PolynomialTermTable>();
    table->q = map.q();
    table->p = p;
    std::map<MultiIndex, int> index;
    auto add = [&](const Polynomial& poly) {
        std::vector<std::pair<int, double>> entry;
        for (const auto& [a, c] : poly.terms()) {
            auto [it, inserted] = index.emplace(a, static_cast<int>(table->monomials.size()));
            if (inserted) table->monomials.push_back(a);
            entry.emplace_back(it->second, c);
        }
        table->entries.push_back(std::move(entry));
    };
    for (const auto& e : h.R) add(e);
    for (const auto& e : h.d1) add(e);
    for (const auto& e : h.d2) add(e);
    for (const auto& e : h.V) add(e);
    cache.emplace(p, table);
    return table;
}

class PolynomialMomentSource : public ObservationSource {
public:
    explicit PolynomialMomentSource(std::shared_ptr<const MomentProvider> provider)
        : provider_(std::move(provider)), table_(polynomial_term_table(provider_->p())) {}

    Eigen::Index n() const override { return provider_->n(); }
    int q() const override { return table_->q; }
    int v_columns() const override { return table_->p; }
    const PolynomialTermTable& table() const { return *table_; }
    const MomentProvider& provider() const { return *provider_; }

    // Distinct multi-indices whose expectations enter W, d1, d2 and V.
    const std::vector<MultiIndex>& requested_moments() const { return table_->monomials; }

    void terms(Eigen::Index i, ObservationTerms& out) const override {
        std::vector<double> m(table_->monomials.size());
        for (std::size_t a = 0; a < m.size(); ++a) m[a] = provider_->row_term(i, table_->monomials[a]);
        fill(m, out);
    }

    // Entry-wise expectations computed from provider expectations directly.
    void expected_terms(ObservationTerms& out) const {
        std::vector<double> m(table_->monomials.size());
        for (std::size_t a = 0; a < m.size(); ++a) m[a] = provider_->expect(table_->monomials[a]);
        fill(m, out);
    }

private:
    void fill(const std::vector<double>& m, ObservationTerms& out) const {
        const int q = table_->q, p = table_->p;
        out.R.resize(q, q);
        out.d1.resize(q);
        out.d2.resize(q);
        out.V.resize(q, p);
        std::size_t e = 0;
        auto value = [&](std::size_t idx) {
            double s = 0.0;
            for (const auto& [a, c] : table_->entries[idx]) s += c * m[static_cast<std::size_t>(a)];
            return s;
        };
        for (int k = 0; k < q; ++k)
            for (int l = 0; l < q; ++l) out.R(k, l) = value(e++);
        for (int k = 0; k < q; ++k) out.d1(k) = value(e++);
        for (int k = 0; k < q; ++k) out.d2(k) = value(e++);
        for (int k = 0; k < q; ++k)
            for (int j = 0; j < p; ++j) out.V(k, j) = value(e++);
    }

    std::shared_ptr<const MomentProvider> provider_;
    std::shared_ptr<const PolynomialTermTable> table_;
};

// Blocked map-reduce over observation indices. Each fixed-size block is
// summed with Kahan compensation in index order, then the block partials are
// combined in block order; the thread count only changes who computes which
// block.
template <class Fill>
std::vector<double> blocked_mean(Eigen::Index n, std::size_t width, int threads, Eigen::Index block, Fill&& fill) {
    if (n <= 0) fail(ErrorCode::invalid_data, "cannot average over an empty dataset");
    if (block < 1) block = 1;
    const Eigen::Index nblocks = (n + block - 1) / block;
    std::vector<std::vector<double>> partial(static_cast<std::size_t>(nblocks));
    std::atomic<Eigen::Index> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&]() {
        std::vector<double> row(width);
        while (true) {
            const Eigen::Index b = next.fetch_add(1);
            if (b >= nblocks) return;
            try {
                std::vector<double> sum(width, 0.0), comp(width, 0.0);
                const Eigen::Index end = std::min(n, (b + 1) * block);
                for (Eigen::Index i = b * block; i < end; ++i) {
                    fill(i, row);
                    for (std::size_t k = 0; k < width; ++k) {
                        const double y = row[k] - comp[k];
                        const double t = sum[k] + y;
                        comp[k] = (t - sum[k]) - y;
                        sum[k] = t;
                    }
                }
                partial[static_cast<std::size_t>(b)] = std::move(sum);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(nblocks);
                return;
            }
        }
    };

    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(nblocks)));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    std::vector<double> total(width, 0.0), comp(width, 0.0);
    for (const auto& s : partial) {
        for (std::size_t k = 0; k < width; ++k) {
            const double y = s[k] - comp[k];
            const double t = total[k] + y;
            comp[k] = (t - total[k]) - y;
            total[k] = t;
        }
    }
    for (auto& v : total) v /= static_cast<double>(n);
    return total;
}

struct ReduceOptions {
    int threads = 1;
    Eigen::Index block = 256;
};

struct EstimatorWorkspace {
    Eigen::MatrixXd W;
    Eigen::VectorXd d1;
    Eigen::VectorXd d2;
    Eigen::VectorXd d6;
    Eigen::MatrixXd V;
    Eigen::VectorXd pi2;
    Eigen::Index n = 0;
    ReduceOptions reduce;
    // Kept for the second pass that forms per-observation residuals.
    std::shared_ptr<const ObservationSource> source;

    int q() const { return static_cast<int>(W.rows()); }
    Eigen::VectorXd d() const { return d1 + d2 + d6; }
};

inline void unpack_terms(const std::vector<double>& flat, int q, int v, ObservationTerms& out) {
    std::size_t e = 0;
    out.R.resize(q, q);
    out.d1.resize(q);
    out.d2.resize(q);
    out.V.resize(q, v);
    for (int k = 0; k < q; ++k)
        for (int l = 0; l < q; ++l) out.R(k, l) = flat[e++];
    for (int k = 0; k < q; ++k) out.d1(k) = flat[e++];
    for (int k = 0; k < q; ++k) out.d2(k) = flat[e++];
    for (int k = 0; k < q; ++k)
        for (int j = 0; j < v; ++j) out.V(k, j) = flat[e++];
}

inline void pack_terms(const ObservationTerms& t, std::vector<double>& flat) {
    const auto q = t.R.rows(), v = t.V.cols();
    std::size_t e = 0;
    for (Eigen::Index k = 0; k < q; ++k)
        for (Eigen::Index l = 0; l < q; ++l) flat[e++] = t.R(k, l);
    for (Eigen::Index k = 0; k < q; ++k) flat[e++] = t.d1(k);
    for (Eigen::Index k = 0; k < q; ++k) flat[e++] = t.d2(k);
    for (Eigen::Index k = 0; k < q; ++k)
        for (Eigen::Index j = 0; j < v; ++j) flat[e++] = t.V(k, j);
}

inline ObservationTerms average_terms(const ObservationSource& source, const ReduceOptions& opt) {
    const int q = source.q(), v = source.v_columns();
    const std::size_t width = static_cast<std::size_t>(q) * q + 2u * q + static_cast<std::size_t>(q) * v;
    auto flat = blocked_mean(source.n(), width, opt.threads, opt.block,
                             [&](Eigen::Index i, std::vector<double>& row) {
                                 ObservationTerms t;
                                 source.terms(i, t);
                                 pack_terms(t, row);
                             });
    ObservationTerms out;
    unpack_terms(flat, q, v, out);
    return out;
}

inline EstimatorWorkspace make_workspace(std::shared_ptr<const ObservationSource> source, const ObservationTerms& mean,
                                         const Eigen::VectorXd& pi2, const ReduceOptions& opt) {
    EstimatorWorkspace ws;
    ws.W = 0.5 * (mean.R + mean.R.transpose());
    ws.d1 = mean.d1;
    ws.d2 = mean.d2;
    ws.V = mean.V;
    ws.pi2 = pi2;
    if (ws.V.cols() != pi2.size()) fail(ErrorCode::invalid_dimension, "shape vector does not match the data dimension");
    ws.d6 = ws.V.cols() > 0 ? Eigen::VectorXd(-(ws.V * pi2)) : Eigen::VectorXd::Zero(ws.W.rows());
    ws.n = source->n();
    ws.reduce = opt;
    ws.source = std::move(source);
    return ws;
}

inline Eigen::VectorXd shape_to_pi2(const Eigen::VectorXd& beta) {
    return (Eigen::VectorXd::Ones(beta.size()) + 2.0 * beta).eval();
}

inline EstimatorWorkspace assemble(std::shared_ptr<const ObservationSource> source, const Eigen::VectorXd& pi2,
                                   const ReduceOptions& opt = {}) {
    const auto mean = average_terms(*source, opt);
    return make_workspace(std::move(source), mean, pi2, opt);
}

// Factorial / polynomial route: W and d come straight from provider
// expectations; the source is kept for the residual pass.
inline EstimatorWorkspace assemble_expected(std::shared_ptr<const PolynomialMomentSource> source, const Eigen::VectorXd& pi2,
                                   const ReduceOptions& opt = {}) {
    ObservationTerms mean;
    source->expected_terms(mean);
    return make_workspace(std::move(source), mean, pi2, opt);
}

inline EstimatorWorkspace hybrid_workspace(const ContinuousDataset& data, const WeightSpec& weight,
                                           const Eigen::VectorXd& beta, const ReduceOptions& opt = {}) {
    if (beta.size() != data.p()) fail(ErrorCode::invalid_dimension, "beta must have one entry per category");
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        if (!(beta(j) > -1.0)) fail(ErrorCode::invalid_data, "shape parameters must exceed -1");
    auto source = std::make_shared<const HybridContinuousSource>(data, weight);
    return assemble(std::static_pointer_cast<const ObservationSource>(source), shape_to_pi2(beta), opt);
}

inline Eigen::MatrixXd build_W(const ContinuousDataset& data, const WeightSpec& w, const ReduceOptions& opt = {}) {
    return hybrid_workspace(data, w, Eigen::VectorXd::Zero(data.p()), opt).W;
}

inline Eigen::VectorXd build_d1(const ContinuousDataset& data, const WeightSpec& w, const ReduceOptions& opt = {}) {
    return hybrid_workspace(data, w, Eigen::VectorXd::Zero(data.p()), opt).d1;
}

inline Eigen::VectorXd build_d2_capped_product(const ContinuousDataset& data, const WeightSpec& w,
                                               const ReduceOptions& opt = {}) {
    if (!is_product_kind(w.kind))
        fail(ErrorCode::configuration, "product-weight boundary term requested for a min-kind weight");
    return hybrid_workspace(data, w, Eigen::VectorXd::Zero(data.p()), opt).d2;
}

inline Eigen::VectorXd build_d2_capped_min(const ContinuousDataset& data, const WeightSpec& w,
                                           const ReduceOptions& opt = {}) {
    if (is_product_kind(w.kind))
        fail(ErrorCode::configuration, "min-weight boundary term requested for a product-kind weight");
    return hybrid_workspace(data, w, Eigen::VectorXd::Zero(data.p()), opt).d2;
}

inline Eigen::VectorXd build_d6(const ContinuousDataset& data, const WeightSpec& w, const Eigen::VectorXd& beta,
                                const ReduceOptions& opt = {}) {
    return hybrid_workspace(data, w, beta, opt).d6;
}

inline double objective_value(const EstimatorWorkspace& ws, const Eigen::VectorXd& pi) {
    if (pi.size() != ws.q()) fail(ErrorCode::invalid_dimension, "parameter vector has wrong length");
    return 0.5 * pi.dot(ws.W * pi) - pi.dot(ws.d());
}

} // namespace compscore
