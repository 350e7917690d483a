#pragma once

// Samplers for every model family, plus the multinomial layer.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compscore/errors.hpp"
#include "compscore/model.hpp"
#include "compscore/rng.hpp"

namespace compscore {

struct RejectionStats {
    std::int64_t attempted = 0;
    std::int64_t accepted = 0;
    double envelope = 1.0; // current C
    int updates = 0;
    std::vector<double> envelope_trace; // C after each update, starting value first

    double acceptance_rate() const {
        return attempted > 0 ? static_cast<double>(accepted) / static_cast<double>(attempted) : 0.0;
    }
};

struct SamplerOptions {
    double initial_envelope = 1.0;
    double safety_factor = 1.1;
    std::int64_t warmup = 1000;
    double min_acceptance = 1e-6;
    std::int64_t check_every = 1000000;
};

namespace detail {

inline void check_rate(const RejectionStats& s, const SamplerOptions& opt, ErrorCode code, const char* what) {
    if (s.attempted % opt.check_every != 0) return;
    if (s.acceptance_rate() < opt.min_acceptance) {
        std::string msg = std::string(what) + ": acceptance rate " + std::to_string(s.acceptance_rate()) +
                          " after " + std::to_string(s.attempted) + " proposals";
        if (!s.envelope_trace.empty()) {
            msg += "; envelope trace";
            const std::size_t from = s.envelope_trace.size() > 8 ? s.envelope_trace.size() - 8 : 0;
            for (std::size_t i = from; i < s.envelope_trace.size(); ++i) msg += " " + std::to_string(s.envelope_trace[i]);
        }
        fail(code, msg);
    }
}

} // namespace detail

// Exact draws from the truncated Gaussian: propose u_L ~ N(mu, Sigma) with
// mu = -A^-1 b / 2 and Sigma = -A^-1 / 2, keep it when it lies in the simplex.
inline ContinuousDataset sample_truncated_gaussian(const ModelSpec& spec, Eigen::Index n, Rng& rng,
                                                   RejectionStats* stats = nullptr, const SamplerOptions& opt = {}) {
    spec.validate();
    if (spec.shape.cwiseAbs().maxCoeff() != 0.0)
        fail(ErrorCode::invalid_family, "truncated-gaussian sampling requires beta = 0");
    const int r = spec.p - 1;
    const Eigen::MatrixXd neg = -spec.interaction;
    Eigen::LLT<Eigen::MatrixXd> llt_neg(neg);
    if (llt_neg.info() != Eigen::Success)
        fail(ErrorCode::invalid_family, "interaction matrix is not negative definite");
    const Eigen::MatrixXd neg_inv = llt_neg.solve(Eigen::MatrixXd::Identity(r, r));
    const Eigen::VectorXd mu = 0.5 * neg_inv * spec.linear;
    const Eigen::MatrixXd sigma = 0.5 * neg_inv;
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();

    RowMatrix u(n, spec.p);
    RejectionStats local;
    Eigen::VectorXd eps(r), x(r);
    Eigen::Index got = 0;
    while (got < n) {
        for (int j = 0; j < r; ++j) eps(j) = rng.normal();
        x = mu + L * eps;
        ++local.attempted;
        const double s = x.sum();
        if (x.minCoeff() >= 0.0 && s <= 1.0) {
            u.row(got).head(r) = x.transpose();
            u(got, r) = std::max(0.0, 1.0 - s);
            ++got;
            ++local.accepted;
        }
        detail::check_rate(local, opt, ErrorCode::infeasible_truncation, "truncated-gaussian sampler");
    }
    if (stats) *stats = local;
    return ContinuousDataset(std::move(u));
}

// Rows ~ Dirichlet(beta + 1).
inline ContinuousDataset sample_dirichlet(const Eigen::VectorXd& beta, Eigen::Index n, Rng& rng) {
    const auto p = beta.size();
    if (p < 2) fail(ErrorCode::invalid_dimension, "dirichlet sampling needs p >= 2");
    std::vector<double> alpha(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(beta(j) > -1.0)) fail(ErrorCode::invalid_data, "shape parameters must exceed -1");
        alpha[static_cast<std::size_t>(j)] = beta(j) + 1.0;
    }
    RowMatrix u(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        rng.dirichlet(alpha, std::span<double>(u.row(i).data(), static_cast<std::size_t>(p)));
    return ContinuousDataset(std::move(u));
}

// Empirical-supremum rejection sampling with a Dirichlet(beta + 1) proposal
// and acceptance probability exp(u'A*u + b'u) / C. Whenever a proposal's
// ratio exceeds C, C is raised to ratio * safety_factor before the accept
// test. The first `warmup` proposals only tune C.
inline ContinuousDataset sample_hybrid(const ModelSpec& spec, Eigen::Index n, Rng& rng, RejectionStats* stats = nullptr,
                                       const SamplerOptions& opt = {}) {
    spec.validate();
    if (!(opt.initial_envelope > 0.0)) fail(ErrorCode::configuration, "initial envelope constant must be positive");
    const int p = spec.p;
    const Eigen::MatrixXd A = spec.full_interaction();
    const Eigen::VectorXd b = spec.full_linear();
    std::vector<double> alpha(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) alpha[static_cast<std::size_t>(j)] = spec.shape(j) + 1.0;
    const double log_safety = std::log(opt.safety_factor);

    RejectionStats st;
    double log_c = std::log(opt.initial_envelope);
    st.envelope_trace.push_back(opt.initial_envelope);
    RowMatrix out(n, p);
    Eigen::VectorXd u(p);
    Eigen::Index got = 0;
    std::int64_t proposals = 0;
    while (got < n) {
        rng.dirichlet(alpha, std::span<double>(u.data(), static_cast<std::size_t>(p)));
        const double log_ratio = u.dot(A * u) + b.dot(u);
        if (log_ratio > log_c) {
            log_c = log_ratio + log_safety;
            ++st.updates;
            st.envelope_trace.push_back(std::exp(log_c));
        }
        const bool accept = std::log(rng.uniform()) <= log_ratio - log_c;
        if (++proposals <= opt.warmup) continue;
        ++st.attempted;
        if (accept) {
            out.row(got++) = u.transpose();
            ++st.accepted;
        }
        detail::check_rate(st, opt, ErrorCode::envelope_failure, "hybrid sampler");
    }
    st.envelope = std::exp(log_c);
    if (stats) *stats = st;
    return ContinuousDataset(std::move(out));
}

struct CompoundSample {
    CountDataset counts;
    ContinuousDataset latent; // retained for oracle checks
};

inline CompoundSample sample_multinomial_compound(const ContinuousDataset& latent, const CountVector& totals, Rng& rng) {
    if (totals.size() != latent.n()) fail(ErrorCode::invalid_data, "one total per latent row is required");
    CountMatrix x(latent.n(), latent.p());
    const auto& u = latent.proportions();
    for (Eigen::Index i = 0; i < latent.n(); ++i) {
        if (totals(i) < 1) fail(ErrorCode::invalid_total, "multinomial totals must be positive");
        rng.multinomial(totals(i), std::span<const double>(u.row(i).data(), static_cast<std::size_t>(u.cols())),
                        std::span<std::int64_t>(x.row(i).data(), static_cast<std::size_t>(x.cols())));
    }
    return {CountDataset(std::move(x), totals, latent.names()), latent};
}

inline CompoundSample sample_multinomial_compound(const ContinuousDataset& latent, std::int64_t m, Rng& rng) {
    return sample_multinomial_compound(latent, CountVector::Constant(latent.n(), m), rng);
}

// Dispatch on the model family.
inline ContinuousDataset sample_model(const ModelSpec& spec, Eigen::Index n, Rng& rng, RejectionStats* stats = nullptr,
                                      const SamplerOptions& opt = {}) {
    switch (spec.family) {
    case Family::truncated_gaussian: return sample_truncated_gaussian(spec, n, rng, stats, opt);
    case Family::dirichlet: {
        auto d = sample_dirichlet(spec.shape, n, rng);
        if (stats) *stats = RejectionStats{n, n, 1.0, 0, {1.0}};
        return d;
    }
    case Family::hybrid: break;
    }
    return sample_hybrid(spec, n, rng, stats, opt);
}

} // namespace compscore
