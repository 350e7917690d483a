#pragma once

// Closed-form solve of the quadratic score matching objective, sandwich
// standard errors, and the hybrid-model fit entry points.

#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compscore/errors.hpp"
#include "compscore/model.hpp"
#include "compscore/moments.hpp"
#include "compscore/weights.hpp"
#include "compscore/workspace.hpp"

namespace compscore {

struct Solution {
    Eigen::VectorXd pi;       // full length q; fixed entries hold their fixed values
    std::vector<int> free;    // indices of estimated entries
    Eigen::MatrixXd system;   // W_EE (+ ridge I)
    double condition = 0.0;   // of W_EE
    double scaled_condition = 0.0; // after diagonal equilibration
    double ridge = 0.0;
};

namespace detail {

inline std::vector<int> free_indices(const std::vector<bool>& estimated) {
    std::vector<int> out;
    for (std::size_t i = 0; i < estimated.size(); ++i)
        if (estimated[i]) out.push_back(static_cast<int>(i));
    return out;
}

inline std::string null_combination(const Eigen::VectorXd& v, const std::vector<std::string>& labels) {
    // largest few coefficients of the near-null direction
    std::vector<int> order(static_cast<std::size_t>(v.size()));
    for (int i = 0; i < v.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(v(a)) > std::abs(v(b)); });
    std::ostringstream os;
    os.precision(3);
    const double top = std::abs(v(order[0]));
    int shown = 0;
    for (int i : order) {
        if (shown == 4 || std::abs(v(i)) < 0.05 * top) break;
        if (shown++) os << (v(i) < 0 ? " - " : " + ");
        else if (v(i) < 0) os << "-";
        os << std::abs(v(i)) << "*" << labels[static_cast<std::size_t>(i)];
    }
    return os.str();
}

} // namespace detail

// pi_E = (W_EE + ridge I)^-1 (d_E - W_EF pi_F). Fixed entries are taken from
// pi_fixed; estimated ones are ignored there.
inline Solution solve(const EstimatorWorkspace& ws, const Eigen::VectorXd& pi_fixed, const std::vector<bool>& estimated,
                      double ridge = 0.0, const std::vector<std::string>& labels = {}) {
    const int q = ws.q();
    if (pi_fixed.size() != q || estimated.size() != static_cast<std::size_t>(q))
        fail(ErrorCode::invalid_dimension, "parameter vector or mask does not match the workspace");
    if (!(ridge >= 0.0)) fail(ErrorCode::configuration, "ridge must be nonnegative");
    Solution sol;
    sol.ridge = ridge;
    sol.free = detail::free_indices(estimated);
    sol.pi = pi_fixed;
    const auto E = static_cast<Eigen::Index>(sol.free.size());
    if (E == 0) fail(ErrorCode::configuration, "no parameters are marked for estimation");

    std::vector<int> fixed;
    for (int i = 0; i < q; ++i)
        if (!estimated[static_cast<std::size_t>(i)]) fixed.push_back(i);

    const Eigen::VectorXd d = ws.d();
    Eigen::MatrixXd A(E, E);
    Eigen::VectorXd rhs(E);
    std::vector<std::string> names;
    for (Eigen::Index a = 0; a < E; ++a) {
        const int i = sol.free[static_cast<std::size_t>(a)];
        rhs(a) = d(i);
        for (int f : fixed) rhs(a) -= ws.W(i, f) * pi_fixed(f);
        for (Eigen::Index b = 0; b < E; ++b) A(a, b) = ws.W(i, sol.free[static_cast<std::size_t>(b)]);
        names.push_back(labels.empty() ? "p" + std::to_string(i + 1) : labels[static_cast<std::size_t>(i)]);
    }
    if (!A.allFinite() || !rhs.allFinite()) fail(ErrorCode::singular_system, "workspace contains non-finite entries");

    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> raw(A, Eigen::EigenvaluesOnly);
        const double lo = raw.eigenvalues().minCoeff(), hi = raw.eigenvalues().maxCoeff();
        sol.condition = lo > 0.0 ? hi / lo : INFINITY;
    }
    Eigen::VectorXd scale(E);
    bool zero_diag = false;
    for (Eigen::Index a = 0; a < E; ++a) {
        zero_diag = zero_diag || !(A(a, a) > 0.0);
        scale(a) = A(a, a) > 0.0 ? 1.0 / std::sqrt(A(a, a)) : 1.0;
    }
    const Eigen::MatrixXd S = scale.asDiagonal() * A * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(E - 1);
    sol.scaled_condition = lo > 0.0 ? hi / lo : INFINITY;
    if (ridge == 0.0 && (zero_diag || !(hi > 0.0) || lo < 1e-12 * hi)) {
        Eigen::VectorXd v = scale.asDiagonal() * eig.eigenvectors().col(0);
        v /= v.cwiseAbs().maxCoeff();
        fail(ErrorCode::singular_system,
             "W is singular along " + detail::null_combination(v, names) + " (use a ridge or fix parameters)");
    }

    sol.system = A + ridge * Eigen::MatrixXd::Identity(E, E);
    const Eigen::MatrixXd Ss = scale.asDiagonal() * sol.system * scale.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Ss);
    if (ldlt.info() != Eigen::Success) fail(ErrorCode::singular_system, "factorisation of W failed");
    const Eigen::VectorXd x = scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * rhs);
    if (!x.allFinite()) fail(ErrorCode::singular_system, "solve produced non-finite estimates");
    for (Eigen::Index a = 0; a < E; ++a) sol.pi(sol.free[static_cast<std::size_t>(a)]) = x(a);
    return sol;
}

// Per-observation residuals R_i pi - r_i restricted to the estimated entries,
// with r_i = d1_i + d2_i - V_i pi2.
inline Eigen::MatrixXd residual_covariance(const EstimatorWorkspace& ws, const Solution& sol) {
    if (!ws.source) fail(ErrorCode::configuration, "workspace has no observation source for standard errors");
    const auto E = static_cast<Eigen::Index>(sol.free.size());
    const std::size_t width = static_cast<std::size_t>(E * E);
    const auto& src = *ws.source;
    auto flat = blocked_mean(src.n(), width, ws.reduce.threads, ws.reduce.block,
                             [&](Eigen::Index i, std::vector<double>& row) {
                                 ObservationTerms t;
                                 src.terms(i, t);
                                 Eigen::VectorXd r = t.d1 + t.d2;
                                 if (t.V.cols() > 0) r -= t.V * ws.pi2;
                                 const Eigen::VectorXd full = t.R * sol.pi - r;
                                 Eigen::VectorXd e(E);
                                 for (Eigen::Index a = 0; a < E; ++a) e(a) = full(sol.free[static_cast<std::size_t>(a)]);
                                 std::size_t k = 0;
                                 for (Eigen::Index a = 0; a < E; ++a)
                                     for (Eigen::Index b = 0; b < E; ++b) row[k++] = e(a) * e(b);
                             });
    Eigen::MatrixXd sigma(E, E);
    std::size_t k = 0;
    for (Eigen::Index a = 0; a < E; ++a)
        for (Eigen::Index b = 0; b < E; ++b) sigma(a, b) = flat[k++];
    return 0.5 * (sigma + sigma.transpose());
}

// Sandwich covariance of sqrt(n) pi_E: W^-1 Sigma0 W^-1.
inline Eigen::MatrixXd standard_errors(const EstimatorWorkspace& ws, const Solution& sol) {
    const Eigen::MatrixXd sigma = residual_covariance(ws, sol);
    const Eigen::MatrixXd inv = sol.system.ldlt().solve(Eigen::MatrixXd::Identity(sol.system.rows(), sol.system.cols()));
    Eigen::MatrixXd cov = inv * sigma * inv;
    return 0.5 * (cov + cov.transpose());
}

struct FitOptions {
    WeightSpec weight;
    double ridge = 0.0;
    ReduceOptions reduce;
};

struct FitResult {
    Family family = Family::hybrid;
    std::string estimator = "continuous"; // continuous | factorial | dirichlet
    std::vector<std::string> labels;
    Eigen::VectorXd estimate; // full length; fixed entries echo their values
    std::vector<bool> estimated;
    Eigen::VectorXd se;         // 0 for fixed entries
    Eigen::MatrixXd covariance; // of sqrt(n) times the estimated entries
    Eigen::VectorXd shape;      // beta used (hybrid) or estimated (dirichlet)
    Eigen::Index n = 0;
    WeightSpec weight;
    double ridge = 0.0;
    double condition = 0.0;
    double scaled_condition = 0.0;
    double objective = 0.0;
    int renormalized_rows = 0;
    // factorial route: rows left out of moments of a given total degree
    std::map<int, Eigen::Index> excluded_rows_by_degree;

    // estimate / SE for estimated entries, 0 for fixed ones
    Eigen::VectorXd z_scores() const {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(estimate.size());
        for (Eigen::Index i = 0; i < estimate.size(); ++i)
            if (estimated[static_cast<std::size_t>(i)] && se(i) > 0.0) z(i) = estimate(i) / se(i);
        return z;
    }

    double value(const std::string& label) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return estimate(static_cast<Eigen::Index>(i));
        fail(ErrorCode::configuration, "unknown parameter label '" + label + "'");
    }

    // Fitted model, for sampling and diagnostics.
    ModelSpec model() const {
        ModelSpec m;
        m.family = family;
        m.p = static_cast<int>(shape.size());
        if (family == Family::dirichlet) {
            m.interaction = Eigen::MatrixXd::Zero(m.p - 1, m.p - 1);
            m.linear = Eigen::VectorXd::Zero(m.p - 1);
            m.shape = estimate;
        } else {
            m.interaction = Eigen::MatrixXd::Zero(m.p - 1, m.p - 1);
            m.linear = Eigen::VectorXd::Zero(m.p - 1);
            m.shape = shape;
            m.unpack(estimate);
        }
        m.estimated = estimated;
        return m;
    }
};

inline FitResult finish_fit(const EstimatorWorkspace& ws, const Solution& sol, const std::vector<std::string>& labels,
                            const std::vector<bool>& estimated) {
    FitResult r;
    r.labels = labels;
    r.estimate = sol.pi;
    r.estimated = estimated;
    r.n = ws.n;
    r.ridge = sol.ridge;
    r.condition = sol.condition;
    r.scaled_condition = sol.scaled_condition;
    r.objective = objective_value(ws, sol.pi);
    r.covariance = standard_errors(ws, sol);
    r.se = Eigen::VectorXd::Zero(sol.pi.size());
    for (std::size_t a = 0; a < sol.free.size(); ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        r.se(sol.free[a]) = std::sqrt(std::max(0.0, r.covariance(ai, ai)) / static_cast<double>(ws.n));
    }
    return r;
}

inline void check_hybrid_spec(const ModelSpec& spec, int p) {
    spec.validate();
    if (spec.family == Family::dirichlet)
        fail(ErrorCode::invalid_family, "use dirichlet_fit for the dirichlet family");
    if (spec.p != p) fail(ErrorCode::invalid_dimension, "model dimension does not match the data");
}

// Estimators 1-4: closed-form fit from observed (or count-derived) proportions.
// spec supplies beta, the estimation mask and the values of fixed parameters.
inline FitResult fit_hybrid(const ContinuousDataset& data, const ModelSpec& spec, const FitOptions& opt) {
    check_hybrid_spec(spec, data.p());
    const auto ws = hybrid_workspace(data, opt.weight, spec.shape, opt.reduce);
    const auto labels = ParameterIndexMap(spec.p).labels();
    const auto sol = solve(ws, spec.packed(), spec.estimated, opt.ridge, labels);
    FitResult r = finish_fit(ws, sol, labels, spec.estimated);
    r.family = spec.family;
    r.estimator = "continuous";
    r.shape = spec.shape;
    r.weight = opt.weight;
    r.renormalized_rows = data.renormalized_rows();
    return r;
}

inline EstimatorWorkspace factorial_workspace(std::shared_ptr<const MomentProvider> provider, const Eigen::VectorXd& beta,
                                              const ReduceOptions& opt = {}) {
    if (beta.size() != provider->p()) fail(ErrorCode::invalid_dimension, "beta must have one entry per category");
    auto source = std::make_shared<const PolynomialMomentSource>(std::move(provider));
    return assemble_expected(source, shape_to_pi2(beta), opt);
}

// Estimator 5: product weight with every moment replaced by its unbiased
// factorial-moment estimate from the counts.
inline FitResult fit_hybrid_factorial(const CountDataset& data, const ModelSpec& spec, const FitOptions& opt) {
    check_hybrid_spec(spec, data.p());
    if (opt.weight.kind != WeightKind::product)
        fail(ErrorCode::configuration, "the factorial-moment estimator requires the uncapped product weight");
    auto provider = std::make_shared<const FactorialMomentProvider>(data);
    const auto ws = factorial_workspace(provider, spec.shape, opt.reduce);
    const auto labels = ParameterIndexMap(spec.p).labels();
    const auto sol = solve(ws, spec.packed(), spec.estimated, opt.ridge, labels);
    FitResult r = finish_fit(ws, sol, labels, spec.estimated);
    r.family = spec.family;
    r.estimator = "factorial";
    r.shape = spec.shape;
    r.weight = opt.weight;
    const int max_degree = spec.p + 4;
    for (int deg = 1; deg <= max_degree; ++deg) {
        const auto c = provider->excluded_rows(deg);
        if (c > 0) r.excluded_rows_by_degree[deg] = c;
    }
    return r;
}

} // namespace compscore
