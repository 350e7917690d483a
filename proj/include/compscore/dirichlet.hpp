#pragma once

// Dirichlet models: score matching with t = log z, pi = 1 + 2 beta, and the
// moment-matching baseline.
//
// Per observation, with r_j = h^2 / u_j,
//   W_jk = delta_jk r_j - h^2
//   d1_j = (p - 2) h^2 + r_j
//   d2_j = -2 (r_j - p h^2)                 product kinds, cap not binding
//   d2_j = -2 (1 - u_i) (j = i), 2 u_i      min kinds with argmin i, cap not binding
// r_j is formed symbolically per weight kind so zeros never divide.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compscore/errors.hpp"
#include "compscore/model.hpp"
#include "compscore/score_matching.hpp"
#include "compscore/weights.hpp"
#include "compscore/workspace.hpp"

namespace compscore {

class DirichletSource : public ObservationSource {
public:
    DirichletSource(const ContinuousDataset& data, const WeightSpec& weight) : u_(data.proportions()), weight_(weight) {
        weight_.validate();
        for (Eigen::Index j = 0; j < u_.cols(); ++j)
            if (u_.col(j).maxCoeff() <= 0.0)
                fail(ErrorCode::unidentifiable,
                     "category " + data.names()[static_cast<std::size_t>(j)] + " is zero in every row");
    }

    Eigen::Index n() const override { return u_.rows(); }
    int q() const override { return static_cast<int>(u_.cols()); }
    int v_columns() const override { return 0; }

    void terms(Eigen::Index i, ObservationTerms& out) const override {
        const int p = q();
        const std::span<const double> u(u_.row(i).data(), static_cast<std::size_t>(p));
        const WeightValue w = evaluate_weight(u, weight_);
        Eigen::VectorXd r(p);
        for (int j = 0; j < p; ++j) r(j) = ratio(u, w, j);

        out.R = -w.h2 * Eigen::MatrixXd::Ones(p, p);
        out.R.diagonal() += r;
        out.d1 = ((p - 2.0) * w.h2) * Eigen::VectorXd::Ones(p) + r;
        out.d2 = Eigen::VectorXd::Zero(p);
        out.V.resize(p, 0);
        if (w.cap_binds) return;
        if (is_product_kind(weight_.kind)) {
            out.d2 = -2.0 * (r - (p * w.h2) * Eigen::VectorXd::Ones(p));
        } else {
            const double ui = u[static_cast<std::size_t>(w.argmin)];
            out.d2.setConstant(2.0 * ui);
            out.d2(w.argmin) = -2.0 * (1.0 - ui);
        }
    }

private:
    // h^2 / u_j without dividing by a possible zero.
    double ratio(std::span<const double> u, const WeightValue& w, int j) const {
        const double uj = u[static_cast<std::size_t>(j)];
        if (w.cap_binds) return w.h2 / uj; // u_j >= the binding value > 0
        if (is_product_kind(weight_.kind)) {
            double v = 1.0;
            for (int k = 0; k < static_cast<int>(u.size()); ++k)
                if (k != j) v *= u[static_cast<std::size_t>(k)];
            return v;
        }
        const double ui = u[static_cast<std::size_t>(w.argmin)];
        return uj == ui ? 1.0 : ui / uj;
    }

    RowMatrix u_;
    WeightSpec weight_;
};

inline EstimatorWorkspace dirichlet_workspace(const ContinuousDataset& data, const WeightSpec& weight,
                                              const ReduceOptions& opt = {}) {
    auto source = std::make_shared<const DirichletSource>(data, weight);
    return assemble(std::static_pointer_cast<const ObservationSource>(source), Eigen::VectorXd(), opt);
}

// Score matching for beta. spec must be a dirichlet ModelSpec; its mask marks
// which beta_j are estimated and fixed entries keep their values.
inline FitResult dirichlet_fit(const ContinuousDataset& data, const ModelSpec& spec, const FitOptions& opt) {
    spec.validate();
    if (spec.family != Family::dirichlet) fail(ErrorCode::invalid_family, "dirichlet_fit needs a dirichlet model");
    if (spec.p != data.p()) fail(ErrorCode::invalid_dimension, "model dimension does not match the data");
    const auto ws = dirichlet_workspace(data, opt.weight, opt.reduce);
    const auto labels = spec.parameter_labels();
    const auto sol = solve(ws, shape_to_pi2(spec.shape), spec.estimated, opt.ridge, labels);
    FitResult r = finish_fit(ws, sol, labels, spec.estimated);
    // report on the beta scale: beta = (pi - 1) / 2
    r.estimate = ((r.estimate.array() - 1.0) / 2.0).matrix();
    r.se /= 2.0;
    r.covariance /= 4.0;
    r.family = Family::dirichlet;
    r.estimator = "dirichlet";
    r.shape = r.estimate;
    r.weight = opt.weight;
    r.renormalized_rows = data.renormalized_rows();
    return r;
}

inline FitResult dirichlet_fit(const ContinuousDataset& data, const FitOptions& opt) {
    return dirichlet_fit(data, make_dirichlet(Eigen::VectorXd::Zero(data.p())), opt);
}

// Moment-matching baseline. The precision alpha_0 = sum(beta + 1) comes from
// the first category's mean and second moment; the means set the split.
inline Eigen::VectorXd dirichlet_moment_fit(const ContinuousDataset& data) {
    const auto& u = data.proportions();
    const Eigen::VectorXd mean = u.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < mean.size(); ++j)
        if (!(mean(j) > 0.0))
            fail(ErrorCode::unidentifiable, "category " + data.names()[static_cast<std::size_t>(j)] +
                                                " is zero in every row");
    const double m1 = mean(0);
    const double m2 = u.col(0).squaredNorm() / static_cast<double>(u.rows());
    const double var = m2 - m1 * m1;
    if (!(var > 0.0)) fail(ErrorCode::unidentifiable, "first category has no variation; precision is undefined");
    const double alpha0 = (m1 - m2) / var;
    if (!(alpha0 > 0.0)) fail(ErrorCode::unidentifiable, "moment estimate of the precision is not positive");
    return (alpha0 * mean.array() - 1.0).matrix();
}

} // namespace compscore
