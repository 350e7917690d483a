#pragma once

// Independent reference computations used by the tests. Nothing here calls
// the library's closed-form kernels: statistics are plain lambdas of z and
// all derivatives are central finite differences in the ambient space.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "compscore/compscore.hpp"

namespace oracle {

using Fn = std::function<double(const Eigen::VectorXd&)>;

// t_k(z) for the canonical statistic ordering: z_j^4 (j < p-1), then
// 2 z_j^2 z_k^2 (j < k < p-1, row-major), then z_j^2 (j < p-1).
inline std::vector<Fn> statistics(int p) {
    std::vector<Fn> t;
    const int r = p - 1;
    for (int j = 0; j < r; ++j) t.push_back([j](const Eigen::VectorXd& z) { return std::pow(z(j), 4); });
    for (int j = 0; j < r; ++j)
        for (int k = j + 1; k < r; ++k)
            t.push_back([j, k](const Eigen::VectorXd& z) { return 2.0 * z(j) * z(j) * z(k) * z(k); });
    for (int j = 0; j < r; ++j) t.push_back([j](const Eigen::VectorXd& z) { return z(j) * z(j); });
    return t;
}

inline Eigen::VectorXd gradient(const Fn& f, const Eigen::VectorXd& z, double h = 1e-6) {
    Eigen::VectorXd g(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        Eigen::VectorXd a = z, b = z;
        a(i) += h;
        b(i) -= h;
        g(i) = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

inline Eigen::MatrixXd hessian(const Fn& f, const Eigen::VectorXd& z, double h = 1e-4) {
    const auto p = z.size();
    Eigen::MatrixXd H(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) {
            auto at = [&](double si, double sj) {
                Eigen::VectorXd x = z;
                x(i) += si * h;
                x(j) += sj * h;
                return f(x);
            };
            H(i, j) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h * h);
        }
    return H;
}

// Laplace-Beltrami operator on the unit sphere for any smooth extension f:
// tr(P H P) - (p - 1) z'grad f with P = I - z z'.
inline double sphere_laplacian(const Fn& f, const Eigen::VectorXd& z) {
    const auto p = z.size();
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(p, p) - z * z.transpose();
    const Eigen::MatrixXd H = hessian(f, z);
    return (P * H * P).trace() - static_cast<double>(p - 1) * z.dot(gradient(f, z));
}

// h^2 as a function of z, straight from the weight definitions.
inline Fn weight_fn(compscore::WeightKind kind, double cap) {
    return [kind, cap](const Eigen::VectorXd& z) {
        const Eigen::VectorXd u = z.array().square();
        double v;
        if (kind == compscore::WeightKind::product || kind == compscore::WeightKind::capped_product) v = u.prod();
        else v = u.minCoeff();
        if (kind == compscore::WeightKind::capped_product || kind == compscore::WeightKind::capped_min)
            v = std::min(v, cap * cap);
        return v;
    };
}

struct Terms {
    Eigen::MatrixXd W;
    Eigen::VectorXd d1, d2;
    Eigen::MatrixXd V;
};

// Per-observation W, d1, d2 and V from numeric derivatives at interior z.
inline Terms observation_terms(const Eigen::VectorXd& z, compscore::WeightKind kind, double cap) {
    const int p = static_cast<int>(z.size());
    const auto t = statistics(p);
    const auto q = static_cast<Eigen::Index>(t.size());
    const Fn h2 = weight_fn(kind, cap);
    const double hz = h2(z);
    const Eigen::VectorXd gh = gradient(h2, z, 1e-7);
    Eigen::MatrixXd mu(q, p);
    Eigen::VectorXd nu(q);
    for (Eigen::Index k = 0; k < q; ++k) {
        mu.row(k) = gradient(t[static_cast<std::size_t>(k)], z).transpose();
        nu(k) = z.dot(mu.row(k).transpose());
    }
    Terms out;
    out.W = hz * (mu * mu.transpose() - nu * nu.transpose());
    out.d1.resize(q);
    out.d2.resize(q);
    out.V.resize(q, p);
    for (Eigen::Index k = 0; k < q; ++k) {
        out.d1(k) = -hz * sphere_laplacian(t[static_cast<std::size_t>(k)], z);
        out.d2(k) = -(mu.row(k).dot(gh) - nu(k) * z.dot(gh));
        for (int j = 0; j < p; ++j) out.V(k, j) = hz * (mu(k, j) / z(j) - nu(k));
    }
    return out;
}

// Jacobi-preconditioned conjugate gradient on 1/2 x'Ax - x'b in long double,
// restarted from the current iterate until the residual stops shrinking.
inline Eigen::VectorXd minimize_quadratic(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in) {
    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const LMat A = A_in.cast<long double>();
    const LVec b = b_in.cast<long double>();
    const auto n = b.size();
    const LVec dinv = A.diagonal().cwiseInverse();
    LVec x = LVec::Zero(n);
    long double best = INFINITY;
    for (int restart = 0; restart < 200; ++restart) {
        LVec r = b - A * x;
        const long double res = r.norm();
        if (!(res < best)) break;
        best = res;
        LVec z = dinv.asDiagonal() * r;
        LVec d = z;
        long double rz = r.dot(z);
        for (Eigen::Index it = 0; it < 4 * n && rz > 0; ++it) {
            const LVec Ad = A * d;
            const long double dAd = d.dot(Ad);
            if (!(dAd > 0)) break;
            const long double alpha = rz / dAd;
            x += alpha * d;
            r -= alpha * Ad;
            z = dinv.asDiagonal() * r;
            const long double rz_new = r.dot(z);
            d = z + (rz_new / rz) * d;
            rz = rz_new;
        }
    }
    return x.cast<double>();
}

// Random interior compositions from a flat Dirichlet.
inline compscore::ContinuousDataset random_data(int p, Eigen::Index n, std::uint64_t seed, double conc = 1.0) {
    compscore::Rng rng(seed, 99);
    return compscore::sample_dirichlet(Eigen::VectorXd::Constant(p, conc - 1.0), n, rng);
}

} // namespace oracle
