#pragma once

// Per-observation building blocks of the hybrid-model score matching
// objective on the sphere orthant.
//
// For statistic t_k write mu_k = grad_z t_k. Every mu_k has the form z (.) g_k
// where g_k, the reduced gradient, is a polynomial in u = z^2 supported on at
// most two coordinates. With nu_k = z'mu_k = sum_j u_j g_kj the terms are
//
//   R_kl  = h^2 (sum_j u_j g_kj g_lj - nu_k nu_l)        (contribution to W)
//   d1_k  = -h^2 Lap(t_k)
//   V_kj  = h^2 (g_kj - nu_k)                           (mu_k' mu_j^(s) = g_kj)
//
// and d6 = -V pi2. Writing mu_k' z_j^-1 e_j as g_kj removes every z_j^-1
// before evaluation, so exact zeros in the data are harmless.
//
// The templates run on double for continuous data and on Polynomial to expand
// the expectations into monomials for the factorial-moment route.

#include <array>
#include <span>
#include <vector>

#include "compscore/errors.hpp"
#include "compscore/model.hpp"

namespace compscore {

template <class T>
struct ReducedGradient {
    int size = 0;
    std::array<int, 2> coord{};
    std::array<T, 2> value{};
};

template <class T>
ReducedGradient<T> reduced_gradient(const Statistic& s, std::span<const T> u, const T& one) {
    ReducedGradient<T> g;
    switch (s.kind) {
    case StatKind::quartic: // 4 z_j^3 e_j
        g.size = 1;
        g.coord[0] = s.j;
        g.value[0] = 4.0 * u[static_cast<std::size_t>(s.j)];
        break;
    case StatKind::cross: // 4 z_j z_k^2 e_j + 4 z_j^2 z_k e_k
        g.size = 2;
        g.coord[0] = s.j;
        g.value[0] = 4.0 * u[static_cast<std::size_t>(s.k)];
        g.coord[1] = s.k;
        g.value[1] = 4.0 * u[static_cast<std::size_t>(s.j)];
        break;
    case StatKind::quadratic: // 2 z_j e_j
        g.size = 1;
        g.coord[0] = s.j;
        g.value[0] = 2.0 * one;
        break;
    }
    return g;
}

template <class T>
T nu_value(const Statistic& s, std::span<const T> u) {
    const T& uj = u[static_cast<std::size_t>(s.j)];
    switch (s.kind) {
    case StatKind::quartic: return 4.0 * (uj * uj);
    case StatKind::cross: return 8.0 * (uj * u[static_cast<std::size_t>(s.k)]);
    case StatKind::quadratic: break;
    }
    return 2.0 * uj;
}

// Laplace-Beltrami operator of t_k on the unit sphere. With
// lambda_k = k (k + p - 2): Lap z_j^4 = -lambda_4 z_j^4 + 12 z_j^2,
// Lap z_j^2 z_k^2 = -lambda_4 z_j^2 z_k^2 + 2 z_j^2 + 2 z_k^2,
// Lap z_j^2 = -lambda_2 z_j^2 + 2.
template <class T>
T laplacian(const Statistic& s, std::span<const T> u, int p, const T& one) {
    const double lambda2 = 2.0 * p;
    const double lambda4 = 4.0 * (4.0 + p - 2.0);
    const T& uj = u[static_cast<std::size_t>(s.j)];
    switch (s.kind) {
    case StatKind::quartic: return -lambda4 * (uj * uj) + 12.0 * uj;
    case StatKind::cross: {
        const T& uk = u[static_cast<std::size_t>(s.k)];
        return 2.0 * (-lambda4 * (uj * uk) + 2.0 * uj + 2.0 * uk);
    }
    case StatKind::quadratic: break;
    }
    return -lambda2 * uj + 2.0 * one;
}

// Full gradients mu_k = grad_z t_k (rows of mu) and nu_k = z'mu_k at one
// point of the sphere orthant. The log statistics s_j = log z_j have
// mu^(s)_j = e_j / z_j and nu^(s)_j = 1; they are never formed explicitly.
struct GradientTable {
    Eigen::MatrixXd mu; // q x p
    Eigen::VectorXd nu; // q
};

inline GradientTable gradients(std::span<const double> z, const ParameterIndexMap& map) {
    const int p = map.p();
    if (static_cast<int>(z.size()) != p) fail(ErrorCode::invalid_dimension, "point has wrong dimension");
    std::vector<double> u(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) u[j] = z[j] * z[j];
    const std::span<const double> us(u);
    GradientTable t{Eigen::MatrixXd::Zero(map.q(), p), Eigen::VectorXd::Zero(map.q())};
    for (int k = 0; k < map.q(); ++k) {
        const auto g = reduced_gradient<double>(map.stat(k), us, 1.0);
        for (int a = 0; a < g.size; ++a) {
            const int j = g.coord[static_cast<std::size_t>(a)];
            t.mu(k, j) = z[static_cast<std::size_t>(j)] * g.value[static_cast<std::size_t>(a)];
        }
        t.nu(k) = nu_value<double>(map.stat(k), us);
    }
    return t;
}

inline double laplacian_eigenvalue(int degree, int p) {
    return static_cast<double>(degree) * (degree + p - 2);
}

// Entry of (d3, d4, d5) for h^2 = prod z_j^2; the d2 contribution is
// -2 I_z h^2 times this.
template <class T>
T product_boundary_term(const Statistic& s, std::span<const T> u, int p, const T& one) {
    const T& uj = u[static_cast<std::size_t>(s.j)];
    switch (s.kind) {
    case StatKind::quartic: return 4.0 * uj - (4.0 * p) * (uj * uj);
    case StatKind::cross: {
        const T& uk = u[static_cast<std::size_t>(s.k)];
        return 4.0 * uj + 4.0 * uk - (8.0 * p) * (uj * uk);
    }
    case StatKind::quadratic: break;
    }
    return 2.0 * one - (2.0 * p) * uj;
}

// Entry of (d3, d4, d5) for h^2 = min(z^2, a_c^2) when coordinate i attains
// the minimum below the cap; the d2 contribution is minus this.
inline double min_boundary_term(const Statistic& s, std::span<const double> u, int i) {
    const double uj = u[static_cast<std::size_t>(s.j)];
    const double ui = u[static_cast<std::size_t>(i)];
    switch (s.kind) {
    case StatKind::quartic:
        return i == s.j ? 8.0 * uj * uj * (1.0 - uj) : -8.0 * uj * uj * ui;
    case StatKind::cross: {
        const double uk = u[static_cast<std::size_t>(s.k)];
        if (i == s.j) return 8.0 * uj * uk * (1.0 - uj) - 8.0 * uj * uj * uk;
        if (i == s.k) return 8.0 * uj * uk * (1.0 - uk) - 8.0 * uj * uk * uk;
        return -16.0 * ui * uj * uk;
    }
    case StatKind::quadratic: break;
    }
    return i == s.j ? 4.0 * uj * (1.0 - uj) : -4.0 * uj * ui;
}

// Per-observation contribution to W, d1, d2 and V (q x p), row-major.
template <class T>
struct HybridTerms {
    int q = 0;
    int p = 0;
    std::vector<T> R;
    std::vector<T> d1;
    std::vector<T> d2;
    std::vector<T> V;

    void resize(int q_, int p_, const T& zero) {
        q = q_;
        p = p_;
        R.assign(static_cast<std::size_t>(q) * q, zero);
        d1.assign(static_cast<std::size_t>(q), zero);
        d2.assign(static_cast<std::size_t>(q), zero);
        V.assign(static_cast<std::size_t>(q) * p, zero);
    }
};

// d2_term(k) supplies the d2 entry for statistic k; it encodes the weight kind.
template <class T, class D2Term>
void hybrid_observation(const ParameterIndexMap& map, std::span<const T> u, const T& h2, const T& one,
                        D2Term&& d2_term, HybridTerms<T>& out) {
    const int q = map.q();
    const int p = map.p();
    const T zero = 0.0 * one;
    if (out.q != q || out.p != p) out.resize(q, p, zero);

    std::vector<ReducedGradient<T>> grads;
    std::vector<T> nus;
    grads.reserve(static_cast<std::size_t>(q));
    nus.reserve(static_cast<std::size_t>(q));
    for (int k = 0; k < q; ++k) {
        grads.push_back(reduced_gradient<T>(map.stat(k), u, one));
        nus.push_back(nu_value<T>(map.stat(k), u));
    }

    for (int k = 0; k < q; ++k) {
        const auto& gk = grads[static_cast<std::size_t>(k)];
        for (int l = k; l < q; ++l) {
            const auto& gl = grads[static_cast<std::size_t>(l)];
            T s = zero;
            for (int a = 0; a < gk.size; ++a)
                for (int b = 0; b < gl.size; ++b)
                    if (gk.coord[static_cast<std::size_t>(a)] == gl.coord[static_cast<std::size_t>(b)])
                        s += u[static_cast<std::size_t>(gk.coord[static_cast<std::size_t>(a)])] *
                             (gk.value[static_cast<std::size_t>(a)] * gl.value[static_cast<std::size_t>(b)]);
            s -= nus[static_cast<std::size_t>(k)] * nus[static_cast<std::size_t>(l)];
            T r = h2 * s;
            out.R[static_cast<std::size_t>(k) * q + l] = r;
            if (l != k) out.R[static_cast<std::size_t>(l) * q + k] = std::move(r);
        }
    }

    for (int k = 0; k < q; ++k) {
        const auto& st = map.stat(k);
        out.d1[static_cast<std::size_t>(k)] = -(h2 * laplacian<T>(st, u, p, one));
        out.d2[static_cast<std::size_t>(k)] = d2_term(k);
        const auto& gk = grads[static_cast<std::size_t>(k)];
        const T& nuk = nus[static_cast<std::size_t>(k)];
        for (int j = 0; j < p; ++j) {
            T g = zero;
            for (int a = 0; a < gk.size; ++a)
                if (gk.coord[static_cast<std::size_t>(a)] == j) g = gk.value[static_cast<std::size_t>(a)];
            out.V[static_cast<std::size_t>(k) * p + j] = h2 * (g - nuk);
        }
    }
}

} // namespace compscore
