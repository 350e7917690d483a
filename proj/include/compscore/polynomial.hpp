#pragma once

// Sparse multivariate polynomials in u = (u_1, ..., u_p) with double
// coefficients. Used to expand the per-observation estimator terms into
// monomials so they can be estimated from count data.

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

namespace compscore {

using MultiIndex = std::vector<std::uint8_t>;

inline int total_degree(const MultiIndex& a) {
    int d = 0;
    for (auto e : a) d += e;
    return d;
}

class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(int nvars, double c = 0.0) : nvars_(nvars) {
        if (c != 0.0) terms_[MultiIndex(static_cast<std::size_t>(nvars), 0)] = c;
    }

    static Polynomial variable(int nvars, int j) {
        Polynomial out(nvars);
        MultiIndex a(static_cast<std::size_t>(nvars), 0);
        a[static_cast<std::size_t>(j)] = 1;
        out.terms_[a] = 1.0;
        return out;
    }

    int nvars() const { return nvars_; }
    const std::map<MultiIndex, double>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    int degree() const {
        int d = 0;
        for (const auto& [a, c] : terms_) d = std::max(d, total_degree(a));
        return d;
    }

    Polynomial& operator+=(const Polynomial& o) {
        adopt(o);
        for (const auto& [a, c] : o.terms_) add_term(a, c);
        return *this;
    }
    Polynomial& operator-=(const Polynomial& o) {
        adopt(o);
        for (const auto& [a, c] : o.terms_) add_term(a, -c);
        return *this;
    }
    Polynomial& operator*=(double s) {
        if (s == 0.0) {
            terms_.clear();
            return *this;
        }
        for (auto& [a, c] : terms_) c *= s;
        return *this;
    }

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
    friend Polynomial operator-(Polynomial a) { return a *= -1.0; }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        Polynomial out(std::max(a.nvars_, b.nvars_));
        for (const auto& [ea, ca] : a.terms_) {
            for (const auto& [eb, cb] : b.terms_) {
                MultiIndex e(ea);
                for (std::size_t j = 0; j < e.size(); ++j) e[j] = static_cast<std::uint8_t>(e[j] + eb[j]);
                out.add_term(e, ca * cb);
            }
        }
        return out;
    }
    Polynomial& operator*=(const Polynomial& o) { return *this = *this * o; }

    // Sum of coefficient * value(multi-index).
    template <class MonomialValue>
    double evaluate(MonomialValue&& value) const {
        double s = 0.0;
        for (const auto& [a, c] : terms_) s += c * value(a);
        return s;
    }

    double evaluate_at(const std::vector<double>& u) const {
        return evaluate([&](const MultiIndex& a) {
            double v = 1.0;
            for (std::size_t j = 0; j < a.size(); ++j)
                for (int e = 0; e < a[j]; ++e) v *= u[j];
            return v;
        });
    }

private:
    void adopt(const Polynomial& o) {
        if (nvars_ == 0) nvars_ = o.nvars_;
    }

    void add_term(const MultiIndex& a, double c) {
        auto it = terms_.find(a);
        if (it == terms_.end()) {
            if (c != 0.0) terms_.emplace(a, c);
            return;
        }
        it->second += c;
        if (it->second == 0.0) terms_.erase(it);
    }

    int nvars_ = 0;
    std::map<MultiIndex, double> terms_;
};

} // namespace compscore
