#pragma once

// Portable random variates. std::mt19937_64 output is fixed by the standard,
// but the std:: distributions are not, so every transformation is written
// out here to keep (seed, stream) -> data identical across platforms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace compscore {

struct RngConfig {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

inline std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Named substreams: stream ids derived from a label so callers do not
// collide by accident.
inline std::uint64_t stream_id(std::string_view name, std::uint64_t index = 0) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t x = h ^ (index * 0x9e3779b97f4a7c15ULL);
    return splitmix64(x);
}

class Rng {
public:
    explicit Rng(RngConfig cfg = {}) {
        std::uint64_t x = cfg.seed;
        const std::uint64_t a = splitmix64(x);
        x ^= cfg.stream * 0xd1b54a32d192ed03ULL;
        const std::uint64_t b = splitmix64(x);
        std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                          static_cast<std::uint32_t>(cfg.stream), static_cast<std::uint32_t>(cfg.stream >> 32)};
        engine_.seed(seq);
    }

    Rng(std::uint64_t seed, std::uint64_t stream) : Rng(RngConfig{seed, stream}) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double a, b, s;
        do {
            a = 2.0 * uniform() - 1.0;
            b = 2.0 * uniform() - 1.0;
            s = a * a + b * b;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = b * f;
        has_spare_ = true;
        return a * f;
    }

    // log of a Gamma(shape, 1) draw; stays finite for tiny shapes where the
    // draw itself underflows.
    double log_gamma_variate(double shape) {
        if (shape < 1.0) {
            // G(a) = G(a + 1) U^(1/a)
            const double lg = log_gamma_variate(shape + 1.0);
            return lg + std::log(uniform()) / shape;
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return std::log(d * v);
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return std::log(d * v);
        }
    }

    double gamma(double shape) { return std::exp(log_gamma_variate(shape)); }

    // Dirichlet(alpha), normalised in log space.
    void dirichlet(std::span<const double> alpha, std::span<double> out) {
        std::vector<double> lg(alpha.size());
        double mx = -INFINITY;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
            lg[j] = log_gamma_variate(alpha[j]);
            mx = std::max(mx, lg[j]);
        }
        double s = 0.0;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
            out[j] = std::exp(lg[j] - mx);
            s += out[j];
        }
        for (auto& v : out) v /= s;
    }

    double beta(double a, double b) {
        const double la = log_gamma_variate(a), lb = log_gamma_variate(b);
        const double mx = std::max(la, lb);
        const double ea = std::exp(la - mx), eb = std::exp(lb - mx);
        return ea / (ea + eb);
    }

    // Binomial(n, prob). Inversion for small n; otherwise the recursive beta
    // split (Knuth, TAOCP vol. 2, 3.4.1).
    std::int64_t binomial(std::int64_t n, double prob) {
        if (n <= 0 || prob <= 0.0) return 0;
        if (prob >= 1.0) return n;
        std::int64_t offset = 0;
        while (n > 32) {
            const std::int64_t a = 1 + n / 2;
            const std::int64_t b = n + 1 - a;
            const double x = beta(static_cast<double>(a), static_cast<double>(b));
            if (x >= prob) {
                n = a - 1;
                prob /= x;
            } else {
                offset += a;
                n = b - 1;
                prob = (prob - x) / (1.0 - x);
            }
            if (prob <= 0.0) return offset;
            if (prob >= 1.0) return offset + n;
        }
        std::int64_t k = 0;
        for (std::int64_t t = 0; t < n; ++t)
            if (uniform() < prob) ++k;
        return offset + k;
    }

    // Multinomial(m, probs) via sequential conditional binomials.
    void multinomial(std::int64_t m, std::span<const double> probs, std::span<std::int64_t> out) {
        double rest = 1.0;
        std::int64_t left = m;
        const std::size_t p = probs.size();
        for (std::size_t j = 0; j + 1 < p; ++j) {
            std::int64_t x = 0;
            if (left > 0 && probs[j] > 0.0) {
                const double cond = rest > 0.0 ? std::min(1.0, probs[j] / rest) : 1.0;
                x = binomial(left, cond);
            }
            out[j] = x;
            left -= x;
            rest -= probs[j];
        }
        out[p - 1] = left;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace compscore
