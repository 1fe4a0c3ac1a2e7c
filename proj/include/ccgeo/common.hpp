#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccgeo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

/// A matrix expected to have full row rank does not: the map is not a
/// submersion at this point.
class RankDeficientError : public std::runtime_error {
public:
    explicit RankDeficientError(double sigma_min_, const std::string& where = "")
        : std::runtime_error("rank-deficient matrix (sigma_min=" + std::to_string(sigma_min_) +
                             (where.empty() ? "" : ", in " + where) + ")"),
          sigma_min(sigma_min_) {}
    double sigma_min;
};

/// An integral curve left every compact set (norm threshold exceeded or the
/// step size underflowed) before the requested time.
class BlowUpError : public std::runtime_error {
public:
    BlowUpError(double t_star_, bool step_underflow_)
        : std::runtime_error("trajectory blow-up near t=" + std::to_string(t_star_)),
          t_star(t_star_), step_underflow(step_underflow_) {}
    double t_star;
    bool step_underflow;
};

class StepBudgetError : public std::runtime_error {
public:
    explicit StepBudgetError(double t_reached_)
        : std::runtime_error("step budget exhausted at t=" + std::to_string(t_reached_)),
          t_reached(t_reached_) {}
    double t_reached;
};

class DimensionMismatchError : public std::runtime_error {
public:
    explicit DimensionMismatchError(const std::string& what) : std::runtime_error(what) {}
};

class WordTooLongError : public std::runtime_error {
public:
    explicit WordTooLongError(const std::string& what) : std::runtime_error(what) {}
};

class UnknownSystemError : public std::runtime_error {
public:
    explicit UnknownSystemError(const std::string& name)
        : std::runtime_error("unknown system: " + name) {}
};

class NotInRangeError : public std::runtime_error {
public:
    explicit NotInRangeError(const std::string& what) : std::runtime_error(what) {}
};

class RankZeroError : public std::runtime_error {
public:
    explicit RankZeroError(const std::string& what) : std::runtime_error(what) {}
};

class SpecError : public std::runtime_error {
public:
    explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Deterministic sampling
// ---------------------------------------------------------------------------

/// splitmix64: tiny seedable generator, identical output on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// uniform in [0,1)
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// uniform in [lo,hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

private:
    std::uint64_t state_;
};

/// R2 low-discrepancy sequence in [0,1)^d (generalized golden ratio),
/// cranked by a seed-dependent offset so runs are reproducible per seed.
class QuasiRandom {
public:
    QuasiRandom(int dim, std::uint64_t seed) : alpha_(dim), point_(dim) {
        // phi_d is the unique real root > 1 of x^(d+1) = x + 1.
        double phi = 2.0;
        for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
        double a = 1.0;
        SplitMix64 rng(seed);
        for (int k = 0; k < dim; ++k) {
            a /= phi;
            alpha_[k] = a;
            point_[k] = rng.next_double();
        }
    }

    /// next point in [0,1)^d
    const std::vector<double>& next() {
        for (std::size_t k = 0; k < point_.size(); ++k) {
            point_[k] += alpha_[k];
            if (point_[k] >= 1.0) point_[k] -= 1.0;
        }
        return point_;
    }

    /// next point mapped to the centered cube [-r,r]^d
    Vec next_in_cube(double r) {
        const auto& u = next();
        Vec x(u.size());
        for (std::size_t k = 0; k < u.size(); ++k) x[long(k)] = (2.0 * u[k] - 1.0) * r;
        return x;
    }

private:
    std::vector<double> alpha_;
    std::vector<double> point_;
};

// ---------------------------------------------------------------------------
// Lexicographic p-subsets of {0,...,n-1}
// ---------------------------------------------------------------------------

inline std::vector<int> first_subset(int p) {
    std::vector<int> s(p);
    for (int i = 0; i < p; ++i) s[i] = i;
    return s;
}

/// Advance to the next p-subset in lexicographic order; false when exhausted.
inline bool next_subset(std::vector<int>& s, int n) {
    const int p = int(s.size());
    int i = p - 1;
    while (i >= 0 && s[i] == n - p + i) --i;
    if (i < 0) return false;
    ++s[i];
    for (int j = i + 1; j < p; ++j) s[j] = s[j - 1] + 1;
    return true;
}

inline long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

}  // namespace ccgeo
