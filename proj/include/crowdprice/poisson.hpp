#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace crowdprice {

/// log of e^(-lambda) lambda^k / k!
inline double poisson_log_pmf(std::int64_t k, double lambda) {
    if (k < 0) return -std::numeric_limits<double>::infinity();
    if (lambda == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    const auto kd = static_cast<double>(k);
    return -lambda + kd * std::log(lambda) - std::lgamma(kd + 1.0);
}

inline double poisson_pmf(std::int64_t k, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("poisson_pmf: lambda must be finite and non-negative");
    if (k < 0) throw std::invalid_argument("poisson_pmf: k must be non-negative");
    return std::exp(poisson_log_pmf(k, lambda));
}

/**
Point masses and upper tails of Pois(lambda) over 0..size()-1.

The table extends past the mean until the point mass drops below `negligible`,
and at least up to `min_size - 1`. Tails are accumulated from the far end so
that small tails keep full relative precision. Beyond the table both the pmf
and the tail are treated as zero.
*/
class PoissonTable {
public:
    PoissonTable() = default;

    explicit PoissonTable(double lambda, std::size_t min_size = 1, double negligible = 1e-300)
        : lambda_(lambda) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw std::invalid_argument("PoissonTable: lambda must be finite and non-negative");
        std::int64_t k = 0;
        for (;;) {
            const double p = std::exp(poisson_log_pmf(k, lambda));
            pmf_.push_back(p);
            ++k;
            const bool past_mode = static_cast<double>(k) > lambda;
            if (past_mode && p < negligible && pmf_.size() >= min_size) break;
            if (past_mode && p == 0.0 && pmf_.size() >= min_size) break;
        }
        tail_.assign(pmf_.size() + 1, 0.0);
        for (std::size_t i = pmf_.size(); i-- > 0;) tail_[i] = tail_[i + 1] + pmf_[i];
        // while the head is the smaller side, 1 - head is the more accurate tail
        double head = 0.0;
        for (std::size_t i = 0; i < pmf_.size() && head < 0.5; ++i) {
            tail_[i] = 1.0 - head;
            head += pmf_[i];
        }
    }

    double lambda() const noexcept { return lambda_; }
    std::size_t size() const noexcept { return pmf_.size(); }

    double pmf(std::size_t k) const noexcept { return k < pmf_.size() ? pmf_[k] : 0.0; }

    /// Pr(X >= k)
    double tail(std::size_t k) const noexcept { return k < tail_.size() ? tail_[k] : 0.0; }

    /// Smallest s with Pr(X >= s) < epsilon.
    std::int64_t threshold(double epsilon) const noexcept {
        for (std::size_t s = 0; s < tail_.size(); ++s)
            if (tail_[s] < epsilon) return static_cast<std::int64_t>(s);
        return static_cast<std::int64_t>(tail_.size());
    }

private:
    double lambda_ = 0.0;
    std::vector<double> pmf_;
    std::vector<double> tail_;
};

/// Pr(Pois(lambda) >= s), exact summation.
inline double poisson_upper_tail(std::int64_t s, double lambda) {
    if (s <= 0) return 1.0;
    if (static_cast<double>(s) > lambda) {
        // terms decrease from here on
        double sum = 0.0;
        for (std::int64_t k = s;; ++k) {
            const double term = std::exp(poisson_log_pmf(k, lambda));
            sum += term;
            if (term <= sum * 1e-18 || term == 0.0) break;
        }
        return sum;
    }
    double head = 0.0;
    for (std::int64_t k = 0; k < s; ++k) head += std::exp(poisson_log_pmf(k, lambda));
    return head >= 1.0 ? 0.0 : 1.0 - head;
}

/**
Smallest s0 such that Pr(Pois(lambda) >= s0) < epsilon, using the exact tail.
Transition terms with s >= s0 can be dropped with total mass below epsilon.
*/
inline std::int64_t truncation_threshold(double lambda, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("truncation_threshold: epsilon must lie in (0, 1)");
    return PoissonTable(lambda).threshold(epsilon);
}

}  // namespace crowdprice
