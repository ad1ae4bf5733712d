#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "common.hpp"
#include "poisson.hpp"

namespace crowdprice {

// *******************************************************
// Arrival profile
// *******************************************************

/**
Piecewise-constant worker arrival rate. Bucket i covers
[i * bucket_seconds, (i + 1) * bucket_seconds) and carries `rates[i]`
expected arrivals. A periodic profile tiles time beyond its end.
*/
class ArrivalProfile {
public:
    ArrivalProfile(std::int64_t bucket_seconds, std::vector<double> rates, bool periodic = true)
        : bucket_seconds_(bucket_seconds), rates_(std::move(rates)), periodic_(periodic) {
        if (bucket_seconds_ <= 0) throw std::invalid_argument("arrival profile: bucket_seconds must be positive");
        if (rates_.empty()) throw std::invalid_argument("arrival profile: rates must be non-empty");
        prefix_.reserve(rates_.size() + 1);
        prefix_.push_back(0.0);
        for (double r : rates_) {
            if (!std::isfinite(r) || r < 0.0)
                throw std::invalid_argument("arrival profile: rates must be finite and non-negative");
            prefix_.push_back(prefix_.back() + r);
        }
    }

    std::int64_t bucket_seconds() const noexcept { return bucket_seconds_; }
    const std::vector<double>& rates() const noexcept { return rates_; }
    bool periodic() const noexcept { return periodic_; }
    std::size_t bucket_count() const noexcept { return rates_.size(); }

    /// Length of one period (or of the whole profile when not periodic).
    double span_seconds() const noexcept {
        return static_cast<double>(bucket_seconds_) * static_cast<double>(rates_.size());
    }

    /// Expected arrivals over one full period.
    double period_total() const noexcept { return prefix_.back(); }

    /// Rate (expected arrivals per bucket) in effect at time t.
    double rate_at(double t) const {
        const auto index = bucket_index(t);
        return rates_[index];
    }

    /// Cumulative expected arrivals over [0, t).
    double cumulative(double t) const {
        if (t < 0.0) throw std::invalid_argument("arrival profile: negative time");
        const double bucket = static_cast<double>(bucket_seconds_);
        const auto n = static_cast<std::int64_t>(rates_.size());
        if (!periodic_) {
            if (t > span_seconds()) throw std::out_of_range("profile exhausted");
            if (t == span_seconds()) return prefix_.back();
        }
        const auto k = static_cast<std::int64_t>(std::floor(t / bucket));
        const double frac = (t - static_cast<double>(k) * bucket) / bucket;
        const std::int64_t cycles = k / n;
        const auto idx = static_cast<std::size_t>(k % n);
        return static_cast<double>(cycles) * prefix_.back() + prefix_[idx] + rates_[idx] * frac;
    }

    friend bool operator==(const ArrivalProfile& a, const ArrivalProfile& b) {
        return a.bucket_seconds_ == b.bucket_seconds_ && a.rates_ == b.rates_ && a.periodic_ == b.periodic_;
    }

private:
    std::size_t bucket_index(double t) const {
        if (t < 0.0) throw std::invalid_argument("arrival profile: negative time");
        const auto k = static_cast<std::int64_t>(std::floor(t / static_cast<double>(bucket_seconds_)));
        const auto n = static_cast<std::int64_t>(rates_.size());
        if (!periodic_ && k >= n) throw std::out_of_range("profile exhausted");
        return static_cast<std::size_t>(k % n);
    }

    std::int64_t bucket_seconds_;
    std::vector<double> rates_;
    bool periodic_;
    std::vector<double> prefix_;
};

/// Integral of the arrival rate over [t_start, t_end).
inline double expected_arrivals(const ArrivalProfile& profile, double t_start, double t_end) {
    if (!(t_start >= 0.0) || !(t_end >= t_start))
        throw std::invalid_argument("expected_arrivals: need 0 <= t_start <= t_end");
    if (t_start == t_end) return 0.0;
    return std::max(0.0, profile.cumulative(t_end) - profile.cumulative(t_start));
}

// *******************************************************
// Price grid
// *******************************************************

class PriceGrid {
public:
    PriceGrid(Cents min_price, Cents max_price, Cents step = 1)
        : min_price_(min_price), max_price_(max_price), step_(step) {
        if (min_price < 0) throw std::invalid_argument("price grid: min_price must be non-negative");
        if (step <= 0) throw std::invalid_argument("price grid: step must be positive");
        if (max_price < min_price) throw std::invalid_argument("price grid: max_price below min_price");
        if ((max_price - min_price) % step != 0)
            throw std::invalid_argument("price grid: (max_price - min_price) must be divisible by step");
    }

    Cents min_price() const noexcept { return min_price_; }
    Cents max_price() const noexcept { return max_price_; }
    Cents step() const noexcept { return step_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>((max_price_ - min_price_) / step_) + 1; }

    Cents price(std::size_t index) const noexcept { return min_price_ + static_cast<Cents>(index) * step_; }

    bool contains(Cents price) const noexcept {
        return price >= min_price_ && price <= max_price_ && (price - min_price_) % step_ == 0;
    }

    std::size_t index_of(Cents price) const {
        if (!contains(price)) throw std::out_of_range("price " + std::to_string(price) + " is not on the grid");
        return static_cast<std::size_t>((price - min_price_) / step_);
    }

    std::vector<Cents> prices() const {
        std::vector<Cents> out;
        out.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) out.push_back(price(i));
        return out;
    }

    friend bool operator==(const PriceGrid&, const PriceGrid&) = default;

private:
    Cents min_price_;
    Cents max_price_;
    Cents step_;
};

// *******************************************************
// Acceptance models
// *******************************************************

/// p(c) = exp(c/s - b) / (exp(c/s - b) + M)
class LogisticAcceptance {
public:
    LogisticAcceptance(double scale, double bias, double market_mass)
        : scale_(scale), bias_(bias), market_mass_(market_mass) {
        if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("logistic model: scale must be positive");
        if (!std::isfinite(bias)) throw std::invalid_argument("logistic model: bias must be finite");
        if (!(market_mass >= 0.0) || !std::isfinite(market_mass))
            throw std::invalid_argument("logistic model: market mass must be non-negative");
    }

    double scale() const noexcept { return scale_; }
    double bias() const noexcept { return bias_; }
    double market_mass() const noexcept { return market_mass_; }

    double operator()(double price) const noexcept {
        if (market_mass_ == 0.0) return 1.0;
        const double exponent = std::clamp(bias_ - price / scale_, -700.0, 700.0);
        return 1.0 / (1.0 + market_mass_ * std::exp(exponent));
    }

    friend bool operator==(const LogisticAcceptance&, const LogisticAcceptance&) = default;

private:
    double scale_;
    double bias_;
    double market_mass_;
};

/// Explicit price -> probability table, non-decreasing in price.
class TabulatedAcceptance {
public:
    explicit TabulatedAcceptance(std::map<Cents, double> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) throw std::invalid_argument("tabulated model: no entries");
        double previous = 0.0;
        for (const auto& [price, p] : entries_) {
            if (price < 0) throw std::invalid_argument("tabulated model: negative price");
            if (!(p > 0.0 && p <= 1.0))
                throw std::invalid_argument("tabulated model: probability at " + std::to_string(price) + " outside (0, 1]");
            if (p < previous) throw std::invalid_argument("tabulated model: probabilities must be non-decreasing in price");
            previous = p;
        }
    }

    const std::map<Cents, double>& entries() const noexcept { return entries_; }

    double at(Cents price) const {
        const auto it = entries_.find(price);
        if (it == entries_.end()) throw std::out_of_range("price not in model: " + std::to_string(price));
        return it->second;
    }

    /// Linear interpolation between table prices, clamped at both ends.
    double interpolate(double price) const noexcept {
        const auto first = entries_.begin();
        const auto last = std::prev(entries_.end());
        if (price <= static_cast<double>(first->first)) return first->second;
        if (price >= static_cast<double>(last->first)) return last->second;
        auto hi = entries_.upper_bound(static_cast<Cents>(std::floor(price)));
        auto lo = std::prev(hi);
        const double x0 = static_cast<double>(lo->first);
        const double x1 = static_cast<double>(hi->first);
        return lo->second + (hi->second - lo->second) * (price - x0) / (x1 - x0);
    }

    friend bool operator==(const TabulatedAcceptance&, const TabulatedAcceptance&) = default;

private:
    std::map<Cents, double> entries_;
};

using AcceptanceModel = std::variant<LogisticAcceptance, TabulatedAcceptance>;

/// Probability that an arriving worker takes a task priced at `price` cents.
inline double acceptance_probability(const AcceptanceModel& model, Cents price) {
    if (price < 0) throw std::invalid_argument("acceptance_probability: negative price");
    return std::visit(
        [price](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LogisticAcceptance>) return m(static_cast<double>(price));
            else return m.at(price);
        },
        model);
}

/// Real-valued price; tabulated models interpolate.
inline double acceptance_probability_at(const AcceptanceModel& model, double price) {
    return std::visit(
        [price](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LogisticAcceptance>) return m(price);
            else return m.interpolate(price);
        },
        model);
}

/// p(c) for every grid price; throws if a tabulated model misses one.
inline std::vector<double> acceptance_on_grid(const AcceptanceModel& model, const PriceGrid& grid) {
    std::vector<double> out;
    out.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out.push_back(acceptance_probability(model, grid.price(i)));
    return out;
}

}  // namespace crowdprice
