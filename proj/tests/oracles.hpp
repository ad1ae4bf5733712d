#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond its value types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include <crowdprice/crowdprice.hpp>

namespace oracle {

using crowdprice::Cents;

/// Pois(mean) point masses 0..n-1 by the k-recurrence, plus the lumped tail at n.
inline std::vector<long double> lumped_poisson(std::int64_t n, long double mean) {
    std::vector<long double> out(static_cast<std::size_t>(n) + 1, 0.0L);
    long double term = std::exp(-mean);
    long double head = 0.0L;
    for (std::int64_t k = 0; k < n; ++k) {
        out[static_cast<std::size_t>(k)] = term;
        head += term;
        term *= mean / static_cast<long double>(k + 1);
    }
    out[static_cast<std::size_t>(n)] = std::max(0.0L, 1.0L - head);
    return out;
}

/// Logistic acceptance written directly in the exp(c/s - b) / (exp(c/s - b) + M) form.
inline long double logistic(long double c, long double s, long double b, long double m) {
    const long double e = std::exp(c / s - b);
    return e / (e + m);
}

/// Small deadline instance: interval t has `arrivals[t]` expected workers.
struct Instance {
    std::int64_t n_tasks;
    std::vector<double> arrivals;  // one per interval
    std::vector<Cents> prices;
    std::vector<double> accept;    // p at each price
    double penalty;
    double alpha = 0.0;

    std::int64_t intervals() const { return static_cast<std::int64_t>(arrivals.size()); }

    long double terminal(std::int64_t n) const {
        return n == 0 ? 0.0L : (static_cast<long double>(n) + alpha) * penalty;
    }

    /// Library problem with bucket = interval so that lambda_t = arrivals[t]; epsilon 0.
    crowdprice::DeadlineProblem problem(const crowdprice::AcceptanceModel& model, Cents step) const {
        return crowdprice::DeadlineProblem{n_tasks,
                                           intervals(),
                                           600,
                                           crowdprice::ArrivalProfile(600, arrivals, false),
                                           0,
                                           model,
                                           crowdprice::PriceGrid(prices.front(), prices.back(), step),
                                           penalty,
                                           alpha,
                                           0.0};
    }
};

/// Exact expected cost of a policy given as price index per (n, t), by backward evaluation.
inline long double policy_value(const Instance& inst, const std::function<std::size_t(std::int64_t, std::int64_t)>& choice,
                                std::vector<std::vector<long double>>* table = nullptr) {
    const auto n_t = inst.intervals();
    std::vector<long double> next(static_cast<std::size_t>(inst.n_tasks) + 1);
    for (std::int64_t n = 0; n <= inst.n_tasks; ++n) next[static_cast<std::size_t>(n)] = inst.terminal(n);
    if (table) table->assign(static_cast<std::size_t>(n_t) + 1, {});
    if (table) (*table)[static_cast<std::size_t>(n_t)] = next;
    for (std::int64_t t = n_t - 1; t >= 0; --t) {
        std::vector<long double> cur(next.size(), 0.0L);
        for (std::int64_t n = 1; n <= inst.n_tasks; ++n) {
            const std::size_t j = choice(n, t);
            const long double c = static_cast<long double>(inst.prices[j]);
            const auto dist = lumped_poisson(n, static_cast<long double>(inst.arrivals[static_cast<std::size_t>(t)]) *
                                                    static_cast<long double>(inst.accept[j]));
            long double v = 0.0L;
            for (std::int64_t s = 0; s <= n; ++s)
                v += dist[static_cast<std::size_t>(s)] * (static_cast<long double>(s) * c + next[static_cast<std::size_t>(n - s)]);
            cur[static_cast<std::size_t>(n)] = v;
        }
        next = std::move(cur);
        if (table) (*table)[static_cast<std::size_t>(t)] = next;
    }
    return next[static_cast<std::size_t>(inst.n_tasks)];
}

/// Number of decision states reachable from (N, 0) that need a price.
inline std::int64_t decision_states(const Instance& inst) { return 1 + (inst.intervals() - 1) * inst.n_tasks; }

/**
Minimum of policy_value over every deterministic assignment of a price to
each reachable decision state: (N, 0) and (n, t) for n >= 1, t >= 1.
*/
inline long double exhaustive_optimum(const Instance& inst) {
    const auto states = decision_states(inst);
    const auto k = static_cast<std::int64_t>(inst.prices.size());
    std::vector<std::size_t> digits(static_cast<std::size_t>(states), 0);
    auto index_of = [&](std::int64_t n, std::int64_t t) -> std::size_t {
        if (t == 0) return 0;
        return static_cast<std::size_t>(1 + (t - 1) * inst.n_tasks + (n - 1));
    };
    long double best = std::numeric_limits<long double>::infinity();
    for (;;) {
        const long double v = policy_value(inst, [&](std::int64_t n, std::int64_t t) {
            // unreachable states at t = 0 reuse digit 0; they never affect the value at (N, 0)
            return digits[index_of(n, t)];
        });
        best = std::min(best, v);
        std::size_t pos = 0;
        while (pos < digits.size() && ++digits[pos] == static_cast<std::size_t>(k)) digits[pos++] = 0;
        if (pos == digits.size()) break;
    }
    return best;
}

/**
Largest gain any single-state price change offers over the given policy
(one-shot deviation check). Zero (up to rounding) certifies optimality of a
finite-horizon policy.
*/
inline long double best_one_shot_gain(const Instance& inst, const std::function<std::size_t(std::int64_t, std::int64_t)>& choice) {
    std::vector<std::vector<long double>> value;
    policy_value(inst, choice, &value);
    long double gain = 0.0L;
    for (std::int64_t t = 0; t < inst.intervals(); ++t) {
        const auto& next = value[static_cast<std::size_t>(t) + 1];
        for (std::int64_t n = 1; n <= inst.n_tasks; ++n) {
            for (std::size_t j = 0; j < inst.prices.size(); ++j) {
                const auto dist = lumped_poisson(n, static_cast<long double>(inst.arrivals[static_cast<std::size_t>(t)]) *
                                                        static_cast<long double>(inst.accept[j]));
                long double q = 0.0L;
                for (std::int64_t s = 0; s <= n; ++s)
                    q += dist[static_cast<std::size_t>(s)] *
                         (static_cast<long double>(s) * static_cast<long double>(inst.prices[j]) + next[static_cast<std::size_t>(n - s)]);
                gain = std::max(gain, value[static_cast<std::size_t>(t)][static_cast<std::size_t>(n)] - q);
            }
        }
    }
    return gain;
}

/// Plain backward induction in long double, trying every price at every state.
inline long double backward_optimum(const Instance& inst) {
    std::vector<long double> next(static_cast<std::size_t>(inst.n_tasks) + 1);
    for (std::int64_t n = 0; n <= inst.n_tasks; ++n) next[static_cast<std::size_t>(n)] = inst.terminal(n);
    for (std::int64_t t = inst.intervals() - 1; t >= 0; --t) {
        std::vector<long double> cur(next.size(), 0.0L);
        for (std::int64_t n = 1; n <= inst.n_tasks; ++n) {
            long double best = std::numeric_limits<long double>::infinity();
            for (std::size_t j = 0; j < inst.prices.size(); ++j) {
                const auto dist = lumped_poisson(n, static_cast<long double>(inst.arrivals[static_cast<std::size_t>(t)]) *
                                                        static_cast<long double>(inst.accept[j]));
                long double v = 0.0L;
                for (std::int64_t s = 0; s <= n; ++s)
                    v += dist[static_cast<std::size_t>(s)] *
                         (static_cast<long double>(s) * static_cast<long double>(inst.prices[j]) + next[static_cast<std::size_t>(n - s)]);
                best = std::min(best, v);
            }
            cur[static_cast<std::size_t>(n)] = best;
        }
        next = std::move(cur);
    }
    return next[static_cast<std::size_t>(inst.n_tasks)];
}

struct RandomInstance {
    Instance inst;
    crowdprice::AcceptanceModel model;
    Cents step;
};

/// Random logistic instance with arrivals per interval in [lo, hi].
inline RandomInstance random_instance(std::mt19937_64& rng, std::int64_t n_tasks, std::int64_t intervals,
                                      Cents min_price, Cents max_price, Cents step, double arrivals_lo,
                                      double arrivals_hi) {
    std::uniform_real_distribution<double> rate(arrivals_lo, arrivals_hi);
    std::uniform_real_distribution<double> scale(2.0, 8.0), bias(-1.0, 1.0), mass(1.0, 20.0), pen(1.0, 4.0);
    const double s = scale(rng), b = bias(rng), m = mass(rng);
    RandomInstance r{{}, crowdprice::LogisticAcceptance(s, b, m), step};
    r.inst.n_tasks = n_tasks;
    for (std::int64_t t = 0; t < intervals; ++t) r.inst.arrivals.push_back(rate(rng));
    for (Cents c = min_price; c <= max_price; c += step) {
        r.inst.prices.push_back(c);
        r.inst.accept.push_back(static_cast<double>(logistic(static_cast<long double>(c), s, b, m)));
    }
    r.inst.penalty = pen(rng) * static_cast<double>(max_price);
    return r;
}

}  // namespace oracle
