#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "common.hpp"
#include "market_model.hpp"

namespace crowdprice {

/// Constant arrivals of `lambda` workers per decision interval.
struct FixedRate {
    double lambda;
};

/// Transitions per worker arrival; latency converted with the mean hourly rate.
struct ArrivalBased {
    double mean_rate;
};

/// Minimize E[cost] + alpha * E[latency] with no deadline or budget.
struct TradeoffProblem {
    std::int64_t n_tasks;
    double alpha;  // cents per unit latency
    AcceptanceModel model;
    PriceGrid grid;
    std::variant<FixedRate, ArrivalBased> variant;

    void validate() const {
        if (n_tasks < 1) throw std::invalid_argument("tradeoff problem: n_tasks must be >= 1");
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("tradeoff problem: alpha must be non-negative");
        const double rate = std::visit([](const auto& v) {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, FixedRate>) return v.lambda;
            else return v.mean_rate;
        }, variant);
        if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("tradeoff problem: rate must be positive");
    }
};

/// prices[n], values[n] for n = 0..N; prices[0] is the grid minimum and values[0] = 0.
struct TradeoffSolution {
    std::vector<Cents> prices;
    std::vector<double> values;
    std::vector<std::string> warnings;
};

/**
Opt(n) = min_c [Opt(n-1) + c + delay / q(c)], Opt(0) = 0.

Fixed rate: q(c) = exp(-lambda p) lambda p and delay = alpha.
Arrival based: q(c) = p(c) and delay = alpha / mean_rate.
Ties go to the lowest price.
*/
inline TradeoffSolution solve_tradeoff(const TradeoffProblem& problem) {
    problem.validate();
    const auto accept = acceptance_on_grid(problem.model, problem.grid);
    std::vector<double> success(accept.size());
    double delay = problem.alpha;
    TradeoffSolution out;

    if (const auto* fixed = std::get_if<FixedRate>(&problem.variant)) {
        double peak = 0.0;
        for (std::size_t j = 0; j < accept.size(); ++j) {
            const double mean = fixed->lambda * accept[j];
            success[j] = std::exp(-mean) * mean;
            peak = std::max(peak, mean);
        }
        if (peak > 0.2)
            out.warnings.push_back("fixed-rate variant: max lambda*p(c) = " + std::to_string(peak) +
                                   " exceeds 0.2; multi-completion mass per interval is not modelled");
    } else {
        success = accept;
        delay = problem.alpha / std::get<ArrivalBased>(problem.variant).mean_rate;
    }

    // the per-step term does not depend on n
    double step_cost = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    bool any = false;
    for (std::size_t j = 0; j < success.size(); ++j) {
        if (!(success[j] > 0.0)) continue;
        const double c = static_cast<double>(problem.grid.price(j));
        const double cost = delay == 0.0 ? c : c + delay / success[j];
        if (!any || cost < step_cost - 1e-12 * std::abs(step_cost)) {
            step_cost = cost;
            arg = j;
            any = true;
        }
    }
    if (!any) throw InfeasibleError("no productive price: q(c) = 0 for every grid price");

    const auto n = static_cast<std::size_t>(problem.n_tasks);
    out.prices.assign(n + 1, problem.grid.price(arg));
    out.prices[0] = problem.grid.min_price();
    out.values.assign(n + 1, 0.0);
    for (std::size_t i = 1; i <= n; ++i) out.values[i] = out.values[i - 1] + step_cost;
    return out;
}

}  // namespace crowdprice
