#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "market_model.hpp"

namespace crowdprice {

/// Acceptance probabilities below this are treated as dead prices.
inline constexpr double kDeadAcceptance = 1e-12;

struct BudgetProblem {
    std::int64_t n_tasks;
    Cents budget;
    AcceptanceModel model;
    PriceGrid grid;
    double mean_rate = 1.0;  // expected worker arrivals per hour

    void validate() const {
        if (n_tasks < 1) throw std::invalid_argument("budget problem: n_tasks must be >= 1");
        if (budget < 0) throw std::invalid_argument("budget problem: budget must be non-negative");
        if (!(mean_rate > 0.0) || !std::isfinite(mean_rate))
            throw std::invalid_argument("budget problem: mean_rate must be positive");
    }
};

struct AllocationEntry {
    Cents price;
    std::int64_t count;

    friend bool operator==(const AllocationEntry&, const AllocationEntry&) = default;
};

/// The two hull prices bracketing B/N chosen by the rounding path.
struct HullBracket {
    Cents lower;
    Cents upper;
    double gap_bound;  // 1/p(lower) - 1/p(upper)
};

struct StaticAllocation {
    std::vector<AllocationEntry> entries;  // sorted by descending price
    double expected_workers = 0.0;
    double expected_latency_hours = 0.0;
    std::optional<HullBracket> bracket;

    std::int64_t task_count() const noexcept {
        std::int64_t n = 0;
        for (const auto& e : entries) n += e.count;
        return n;
    }

    Cents total_cost() const noexcept {
        Cents total = 0;
        for (const auto& e : entries) total += e.price * e.count;
        return total;
    }
};

/// E[W] = sum_i n_i / p(c_i); independent of the order tasks are taken in.
inline double expected_worker_arrivals(const std::vector<AllocationEntry>& entries, const AcceptanceModel& model) {
    double total = 0.0;
    for (const auto& e : entries) {
        if (e.count < 0) throw std::invalid_argument("expected_worker_arrivals: negative count");
        const double p = acceptance_probability(model, e.price);
        if (p < kDeadAcceptance)
            throw std::invalid_argument("price effectively dead: p(" + std::to_string(e.price) + ") below 1e-12");
        total += static_cast<double>(e.count) / p;
    }
    return total;
}

/// E[T] = E[W] / mean_rate (hours when the rate is per hour).
inline double expected_latency(double expected_workers, double mean_rate) {
    if (!(mean_rate > 0.0)) throw std::invalid_argument("expected_latency: mean_rate must be positive");
    return expected_workers / mean_rate;
}

struct HullPoint {
    Cents price;
    double inverse_acceptance;
};

/**
Prices on the lower convex hull of (price, 1/p(price)). Input must be sorted
by strictly increasing price. Collinear interior points are dropped; both
endpoints are always kept.
*/
inline std::vector<Cents> lower_convex_hull(const std::vector<HullPoint>& points) {
    if (points.empty()) throw std::invalid_argument("lower_convex_hull: no points");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].price <= points[i - 1].price)
            throw std::invalid_argument("lower_convex_hull: prices must be strictly increasing");
    std::vector<HullPoint> hull;
    for (const auto& q : points) {
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull.back();
            const double cross = static_cast<double>(b.price - a.price) * (q.inverse_acceptance - a.inverse_acceptance) -
                                 (b.inverse_acceptance - a.inverse_acceptance) * static_cast<double>(q.price - a.price);
            if (cross > 0.0) break;
            hull.pop_back();
        }
        hull.push_back(q);
    }
    std::vector<Cents> out;
    out.reserve(hull.size());
    for (const auto& h : hull) out.push_back(h.price);
    return out;
}

namespace detail {

/// Grid prices with usable acceptance, paired with 1/p.
inline std::vector<HullPoint> live_points(const BudgetProblem& problem) {
    std::vector<HullPoint> points;
    for (std::size_t i = 0; i < problem.grid.size(); ++i) {
        const Cents c = problem.grid.price(i);
        const double p = acceptance_probability(problem.model, c);
        if (p >= kDeadAcceptance) points.push_back({c, 1.0 / p});
    }
    return points;
}

inline void check_budget(const BudgetProblem& problem, const std::vector<HullPoint>& points) {
    if (points.empty()) throw InfeasibleError("budget below minimum: no grid price has usable acceptance");
    const Cents floor_price = points.front().price;
    if (problem.budget < problem.n_tasks * floor_price)
        throw InfeasibleError("budget below minimum: " + std::to_string(problem.budget) + " < " +
                              std::to_string(problem.n_tasks) + " x " + std::to_string(floor_price));
}

inline StaticAllocation finish(const BudgetProblem& problem, std::vector<AllocationEntry> entries) {
    entries.erase(std::remove_if(entries.begin(), entries.end(), [](const auto& e) { return e.count == 0; }),
                  entries.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.price > b.price; });
    StaticAllocation out;
    out.entries = std::move(entries);
    out.expected_workers = expected_worker_arrivals(out.entries, problem.model);
    out.expected_latency_hours = expected_latency(out.expected_workers, problem.mean_rate);
    return out;
}

}  // namespace detail

/**
Rounded LP allocation. Picks the hull prices c1 <= B/N < c2 and posts
n1 = ceil((c2 N - B) / (c2 - c1)) tasks at c1 and the rest at c2. When B/N
reaches the top hull price, or equals a hull price exactly, every task goes
to a single price.
*/
inline StaticAllocation solve_static_lp(const BudgetProblem& problem) {
    problem.validate();
    const auto points = detail::live_points(problem);
    detail::check_budget(problem, points);

    std::vector<HullPoint> hull_points;
    {
        const auto hull = lower_convex_hull(points);
        for (const auto& p : points)
            if (std::binary_search(hull.begin(), hull.end(), p.price)) hull_points.push_back(p);
    }
    const std::int64_t n = problem.n_tasks;
    const Cents budget = problem.budget;

    // c1: last hull price with c * N <= B (exists because the first point is affordable)
    std::size_t i1 = 0;
    while (i1 + 1 < hull_points.size() && hull_points[i1 + 1].price * n <= budget) ++i1;
    const HullPoint& c1 = hull_points[i1];
    if (i1 + 1 == hull_points.size() || c1.price * n == budget)
        return detail::finish(problem, {{c1.price, n}});

    const HullPoint& c2 = hull_points[i1 + 1];
    const Cents spread = c2.price - c1.price;
    const Cents excess = c2.price * n - budget;  // > 0
    const std::int64_t n1 = (excess + spread - 1) / spread;
    auto out = detail::finish(problem, {{c1.price, n1}, {c2.price, n - n1}});
    out.bracket = HullBracket{c1.price, c2.price, c1.inverse_acceptance - c2.inverse_acceptance};
    return out;
}

/**
Exact integer allocation by dynamic programming over (tasks placed, budget
spent) minimizing sum 1/p. Work is tasks x (budget + 1) x grid size cell
updates and must not exceed `work_cap`.
*/
inline StaticAllocation solve_static_exact(const BudgetProblem& problem, double work_cap = 1e8) {
    problem.validate();
    const auto points = detail::live_points(problem);
    detail::check_budget(problem, points);

    const auto n = static_cast<std::size_t>(problem.n_tasks);
    const auto width = static_cast<std::size_t>(problem.budget) + 1;
    const double work = static_cast<double>(n) * static_cast<double>(width) * static_cast<double>(points.size());
    if (work > work_cap)
        throw LimitError("instance too large for exact solver: " + std::to_string(work) + " cell updates exceed cap " +
                         std::to_string(work_cap));

    constexpr double inf = std::numeric_limits<double>::infinity();
    constexpr auto none = std::numeric_limits<std::uint32_t>::max();
    // best[b]: minimum sum of 1/p over the tasks placed so far with spend <= b
    std::vector<double> best(width, 0.0), next(width);
    Matrix<std::uint32_t> choice(n, width, none);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t b = 0; b < width; ++b) {
            double value = inf;
            std::uint32_t arg = none;
            for (std::size_t j = 0; j < points.size(); ++j) {
                const auto c = static_cast<std::size_t>(points[j].price);
                if (c > b) break;
                const double candidate = best[b - c] + points[j].inverse_acceptance;
                if (candidate < value) {
                    value = candidate;
                    arg = static_cast<std::uint32_t>(j);
                }
            }
            next[b] = value;
            choice(i, b) = arg;
        }
        std::swap(best, next);
    }

    std::vector<AllocationEntry> entries;
    std::size_t b = width - 1;
    for (std::size_t i = n; i-- > 0;) {
        const auto j = choice(i, b);
        if (j == none) throw std::logic_error("solve_static_exact: no feasible choice during reconstruction");
        const Cents c = points[j].price;
        auto it = std::find_if(entries.begin(), entries.end(), [c](const auto& e) { return e.price == c; });
        if (it == entries.end()) entries.push_back({c, 1});
        else ++it->count;
        b -= static_cast<std::size_t>(c);
    }
    return detail::finish(problem, std::move(entries));
}

}  // namespace crowdprice
