#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "common.hpp"
#include "market_model.hpp"
#include "poisson.hpp"

namespace crowdprice {

// *******************************************************
// Problem and policy
// *******************************************************

/// Ten times the highest grid price.
inline double default_penalty(const PriceGrid& grid) { return 10.0 * static_cast<double>(grid.max_price()); }

/**
Fixed-deadline pricing instance. Time [0, T) is cut into `n_intervals`
intervals of `interval_seconds`; interval t starts at
start_offset_seconds + t * interval_seconds within the arrival profile.

Tasks unsolved at the deadline cost `penalty` each. With
existence_alpha > 0 the terminal cost is (n + alpha) * penalty for n > 0.
An epsilon of 0 disables Poisson truncation.
*/
struct DeadlineProblem {
    std::int64_t n_tasks;
    std::int64_t n_intervals;
    std::int64_t interval_seconds;
    ArrivalProfile profile;
    std::int64_t start_offset_seconds;
    AcceptanceModel model;
    PriceGrid grid;
    double penalty;
    double existence_alpha = 0.0;
    double epsilon = 1e-9;

    void validate() const {
        if (n_tasks < 1) throw std::invalid_argument("deadline problem: n_tasks must be >= 1");
        if (n_intervals < 1) throw std::invalid_argument("deadline problem: n_intervals must be >= 1");
        if (interval_seconds < 1) throw std::invalid_argument("deadline problem: interval_seconds must be >= 1");
        if (start_offset_seconds < 0) throw std::invalid_argument("deadline problem: negative start offset");
        if (!(penalty >= 0.0) || !std::isfinite(penalty))
            throw std::invalid_argument("deadline problem: penalty must be finite and non-negative");
        if (!(existence_alpha >= 0.0) || !std::isfinite(existence_alpha))
            throw std::invalid_argument("deadline problem: existence_alpha must be non-negative");
        if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("deadline problem: epsilon must lie in [0, 1)");
    }

    std::vector<std::string> warnings() const {
        std::vector<std::string> out;
        if (penalty < static_cast<double>(grid.max_price()))
            out.push_back("penalty is below the maximum grid price; the policy may prefer leaving tasks unsolved");
        return out;
    }

    double deadline_seconds() const noexcept {
        return static_cast<double>(n_intervals) * static_cast<double>(interval_seconds);
    }

    /// Expected worker arrivals during interval t.
    double interval_arrivals(std::int64_t t) const {
        const double start = static_cast<double>(start_offset_seconds + t * interval_seconds);
        return expected_arrivals(profile, start, start + static_cast<double>(interval_seconds));
    }

    /// Cost charged at the deadline for n unsolved tasks.
    double terminal_cost(std::int64_t n) const noexcept {
        if (n <= 0) return 0.0;
        return (static_cast<double>(n) + existence_alpha) * penalty;
    }
};

/// Stable digest over every field of the problem.
inline std::string problem_digest(const DeadlineProblem& problem) {
    Fnv1a64 h;
    h.update("deadline-problem/1");
    h.update_value(problem.n_tasks);
    h.update_value(problem.n_intervals);
    h.update_value(problem.interval_seconds);
    h.update_value(problem.profile.bucket_seconds());
    h.update_value(problem.profile.periodic());
    for (double r : problem.profile.rates()) h.update_value(r);
    h.update_value(problem.start_offset_seconds);
    h.update_value(problem.model.index());
    if (const auto* logistic = std::get_if<LogisticAcceptance>(&problem.model)) {
        h.update_value(logistic->scale());
        h.update_value(logistic->bias());
        h.update_value(logistic->market_mass());
    } else {
        for (const auto& [price, p] : std::get<TabulatedAcceptance>(problem.model).entries()) {
            h.update_value(price);
            h.update_value(p);
        }
    }
    h.update_value(problem.grid.min_price());
    h.update_value(problem.grid.max_price());
    h.update_value(problem.grid.step());
    h.update_value(problem.penalty);
    h.update_value(problem.existence_alpha);
    h.update_value(problem.epsilon);
    return h.hex();
}

/**
price(n, t): price to post during interval t with n tasks left, (N+1) x N_T.
opt(n, t):   minimum expected cost-to-go, (N+1) x (N_T+1); column N_T holds
             the terminal penalties.
*/
struct DeadlinePolicy {
    Matrix<Cents> price;
    Matrix<double> opt;
    std::string problem_digest;

    std::int64_t n_tasks() const noexcept { return static_cast<std::int64_t>(price.rows()) - 1; }
    std::int64_t n_intervals() const noexcept { return static_cast<std::int64_t>(price.cols()); }
};

// *******************************************************
// Transitions
// *******************************************************

/**
Distribution of completions during one interval with n tasks left and
thinned arrival mean `mean` (lambda_t * p). Entries s = 0..min(n-1, s0-1)
carry Pois(s | mean); the boundary entry s = n carries Pr(Pois >= n) and is
kept whenever n <= s0. Truncated mass is dropped, never renormalized.
epsilon = 0 keeps the full support.
*/
inline std::vector<std::pair<std::int64_t, double>> transition_distribution(std::int64_t n, double mean,
                                                                            double epsilon) {
    if (n < 1) throw std::invalid_argument("transition_distribution: n must be >= 1");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("transition_distribution: epsilon must lie in [0, 1)");
    const PoissonTable table(mean, static_cast<std::size_t>(n) + 1);
    const std::int64_t cutoff = epsilon > 0.0 ? table.threshold(epsilon) : std::numeric_limits<std::int64_t>::max();
    std::vector<std::pair<std::int64_t, double>> out;
    const std::int64_t last = std::min(n - 1, cutoff - 1);
    for (std::int64_t s = 0; s <= last; ++s) out.emplace_back(s, table.pmf(static_cast<std::size_t>(s)));
    if (n <= cutoff) out.emplace_back(n, table.tail(static_cast<std::size_t>(n)));
    return out;
}

namespace detail {

struct Kernel {
    Cents price = 0;
    double mean = 0.0;
    std::int64_t cutoff = 0;
    PoissonTable table;
};

/// Poisson kernels for every (interval, grid price); independent of the penalty.
class TransitionCache {
public:
    explicit TransitionCache(const DeadlineProblem& problem)
        : intervals_(static_cast<std::size_t>(problem.n_intervals)), prices_(problem.grid.size()) {
        problem.validate();
        const auto accept = acceptance_on_grid(problem.model, problem.grid);
        kernels_.reserve(intervals_ * prices_);
        for (std::size_t t = 0; t < intervals_; ++t) {
            const double arrivals = problem.interval_arrivals(static_cast<std::int64_t>(t));
            for (std::size_t j = 0; j < prices_; ++j) {
                Kernel k;
                k.price = problem.grid.price(j);
                k.mean = arrivals * accept[j];
                k.table = PoissonTable(k.mean);
                k.cutoff = problem.epsilon > 0.0 ? k.table.threshold(problem.epsilon)
                                                 : std::numeric_limits<std::int64_t>::max();
                kernels_.push_back(std::move(k));
            }
        }
    }

    const Kernel& at(std::size_t t, std::size_t j) const { return kernels_[t * prices_ + j]; }
    std::size_t intervals() const noexcept { return intervals_; }
    std::size_t prices() const noexcept { return prices_; }

private:
    std::size_t intervals_;
    std::size_t prices_;
    std::vector<Kernel> kernels_;
};

/// Expected cost of posting kernel.price with n tasks left, given next-interval values.
inline double state_cost(std::int64_t n, const Kernel& k, const std::vector<double>& next) {
    if (n == 0) return 0.0;
    const double c = static_cast<double>(k.price);
    const std::int64_t last = std::min(n - 1, k.cutoff - 1);
    double cost = 0.0;
    for (std::int64_t s = 0; s <= last; ++s) {
        const double p = k.table.pmf(static_cast<std::size_t>(s));
        if (p == 0.0 && static_cast<std::size_t>(s) >= k.table.size()) break;
        cost += p * (static_cast<double>(s) * c + next[static_cast<std::size_t>(n - s)]);
    }
    if (n <= k.cutoff) cost += k.table.tail(static_cast<std::size_t>(n)) * (static_cast<double>(n) * c + next[0]);
    return cost;
}

struct Choice {
    double cost;
    std::size_t index;
};

/// Lowest-priced minimizer over grid indices [lo, hi].
inline Choice best_price(std::int64_t n, std::size_t t, std::size_t lo, std::size_t hi, const TransitionCache& cache,
                         const std::vector<double>& next) {
    Choice best{std::numeric_limits<double>::infinity(), lo};
    for (std::size_t j = lo; j <= hi; ++j) {
        const double cost = state_cost(n, cache.at(t, j), next);
        if (j == lo || cost < best.cost - 1e-12 * std::abs(best.cost)) best = {cost, j};
    }
    return best;
}

enum class Method { simple, efficient };

inline void efficient_range(std::int64_t l, std::int64_t r, std::size_t lo, std::size_t hi, std::size_t t,
                            const TransitionCache& cache, const std::vector<double>& next,
                            std::vector<Choice>& out) {
    const std::int64_t m = l + (r - l) / 2;
    const Choice c = best_price(m, t, lo, hi, cache, next);
    out[static_cast<std::size_t>(m)] = c;
    if (l < m) efficient_range(l, m - 1, lo, c.index, t, cache, next, out);
    if (m < r) efficient_range(m + 1, r, c.index, hi, t, cache, next, out);
}

inline DeadlinePolicy solve_with(const DeadlineProblem& problem, const TransitionCache& cache, Method method) {
    const auto n_states = static_cast<std::size_t>(problem.n_tasks) + 1;
    const auto n_t = static_cast<std::size_t>(problem.n_intervals);
    DeadlinePolicy policy{Matrix<Cents>(n_states, n_t, problem.grid.min_price()), Matrix<double>(n_states, n_t + 1, 0.0),
                          problem_digest(problem)};
    std::vector<double> next(n_states);
    for (std::size_t n = 0; n < n_states; ++n) {
        next[n] = problem.terminal_cost(static_cast<std::int64_t>(n));
        policy.opt(n, n_t) = next[n];
    }
    std::vector<Choice> choices(n_states);
    for (std::size_t t = n_t; t-- > 0;) {
        if (method == Method::simple) {
            for (std::size_t n = 0; n < n_states; ++n)
                choices[n] = best_price(static_cast<std::int64_t>(n), t, 0, cache.prices() - 1, cache, next);
        } else {
            efficient_range(0, problem.n_tasks, 0, cache.prices() - 1, t, cache, next, choices);
        }
        for (std::size_t n = 0; n < n_states; ++n) {
            policy.price(n, t) = problem.grid.price(choices[n].index);
            policy.opt(n, t) = choices[n].cost;
            next[n] = choices[n].cost;
        }
    }
    return policy;
}

}  // namespace detail

// *******************************************************
// Solvers
// *******************************************************

/// Backward induction over every (n, t) and every grid price.
inline DeadlinePolicy solve_simple(const DeadlineProblem& problem) {
    return detail::solve_with(problem, detail::TransitionCache(problem), detail::Method::simple);
}

/**
Backward induction that, within each interval, visits n by recursive
bisection and restricts each state's price search to the range bracketed by
the already-solved neighbours. Exact whenever the optimal price is
non-decreasing in n.
*/
inline DeadlinePolicy solve_efficient(const DeadlineProblem& problem) {
    return detail::solve_with(problem, detail::TransitionCache(problem), detail::Method::efficient);
}

enum class SolverKind { simple, efficient };

inline DeadlinePolicy solve_deadline(const DeadlineProblem& problem, SolverKind kind) {
    return kind == SolverKind::simple ? solve_simple(problem) : solve_efficient(problem);
}

// *******************************************************
// Exact forward evaluation
// *******************************************************

struct PolicyEvaluation {
    double expected_cost = 0.0;       // payments for completed tasks
    double expected_penalty = 0.0;    // terminal cost
    double expected_remaining = 0.0;  // unsolved tasks at the deadline
    double pr_any_remaining = 0.0;
    std::vector<double> final_distribution;  // Pr(n unsolved at deadline)

    double completion_probability() const noexcept { return 1.0 - pr_any_remaining; }
    double expected_total() const noexcept { return expected_cost + expected_penalty; }
};

namespace detail {

/// Full-support propagation of the state distribution from (N, 0).
template <typename PriceIndexAt>
PolicyEvaluation evaluate_forward(const DeadlineProblem& problem, const TransitionCache& cache,
                                  PriceIndexAt&& price_index_at) {
    const auto n_states = static_cast<std::size_t>(problem.n_tasks) + 1;
    std::vector<double> dist(n_states, 0.0), next(n_states, 0.0);
    dist[n_states - 1] = 1.0;
    PolicyEvaluation out;
    for (std::size_t t = 0; t < cache.intervals(); ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        next[0] = dist[0];
        for (std::size_t n = 1; n < n_states; ++n) {
            const double mass = dist[n];
            if (mass == 0.0) continue;
            const Kernel& k = cache.at(t, price_index_at(n, t));
            const double c = static_cast<double>(k.price);
            const std::size_t support = std::min(n, k.table.size());
            for (std::size_t s = 0; s < support; ++s) {
                const double w = mass * k.table.pmf(s);
                next[n - s] += w;
                out.expected_cost += w * static_cast<double>(s) * c;
            }
            const double w = mass * k.table.tail(n);
            next[0] += w;
            out.expected_cost += w * static_cast<double>(n) * c;
        }
        std::swap(dist, next);
    }
    for (std::size_t n = 1; n < n_states; ++n) {
        out.expected_remaining += static_cast<double>(n) * dist[n];
        out.pr_any_remaining += dist[n];
        out.expected_penalty += dist[n] * problem.terminal_cost(static_cast<std::int64_t>(n));
    }
    out.final_distribution = std::move(dist);
    return out;
}

inline void check_dimensions(const DeadlineProblem& problem, const DeadlinePolicy& policy) {
    if (policy.n_tasks() != problem.n_tasks || policy.n_intervals() != problem.n_intervals ||
        policy.opt.rows() != policy.price.rows() || policy.opt.cols() != policy.price.cols() + 1)
        throw std::invalid_argument("policy dimensions do not match problem (" + std::to_string(policy.n_tasks()) + "x" +
                                    std::to_string(policy.n_intervals()) + " vs " + std::to_string(problem.n_tasks) +
                                    "x" + std::to_string(problem.n_intervals) + ")");
}

inline PolicyEvaluation evaluate_policy(const DeadlineProblem& problem, const TransitionCache& cache,
                                        const DeadlinePolicy& policy) {
    check_dimensions(problem, policy);
    Matrix<std::size_t> index(policy.price.rows(), policy.price.cols());
    for (std::size_t n = 0; n < index.rows(); ++n)
        for (std::size_t t = 0; t < index.cols(); ++t) index(n, t) = problem.grid.index_of(policy.price(n, t));
    return evaluate_forward(problem, cache, [&](std::size_t n, std::size_t t) { return index(n, t); });
}

}  // namespace detail

/**
Exact expected payments, expected unsolved tasks and Pr(any unsolved) of a
policy, by forward propagation over the full Poisson support (the problem's
epsilon is ignored here). Policy prices must lie on the problem's grid.
*/
inline PolicyEvaluation evaluate_policy_exact(const DeadlineProblem& problem, const DeadlinePolicy& policy) {
    detail::check_dimensions(problem, policy);
    return detail::evaluate_policy(problem, detail::TransitionCache(problem), policy);
}

/// Same as evaluate_policy_exact for a constant grid price.
inline PolicyEvaluation evaluate_fixed_price(const DeadlineProblem& problem, Cents price) {
    const std::size_t j = problem.grid.index_of(price);
    const detail::TransitionCache cache(problem);
    return detail::evaluate_forward(problem, cache, [j](std::size_t, std::size_t) { return j; });
}

// *******************************************************
// Penalty calibration
// *******************************************************

struct PenaltyCalibration {
    double penalty;
    double achieved;  // E[remaining] + alpha * Pr(remaining > 0)
    DeadlinePolicy policy;
    PolicyEvaluation evaluation;
};

/**
Finds the smallest penalty whose optimal policy keeps
E[remaining] + existence_alpha * Pr(remaining > 0) at or below `bound`.
The upper bracket doubles from the maximum grid price up to 1e9 cents; the
bracket is then bisected until the achieved value is within
`tolerance * bound` of the bound or the bracket collapses.
*/
inline PenaltyCalibration calibrate_penalty(const DeadlineProblem& problem, double bound, double tolerance,
                                            SolverKind kind = SolverKind::efficient) {
    if (!(bound >= 0.0)) throw std::invalid_argument("calibrate_penalty: bound must be non-negative");
    if (!(tolerance > 0.0)) throw std::invalid_argument("calibrate_penalty: tolerance must be positive");
    const detail::TransitionCache cache(problem);
    const auto method = kind == SolverKind::simple ? detail::Method::simple : detail::Method::efficient;
    DeadlineProblem trial = problem;

    auto run = [&](double penalty) {
        trial.penalty = penalty;
        auto policy = detail::solve_with(trial, cache, method);
        auto eval = detail::evaluate_policy(trial, cache, policy);
        const double achieved = eval.expected_remaining + problem.existence_alpha * eval.pr_any_remaining;
        return PenaltyCalibration{penalty, achieved, std::move(policy), std::move(eval)};
    };

    auto best = run(0.0);
    if (best.achieved <= bound) return best;

    constexpr double cap = 1e9;
    double lo = 0.0;
    double hi = std::max(1.0, static_cast<double>(problem.grid.max_price()));
    for (;;) {
        best = run(hi);
        if (best.achieved <= bound) break;
        lo = hi;
        if (hi >= cap)
            throw InfeasibleError("bound infeasible: expected remaining " + std::to_string(best.achieved) +
                                  " exceeds bound " + std::to_string(bound) + " at the penalty cap");
        hi = std::min(cap, hi * 2.0);
    }
    for (int iter = 0; iter < 200; ++iter) {
        if (best.achieved >= bound * (1.0 - tolerance)) break;
        if (hi - lo <= 1e-9 * hi) break;
        const double mid = 0.5 * (lo + hi);
        auto candidate = run(mid);
        if (candidate.achieved <= bound) {
            hi = mid;
            best = std::move(candidate);
        } else {
            lo = mid;
        }
    }
    return best;
}

}  // namespace crowdprice
