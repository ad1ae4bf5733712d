#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "budget_lp.hpp"
#include "common.hpp"
#include "deadline_mdp.hpp"
#include "market_model.hpp"
#include "random.hpp"

namespace crowdprice {

struct SimulationConfig {
    std::int64_t trials = 1000;
    std::uint64_t seed = 0;
    bool parallel = false;
    unsigned threads = 0;  // 0: hardware concurrency; ignored unless parallel

    void validate() const {
        if (trials < 1) throw std::invalid_argument("simulation: trials must be >= 1");
    }
};

struct TrialRecord {
    Cents total_cost = 0;
    std::int64_t remaining = 0;
    std::optional<double> completion_seconds;
    std::optional<std::int64_t> workers;  // arrivals up to the last acceptance (event-level runs only)

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct SimulationAggregates {
    double mean_cost = 0.0;
    double se_cost = 0.0;
    double mean_remaining = 0.0;
    double se_remaining = 0.0;
    double completion_rate = 0.0;
    std::optional<double> mean_completion_seconds;
    std::optional<double> se_completion_seconds;
    std::optional<double> mean_workers;
    std::optional<double> se_workers;
};

struct SimulationReport {
    std::string strategy_descriptor;
    SimulationConfig config;
    std::vector<TrialRecord> per_trial;
    SimulationAggregates aggregates;
};

namespace detail {

/// Neumaier-compensated running mean and variance.
class Moments {
public:
    void add(double x) {
        ++n_;
        sum_.add(x);
        squares_.add(x * x);
    }

    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return n_ ? sum_.value() / static_cast<double>(n_) : 0.0; }

    /// Standard error of the mean.
    double standard_error() const noexcept {
        if (n_ < 2) return 0.0;
        const double n = static_cast<double>(n_);
        const double m = mean();
        const double var = std::max(0.0, (squares_.value() - n * m * m) / (n - 1.0));
        return std::sqrt(var / n);
    }

private:
    class Sum {
    public:
        void add(double x) noexcept {
            const double t = sum_ + x;
            if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
            else comp_ += (x - t) + sum_;
            sum_ = t;
        }
        double value() const noexcept { return sum_ + comp_; }

    private:
        double sum_ = 0.0;
        double comp_ = 0.0;
    };

    std::size_t n_ = 0;
    Sum sum_;
    Sum squares_;
};

/// Runs trial(i) for i in [0, trials); output order is the trial order whatever the thread count.
template <typename Trial>
std::vector<TrialRecord> run_trials(const SimulationConfig& config, Trial&& trial) {
    config.validate();
    const auto n = static_cast<std::size_t>(config.trials);
    std::vector<TrialRecord> out(n);
    unsigned workers = 1;
    if (config.parallel) {
        workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
        workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    }
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = trial(static_cast<std::uint64_t>(i));
        return out;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            for (std::size_t i = begin; i < end; ++i) out[i] = trial(static_cast<std::uint64_t>(i));
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace detail

/// Aggregates are a sequential pass over per_trial, so they are reproducible from it.
inline SimulationAggregates summarize(const std::vector<TrialRecord>& per_trial) {
    detail::Moments cost, remaining, time, workers;
    std::size_t complete = 0;
    for (const auto& r : per_trial) {
        cost.add(static_cast<double>(r.total_cost));
        remaining.add(static_cast<double>(r.remaining));
        if (r.remaining == 0) ++complete;
        if (r.completion_seconds) time.add(*r.completion_seconds);
        if (r.workers) workers.add(static_cast<double>(*r.workers));
    }
    SimulationAggregates a;
    a.mean_cost = cost.mean();
    a.se_cost = cost.standard_error();
    a.mean_remaining = remaining.mean();
    a.se_remaining = remaining.standard_error();
    a.completion_rate = per_trial.empty() ? 0.0 : static_cast<double>(complete) / static_cast<double>(per_trial.size());
    if (time.count()) {
        a.mean_completion_seconds = time.mean();
        a.se_completion_seconds = time.standard_error();
    }
    if (workers.count()) {
        a.mean_workers = workers.mean();
        a.se_workers = workers.standard_error();
    }
    return a;
}

// *******************************************************
// Deadline strategies, interval level
// *******************************************************

struct FixedPrice {
    Cents price;
};

using DeadlineStrategy = std::variant<DeadlinePolicy, FixedPrice>;

namespace detail {

/// One trial of a deadline strategy; `mean(t, n)` gives lambda_t * p and `price(t, n)` the posted price.
template <typename Mean, typename Price>
TrialRecord deadline_trial(const DeadlineProblem& problem, TrialStream& rng, Mean&& mean, Price&& price) {
    TrialRecord r;
    std::int64_t n = problem.n_tasks;
    for (std::int64_t t = 0; t < problem.n_intervals && n > 0; ++t) {
        const std::int64_t done = std::min(n, sample_poisson(rng, mean(t, n)));
        r.total_cost += done * price(t, n);
        n -= done;
        if (n == 0) r.completion_seconds = static_cast<double>((t + 1) * problem.interval_seconds);
    }
    r.remaining = n;
    return r;
}

}  // namespace detail

/**
Interval-level Monte Carlo of a deadline strategy. Each interval draws
Pois(lambda_t * p(price)) completions, capped at the tasks left. Completion
time is the end of the interval in which the last task was taken.
*/
inline SimulationReport simulate_deadline(const DeadlineProblem& problem, const DeadlineStrategy& strategy,
                                          const SimulationConfig& config) {
    problem.validate();
    const auto n_t = static_cast<std::size_t>(problem.n_intervals);
    std::vector<double> arrivals(n_t);
    for (std::size_t t = 0; t < n_t; ++t) arrivals[t] = problem.interval_arrivals(static_cast<std::int64_t>(t));

    SimulationReport report;
    report.config = config;
    if (const auto* fixed = std::get_if<FixedPrice>(&strategy)) {
        const Cents c = fixed->price;
        if (!problem.grid.contains(c))
            throw std::invalid_argument("fixed price " + std::to_string(c) + " is not on the price grid");
        const double p = acceptance_probability(problem.model, c);
        report.strategy_descriptor = "fixed-price:" + std::to_string(c);
        report.per_trial = detail::run_trials(config, [&](std::uint64_t i) {
            TrialStream rng(config.seed, i);
            return detail::deadline_trial(
                problem, rng, [&](std::int64_t t, std::int64_t) { return arrivals[static_cast<std::size_t>(t)] * p; },
                [c](std::int64_t, std::int64_t) { return c; });
        });
    } else {
        const auto& policy = std::get<DeadlinePolicy>(strategy);
        detail::check_dimensions(problem, policy);
        const auto accept = acceptance_on_grid(problem.model, problem.grid);
        Matrix<double> p(policy.price.rows(), n_t);
        for (std::size_t n = 0; n < p.rows(); ++n)
            for (std::size_t t = 0; t < n_t; ++t) p(n, t) = accept[problem.grid.index_of(policy.price(n, t))];
        report.strategy_descriptor = "policy:" + policy.problem_digest;
        report.per_trial = detail::run_trials(config, [&](std::uint64_t i) {
            TrialStream rng(config.seed, i);
            return detail::deadline_trial(
                problem, rng,
                [&](std::int64_t t, std::int64_t n) {
                    return arrivals[static_cast<std::size_t>(t)] * p(static_cast<std::size_t>(n), static_cast<std::size_t>(t));
                },
                [&](std::int64_t t, std::int64_t n) {
                    return policy.price(static_cast<std::size_t>(n), static_cast<std::size_t>(t));
                });
        });
    }
    report.aggregates = summarize(report.per_trial);
    return report;
}

// *******************************************************
// Budget allocations, event level
// *******************************************************

struct BudgetSimulationOptions {
    double start_offset_seconds = 0.0;
    std::optional<double> horizon_seconds;  // stop early; tasks left count as remaining
};

/// One accepted task.
struct AcceptanceEvent {
    double time_seconds;
    std::int64_t worker;  // 1-based arrival index
    Cents price;
};

/**
One event-level trial. Workers arrive bucket by bucket (Poisson count,
uniform placement); each accepts the highest-priced remaining task with
probability p(that price). The gap to the next acceptance is drawn as a
geometric number of arrivals and its time as the matching order statistic of
the bucket's remaining uniform arrival times.
*/
inline TrialRecord simulate_budget_trial(const StaticAllocation& allocation, const ArrivalProfile& profile,
                                         const AcceptanceModel& model, TrialStream& rng,
                                         const BudgetSimulationOptions& options = {},
                                         std::vector<AcceptanceEvent>* log = nullptr) {
    std::vector<AllocationEntry> groups = allocation.entries;
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.price > b.price; });
    std::vector<double> accept;
    for (const auto& g : groups) {
        const double p = acceptance_probability(model, g.price);
        if (p < kDeadAcceptance)
            throw std::invalid_argument("price effectively dead: p(" + std::to_string(g.price) + ") below 1e-12");
        accept.push_back(p);
    }

    TrialRecord r;
    std::size_t group = 0;
    while (group < groups.size() && groups[group].count == 0) ++group;
    const double bucket = static_cast<double>(profile.bucket_seconds());
    const double end_time = options.horizon_seconds ? options.start_offset_seconds + *options.horizon_seconds
                                                    : std::numeric_limits<double>::infinity();
    const double period_total = profile.period_total();

    std::int64_t workers = 0;
    std::int64_t gap = group < groups.size() ? sample_geometric(rng, accept[group]) : 0;
    double t = options.start_offset_seconds;
    while (group < groups.size()) {
        if (t >= end_time) break;
        if (!profile.periodic() && t >= profile.span_seconds()) break;
        if (profile.periodic() && period_total == 0.0) break;
        const double bucket_end = std::min((std::floor(t / bucket) + 1.0) * bucket, end_time);
        const double rate = profile.rate_at(t) * (bucket_end - t) / bucket;
        std::int64_t left = sample_poisson(rng, rate);
        double now = t;
        while (left > 0 && group < groups.size()) {
            if (gap > left) {
                gap -= left;
                workers += left;
                left = 0;
                break;
            }
            // gap-th of the `left` remaining arrivals, uniform on (now, bucket_end)
            const double u = gap == left && left == 1
                                 ? rng.uniform()
                                 : sample_beta(rng, static_cast<double>(gap), static_cast<double>(left - gap + 1));
            now += (bucket_end - now) * u;
            workers += gap;
            left -= gap;
            auto& g = groups[group];
            r.total_cost += g.price;
            if (log) log->push_back({now, workers, g.price});
            if (--g.count == 0) {
                while (group < groups.size() && groups[group].count == 0) ++group;
            }
            if (group == groups.size()) {
                r.completion_seconds = now - options.start_offset_seconds;
                r.workers = workers;
                break;
            }
            gap = sample_geometric(rng, accept[group]);
        }
        t = bucket_end;
    }
    for (std::size_t i = group; i < groups.size(); ++i) r.remaining += groups[i].count;
    return r;
}

/// Monte Carlo of a static allocation against an arrival profile.
inline SimulationReport simulate_budget(const StaticAllocation& allocation, const ArrivalProfile& profile,
                                        const AcceptanceModel& model, const SimulationConfig& config,
                                        const BudgetSimulationOptions& options = {}) {
    if (allocation.entries.empty()) throw std::invalid_argument("simulate_budget: empty allocation");
    SimulationReport report;
    report.config = config;
    report.strategy_descriptor = "allocation:";
    for (std::size_t i = 0; i < allocation.entries.size(); ++i) {
        if (i) report.strategy_descriptor += ",";
        report.strategy_descriptor +=
            std::to_string(allocation.entries[i].count) + "x" + std::to_string(allocation.entries[i].price);
    }
    report.per_trial = detail::run_trials(config, [&](std::uint64_t i) {
        TrialStream rng(config.seed, i);
        return simulate_budget_trial(allocation, profile, model, rng, options);
    });
    report.aggregates = summarize(report.per_trial);
    return report;
}

// *******************************************************
// Fixed-price baseline and price floor
// *******************************************************

struct BaselineResult {
    Cents price;
    double completion_probability;
};

/**
Smallest grid price whose exact probability of finishing every task by the
deadline is at least `confidence`, by binary search over the grid.
*/
inline BaselineResult baseline_fixed_price(const DeadlineProblem& problem, double confidence) {
    if (!(confidence >= 0.0 && confidence <= 1.0))
        throw std::invalid_argument("baseline_fixed_price: confidence must lie in [0, 1]");
    const detail::TransitionCache cache(problem);
    auto completion = [&](std::size_t j) {
        return detail::evaluate_forward(problem, cache, [j](std::size_t, std::size_t) { return j; })
            .completion_probability();
    };
    std::size_t hi = problem.grid.size() - 1;
    double p_hi = completion(hi);
    if (p_hi < confidence)
        throw InfeasibleError("deadline infeasible at max price: completion probability " + std::to_string(p_hi) +
                              " < " + std::to_string(confidence));
    std::size_t lo = 0;
    double p_lo = completion(lo);
    if (p_lo >= confidence) return {problem.grid.price(0), p_lo};
    // invariant: lo fails, hi passes
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        const double p = completion(mid);
        if (p >= confidence) {
            hi = mid;
            p_hi = p;
        } else {
            lo = mid;
        }
    }
    return {problem.grid.price(hi), p_hi};
}

/**
Real price c0 with p(c0) = N / (expected arrivals before the deadline).
No strategy can average below c0 and still expect to finish. Returns
nullopt when no price reaches the required acceptance.
*/
inline std::optional<double> price_floor_c0(const DeadlineProblem& problem) {
    problem.validate();
    const double start = static_cast<double>(problem.start_offset_seconds);
    const double total = expected_arrivals(problem.profile, start, start + problem.deadline_seconds());
    if (!(total > 0.0)) return std::nullopt;
    const double target = static_cast<double>(problem.n_tasks) / total;
    if (target > 1.0) return std::nullopt;
    double lo = static_cast<double>(problem.grid.min_price());
    if (acceptance_probability_at(problem.model, lo) >= target) return lo;
    double hi = static_cast<double>(problem.grid.max_price());
    if (std::holds_alternative<LogisticAcceptance>(problem.model)) {
        // the logistic is defined past the grid
        while (acceptance_probability_at(problem.model, hi) < target) {
            if (hi > 1e12) return std::nullopt;
            hi = 2.0 * hi + 1.0;
        }
    } else if (acceptance_probability_at(problem.model, hi) < target) {
        return std::nullopt;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (acceptance_probability_at(problem.model, mid) < target) lo = mid;
        else hi = mid;
    }
    return hi;
}

/// r = (fixed - dynamic) / fixed.
inline double cost_reduction(double fixed_cost, double dynamic_cost) {
    if (!(fixed_cost > 0.0)) throw std::invalid_argument("cost_reduction: fixed cost must be positive");
    return (fixed_cost - dynamic_cost) / fixed_cost;
}

// *******************************************************
// Utility-based choice simulation
// *******************************************************

struct ChoicePoint {
    double price;
    double acceptance;
    double standard_error;
};

struct ChoiceSimulation {
    std::vector<ChoicePoint> curve;
    double own_sigma;
    std::vector<double> competitor_means;
    std::vector<double> competitor_sigmas;
};

/**
A worker sees `market_size` tasks and takes the one with the highest sampled
utility. Competitor utilities are N(mu_i, sigma_i^2) with mu_i ~ N(0, 1) and
sigma_i ~ U[0, 1], drawn once; ours is N(reward_slope * c - 1, sigma_1^2).
Returns the empirical share of trials won by our task at each price.
*/
inline ChoiceSimulation simulate_choice_model(std::int64_t market_size, double reward_slope, std::int64_t trials,
                                              const std::vector<double>& prices, std::uint64_t seed) {
    if (market_size < 2) throw std::invalid_argument("simulate_choice_model: market_size must be >= 2");
    if (trials < 1) throw std::invalid_argument("simulate_choice_model: trials must be >= 1");
    ChoiceSimulation out;
    TrialStream setup(seed, std::numeric_limits<std::uint64_t>::max());
    out.own_sigma = setup.uniform();
    for (std::int64_t i = 1; i < market_size; ++i) {
        out.competitor_means.push_back(sample_normal(setup));
        out.competitor_sigmas.push_back(setup.uniform());
    }
    for (std::size_t k = 0; k < prices.size(); ++k) {
        TrialStream rng(seed, k);
        const double mu = reward_slope * prices[k] - 1.0;
        std::int64_t wins = 0;
        for (std::int64_t trial = 0; trial < trials; ++trial) {
            const double own = mu + out.own_sigma * sample_normal(rng);
            bool best = true;
            for (std::size_t i = 0; i < out.competitor_means.size(); ++i) {
                if (out.competitor_means[i] + out.competitor_sigmas[i] * sample_normal(rng) > own) {
                    best = false;
                    break;
                }
            }
            if (best) ++wins;
        }
        const double p = static_cast<double>(wins) / static_cast<double>(trials);
        out.curve.push_back({prices[k], p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials))});
    }
    return out;
}

}  // namespace crowdprice
