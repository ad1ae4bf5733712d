#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"
#include "market_model.hpp"

namespace crowdprice {

// *******************************************************
// CSV helpers
// *******************************************************

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* what) {
    text = trim(text);
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc() || ptr != end)
        throw ParseError("invalid " + std::string(what) + " '" + std::string(text) + "'", line);
    return value;
}

/// Reads all lines; strips a UTF-8 byte order mark and trailing CR; skips blank lines after the header.
struct CsvLine {
    std::size_t number;
    std::string text;
};

inline std::vector<CsvLine> read_lines(std::istream& in, std::string_view expected_header) {
    std::string line;
    std::vector<CsvLine> rows;
    if (!std::getline(in, line)) throw ParseError("empty input: expected header '" + std::string(expected_header) + "'", 1);
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line) != expected_header)
        throw ParseError("malformed header '" + line + "', expected '" + std::string(expected_header) + "'", 1);
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        rows.push_back({number, line});
    }
    return rows;
}

}  // namespace detail

// *******************************************************
// Arrival data
// *******************************************************

/// raw: each count is the bucket's arrivals. cumulative: counts are
/// remaining-task snapshots and bucket i gets max(0, count[i] - count[i+1]).
enum class ArrivalCsvMode { raw, cumulative };

/**
Parses `t_seconds,count` rows. Times must be non-negative integers at a
uniform spacing, which becomes bucket_seconds; counts must be finite and
non-negative.
*/
inline ArrivalProfile parse_arrival_csv(std::istream& in, ArrivalCsvMode mode = ArrivalCsvMode::raw,
                                        bool periodic = true) {
    const auto rows = detail::read_lines(in, "t_seconds,count");
    if (rows.size() < 2) throw ParseError("need ≥ 2 rows to infer bucket", rows.empty() ? 1 : rows.front().number);
    std::vector<std::int64_t> times;
    std::vector<double> counts;
    for (const auto& row : rows) {
        const auto fields = detail::split_fields(row.text);
        if (fields.size() != 2) throw ParseError("expected 2 fields, found " + std::to_string(fields.size()), row.number);
        const auto t = detail::parse_number<std::int64_t>(fields[0], row.number, "t_seconds");
        const auto c = detail::parse_number<double>(fields[1], row.number, "count");
        if (t < 0) throw ParseError("negative t_seconds", row.number);
        if (!std::isfinite(c)) throw ParseError("non-finite count", row.number);
        if (c < 0.0) throw ParseError("negative count", row.number);
        if (!times.empty()) {
            if (t <= times.back()) throw ParseError("t_seconds must be strictly increasing", row.number);
            if (times.size() >= 2 && t - times.back() != times[1] - times[0])
                throw ParseError("non-uniform spacing: expected step " + std::to_string(times[1] - times[0]) + ", got " +
                                     std::to_string(t - times.back()),
                                 row.number);
        }
        times.push_back(t);
        counts.push_back(c);
    }
    const std::int64_t bucket = times[1] - times[0];
    if (mode == ArrivalCsvMode::raw) return ArrivalProfile(bucket, std::move(counts), periodic);
    std::vector<double> deltas;
    for (std::size_t i = 0; i + 1 < counts.size(); ++i) deltas.push_back(std::max(0.0, counts[i] - counts[i + 1]));
    return ArrivalProfile(bucket, std::move(deltas), periodic);
}

inline ArrivalProfile load_arrival_csv(const std::string& path, ArrivalCsvMode mode = ArrivalCsvMode::raw,
                                       bool periodic = true) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open arrival file '" + path + "'");
    return parse_arrival_csv(in, mode, periodic);
}

/// Raw-mode CSV; values use the shortest round-tripping form.
inline void write_arrival_csv(const ArrivalProfile& profile, std::ostream& out) {
    out << "t_seconds,count\n";
    for (std::size_t i = 0; i < profile.bucket_count(); ++i)
        out << static_cast<std::int64_t>(i) * profile.bucket_seconds() << ',' << format_double(profile.rates()[i])
            << '\n';
}

/**
Bucket-wise mean over every input folded onto `period_buckets`: bucket k is
the average of all input buckets with index = k (mod period).
*/
inline ArrivalProfile fit_periodic_profile(const std::vector<ArrivalProfile>& profiles, std::size_t period_buckets) {
    if (profiles.empty()) throw std::invalid_argument("fit_periodic_profile: no profiles");
    if (period_buckets == 0) throw std::invalid_argument("fit_periodic_profile: period must be positive");
    const auto bucket = profiles.front().bucket_seconds();
    std::vector<double> sum(period_buckets, 0.0);
    std::vector<std::size_t> hits(period_buckets, 0);
    for (const auto& p : profiles) {
        if (p.bucket_seconds() != bucket)
            throw std::invalid_argument("fit_periodic_profile: bucket mismatch (" + std::to_string(p.bucket_seconds()) +
                                        " vs " + std::to_string(bucket) + " seconds)");
        if (p.bucket_count() < period_buckets)
            throw std::invalid_argument("fit_periodic_profile: profile shorter than the period");
        for (std::size_t i = 0; i < p.bucket_count(); ++i) {
            sum[i % period_buckets] += p.rates()[i];
            ++hits[i % period_buckets];
        }
    }
    for (std::size_t k = 0; k < period_buckets; ++k) sum[k] /= static_cast<double>(hits[k]);
    return ArrivalProfile(bucket, std::move(sum), true);
}

/// `price,probability` rows into a tabulated acceptance model.
inline TabulatedAcceptance parse_acceptance_table(std::istream& in) {
    const auto rows = detail::read_lines(in, "price,probability");
    if (rows.empty()) throw ParseError("acceptance table has no rows", 1);
    std::map<Cents, double> entries;
    for (const auto& row : rows) {
        const auto fields = detail::split_fields(row.text);
        if (fields.size() != 2) throw ParseError("expected 2 fields, found " + std::to_string(fields.size()), row.number);
        const auto price = detail::parse_number<Cents>(fields[0], row.number, "price");
        const auto p = detail::parse_number<double>(fields[1], row.number, "probability");
        if (price < 0) throw ParseError("negative price", row.number);
        if (!(p > 0.0 && p <= 1.0)) throw ParseError("probability outside (0, 1]", row.number);
        if (!entries.emplace(price, p).second) throw ParseError("duplicate price " + std::to_string(price), row.number);
    }
    try {
        return TabulatedAcceptance(std::move(entries));
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
}

inline TabulatedAcceptance load_acceptance_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open acceptance table '" + path + "'");
    return parse_acceptance_table(in);
}

// *******************************************************
// Wage/workload regression
// *******************************************************

struct TaskGroupObservation {
    double wage_per_second;    // dollars per second
    double workload_per_hour;  // task-seconds completed per hour
    std::string task_type;
};

struct FitResult {
    double linear_coefficient = 0.0;
    double bias = 0.0;                    // intercept of the first task type (by label)
    std::map<std::string, double> biases;  // intercept per task type
    double r_squared = 0.0;
    std::size_t n_points = 0;
};

inline std::vector<TaskGroupObservation> parse_observation_csv(std::istream& in) {
    const auto rows = detail::read_lines(in, "wage_per_second,workload_per_hour,task_type");
    std::vector<TaskGroupObservation> out;
    for (const auto& row : rows) {
        const auto fields = detail::split_fields(row.text);
        if (fields.size() != 3) throw ParseError("expected 3 fields, found " + std::to_string(fields.size()), row.number);
        TaskGroupObservation o;
        o.wage_per_second = detail::parse_number<double>(fields[0], row.number, "wage_per_second");
        o.workload_per_hour = detail::parse_number<double>(fields[1], row.number, "workload_per_hour");
        o.task_type = std::string(detail::trim(fields[2]));
        if (!std::isfinite(o.wage_per_second)) throw ParseError("non-finite wage_per_second", row.number);
        if (!(o.workload_per_hour > 0.0) || !std::isfinite(o.workload_per_hour))
            throw ParseError("workload_per_hour must be positive", row.number);
        out.push_back(std::move(o));
    }
    return out;
}

inline std::vector<TaskGroupObservation> load_observation_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open observation file '" + path + "'");
    return parse_observation_csv(in);
}

/**
Least squares of log(workload_per_hour) on wage_per_second with one slope
shared by all task types and a separate intercept per type.
*/
inline FitResult fit_wage_utility(const std::vector<TaskGroupObservation>& observations) {
    if (observations.size() < 2) throw std::invalid_argument("fit_wage_utility: need at least 2 observations");
    struct Group {
        double sx = 0.0, sy = 0.0;
        std::size_t n = 0;
    };
    std::map<std::string, Group> groups;
    std::vector<double> y(observations.size());
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& o = observations[i];
        if (!(o.workload_per_hour > 0.0)) throw std::invalid_argument("fit_wage_utility: workload_per_hour must be positive");
        y[i] = std::log(o.workload_per_hour);
        auto& g = groups[o.task_type];
        g.sx += o.wage_per_second;
        g.sy += y[i];
        ++g.n;
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& g = groups[observations[i].task_type];
        const double dx = observations[i].wage_per_second - g.sx / static_cast<double>(g.n);
        const double dy = y[i] - g.sy / static_cast<double>(g.n);
        sxx += dx * dx;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("degenerate design: wages do not vary within any task type");

    FitResult fit;
    fit.n_points = observations.size();
    fit.linear_coefficient = sxy / sxx;
    for (const auto& [label, g] : groups)
        fit.biases[label] = (g.sy - fit.linear_coefficient * g.sx) / static_cast<double>(g.n);
    fit.bias = fit.biases.begin()->second;

    double mean_y = 0.0;
    for (double v : y) mean_y += v;
    mean_y /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const double fitted = fit.linear_coefficient * observations[i].wage_per_second + fit.biases[observations[i].task_type];
        ss_res += (y[i] - fitted) * (y[i] - fitted);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

/// Separate regression per task type.
inline std::map<std::string, FitResult> fit_wage_utility_by_type(const std::vector<TaskGroupObservation>& observations) {
    std::map<std::string, std::vector<TaskGroupObservation>> split;
    for (const auto& o : observations) split[o.task_type].push_back(o);
    std::map<std::string, FitResult> out;
    for (const auto& [label, rows] : split) out[label] = fit_wage_utility(rows);
    return out;
}

// *******************************************************
// Regression -> logistic acceptance
// *******************************************************

struct AcceptanceDerivation {
    LogisticAcceptance model;
    std::vector<std::string> steps;
};

/**
Turns log(workload/hour) = alpha * wage/sec + b into the logistic form.
A task paying c cents for task_seconds of work has wage c / (100 task_seconds),
so its utility is c / s + b with s = 100 task_seconds / alpha. The rest of
the market contributes total workload W = market_total_per_hour * task_seconds.
p(c) = e^(c/s + b) / (e^(c/s + b) + W) is unchanged when numerator and
denominator are divided by k = mass_unit_seconds, giving bias b' = ln k - b
and M = W / k.
*/
inline AcceptanceDerivation derive_acceptance_model(const FitResult& fit, double task_seconds,
                                                    double market_total_per_hour, double mass_unit_seconds = 360.0) {
    if (!(fit.linear_coefficient > 0.0)) throw std::invalid_argument("derive_acceptance_model: coefficient must be positive");
    if (!(task_seconds > 0.0)) throw std::invalid_argument("derive_acceptance_model: task_seconds must be positive");
    if (!(market_total_per_hour > 0.0))
        throw std::invalid_argument("derive_acceptance_model: market total must be positive");
    if (!(mass_unit_seconds > 0.0)) throw std::invalid_argument("derive_acceptance_model: mass unit must be positive");
    const double s = 100.0 * task_seconds / fit.linear_coefficient;
    const double workload = market_total_per_hour * task_seconds;
    const double bias = std::log(mass_unit_seconds) - fit.bias;
    const double mass = workload / mass_unit_seconds;
    std::vector<std::string> steps{
        "utility = alpha * wage_per_second + b with alpha = " + format_double(fit.linear_coefficient) + ", b = " +
            format_double(fit.bias),
        "wage_per_second = c / (100 * task_seconds) with task_seconds = " + format_double(task_seconds),
        "s = 100 * task_seconds / alpha = " + format_double(s),
        "market workload W = market_total_per_hour * task_seconds = " + format_double(market_total_per_hour) + " * " +
            format_double(task_seconds) + " = " + format_double(workload),
        "p(c) = exp(c/s + b) / (exp(c/s + b) + W); divide through by k = " + format_double(mass_unit_seconds),
        "bias b' = ln k - b = " + format_double(bias),
        "M = W / k = " + format_double(mass),
    };
    return {LogisticAcceptance(s, bias, mass), std::move(steps)};
}

// *******************************************************
// Choice-curve slope
// *******************************************************

struct ChoiceFit {
    double beta;
    double r_squared;
};

/// Multinomial-logit share of our task: exp(beta u) / (exp(beta u) + sum_i exp(beta z_i)).
inline double logit_share(double beta, double own_utility, const std::vector<double>& competitor_utilities) {
    double denom = 1.0;
    for (double z : competitor_utilities) denom += std::exp(beta * (z - own_utility));
    return 1.0 / denom;
}

/**
Least-squares beta for the logit share against an empirical acceptance
curve: a coarse scan over [0, beta_max] followed by golden-section refinement.
*/
inline ChoiceFit fit_choice_slope(const std::vector<double>& own_utility, const std::vector<double>& empirical,
                                  const std::vector<double>& competitor_utilities, double beta_max = 20.0) {
    if (own_utility.size() != empirical.size() || empirical.size() < 2)
        throw std::invalid_argument("fit_choice_slope: need at least 2 matching points");
    auto sse = [&](double beta) {
        double total = 0.0;
        for (std::size_t i = 0; i < empirical.size(); ++i) {
            const double r = empirical[i] - logit_share(beta, own_utility[i], competitor_utilities);
            total += r * r;
        }
        return total;
    };
    constexpr int scan = 400;
    double best_beta = 0.0, best = sse(0.0);
    for (int i = 1; i <= scan; ++i) {
        const double beta = beta_max * i / scan;
        const double v = sse(beta);
        if (v < best) {
            best = v;
            best_beta = beta;
        }
    }
    double a = std::max(0.0, best_beta - beta_max / scan), b = std::min(beta_max, best_beta + beta_max / scan);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = sse(x1), f2 = sse(x2);
    for (int i = 0; i < 200 && b - a > 1e-12; ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = sse(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = sse(x2);
        }
    }
    const double beta = 0.5 * (a + b);
    double mean = 0.0;
    for (double p : empirical) mean += p;
    mean /= static_cast<double>(empirical.size());
    double ss_tot = 0.0;
    for (double p : empirical) ss_tot += (p - mean) * (p - mean);
    const double ss_res = sse(beta);
    return {beta, ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0};
}

}  // namespace crowdprice
