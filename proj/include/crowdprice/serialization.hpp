#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "budget_lp.hpp"
#include "common.hpp"
#include "deadline_mdp.hpp"
#include "market_model.hpp"
#include "simulator.hpp"

namespace crowdprice {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Provenance block embedded in every output document.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> resolved_parameters;
    std::map<std::string, std::string> input_digests;
    std::string tool_version = "0.1.0";
};

inline Json to_json(const RunManifest& m) {
    return {{"command", m.command},
            {"resolved_parameters", m.resolved_parameters},
            {"input_digests", m.input_digests},
            {"tool_version", m.tool_version}};
}

inline RunManifest manifest_from_json(const Json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.resolved_parameters = j.at("resolved_parameters").get<std::map<std::string, std::string>>();
    m.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    return m;
}

// *******************************************************
// Market primitives
// *******************************************************

inline Json to_json(const ArrivalProfile& p) {
    return {{"bucket_seconds", p.bucket_seconds()}, {"periodic", p.periodic()}, {"rates", p.rates()}};
}

inline ArrivalProfile profile_from_json(const Json& j) {
    return ArrivalProfile(j.at("bucket_seconds").get<std::int64_t>(), j.at("rates").get<std::vector<double>>(),
                          j.at("periodic").get<bool>());
}

/// Digest of a profile's defining values.
inline std::string profile_digest(const ArrivalProfile& p) { return content_digest(to_json(p).dump()); }

inline Json to_json(const PriceGrid& g) {
    return {{"min_price", g.min_price()}, {"max_price", g.max_price()}, {"step", g.step()}};
}

inline PriceGrid grid_from_json(const Json& j) {
    return PriceGrid(j.at("min_price").get<Cents>(), j.at("max_price").get<Cents>(), j.at("step").get<Cents>());
}

inline Json to_json(const AcceptanceModel& model) {
    if (const auto* m = std::get_if<LogisticAcceptance>(&model))
        return {{"type", "logistic"}, {"scale", m->scale()}, {"bias", m->bias()}, {"market_mass", m->market_mass()}};
    Json entries = Json::array();
    for (const auto& [price, p] : std::get<TabulatedAcceptance>(model).entries())
        entries.push_back({{"price", price}, {"probability", p}});
    return {{"type", "tabulated"}, {"entries", entries}};
}

inline AcceptanceModel model_from_json(const Json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "logistic")
        return LogisticAcceptance(j.at("scale").get<double>(), j.at("bias").get<double>(),
                                  j.at("market_mass").get<double>());
    if (type == "tabulated") {
        std::map<Cents, double> entries;
        for (const auto& e : j.at("entries")) entries[e.at("price").get<Cents>()] = e.at("probability").get<double>();
        return TabulatedAcceptance(std::move(entries));
    }
    throw std::invalid_argument("unknown acceptance model type '" + type + "'");
}

// *******************************************************
// Deadline problems and policies
// *******************************************************

inline Json to_json(const DeadlineProblem& p) {
    return {{"n_tasks", p.n_tasks},
            {"n_intervals", p.n_intervals},
            {"interval_seconds", p.interval_seconds},
            {"profile", to_json(p.profile)},
            {"start_offset_seconds", p.start_offset_seconds},
            {"model", to_json(p.model)},
            {"grid", to_json(p.grid)},
            {"penalty", p.penalty},
            {"existence_alpha", p.existence_alpha},
            {"epsilon", p.epsilon}};
}

inline DeadlineProblem deadline_problem_from_json(const Json& j) {
    DeadlineProblem p{j.at("n_tasks").get<std::int64_t>(),
                      j.at("n_intervals").get<std::int64_t>(),
                      j.at("interval_seconds").get<std::int64_t>(),
                      profile_from_json(j.at("profile")),
                      j.at("start_offset_seconds").get<std::int64_t>(),
                      model_from_json(j.at("model")),
                      grid_from_json(j.at("grid")),
                      j.at("penalty").get<double>(),
                      j.at("existence_alpha").get<double>(),
                      j.at("epsilon").get<double>()};
    p.validate();
    return p;
}

template <typename T>
Json matrix_to_json(const Matrix<T>& m) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

template <typename T>
Matrix<T> matrix_from_json(const Json& j) {
    const std::size_t rows = j.size();
    const std::size_t cols = rows ? j.at(0).size() : 0;
    Matrix<T> m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j.at(r).size() != cols) throw std::invalid_argument("ragged matrix in policy file");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<T>();
    }
    return m;
}

inline Json policy_document(const DeadlineProblem& problem, const DeadlinePolicy& policy, const RunManifest& manifest) {
    return {{"schema_version", kSchemaVersion},
            {"kind", "deadline-policy"},
            {"manifest", to_json(manifest)},
            {"problem", to_json(problem)},
            {"problem_digest", policy.problem_digest},
            {"price", matrix_to_json(policy.price)},
            {"opt", matrix_to_json(policy.opt)}};
}

struct PolicyFile {
    DeadlineProblem problem;
    DeadlinePolicy policy;
};

inline void check_document(const Json& j, const char* kind) {
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw std::invalid_argument("unsupported schema_version " + j.at("schema_version").dump());
    if (j.at("kind").get<std::string>() != kind)
        throw std::invalid_argument("expected a " + std::string(kind) + " document, found " + j.at("kind").dump());
}

inline PolicyFile policy_from_json(const Json& j) {
    check_document(j, "deadline-policy");
    auto problem = deadline_problem_from_json(j.at("problem"));
    DeadlinePolicy policy{matrix_from_json<Cents>(j.at("price")), matrix_from_json<double>(j.at("opt")),
                          j.at("problem_digest").get<std::string>()};
    detail::check_dimensions(problem, policy);
    return {std::move(problem), std::move(policy)};
}

// *******************************************************
// Budget problems and allocations
// *******************************************************

inline Json to_json(const BudgetProblem& p) {
    return {{"n_tasks", p.n_tasks},
            {"budget", p.budget},
            {"model", to_json(p.model)},
            {"grid", to_json(p.grid)},
            {"mean_rate", p.mean_rate}};
}

inline BudgetProblem budget_problem_from_json(const Json& j) {
    BudgetProblem p{j.at("n_tasks").get<std::int64_t>(), j.at("budget").get<Cents>(), model_from_json(j.at("model")),
                    grid_from_json(j.at("grid")), j.at("mean_rate").get<double>()};
    p.validate();
    return p;
}

inline Json entries_to_json(const std::vector<AllocationEntry>& entries) {
    Json out = Json::array();
    for (const auto& e : entries) out.push_back({{"price", e.price}, {"count", e.count}});
    return out;
}

inline Json to_json(const StaticAllocation& a) {
    Json j{{"entries", entries_to_json(a.entries)},
           {"expected_workers", a.expected_workers},
           {"expected_latency_hours", a.expected_latency_hours}};
    if (a.bracket)
        j["bracket"] = {{"lower", a.bracket->lower}, {"upper", a.bracket->upper}, {"gap_bound", a.bracket->gap_bound}};
    return j;
}

inline Json allocation_document(const BudgetProblem& problem, const StaticAllocation& allocation,
                                const RunManifest& manifest) {
    Json j{{"schema_version", kSchemaVersion}, {"kind", "static-allocation"}, {"manifest", to_json(manifest)},
           {"problem", to_json(problem)}};
    j.update(to_json(allocation));
    return j;
}

struct AllocationFile {
    BudgetProblem problem;
    StaticAllocation allocation;
};

inline AllocationFile allocation_from_json(const Json& j) {
    check_document(j, "static-allocation");
    auto problem = budget_problem_from_json(j.at("problem"));
    StaticAllocation a;
    for (const auto& e : j.at("entries")) a.entries.push_back({e.at("price").get<Cents>(), e.at("count").get<std::int64_t>()});
    a.expected_workers = j.at("expected_workers").get<double>();
    a.expected_latency_hours = j.at("expected_latency_hours").get<double>();
    if (j.contains("bracket")) {
        const auto& b = j.at("bracket");
        a.bracket = HullBracket{b.at("lower").get<Cents>(), b.at("upper").get<Cents>(), b.at("gap_bound").get<double>()};
    }
    if (a.entries.empty()) throw std::invalid_argument("allocation file has no entries");
    return {std::move(problem), std::move(a)};
}

// *******************************************************
// Simulation reports
// *******************************************************

template <typename T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

inline Json to_json(const SimulationAggregates& a) {
    return {{"mean_cost", a.mean_cost},
            {"se_cost", a.se_cost},
            {"mean_remaining", a.mean_remaining},
            {"se_remaining", a.se_remaining},
            {"completion_rate", a.completion_rate},
            {"mean_completion_seconds", optional_json(a.mean_completion_seconds)},
            {"se_completion_seconds", optional_json(a.se_completion_seconds)},
            {"mean_workers", optional_json(a.mean_workers)},
            {"se_workers", optional_json(a.se_workers)}};
}

inline Json to_json(const TrialRecord& r) {
    Json j{{"total_cost", r.total_cost}, {"remaining", r.remaining},
           {"completion_seconds", optional_json(r.completion_seconds)}};
    if (r.workers) j["workers"] = *r.workers;
    return j;
}

/// Parallelism settings are left out so that they cannot change the bytes.
inline Json report_document(const SimulationReport& report, const RunManifest& manifest, bool per_trial) {
    Json j{{"schema_version", kSchemaVersion},
           {"kind", "simulation-report"},
           {"manifest", to_json(manifest)},
           {"strategy_descriptor", report.strategy_descriptor},
           {"config", {{"trials", report.config.trials}, {"seed", report.config.seed}}},
           {"aggregates", to_json(report.aggregates)}};
    if (per_trial) {
        Json rows = Json::array();
        for (const auto& r : report.per_trial) rows.push_back(to_json(r));
        j["per_trial"] = std::move(rows);
    }
    return j;
}

/// Per-trial rows: trial,cost_cents,remaining,completion_seconds (empty when unfinished).
inline void write_trials_csv(const SimulationReport& report, std::ostream& out) {
    out << "trial,cost_cents,remaining,completion_seconds\n";
    for (std::size_t i = 0; i < report.per_trial.size(); ++i) {
        const auto& r = report.per_trial[i];
        out << i << ',' << r.total_cost << ',' << r.remaining << ',';
        if (r.completion_seconds) out << format_double(*r.completion_seconds);
        out << '\n';
    }
}

/// Stable text form: two-space indentation and a trailing newline.
inline std::string render(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace crowdprice
