// crowdprice: batch front end for the pricing solvers, simulator and estimators.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <crowdprice/crowdprice.hpp>

namespace cp = crowdprice;
using cp::Json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInfeasible = 4;
constexpr int kExitInternal = 5;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cp::ParseError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Parses a JSON input file; any structural problem becomes a ParseError naming the file.
template <typename F>
auto load_json(const std::string& path, F&& convert) {
    const auto text = read_file(path);
    try {
        return convert(Json::parse(text));
    } catch (const cp::ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw cp::ParseError("'" + path + "': " + e.what());
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// *******************************************************
// Manifest
// *******************************************************

// Options that name input files are recorded by content digest, not path.
const std::set<std::string> kInputFiles{"arrival-csv", "acceptance-table", "model", "policy",
                                        "alloc",       "csv",              "observations"};
// Options that cannot influence output bytes. Both solvers produce the same policy.
const std::set<std::string> kIgnored{"out", "out-csv", "per-trial-csv", "parallel", "threads", "solver", "help"};

cp::RunManifest build_manifest(const CLI::App& command, const std::string& name) {
    cp::RunManifest m;
    m.command = name;
    for (const CLI::Option* opt : command.get_options()) {
        std::string key = opt->get_single_name();
        if (key.empty() || kIgnored.count(key)) continue;
        if (kInputFiles.count(key)) {
            const auto& paths = opt->results();
            for (std::size_t i = 0; i < paths.size(); ++i) {
                const auto label = paths.size() == 1 ? key : key + "[" + std::to_string(i) + "]";
                m.input_digests[label] = cp::content_digest(read_file(paths[i]));
            }
            continue;
        }
        if (opt->count() > 0) {
            std::string joined;
            for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
            m.resolved_parameters[key] = joined;
        } else if (!opt->get_default_str().empty()) {
            m.resolved_parameters[key] = opt->get_default_str();
        }
    }
    return m;
}

// *******************************************************
// Shared flag groups
// *******************************************************

struct ModelFlags {
    std::string acceptance;
    std::string table;
    std::string model_json;
    CLI::Option* acceptance_opt = nullptr;
    CLI::Option* table_opt = nullptr;
    CLI::Option* model_opt = nullptr;

    void add(CLI::App* app, bool required) {
        acceptance_opt = app->add_option("--acceptance", acceptance, "Logistic acceptance parameters s,b,M");
        table_opt = app->add_option("--acceptance-table", table, "CSV with header price,probability")
                        ->check(CLI::ExistingFile);
        model_opt = app->add_option("--model", model_json, "Acceptance model JSON written by 'fit acceptance'")
                        ->check(CLI::ExistingFile);
        acceptance_opt->excludes(table_opt)->excludes(model_opt);
        table_opt->excludes(model_opt);
        required_ = required;
    }

    bool given() const { return acceptance_opt->count() || table_opt->count() || model_opt->count(); }

    cp::AcceptanceModel resolve() const {
        if (acceptance_opt->count()) {
            std::vector<double> v;
            std::stringstream ss(acceptance);
            std::string item;
            while (std::getline(ss, item, ',')) {
                try {
                    std::size_t used = 0;
                    v.push_back(std::stod(item, &used));
                    if (used != item.size()) throw std::invalid_argument(item);
                } catch (const std::exception&) {
                    throw UsageError("--acceptance: '" + acceptance + "' is not s,b,M");
                }
            }
            if (v.size() != 3) throw UsageError("--acceptance: expected three values s,b,M");
            try {
                return cp::LogisticAcceptance(v[0], v[1], v[2]);
            } catch (const std::invalid_argument& e) {
                throw UsageError(std::string("--acceptance: ") + e.what());
            }
        }
        if (table_opt->count()) return cp::load_acceptance_table(table);
        if (model_opt->count())
            return load_json(model_json, [](const Json& j) {
                return cp::model_from_json(j.contains("model") ? j.at("model") : j);
            });
        throw UsageError("one of --acceptance, --acceptance-table or --model is required");
    }

    void check() const {
        if (required_ && !given()) throw UsageError("one of --acceptance, --acceptance-table or --model is required");
    }

private:
    bool required_ = true;
};

struct GridFlags {
    cp::Cents max_price = 0;
    cp::Cents min_price = 0;
    cp::Cents step = 1;

    void add(CLI::App* app, bool required) {
        auto* opt = app->add_option("--max-price", max_price, "Highest grid price in cents");
        if (required) opt->required();
        app->add_option("--min-price", min_price, "Lowest grid price in cents");
        app->add_option("--price-step", step, "Grid spacing in cents");
    }

    cp::PriceGrid resolve() const {
        try {
            return cp::PriceGrid(min_price, max_price, step);
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("price grid: ") + e.what());
        }
    }
};

cp::ArrivalCsvMode arrival_mode(const std::string& s) {
    return s == "cumulative" ? cp::ArrivalCsvMode::cumulative : cp::ArrivalCsvMode::raw;
}

struct DeadlineFlags {
    std::int64_t tasks = 0;
    double deadline_hours = 0.0;
    std::int64_t intervals = 0;
    std::string arrival_csv;
    std::string arrival_mode_name = "raw";
    std::int64_t start_offset = 0;
    ModelFlags model;
    GridFlags grid;

    // required = false lets a command make them conditional
    void add(CLI::App* app, bool required) {
        auto* t = app->add_option("--tasks", tasks, "Number of tasks N");
        auto* d = app->add_option("--deadline-hours", deadline_hours, "Time to the deadline in hours");
        auto* i = app->add_option("--intervals", intervals, "Number of pricing intervals");
        if (required) {
            t->required();
            d->required();
            i->required();
        }
        app->add_option("--start-offset-seconds", start_offset, "Position of t = 0 within the arrival profile");
        model.add(app, required);
        grid.add(app, required);
    }

    cp::DeadlineProblem resolve(const cp::ArrivalProfile& profile) const {
        if (tasks < 1) throw UsageError("--tasks must be >= 1");
        if (intervals < 1) throw UsageError("--intervals must be >= 1");
        if (!(deadline_hours > 0.0)) throw UsageError("--deadline-hours must be positive");
        if (start_offset < 0) throw UsageError("--start-offset-seconds must be non-negative");
        const double seconds = deadline_hours * 3600.0 / static_cast<double>(intervals);
        const double rounded = std::round(seconds);
        if (rounded < 1.0 || std::abs(seconds - rounded) > 1e-6)
            throw UsageError("--deadline-hours / --intervals must give a whole number of seconds per interval");
        const auto grid_value = grid.resolve();
        return cp::DeadlineProblem{tasks,
                                   intervals,
                                   static_cast<std::int64_t>(rounded),
                                   profile,
                                   start_offset,
                                   model.resolve(),
                                   grid_value,
                                   cp::default_penalty(grid_value)};
    }
};

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

std::string join_entries(const std::vector<cp::AllocationEntry>& entries) {
    std::string out;
    for (const auto& e : entries)
        out += (out.empty() ? "" : ", ") + std::to_string(e.count) + " x " + std::to_string(e.price) + "c";
    return out;
}

// *******************************************************
// solve-deadline
// *******************************************************

struct SolveDeadline {
    DeadlineFlags d;
    std::optional<double> penalty;
    std::optional<double> bound;
    double bound_tolerance = 1e-3;
    double existence_alpha = 0.0;
    double epsilon = 1e-9;
    std::string solver = "efficient";
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--arrival-csv", d.arrival_csv, "Arrival CSV (t_seconds,count)")->required()->check(CLI::ExistingFile);
        app->add_option("--arrival-mode", d.arrival_mode_name, "How to read counts")
            ->check(CLI::IsMember({"raw", "cumulative"}));
        d.add(app, true);
        auto* p = app->add_option("--penalty", penalty, "Terminal cost per unsolved task in cents (default 10 x max price)");
        auto* b = app->add_option("--bound", bound, "Calibrate the penalty so E[remaining] (+ alpha Pr[remaining > 0]) <= bound");
        p->excludes(b);
        app->add_option("--bound-tolerance", bound_tolerance, "Relative tolerance of the penalty calibration");
        app->add_option("--existence-alpha", existence_alpha, "Extra penalty weight on any task remaining");
        app->add_option("--epsilon", epsilon, "Poisson truncation threshold (0 disables)");
        app->add_option("--solver", solver, "Dynamic program variant")->check(CLI::IsMember({"simple", "efficient"}));
        app->add_option("--out", out, "Policy JSON output")->required();
    }

    int run(const CLI::App& app) {
        d.model.check();
        auto problem = d.resolve(cp::load_arrival_csv(d.arrival_csv, arrival_mode(d.arrival_mode_name)));
        problem.existence_alpha = existence_alpha;
        problem.epsilon = epsilon;
        if (penalty) problem.penalty = *penalty;
        try {
            problem.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        const auto kind = solver == "simple" ? cp::SolverKind::simple : cp::SolverKind::efficient;
        auto manifest = build_manifest(app, "solve-deadline");

        Json calibration;
        cp::DeadlinePolicy policy;
        if (bound) {
            if (!(*bound >= 0.0)) throw UsageError("--bound must be non-negative");
            if (!(bound_tolerance > 0.0)) throw UsageError("--bound-tolerance must be positive");
            auto cal = cp::calibrate_penalty(problem, *bound, bound_tolerance, kind);
            problem.penalty = cal.penalty;
            // the digest must describe the problem the policy was solved for
            cal.policy.problem_digest = cp::problem_digest(problem);
            policy = std::move(cal.policy);
            calibration = {{"bound", *bound}, {"tolerance", bound_tolerance}, {"penalty", cal.penalty},
                           {"achieved", cal.achieved}};
        } else {
            policy = cp::solve_deadline(problem, kind);
        }
        print_warnings(problem.warnings());
        const auto eval = cp::evaluate_policy_exact(problem, policy);

        auto doc = cp::policy_document(problem, policy, manifest);
        if (!calibration.is_null()) doc["calibration"] = calibration;
        doc["evaluation"] = {{"expected_cost", eval.expected_cost},
                             {"expected_remaining", eval.expected_remaining},
                             {"completion_probability", eval.completion_probability()}};
        write_file(out, cp::render(doc));

        std::cout << "penalty: " << fmt(problem.penalty) << "\n"
                  << "opt(N,0): " << fmt(policy.opt(static_cast<std::size_t>(problem.n_tasks), 0)) << "\n"
                  << "expected payments: " << fmt(eval.expected_cost) << "\n"
                  << "expected remaining: " << fmt(eval.expected_remaining) << "\n"
                  << "completion probability: " << fmt(eval.completion_probability()) << "\n";
        return 0;
    }
};

// *******************************************************
// solve-budget
// *******************************************************

struct SolveBudget {
    std::int64_t tasks = 0;
    cp::Cents budget = 0;
    ModelFlags model;
    GridFlags grid;
    bool exact = false;
    double mean_rate = 1.0;
    double work_cap = 1e8;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--tasks", tasks, "Number of tasks N")->required();
        app->add_option("--budget", budget, "Total budget in cents")->required();
        model.add(app, true);
        grid.add(app, true);
        app->add_flag("--exact", exact, "Also run the exact pseudo-polynomial solver and report the rounding gap");
        app->add_option("--mean-rate", mean_rate, "Mean worker arrivals per hour, for latency");
        app->add_option("--work-cap", work_cap, "Cell-update limit for --exact");
        app->add_option("--out", out, "Allocation JSON output")->required();
    }

    int run(const CLI::App& app) {
        model.check();
        cp::BudgetProblem problem{tasks, budget, model.resolve(), grid.resolve(), mean_rate};
        try {
            problem.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        auto manifest = build_manifest(app, "solve-budget");
        const auto lp = cp::solve_static_lp(problem);
        Json doc;
        std::cout << "lp allocation: " << join_entries(lp.entries) << "\n"
                  << "lp expected workers: " << fmt(lp.expected_workers) << "\n";
        if (exact) {
            const auto best = cp::solve_static_exact(problem, work_cap);
            doc = cp::allocation_document(problem, best, manifest);
            const double gap = lp.expected_workers - best.expected_workers;
            Json cmp{{"lp_entries", cp::entries_to_json(lp.entries)},
                     {"lp_expected_workers", lp.expected_workers},
                     {"gap", gap}};
            if (lp.bracket) cmp["gap_bound"] = lp.bracket->gap_bound;
            doc["lp_comparison"] = cmp;
            std::cout << "exact allocation: " << join_entries(best.entries) << "\n"
                      << "exact expected workers: " << fmt(best.expected_workers) << "\n"
                      << "rounding gap: " << fmt(gap);
            if (lp.bracket) std::cout << " (bound " << fmt(lp.bracket->gap_bound) << ")";
            std::cout << "\n";
        } else {
            doc = cp::allocation_document(problem, lp, manifest);
        }
        const double latency = doc.at("expected_latency_hours").get<double>();
        std::cout << "expected latency hours: " << fmt(latency) << "\n";
        write_file(out, cp::render(doc));
        return 0;
    }
};

// *******************************************************
// simulate
// *******************************************************

struct Simulate {
    std::string policy;
    std::optional<cp::Cents> fixed_price;
    std::string alloc;
    DeadlineFlags d;
    std::optional<double> horizon_hours;
    std::int64_t trials = 1000;
    std::uint64_t seed = 0;
    bool per_trial = false;
    std::string per_trial_csv;
    bool parallel = false;
    unsigned threads = 0;
    std::string out;

    void add(CLI::App* app) {
        auto* p = app->add_option("--policy", policy, "Deadline policy JSON")->check(CLI::ExistingFile);
        auto* f = app->add_option("--fixed-price", fixed_price, "Constant price in cents (needs the problem flags)");
        auto* a = app->add_option("--alloc", alloc, "Static allocation JSON")->check(CLI::ExistingFile);
        p->excludes(f)->excludes(a);
        f->excludes(a);
        app->add_option("--arrival-csv", d.arrival_csv, "Arrival CSV the market follows")->required()->check(CLI::ExistingFile);
        app->add_option("--arrival-mode", d.arrival_mode_name, "How to read counts")
            ->check(CLI::IsMember({"raw", "cumulative"}));
        d.add(app, false);
        app->add_option("--horizon-hours", horizon_hours, "Stop allocation trials after this long");
        app->add_option("--trials", trials, "Number of Monte Carlo trials");
        app->add_option("--seed", seed, "Random seed");
        app->add_flag("--per-trial", per_trial, "Include per-trial rows in the report");
        app->add_option("--per-trial-csv", per_trial_csv, "Also write per-trial rows as CSV");
        app->add_flag("--parallel", parallel, "Run trials on several threads (same output)");
        app->add_option("--threads", threads, "Thread count for --parallel (0 = all cores)");
        app->add_option("--out", out, "Report JSON output")->required();
    }

    int run(const CLI::App& app) {
        const int chosen = (policy.empty() ? 0 : 1) + (fixed_price ? 1 : 0) + (alloc.empty() ? 0 : 1);
        if (chosen != 1) throw UsageError("exactly one of --policy, --fixed-price or --alloc is required");
        if (trials < 1) throw UsageError("--trials must be >= 1");
        const auto profile = cp::load_arrival_csv(d.arrival_csv, arrival_mode(d.arrival_mode_name));
        const cp::SimulationConfig config{trials, seed, parallel, threads};
        auto manifest = build_manifest(app, "simulate");
        cp::SimulationReport report;

        if (fixed_price) {
            if (d.tasks < 1 || d.intervals < 1 || !(d.deadline_hours > 0.0) || !d.model.given())
                throw UsageError("--fixed-price needs --tasks, --deadline-hours, --intervals, --max-price and a model");
            const auto problem = d.resolve(profile);
            if (!problem.grid.contains(*fixed_price)) throw UsageError("--fixed-price is not on the price grid");
            report = cp::simulate_deadline(problem, cp::FixedPrice{*fixed_price}, config);
        } else if (!policy.empty()) {
            auto file = load_json(policy, cp::policy_from_json);
            const auto& trained = file.problem.profile;
            const bool covers = profile.periodic() ||
                                profile.span_seconds() >= static_cast<double>(file.problem.start_offset_seconds) +
                                                              file.problem.deadline_seconds();
            if (profile.bucket_seconds() != trained.bucket_seconds() || !covers)
                throw std::invalid_argument("arrival data incompatible with policy: policy profile digest " +
                                            cp::profile_digest(trained) + " (bucket " +
                                            std::to_string(trained.bucket_seconds()) + " s), arrival file digest " +
                                            cp::profile_digest(profile) + " (bucket " +
                                            std::to_string(profile.bucket_seconds()) + " s)");
            auto truth = file.problem;
            truth.profile = profile;
            if (d.model.given()) truth.model = d.model.resolve();
            report = cp::simulate_deadline(truth, file.policy, config);
        } else {
            auto file = load_json(alloc, cp::allocation_from_json);
            const auto model = d.model.given() ? d.model.resolve() : file.problem.model;
            cp::BudgetSimulationOptions options;
            options.start_offset_seconds = static_cast<double>(d.start_offset);
            if (horizon_hours) options.horizon_seconds = *horizon_hours * 3600.0;
            report = cp::simulate_budget(file.allocation, profile, model, config, options);
        }

        write_file(out, cp::render(cp::report_document(report, manifest, per_trial)));
        if (!per_trial_csv.empty()) {
            std::ostringstream csv;
            cp::write_trials_csv(report, csv);
            write_file(per_trial_csv, csv.str());
        }
        const auto& a = report.aggregates;
        std::cout << "strategy: " << report.strategy_descriptor << "\n"
                  << "mean cost: " << fmt(a.mean_cost) << " (se " << fmt(a.se_cost) << ")\n"
                  << "mean remaining: " << fmt(a.mean_remaining) << "\n"
                  << "completion rate: " << fmt(a.completion_rate) << "\n"
                  << "mean completion seconds: "
                  << (a.mean_completion_seconds ? fmt(*a.mean_completion_seconds) : std::string("n/a")) << "\n";
        return 0;
    }
};

// *******************************************************
// baseline
// *******************************************************

struct Baseline {
    DeadlineFlags d;
    double confidence = 0.999;
    std::string policy;
    std::int64_t simulate_trials = 0;
    std::uint64_t seed = 0;
    bool parallel = false;
    unsigned threads = 0;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--arrival-csv", d.arrival_csv, "Arrival CSV (t_seconds,count)")->required()->check(CLI::ExistingFile);
        app->add_option("--arrival-mode", d.arrival_mode_name, "How to read counts")
            ->check(CLI::IsMember({"raw", "cumulative"}));
        d.add(app, true);
        app->add_option("--confidence", confidence, "Required probability of finishing every task");
        app->add_option("--policy", policy, "Dynamic policy JSON to compare against")->check(CLI::ExistingFile);
        app->add_option("--simulate-trials", simulate_trials, "Also simulate the fixed price (0 = skip)");
        app->add_option("--seed", seed, "Random seed for --simulate-trials");
        app->add_flag("--parallel", parallel, "Run simulation trials on several threads (same output)");
        app->add_option("--threads", threads, "Thread count for --parallel (0 = all cores)");
        app->add_option("--out", out, "Optional JSON output");
    }

    int run(const CLI::App& app) {
        d.model.check();
        if (!(confidence >= 0.0 && confidence <= 1.0)) throw UsageError("--confidence must lie in [0, 1]");
        const auto problem = d.resolve(cp::load_arrival_csv(d.arrival_csv, arrival_mode(d.arrival_mode_name)));
        auto manifest = build_manifest(app, "baseline");
        const auto base = cp::baseline_fixed_price(problem, confidence);
        const auto c0 = cp::price_floor_c0(problem);

        Json doc{{"schema_version", cp::kSchemaVersion},
                 {"kind", "baseline"},
                 {"manifest", cp::to_json(manifest)},
                 {"price", base.price},
                 {"completion_probability", base.completion_probability},
                 {"price_floor_c0", c0 ? Json(*c0) : Json(nullptr)}};
        std::cout << "baseline price: " << base.price << "\n"
                  << "completion probability: " << fmt(base.completion_probability) << "\n"
                  << "price floor c0: " << (c0 ? fmt(*c0) : std::string("infeasible")) << "\n";

        if (!policy.empty()) {
            auto file = load_json(policy, cp::policy_from_json);
            auto evaluated = file.problem;
            evaluated.profile = problem.profile;
            evaluated.model = problem.model;
            const auto eval = cp::evaluate_policy_exact(evaluated, file.policy);
            const double completed = static_cast<double>(evaluated.n_tasks) - eval.expected_remaining;
            const double per_task = completed > 0.0 ? eval.expected_cost / completed : 0.0;
            const double r = cp::cost_reduction(static_cast<double>(base.price), per_task);
            doc["dynamic"] = {{"mean_price", per_task},
                              {"completion_probability", eval.completion_probability()},
                              {"cost_reduction", r}};
            std::cout << "dynamic mean price: " << fmt(per_task) << "\n"
                      << "dynamic completion probability: " << fmt(eval.completion_probability()) << "\n"
                      << "cost reduction r: " << fmt(r) << "\n";
        }
        if (simulate_trials > 0) {
            const cp::SimulationConfig config{simulate_trials, seed, parallel, threads};
            const auto report = cp::simulate_deadline(problem, cp::FixedPrice{base.price}, config);
            doc["simulation"] = {{"trials", simulate_trials}, {"seed", seed},
                                 {"aggregates", cp::to_json(report.aggregates)}};
            std::cout << "simulated completion rate: " << fmt(report.aggregates.completion_rate) << "\n"
                      << "simulated mean cost: " << fmt(report.aggregates.mean_cost) << "\n";
        }
        if (!out.empty()) write_file(out, cp::render(doc));
        return 0;
    }
};

// *******************************************************
// fit
// *******************************************************

struct FitArrival {
    std::vector<std::string> csv;
    std::string mode = "raw";
    std::optional<std::size_t> period_buckets;
    std::string out;
    std::string out_csv;

    void add(CLI::App* app) {
        app->add_option("--csv", csv, "Arrival CSV files to average")->required()->check(CLI::ExistingFile);
        app->add_option("--mode", mode, "How to read counts")->check(CLI::IsMember({"raw", "cumulative"}));
        app->add_option("--period-buckets", period_buckets, "Buckets per period (default: length of the first file)");
        app->add_option("--out", out, "Profile JSON output")->required();
        app->add_option("--out-csv", out_csv, "Also write the profile as arrival CSV");
    }

    int run(const CLI::App& app) {
        std::vector<cp::ArrivalProfile> profiles;
        for (const auto& path : csv) profiles.push_back(cp::load_arrival_csv(path, arrival_mode(mode)));
        const std::size_t period = period_buckets ? *period_buckets : profiles.front().bucket_count();
        if (period == 0) throw UsageError("--period-buckets must be positive");
        const auto profile = cp::fit_periodic_profile(profiles, period);
        auto manifest = build_manifest(app, "fit arrival");
        Json doc{{"schema_version", cp::kSchemaVersion},
                 {"kind", "arrival-profile"},
                 {"manifest", cp::to_json(manifest)},
                 {"profile", cp::to_json(profile)},
                 {"metadata",
                  {{"inputs", csv.size()}, {"period_buckets", period}, {"period_total", profile.period_total()}}}};
        write_file(out, cp::render(doc));
        if (!out_csv.empty()) {
            std::ostringstream s;
            cp::write_arrival_csv(profile, s);
            write_file(out_csv, s.str());
        }
        std::cout << "bucket seconds: " << profile.bucket_seconds() << "\n"
                  << "buckets: " << profile.bucket_count() << "\n"
                  << "period total: " << fmt(profile.period_total()) << "\n";
        return 0;
    }
};

struct FitAcceptance {
    std::string observations;
    double task_seconds = 120.0;
    double market_total = 6000.0;
    double mass_unit = 360.0;
    std::string task_type;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--observations", observations, "CSV: wage_per_second,workload_per_hour,task_type")
            ->required()
            ->check(CLI::ExistingFile);
        app->add_option("--task-seconds", task_seconds, "Seconds of work per task");
        app->add_option("--market-total", market_total, "Marketplace task completions per hour");
        app->add_option("--mass-unit-seconds", mass_unit, "Normalizing unit k for the market mass M");
        app->add_option("--task-type", task_type, "Task type whose intercept is used (default: first label)");
        app->add_option("--out", out, "Model JSON output")->required();
    }

    int run(const CLI::App& app) {
        const auto obs = cp::load_observation_csv(observations);
        cp::FitResult fit;
        try {
            fit = cp::fit_wage_utility(obs);
        } catch (const std::invalid_argument& e) {
            throw cp::ParseError(std::string("'") + observations + "': " + e.what());
        }
        if (!task_type.empty()) {
            const auto it = fit.biases.find(task_type);
            if (it == fit.biases.end()) throw UsageError("--task-type '" + task_type + "' not present in observations");
            fit.bias = it->second;
        }
        if (!(task_seconds > 0.0 && market_total > 0.0 && mass_unit > 0.0))
            throw UsageError("--task-seconds, --market-total and --mass-unit-seconds must be positive");
        const auto derived = cp::derive_acceptance_model(fit, task_seconds, market_total, mass_unit);
        auto manifest = build_manifest(app, "fit acceptance");
        Json doc{{"schema_version", cp::kSchemaVersion},
                 {"kind", "acceptance-model"},
                 {"manifest", cp::to_json(manifest)},
                 {"fit",
                  {{"linear_coefficient", fit.linear_coefficient},
                   {"bias", fit.bias},
                   {"biases", fit.biases},
                   {"r_squared", fit.r_squared},
                   {"n_points", fit.n_points}}},
                 {"derivation", derived.steps},
                 {"model", cp::to_json(cp::AcceptanceModel(derived.model))}};
        write_file(out, cp::render(doc));
        std::cout << "alpha: " << fmt(fit.linear_coefficient) << "\n"
                  << "b: " << fmt(fit.bias) << "\n"
                  << "r squared: " << fmt(fit.r_squared) << "\n"
                  << "model: s=" << fmt(derived.model.scale()) << " b=" << fmt(derived.model.bias())
                  << " M=" << fmt(derived.model.market_mass()) << "\n";
        return 0;
    }
};

// *******************************************************
// tradeoff
// *******************************************************

struct Tradeoff {
    std::int64_t tasks = 0;
    double alpha = 0.0;
    std::string variant;
    double rate = 0.0;
    ModelFlags model;
    GridFlags grid;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--tasks", tasks, "Number of tasks N")->required();
        app->add_option("--alpha", alpha, "Latency weight (cents per interval, or per hour for arrival)")->required();
        app->add_option("--variant", variant, "Transition model")
            ->required()
            ->check(CLI::IsMember({"fixed-rate", "arrival"}));
        app->add_option("--rate", rate, "Workers per interval (fixed-rate) or per hour (arrival)")->required();
        model.add(app, true);
        grid.add(app, true);
        app->add_option("--out", out, "Optional JSON output");
    }

    int run(const CLI::App& app) {
        model.check();
        cp::TradeoffProblem problem{tasks, alpha, model.resolve(), grid.resolve(), cp::FixedRate{rate}};
        if (variant == "arrival") problem.variant = cp::ArrivalBased{rate};
        try {
            problem.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        const auto solution = cp::solve_tradeoff(problem);
        print_warnings(solution.warnings);
        auto manifest = build_manifest(app, "tradeoff");
        Json doc{{"schema_version", cp::kSchemaVersion},
                 {"kind", "tradeoff"},
                 {"manifest", cp::to_json(manifest)},
                 {"variant", variant},
                 {"prices", solution.prices},
                 {"values", solution.values},
                 {"warnings", solution.warnings}};
        const auto text = cp::render(doc);
        if (!out.empty()) write_file(out, text);
        std::cout << text;
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pricing strategies for batches of crowdsourced tasks", "crowdprice"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    SolveDeadline solve_deadline;
    SolveBudget solve_budget;
    Simulate simulate;
    Baseline baseline;
    FitArrival fit_arrival;
    FitAcceptance fit_acceptance;
    Tradeoff tradeoff;

    auto* sd = app.add_subcommand("solve-deadline", "Optimal dynamic prices under a hard deadline");
    solve_deadline.add(sd);
    auto* sb = app.add_subcommand("solve-budget", "Static allocation minimizing latency under a budget");
    solve_budget.add(sb);
    auto* sim = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy, fixed price or allocation");
    simulate.add(sim);
    auto* bl = app.add_subcommand("baseline", "Smallest fixed price meeting a completion confidence");
    baseline.add(bl);
    auto* fit = app.add_subcommand("fit", "Estimate arrival profiles and acceptance models");
    fit->require_subcommand(1);
    auto* fa = fit->add_subcommand("arrival", "Average arrival CSVs into a periodic profile");
    fit_arrival.add(fa);
    auto* fc = fit->add_subcommand("acceptance", "Fit the wage regression and derive a logistic model");
    fit_acceptance.add(fc);
    auto* to = app.add_subcommand("tradeoff", "Cost plus weighted latency without a deadline");
    tradeoff.add(to);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (sd->parsed()) return solve_deadline.run(*sd);
        if (sb->parsed()) return solve_budget.run(*sb);
        if (sim->parsed()) return simulate.run(*sim);
        if (bl->parsed()) return baseline.run(*bl);
        if (fa->parsed()) return fit_arrival.run(*fa);
        if (fc->parsed()) return fit_acceptance.run(*fc);
        if (to->parsed()) return tradeoff.run(*to);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const cp::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const Json::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const cp::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const cp::LimitError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::out_of_range& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
