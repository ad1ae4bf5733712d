#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <crowdprice/estimation.hpp>
#include <crowdprice/serialization.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = CROWDPRICE_CLI;
const std::string kArrivals = std::string(CROWDPRICE_DATA_DIR) + "/synthetic_weekly_arrivals.csv";
const std::string kModel = "--acceptance 15,-0.39,2000";

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("crowdprice_cli_" + std::string(info->name()) + "_" +
                                            std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    CliResult run(const std::string& args) const {
        const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
        const std::string cmd = "'" + kCli + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    std::string deadline_flags() const {
        return "--tasks 60 --deadline-hours 12 --intervals 12 --arrival-csv '" + kArrivals + "' " + kModel +
               " --max-price 30";
    }

    fs::path dir_;
};

}  // namespace

// Help text for every command is pinned; set CROWDPRICE_UPDATE_GOLDEN=1 to rewrite the snapshots.
TEST_F(CliTest, HelpSnapshots) {
    const std::vector<std::pair<std::string, std::string>> commands{
        {"", "help_root.txt"},
        {"solve-deadline", "help_solve_deadline.txt"},
        {"solve-budget", "help_solve_budget.txt"},
        {"simulate", "help_simulate.txt"},
        {"baseline", "help_baseline.txt"},
        {"fit", "help_fit.txt"},
        {"fit arrival", "help_fit_arrival.txt"},
        {"fit acceptance", "help_fit_acceptance.txt"},
        {"tradeoff", "help_tradeoff.txt"},
    };
    const bool update = std::getenv("CROWDPRICE_UPDATE_GOLDEN") != nullptr;
    for (const auto& [command, file] : commands) {
        const auto r = run(command + " --help");
        EXPECT_EQ(r.code, 0) << command;
        const fs::path golden = fs::path(CROWDPRICE_GOLDEN_DIR) / file;
        if (update) {
            spit(golden, r.out);
            continue;
        }
        ASSERT_TRUE(fs::exists(golden)) << golden;
        EXPECT_EQ(r.out, slurp(golden)) << command;
    }
}

TEST_F(CliTest, HelpShowsDefaults) {
    const auto r = run("solve-deadline --help");
    EXPECT_NE(r.out.find("--epsilon FLOAT [1e-09]"), std::string::npos);
    EXPECT_NE(r.out.find("[efficient]"), std::string::npos);
    EXPECT_NE(r.out.find("--bound-tolerance FLOAT [0.001]"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
    auto r = run("solve-deadline --tasks 5 --deadline-hours 1 --intervals 2 " + kModel + " --max-price 9 --out " +
                 path("p.json"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--arrival-csv"), std::string::npos) << r.err;

    r = run("solve-deadline " + deadline_flags() + " --penalty 100 --bound 0.5 --out " + path("p.json"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--penalty"), std::string::npos) << r.err;

    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("no-such-command").code, 2);
    EXPECT_EQ(run("solve-deadline " + deadline_flags() + " --solver fancy --out " + path("p.json")).code, 2);
    EXPECT_EQ(run("simulate --arrival-csv '" + kArrivals + "' --out " + path("r.json")).code, 2);
    EXPECT_EQ(run("solve-deadline " + deadline_flags() + " --acceptance-table '" + kArrivals + "' --out " +
                  path("p.json"))
                  .code,
              2);
    EXPECT_FALSE(fs::exists(path("p.json")));
}

TEST_F(CliTest, DataErrorsExitThree) {
    spit(path("bad.csv"), "t_seconds,count\n0,1\n600,-4\n");
    auto r = run("solve-deadline --tasks 5 --deadline-hours 1 --intervals 2 --arrival-csv " + path("bad.csv") + " " +
                 kModel + " --max-price 9 --out " + path("p.json"));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;

    spit(path("policy.json"), "{\"schema_version\": 1, \"kind\": \"deadline-policy\"");
    r = run("simulate --policy " + path("policy.json") + " --arrival-csv '" + kArrivals + "' --out " + path("r.json"));
    EXPECT_EQ(r.code, 3);
}

TEST_F(CliTest, InfeasibleExitsFour) {
    auto r = run("solve-budget --tasks 5 --budget 3 " + kModel + " --max-price 20 --min-price 1 --out " +
                 path("a.json"));
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("budget below minimum"), std::string::npos) << r.err;

    r = run("baseline --tasks 5000 --deadline-hours 1 --intervals 2 --arrival-csv '" + kArrivals + "' " + kModel +
            " --max-price 3");
    EXPECT_EQ(r.code, 4);
}

TEST_F(CliTest, SolversWriteIdenticalPolicies) {
    ASSERT_EQ(run("solve-deadline " + deadline_flags() + " --solver simple --out " + path("simple.json")).code, 0);
    const auto r = run("solve-deadline " + deadline_flags() + " --solver efficient --out " + path("efficient.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(path("simple.json")), slurp(path("efficient.json")));
    EXPECT_NE(r.out.find("opt(N,0)"), std::string::npos);
    EXPECT_NE(r.out.find("completion probability"), std::string::npos);

    const auto doc = crowdprice::Json::parse(slurp(path("simple.json")));
    EXPECT_EQ(doc.at("manifest").at("command"), "solve-deadline");
    EXPECT_TRUE(doc.at("manifest").at("input_digests").contains("arrival-csv"));
}

TEST_F(CliTest, BoundCalibratesPenalty) {
    const auto r = run("solve-deadline " + deadline_flags() + " --bound 0.5 --bound-tolerance 0.01 --out " +
                       path("p.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = crowdprice::Json::parse(slurp(path("p.json")));
    ASSERT_TRUE(doc.contains("calibration"));
    EXPECT_LE(doc.at("calibration").at("achieved").get<double>(), 0.5);
    EXPECT_EQ(doc.at("calibration").at("penalty"), doc.at("problem").at("penalty"));
    // the stored digest describes the calibrated problem
    const auto file = crowdprice::policy_from_json(doc);
    EXPECT_EQ(crowdprice::problem_digest(file.problem), file.policy.problem_digest);
}

TEST_F(CliTest, SimulationIsReproducible) {
    ASSERT_EQ(run("solve-deadline " + deadline_flags() + " --out " + path("p.json")).code, 0);
    const std::string base = "simulate --policy " + path("p.json") + " --arrival-csv '" + kArrivals +
                             "' --trials 3000 --per-trial";
    ASSERT_EQ(run(base + " --seed 9 --out " + path("a.json")).code, 0);
    ASSERT_EQ(run(base + " --seed 9 --out " + path("b.json")).code, 0);
    ASSERT_EQ(run(base + " --seed 9 --parallel --threads 3 --out " + path("c.json")).code, 0);
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
    EXPECT_EQ(slurp(path("a.json")), slurp(path("c.json")));
    ASSERT_EQ(run(base + " --seed 10 --out " + path("d.json")).code, 0);
    EXPECT_NE(slurp(path("a.json")), slurp(path("d.json")));
}

TEST_F(CliTest, SaturatedFixedPrice) {
    const auto r = run("simulate --fixed-price 5 --tasks 10 --deadline-hours 1 --intervals 2 --arrival-csv '" +
                       kArrivals + "' --acceptance 1,0,0 --max-price 5 --trials 200 --out " + path("r.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = crowdprice::Json::parse(slurp(path("r.json")));
    EXPECT_EQ(doc.at("aggregates").at("completion_rate").get<double>(), 1.0);
    EXPECT_EQ(doc.at("aggregates").at("mean_cost").get<double>(), 50.0);
}

TEST_F(CliTest, BudgetAllocationFeedsSimulator) {
    auto r = run("solve-budget --tasks 10 --budget 125 " + kModel +
                 " --min-price 5 --max-price 20 --exact --mean-rate 250 --out " + path("a.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto file = crowdprice::allocation_from_json(crowdprice::Json::parse(slurp(path("a.json"))));
    EXPECT_EQ(file.allocation.task_count(), 10);
    EXPECT_LE(file.allocation.total_cost(), 125);

    r = run("simulate --alloc " + path("a.json") + " --arrival-csv '" + kArrivals +
            "' --trials 200 --seed 1 --out " + path("r.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = crowdprice::Json::parse(slurp(path("r.json")));
    EXPECT_EQ(report.at("strategy_descriptor").get<std::string>().rfind("allocation:", 0), 0u);
    EXPECT_EQ(report.at("aggregates").at("completion_rate").get<double>(), 1.0);

    // slack budget puts everything on the top price
    ASSERT_EQ(run("solve-budget --tasks 4 --budget 1000 " + kModel + " --max-price 20 --out " + path("s.json")).code,
              0);
    const auto slack = crowdprice::allocation_from_json(crowdprice::Json::parse(slurp(path("s.json"))));
    ASSERT_EQ(slack.allocation.entries.size(), 1u);
    EXPECT_EQ(slack.allocation.entries[0].price, 20);
}

TEST_F(CliTest, IncompatibleArrivalsNameBothDigests) {
    ASSERT_EQ(run("solve-deadline " + deadline_flags() + " --out " + path("p.json")).code, 0);
    spit(path("fine.csv"), "t_seconds,count\n0,10\n600,12\n1200,9\n");
    const auto r = run("simulate --policy " + path("p.json") + " --arrival-csv " + path("fine.csv") + " --out " +
                       path("r.json"));
    EXPECT_NE(r.code, 0);
    const auto trained = crowdprice::load_arrival_csv(kArrivals);
    const auto other = crowdprice::load_arrival_csv(path("fine.csv"));
    EXPECT_NE(r.err.find(crowdprice::profile_digest(trained)), std::string::npos) << r.err;
    EXPECT_NE(r.err.find(crowdprice::profile_digest(other)), std::string::npos) << r.err;
}

TEST_F(CliTest, TradeoffVectors) {
    auto r = run("tradeoff --tasks 4 --alpha 0 --variant fixed-rate --rate 0.5 " + kModel +
                 " --min-price 3 --max-price 20");
    ASSERT_EQ(r.code, 0) << r.err;
    auto doc = crowdprice::Json::parse(r.out);
    for (const auto& c : doc.at("prices")) EXPECT_EQ(c.get<int>(), 3);

    r = run("tradeoff --tasks 6 --alpha 40 --variant arrival --rate 120 " + kModel + " --max-price 40 --out " +
            path("t.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    doc = crowdprice::Json::parse(slurp(path("t.json")));
    EXPECT_EQ(r.out, slurp(path("t.json")));
    const auto& prices = doc.at("prices");
    ASSERT_EQ(prices.size(), 7u);
    for (std::size_t n = 2; n < prices.size(); ++n) EXPECT_EQ(prices[n], prices[1]);
    EXPECT_GT(prices[1].get<int>(), 0);
}

TEST_F(CliTest, FitCommands) {
    spit(path("d1.csv"), "t_seconds,count\n0,2\n60,4\n120,6\n180,8\n");
    spit(path("d2.csv"), "t_seconds,count\n0,4\n60,8\n120,2\n180,0\n");
    auto r = run("fit arrival --csv " + path("d1.csv") + " " + path("d2.csv") + " --period-buckets 2 --out " +
                 path("profile.json") + " --out-csv " + path("profile.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto profile = crowdprice::load_arrival_csv(path("profile.csv"));
    EXPECT_EQ(profile.rates(), (std::vector<double>{3.5, 5}));
    EXPECT_EQ(profile.bucket_seconds(), 60);

    std::string obs = "wage_per_second,workload_per_hour,task_type\n";
    for (int i = 0; i < 8; ++i) {
        const double w = 0.0005 + 0.0005 * i;
        std::ostringstream line;
        line.precision(17);
        line << w << ',' << std::exp(809.0 * w + 6.28) << ",survey\n";
        obs += line.str();
    }
    spit(path("obs.csv"), obs);
    r = run("fit acceptance --observations " + path("obs.csv") +
            " --task-seconds 120 --market-total 6000 --out " + path("model.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = crowdprice::Json::parse(slurp(path("model.json")));
    const auto model = std::get<crowdprice::LogisticAcceptance>(crowdprice::model_from_json(doc.at("model")));
    EXPECT_NEAR(model.scale(), 15.0, 0.75);
    EXPECT_NEAR(model.market_mass(), 2000.0, 100.0);

    // the fitted model drives the solver
    r = run("solve-deadline --tasks 20 --deadline-hours 6 --intervals 6 --arrival-csv '" + kArrivals + "' --model " +
            path("model.json") + " --max-price 30 --out " + path("p.json"));
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, BaselineReportsPriceAndFloor) {
    const auto r = run("baseline " + deadline_flags() + " --confidence 0.999");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("baseline price:"), std::string::npos);
    EXPECT_EQ(r.out, run("baseline " + deadline_flags() + " --confidence 0.999").out);
}
