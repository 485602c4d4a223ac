#include "metades/harness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace metades;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    DatasetSpec banana;
    banana.name = "banana";
    banana.kind = "banana";
    banana.n = 400;
    DatasetSpec lith;
    lith.name = "lithuanian";
    lith.kind = "lithuanian";
    lith.n = 400;
    cfg.datasets = { banana, lith };
    cfg.replications = 3;
    cfg.threads = 1;
    return cfg;
}

const ExperimentReport &shared_report() {
    static const ExperimentReport report = run_experiment(small_config());
    return report;
}

std::string slurp(const std::filesystem::path &p) {
    std::ifstream in{ p };
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::filesystem::path &p) {
    const auto s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::filesystem::path scratch(const std::string &name) {
    const auto dir = std::filesystem::temp_directory_path() / ("metades_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

// A fake replication whose every series takes the value `acc`.
ReplicationResult fake(const ExperimentConfig &cfg, const std::string &ds, std::size_t rep, double acc) {
    ReplicationResult r;
    r.dataset = ds;
    r.rep_index = rep;
    for (const auto &t : technique_columns(cfg)) {
        r.accuracy[t] = acc;
        r.fallback_rate[t] = 0.0;
    }
    for (const auto s : cfg.scenarios) {
        r.meta_accuracy[lambda_name(s)] = acc;
    }
    return r;
}

}  // namespace

TEST(Harness, ReplicationIsDeterministic) {
    const auto cfg = small_config();
    const auto ds = materialize_all(cfg);
    const auto a = run_replication_set(cfg, ds, 1);
    const auto b = run_replication_set(cfg, ds, 1);
    ASSERT_EQ(a.size(), 2u);
    for (std::size_t d = 0; d < a.size(); ++d) {
        EXPECT_EQ(a[d].accuracy, b[d].accuracy);
        EXPECT_EQ(a[d].meta_accuracy, b[d].meta_accuracy);
        EXPECT_EQ(a[d].seed, b[d].seed);
    }
    EXPECT_NE(a[0].seed, run_replication_set(cfg, ds, 2)[0].seed);
}

TEST(Harness, AccuraciesAreProbabilities) {
    const auto &r = shared_report();
    for (const auto &row : r.replications) {
        for (const auto &res : row) {
            for (const auto &[name, acc] : res.accuracy) {
                EXPECT_GE(acc, 0.0) << name;
                EXPECT_LE(acc, 1.0) << name;
            }
            for (const auto &[name, acc] : res.meta_accuracy) {
                EXPECT_GE(acc, 0.0) << name;
                EXPECT_LE(acc, 1.0) << name;
            }
        }
    }
}

TEST(Harness, BananaBeatsThePriorComfortably) {
    const auto &r = shared_report();
    for (const auto &t : r.techniques) {
        EXPECT_GE(r.cell("banana", t).mean, 0.5 - 0.15) << t;
    }
    EXPECT_GT(r.cell("banana", "DES_D").mean, 0.6);
}

TEST(Harness, OneRowPerDatasetAndTechnique) {
    const auto &r = shared_report();
    EXPECT_EQ(r.techniques.size(), 9u);
    EXPECT_EQ(r.cells.size(), r.datasets.size() * r.techniques.size());
    EXPECT_EQ(r.meta.size(), r.datasets.size() * 3);
}

TEST(Harness, IndependentNeedsTwoDatasets) {
    auto cfg = small_config();
    cfg.datasets.resize(1);
    EXPECT_THROW(run_experiment(cfg), config_error);
    cfg.scenarios = { ScenarioKind::dependent };
    cfg.replications = 1;
    EXPECT_NO_THROW(run_replication(cfg, materialize_all(cfg).front(), 0));
}

TEST(Aggregate, MeanAndStdOfTwoReplications) {
    ExperimentConfig cfg;
    cfg.scenarios = { ScenarioKind::dependent };
    const auto r = aggregate(cfg, { { fake(cfg, "x", 0, 0.7) }, { fake(cfg, "x", 1, 0.8) } });
    EXPECT_DOUBLE_EQ(r.cell("x", "STATIC").mean, 0.75);
    EXPECT_NEAR(r.cell("x", "STATIC").std, 0.07071067811865482, 1e-12);
    const auto one = aggregate(cfg, { { fake(cfg, "x", 0, 0.7) } });
    EXPECT_EQ(one.cell("x", "STATIC").std, 0.0);
    EXPECT_THROW(aggregate(cfg, {}), error);
}

TEST(Aggregate, InvariantUnderReplicationOrder) {
    ExperimentConfig cfg;
    cfg.scenarios = { ScenarioKind::dependent };
    std::vector<std::vector<ReplicationResult>> reps;
    for (std::size_t k = 0; k < 6; ++k) {
        reps.push_back({ fake(cfg, "x", k, 0.5 + 0.07 * static_cast<double>(k * k % 5)) });
    }
    const auto base = aggregate(cfg, reps);
    std::mt19937_64 g{ 4 };
    for (int t = 0; t < 5; ++t) {
        std::shuffle(reps.begin(), reps.end(), g);
        const auto shuffled = aggregate(cfg, reps);
        for (std::size_t c = 0; c < base.cells.size(); ++c) {
            EXPECT_EQ(base.cells[c].mean, shuffled.cells[c].mean);
            EXPECT_EQ(base.cells[c].std, shuffled.cells[c].std);
        }
    }
}

TEST(Report, EmptyReportIsRefused) { EXPECT_THROW(emit_report(ExperimentReport{}, scratch("empty")), error); }

TEST(Report, SummaryRoundTripsExactly) {
    const auto &r = shared_report();
    const auto dir = scratch("roundtrip");
    emit_report(r, dir);
    const auto back = parse_summary_csv(dir / "summary.csv");
    ASSERT_EQ(back.size(), r.cells.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].dataset, r.cells[i].dataset);
        EXPECT_EQ(back[i].technique, r.cells[i].technique);
        EXPECT_NEAR(back[i].mean, r.cells[i].mean, 1e-12);
        EXPECT_NEAR(back[i].std, r.cells[i].std, 1e-12);
        EXPECT_EQ(back[i].replications, 3u);
    }
    EXPECT_EQ(line_count(dir / "correlation.csv"), r.datasets.size() + 1);
    EXPECT_EQ(line_count(dir / "correlation_rho.csv"), 4u);
    std::filesystem::remove_all(dir);
}

TEST(Report, ThreadCountDoesNotChangeBytes) {
    auto cfg = small_config();
    const auto a = scratch("threads1");
    const auto b = scratch("threads3");
    emit_report(shared_report(), a);
    cfg.threads = 3;
    emit_report(run_experiment(cfg), b);
    for (const char *f : { "summary.csv", "meta_summary.csv", "correlation.csv", "kruskal_wallis.csv", "replications.csv" }) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST(Config, ParsesAndResolvesRelativePaths) {
    const auto dir = scratch("config");
    std::filesystem::create_directories(dir);
    {
        std::ofstream out{ dir / "c.json" };
        out << R"({"datasets":[{"path":"d/pima.csv"},{"kind":"banana","n":300,"noise":0.3}],
                   "k":5,"replications":4,"scenarios":["dependent","all"]})";
    }
    const auto cfg = load_config((dir / "c.json").string());
    ASSERT_EQ(cfg.datasets.size(), 2u);
    EXPECT_EQ(cfg.datasets[0].name, "pima");
    EXPECT_EQ(cfg.datasets[0].path, (dir / "d/pima.csv").lexically_normal().string());
    EXPECT_EQ(cfg.datasets[1].name, "banana");
    EXPECT_EQ(cfg.datasets[1].noise, 0.3);
    EXPECT_EQ(cfg.k, 5u);
    EXPECT_EQ(cfg.kp, 5u);
    EXPECT_EQ(cfg.replications, 4u);
    EXPECT_FALSE(cfg.has(ScenarioKind::independent));
    {
        std::ofstream out{ dir / "bad.json" };
        out << R"({"datasets": [ )";
    }
    EXPECT_THROW(load_config((dir / "bad.json").string()), config_error);
    EXPECT_THROW(load_config((dir / "missing.json").string()), io_error);
    std::filesystem::remove_all(dir);
}

TEST(Config, ValidationRejectsNonsense) {
    auto cfg = small_config();
    cfg.datasets[1].name = "banana";
    EXPECT_THROW(validate_config(cfg), config_error);
    cfg = small_config();
    cfg.k = 0;
    EXPECT_THROW(validate_config(cfg), config_error);
    cfg = small_config();
    cfg.hc = 0.0;
    EXPECT_THROW(validate_config(cfg), config_error);
    cfg = small_config();
    cfg.datasets[0].kind = "spiral";
    EXPECT_THROW(validate_config(cfg), config_error);
    cfg = small_config();
    cfg.scenarios.clear();
    EXPECT_THROW(validate_config(cfg), config_error);
    EXPECT_THROW(validate_config(ExperimentConfig{}), config_error);
}

TEST(Config, JsonRoundTrip) {
    const auto cfg = small_config();
    const auto back = nlohmann::json(cfg).get<ExperimentConfig>();
    EXPECT_EQ(nlohmann::json(back), nlohmann::json(cfg));
}
