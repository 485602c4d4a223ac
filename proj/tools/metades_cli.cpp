// metades: run dynamic-selection experiments and generate synthetic datasets.
//
//   metades run --config experiment.json [overrides]
//   metades generate --kind banana --n 1000 --seed 7 --out banana.csv

#include "metades/metades.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

metades::DatasetSpec spec_from_argument(const std::string &arg, bool csv_header) {
    metades::DatasetSpec d;
    if (arg == "banana" || arg == "lithuanian") {
        d.kind = arg;
        d.name = arg;
        return d;
    }
    d.kind = "csv";
    d.path = arg;
    d.name = metades::file_stem(arg);
    d.header = csv_header;
    return d;
}

void print_table(const metades::ExperimentReport &report) {
    std::printf("%-12s", "dataset");
    for (const auto &t : report.techniques) {
        std::printf(" %16s", t.c_str());
    }
    std::printf("\n");
    for (const auto &ds : report.datasets) {
        std::printf("%-12s", ds.c_str());
        for (const auto &t : report.techniques) {
            const auto &c = report.cell(ds, t);
            std::printf("    %5.2f (%5.2f)", 100.0 * c.mean, 100.0 * c.std);
        }
        std::printf("\n");
    }
    if (!report.meta.empty()) {
        std::printf("\n%-12s %-9s %16s %16s\n", "dataset", "scenario", "DES", "selector");
        for (const auto &m : report.meta) {
            std::printf("%-12s %-9s    %5.2f (%5.2f)    %5.2f (%5.2f)\n", m.dataset.c_str(), m.scenario.c_str(),
                        100.0 * m.des_mean, 100.0 * m.des_std, 100.0 * m.meta_mean, 100.0 * m.meta_std);
        }
        for (const auto &c : report.correlations) {
            std::printf("rho_%s = %.4f over %zu datasets\n", c.scenario.c_str(), c.rho, c.datasets);
        }
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{ "Meta-learning dynamic ensemble selection experiments" };
    app.require_subcommand(1);

    auto *run = app.add_subcommand("run", "Run an experiment and write the report");
    std::string config_path;
    std::vector<std::string> datasets;
    std::vector<std::string> scenarios;
    bool csv_header = false;
    std::optional<std::size_t> k;
    std::optional<std::size_t> kp;
    std::optional<double> hc;
    std::optional<std::size_t> pool_size;
    std::optional<std::size_t> reps;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    bool trace = false;
    bool audit = false;
    bool quiet = false;
    run->add_option("--config", config_path, "Experiment JSON")->check(CLI::ExistingFile);
    run->add_option("--dataset", datasets, "banana, lithuanian or a CSV path (repeatable; replaces the config list)");
    run->add_flag("--csv-header", csv_header, "CSV files given with --dataset have a header row");
    run->add_option("--scenario", scenarios, "dependent, independent or all (repeatable)");
    run->add_option("--k", k, "Region-of-competence size");
    run->add_option("--kp", kp, "Output-profile neighborhood size");
    run->add_option("--hc", hc, "Consensus threshold for meta-training queries");
    run->add_option("--pool-size", pool_size, "Number of bagged perceptrons");
    run->add_option("--reps", reps, "Replications");
    run->add_option("--seed", seed, "Base seed");
    run->add_option("--out", out, "Output directory");
    run->add_option("--threads", threads, "Worker threads (0 = all cores)");
    run->add_flag("--trace", trace, "Write the per-query selection trace");
    run->add_flag("--audit", audit, "Dump pools, meta-data and selectors");
    run->add_flag("--quiet", quiet, "Do not print the result table");

    auto *gen = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
    std::string kind = "banana";
    std::size_t n = 1000;
    double noise = 0.2;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--kind", kind, "banana or lithuanian")->check(CLI::IsMember({ "banana", "lithuanian" }));
    gen->add_option("--n", n, "Number of samples");
    gen->add_option("--noise", noise, "Banana noise standard deviation");
    gen->add_option("--seed", gen_seed, "Seed");
    gen->add_option("--out", gen_out, "Output CSV (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto ds = kind == "banana" ? metades::gen_banana(n, noise, gen_seed) : metades::gen_lithuanian(n, gen_seed);
            std::ofstream file;
            if (!gen_out.empty()) {
                file.open(gen_out);
                if (!file) {
                    throw metades::io_error{ "cannot write '" + gen_out + "'" };
                }
            }
            std::ostream &os = gen_out.empty() ? std::cout : file;
            os.precision(17);
            os << "x1,x2,label\n";
            for (const auto &s : ds.samples) {
                os << s.features[0] << ',' << s.features[1] << ',' << s.label << '\n';
            }
            return 0;
        }

        metades::ExperimentConfig cfg = config_path.empty() ? metades::ExperimentConfig{} : metades::load_config(config_path);
        if (!datasets.empty()) {
            cfg.datasets.clear();
            for (const auto &d : datasets) {
                cfg.datasets.push_back(spec_from_argument(d, csv_header));
            }
        }
        if (!scenarios.empty()) {
            cfg.scenarios.clear();
            for (const auto &s : scenarios) {
                cfg.scenarios.push_back(metades::scenario_from_string(s));
            }
        }
        if (k) cfg.k = *k;
        if (kp) cfg.kp = *kp;
        if (hc) cfg.hc = *hc;
        if (pool_size) cfg.pool_size = *pool_size;
        if (reps) cfg.replications = *reps;
        if (seed) cfg.seed = *seed;
        if (out) cfg.out = *out;
        if (threads) cfg.threads = *threads;
        cfg.trace = cfg.trace || trace;
        cfg.audit = cfg.audit || audit;

        metades::validate_config(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        const auto report = metades::run_experiment(cfg);
        metades::emit_report(report, cfg.out);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!quiet) {
            print_table(report);
        }
        std::fprintf(stderr, "%zu replications x %zu datasets in %.1f s; report in %s\n", cfg.replications,
                     cfg.datasets.size(), secs, cfg.out.c_str());
        return 0;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "metades: %s\n", e.what());
        return 1;
    }
}
