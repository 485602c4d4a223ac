#ifndef METADES_HARNESS_HPP
#define METADES_HARNESS_HPP

// Experiment orchestration: replications over datasets and meta-training
// scenarios, aggregation into mean/std tables, Kruskal-Wallis comparisons,
// DES-vs-selector correlations, and the CSV/JSON report files.
//
// Seeds: every (dataset, replication) unit draws from
// replication_seed(base_seed, dataset name, rep_index); its split, pool,
// meta-data split and selector use derive_seed(unit_seed, 1..4). The pooled
// selector of the "all" scenario uses the unit seed of the reserved name
// "__all__".

#include "metades/common.hpp"
#include "metades/competence.hpp"
#include "metades/data.hpp"
#include "metades/des.hpp"
#include "metades/meta.hpp"
#include "metades/pool.hpp"
#include "metades/random.hpp"
#include "metades/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace metades {

// ---------------------------------------------------------------------------
// Configuration

struct DatasetSpec {
    std::string name;
    std::string kind = "csv";  ///< csv | banana | lithuanian
    std::string path;
    bool header = true;
    int label_column = -1;
    std::size_t n = 1000;
    double noise = 0.2;
    std::optional<std::uint64_t> seed;  ///< generator seed; defaults to the experiment seed
};

struct ExperimentConfig {
    std::vector<DatasetSpec> datasets;
    std::size_t k = 7;
    std::size_t kp = 5;
    double hc = 0.70;
    std::size_t pool_size = 10;
    std::size_t replications = 20;
    std::vector<ScenarioKind> scenarios{ ScenarioKind::dependent, ScenarioKind::independent, ScenarioKind::all };
    std::uint64_t seed = 1;
    std::string out = "results";
    bool trace = false;
    bool audit = false;
    std::size_t threads = 0;  ///< 0 = hardware concurrency
    PerceptronConfig perceptron;
    MetaTrainConfig meta;

    [[nodiscard]] MetaFeatureLayout layout() const { return { k, kp }; }
    [[nodiscard]] bool has(ScenarioKind s) const {
        return std::find(scenarios.begin(), scenarios.end(), s) != scenarios.end();
    }
};

inline void to_json(nlohmann::json &j, const DatasetSpec &d) {
    j = nlohmann::json{ { "name", d.name }, { "kind", d.kind } };
    if (d.kind == "csv") {
        j["path"] = d.path;
        j["header"] = d.header;
        j["label_column"] = d.label_column;
    } else {
        j["n"] = d.n;
        if (d.kind == "banana") {
            j["noise"] = d.noise;
        }
    }
    if (d.seed) {
        j["seed"] = *d.seed;
    }
}

inline void from_json(const nlohmann::json &j, DatasetSpec &d) {
    d.kind = j.value("kind", std::string{ "csv" });
    d.path = j.value("path", std::string{});
    d.name = j.value("name", d.kind == "csv" ? file_stem(d.path) : d.kind);
    d.header = j.value("header", true);
    d.label_column = j.value("label_column", -1);
    d.n = j.value("n", std::size_t{ 1000 });
    d.noise = j.value("noise", 0.2);
    if (j.contains("seed")) {
        d.seed = j.at("seed").get<std::uint64_t>();
    }
}

inline void to_json(nlohmann::json &j, const ExperimentConfig &c) {
    std::vector<std::string> scenarios;
    for (const auto s : c.scenarios) {
        scenarios.push_back(to_string(s));
    }
    j = nlohmann::json{ { "datasets", c.datasets },
                        { "k", c.k },
                        { "kp", c.kp },
                        { "hc", c.hc },
                        { "pool_size", c.pool_size },
                        { "replications", c.replications },
                        { "scenarios", scenarios },
                        { "seed", c.seed },
                        { "out", c.out },
                        { "trace", c.trace },
                        { "audit", c.audit },
                        { "perceptron",
                          { { "epochs", c.perceptron.epochs },
                            { "learning_rate", c.perceptron.learning_rate },
                            { "posterior_temperature", c.perceptron.posterior_temperature } } },
                        { "meta",
                          { { "max_epochs", c.meta.max_epochs },
                            { "learning_rate", c.meta.learning_rate },
                            { "patience", c.meta.patience },
                            { "val_fraction", c.meta.val_fraction } } } };
}

inline void from_json(const nlohmann::json &j, ExperimentConfig &c) {
    c = ExperimentConfig{};
    if (j.contains("datasets")) {
        j.at("datasets").get_to(c.datasets);
    }
    c.k = j.value("k", c.k);
    c.kp = j.value("kp", c.kp);
    c.hc = j.value("hc", c.hc);
    c.pool_size = j.value("pool_size", c.pool_size);
    c.replications = j.value("replications", c.replications);
    if (j.contains("scenarios")) {
        c.scenarios.clear();
        for (const auto &s : j.at("scenarios")) {
            c.scenarios.push_back(scenario_from_string(s.get<std::string>()));
        }
    }
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
    c.trace = j.value("trace", c.trace);
    c.audit = j.value("audit", c.audit);
    c.threads = j.value("threads", c.threads);
    if (j.contains("perceptron")) {
        const auto &p = j.at("perceptron");
        c.perceptron.epochs = p.value("epochs", c.perceptron.epochs);
        c.perceptron.learning_rate = p.value("learning_rate", c.perceptron.learning_rate);
        c.perceptron.posterior_temperature = p.value("posterior_temperature", c.perceptron.posterior_temperature);
    }
    if (j.contains("meta")) {
        const auto &m = j.at("meta");
        c.meta.max_epochs = m.value("max_epochs", c.meta.max_epochs);
        c.meta.learning_rate = m.value("learning_rate", c.meta.learning_rate);
        c.meta.patience = m.value("patience", c.meta.patience);
        c.meta.val_fraction = m.value("val_fraction", c.meta.val_fraction);
    }
}

inline ExperimentConfig load_config(const std::string &path) {
    std::ifstream in{ path };
    if (!in) {
        throw io_error{ "cannot open config '" + path + "'" };
    }
    try {
        auto cfg = nlohmann::json::parse(in).get<ExperimentConfig>();
        // relative CSV paths are resolved against the config file's directory
        const auto base = std::filesystem::path{ path }.parent_path();
        for (auto &d : cfg.datasets) {
            if (d.kind == "csv" && !d.path.empty() && std::filesystem::path{ d.path }.is_relative()) {
                d.path = (base / d.path).lexically_normal().string();
            }
        }
        return cfg;
    } catch (const nlohmann::json::exception &e) {
        throw config_error{ "malformed config '" + path + "': " + e.what() };
    }
}

inline void validate_config(const ExperimentConfig &c) {
    if (c.datasets.empty()) {
        throw config_error{ "no datasets configured" };
    }
    std::vector<std::string> names;
    for (const auto &d : c.datasets) {
        if (d.kind != "csv" && d.kind != "banana" && d.kind != "lithuanian") {
            throw config_error{ "dataset '" + d.name + "' has unknown kind '" + d.kind + "'" };
        }
        if (d.name.empty() || d.name == "__all__") {
            throw config_error{ "invalid dataset name '" + d.name + "'" };
        }
        if (std::find(names.begin(), names.end(), d.name) != names.end()) {
            throw config_error{ "duplicate dataset name '" + d.name + "'" };
        }
        names.push_back(d.name);
    }
    if (c.k < 1 || c.kp < 1) {
        throw config_error{ "K and Kp must be at least 1" };
    }
    if (c.pool_size < 1 || c.replications < 1) {
        throw config_error{ "pool size and replications must be at least 1" };
    }
    if (!(c.hc > 0.0)) {
        throw config_error{ "h_C must be positive" };
    }
    if (c.scenarios.empty()) {
        throw config_error{ "no scenario selected" };
    }
    if (c.has(ScenarioKind::independent) && c.datasets.size() < 2) {
        throw config_error{ "the independent scenario needs at least two datasets" };
    }
}

inline Dataset materialize(const DatasetSpec &d, std::uint64_t default_seed) {
    const std::uint64_t seed = d.seed.value_or(default_seed);
    Dataset ds;
    if (d.kind == "banana") {
        ds = gen_banana(d.n, d.noise, seed);
    } else if (d.kind == "lithuanian") {
        ds = gen_lithuanian(d.n, seed);
    } else {
        ds = load_csv(d.path, CsvOptions{ d.header, d.label_column, ',' });
    }
    ds.name = d.name;
    validate_dataset(ds, 4);
    return ds;
}

// ---------------------------------------------------------------------------
// Results

/// Report row names. Selector-based systems are DES_<scenario>; the meta-
/// classifier accuracy series are lambda_<scenario>.
inline const std::vector<std::string> &baseline_names() {
    static const std::vector<std::string> names{ "KNORA-E", "KNORA-U", "LCA", "OLA", "KNOP", "STATIC" };
    return names;
}

inline std::string scenario_suffix(ScenarioKind s) {
    switch (s) {
        case ScenarioKind::dependent:
            return "D";
        case ScenarioKind::independent:
            return "I";
        case ScenarioKind::all:
            return "ALL";
    }
    return "?";
}

inline std::string des_name(ScenarioKind s) { return "DES_" + scenario_suffix(s); }
inline std::string lambda_name(ScenarioKind s) { return "lambda_" + scenario_suffix(s); }

inline std::vector<std::string> technique_columns(const ExperimentConfig &cfg) {
    std::vector<std::string> out;
    for (const auto s : { ScenarioKind::dependent, ScenarioKind::independent, ScenarioKind::all }) {
        if (cfg.has(s)) {
            out.push_back(des_name(s));
        }
    }
    const auto &b = baseline_names();
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

struct TraceRow {
    std::string dataset;
    std::size_t rep = 0;
    std::size_t query = 0;
    std::string technique;
    std::vector<std::size_t> selected;
    bool fallback = false;
    ClassLabel label = 0;
    ClassLabel truth = 0;
};

struct AuditArtifacts {
    Pool pool;
    MetaDataset meta_data;
    std::optional<MetaClassifier> selector;
    TrainingCurve curve;
};

struct ReplicationResult {
    std::string dataset;
    std::size_t rep_index = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> accuracy;       ///< technique -> accuracy on G
    std::map<std::string, double> meta_accuracy;  ///< lambda_<scenario> -> accuracy on the target's meta validation split
    std::map<std::string, double> fallback_rate;  ///< technique -> fraction of G queries that used the full pool
    std::size_t meta_samples = 0;
    std::size_t selected_queries = 0;
    double seconds = 0.0;
    std::vector<TraceRow> trace;
    std::optional<AuditArtifacts> audit;
};

namespace detail {

struct PreparedDataset {
    const Dataset *source = nullptr;
    std::uint64_t seed = 0;
    SplitQuartet split;
    Pool pool;
    MetaDataset meta_data;
    MetaSplit meta_split;
    std::optional<DSELIndex> dsel;
    std::optional<MetaClassifier> selector;  // trained on this dataset's own meta-data
    TrainingCurve curve;
};

template <typename F>
auto with_context(const std::string &dataset, std::size_t rep, F &&f) -> decltype(f()) {
    try {
        return f();
    } catch (const error &e) {
        throw error{ "dataset '" + dataset + "', replication " + std::to_string(rep) + ": " + e.what() };
    }
}

inline PreparedDataset prepare(const ExperimentConfig &cfg, const Dataset &ds, std::size_t rep) {
    PreparedDataset p;
    p.source = &ds;
    p.seed = replication_seed(cfg.seed, ds.name, rep);
    auto raw = stratified_split(ds, derive_seed(p.seed, 1));
    const auto st = fit_standardizer(raw.train);
    p.split.train = st.apply(raw.train);
    p.split.meta_train = st.apply(raw.meta_train);
    p.split.dsel = st.apply(raw.dsel);
    p.split.test = st.apply(raw.test);
    p.split.indices = std::move(raw.indices);
    p.pool = bagging_pool(p.split.train, cfg.pool_size, cfg.perceptron, derive_seed(p.seed, 2));
    p.meta_data = build_meta_dataset(p.pool, p.split.meta_train, cfg.layout(), cfg.hc);
    p.meta_split = split_meta(p.meta_data, cfg.meta.val_fraction, derive_seed(p.seed, 3));
    p.dsel.emplace(p.pool, p.split.dsel);
    if (cfg.has(ScenarioKind::dependent) || cfg.has(ScenarioKind::independent)) {
        MetaTrainConfig mc = cfg.meta;
        mc.seed = derive_seed(p.seed, 4);
        p.selector = train_meta(p.meta_split.train, p.meta_split.validation, mc, &p.curve);
    }
    return p;
}

// Validation split of the target, or all of its meta-data when the split left
// validation empty.
inline const MetaDataset &evaluation_meta(const PreparedDataset &p) {
    return p.meta_split.validation.empty() ? p.meta_data : p.meta_split.validation;
}

struct Evaluation {
    double accuracy = 0.0;
    double fallback_rate = 0.0;
};

inline Evaluation evaluate(Technique t, const PreparedDataset &p, const MetaClassifier *meta, const ExperimentConfig &cfg,
                           const std::string &row_name, std::size_t rep, std::vector<TraceRow> *trace) {
    const auto &test = p.split.test;
    std::size_t hits = 0;
    std::size_t fallbacks = 0;
    for (std::size_t q = 0; q < test.size(); ++q) {
        const auto r = classify(t, p.pool, meta, test[q].features, *p.dsel, cfg.layout());
        hits += r.label == test[q].label ? 1 : 0;
        fallbacks += r.fallback_used ? 1 : 0;
        if (trace != nullptr) {
            trace->push_back({ test.name, rep, p.split.indices[3][q], row_name, r.selected, r.fallback_used, r.label,
                               test[q].label });
        }
    }
    const auto n = static_cast<double>(test.size());
    return { static_cast<double>(hits) / n, static_cast<double>(fallbacks) / n };
}

}  // namespace detail

/// One replication over every dataset. Datasets are coupled only through the
/// independent and all scenarios, which need the other datasets' selectors
/// and meta-data from the same replication.
inline std::vector<ReplicationResult> run_replication_set(const ExperimentConfig &cfg, const std::vector<Dataset> &datasets,
                                                          std::size_t rep) {
    using clock = std::chrono::steady_clock;
    std::vector<detail::PreparedDataset> prepared;
    std::vector<double> prep_seconds;
    prepared.reserve(datasets.size());
    for (const auto &ds : datasets) {
        const auto t0 = clock::now();
        prepared.push_back(detail::with_context(ds.name, rep, [&] { return detail::prepare(cfg, ds, rep); }));
        prep_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }

    std::optional<MetaClassifier> pooled_selector;
    if (cfg.has(ScenarioKind::all)) {
        pooled_selector = detail::with_context("__all__", rep, [&] {
            MetaDataset train{ "all", cfg.layout(), {} };
            MetaDataset validation{ "all", cfg.layout(), {} };
            for (const auto &p : prepared) {
                const auto &tr = p.meta_split.train.samples;
                const auto &va = p.meta_split.validation.samples;
                train.samples.insert(train.samples.end(), tr.begin(), tr.end());
                validation.samples.insert(validation.samples.end(), va.begin(), va.end());
            }
            MetaTrainConfig mc = cfg.meta;
            mc.seed = derive_seed(replication_seed(cfg.seed, "__all__", rep), 4);
            return train_meta(train, validation, mc);
        });
    }

    std::vector<ReplicationResult> results;
    for (std::size_t d = 0; d < prepared.size(); ++d) {
        const auto t0 = clock::now();
        const auto &p = prepared[d];
        ReplicationResult r;
        r.dataset = datasets[d].name;
        r.rep_index = rep;
        r.seed = p.seed;
        r.meta_samples = p.meta_data.size();
        r.selected_queries = p.meta_data.size() / std::max<std::size_t>(p.pool.size(), 1);
        auto *trace = cfg.trace ? &r.trace : nullptr;
        detail::with_context(r.dataset, rep, [&] {
            const auto record = [&](const std::string &name, const detail::Evaluation &e) {
                r.accuracy[name] = e.accuracy;
                r.fallback_rate[name] = e.fallback_rate;
            };
            const auto &eval_meta = detail::evaluation_meta(p);
            if (cfg.has(ScenarioKind::dependent)) {
                const auto name = des_name(ScenarioKind::dependent);
                record(name, detail::evaluate(Technique::des_meta, p, &*p.selector, cfg, name, rep, trace));
                r.meta_accuracy[lambda_name(ScenarioKind::dependent)] = meta_accuracy(*p.selector, eval_meta);
            }
            if (cfg.has(ScenarioKind::independent)) {
                const auto name = des_name(ScenarioKind::independent);
                detail::Evaluation sum;
                double meta_sum = 0.0;
                std::size_t sources = 0;
                for (std::size_t s = 0; s < prepared.size(); ++s) {
                    if (s == d) {
                        continue;
                    }
                    const auto &selector = *prepared[s].selector;
                    const auto e = detail::evaluate(Technique::des_meta, p, &selector, cfg,
                                                    name + "<" + datasets[s].name, rep, trace);
                    sum.accuracy += e.accuracy;
                    sum.fallback_rate += e.fallback_rate;
                    meta_sum += meta_accuracy(selector, eval_meta);
                    ++sources;
                }
                const auto n = static_cast<double>(sources);
                record(name, { sum.accuracy / n, sum.fallback_rate / n });
                r.meta_accuracy[lambda_name(ScenarioKind::independent)] = meta_sum / n;
            }
            if (cfg.has(ScenarioKind::all)) {
                const auto name = des_name(ScenarioKind::all);
                record(name, detail::evaluate(Technique::des_meta, p, &*pooled_selector, cfg, name, rep, trace));
                r.meta_accuracy[lambda_name(ScenarioKind::all)] = meta_accuracy(*pooled_selector, eval_meta);
            }
            const std::vector<std::pair<std::string, Technique>> baselines{
                { "KNORA-E", Technique::knora_e }, { "KNORA-U", Technique::knora_u }, { "LCA", Technique::lca },
                { "OLA", Technique::ola },         { "KNOP", Technique::knop },       { "STATIC", Technique::static_vote }
            };
            for (const auto &[name, t] : baselines) {
                record(name, detail::evaluate(t, p, nullptr, cfg, name, rep, trace));
            }
        });
        if (cfg.audit) {
            r.audit = AuditArtifacts{ p.pool, p.meta_data, p.selector, p.curve };
        }
        r.seconds = prep_seconds[d] + std::chrono::duration<double>(clock::now() - t0).count();
        results.push_back(std::move(r));
    }
    return results;
}

/// Single-dataset replication (dependent and all scenarios only).
inline ReplicationResult run_replication(const ExperimentConfig &cfg, const Dataset &dataset, std::size_t rep_index) {
    if (cfg.has(ScenarioKind::independent)) {
        throw config_error{ "the independent scenario needs at least two datasets" };
    }
    return run_replication_set(cfg, { dataset }, rep_index).front();
}

// ---------------------------------------------------------------------------
// Aggregation

struct CellSummary {
    std::string dataset;
    std::string technique;
    double mean = 0.0;
    double std = 0.0;
    std::size_t replications = 0;
    double fallback_rate = 0.0;
};

struct MetaSummary {
    std::string dataset;
    std::string scenario;  ///< D, I or ALL
    double des_mean = 0.0;
    double des_std = 0.0;
    double meta_mean = 0.0;
    double meta_std = 0.0;
};

/// Kruskal-Wallis comparison of two result series on one dataset.
struct PairTest {
    std::string dataset;
    std::string a;
    std::string b;
    double h = 0.0;
    double p_value = 1.0;

    [[nodiscard]] bool significant() const { return p_value < 0.05; }
};

struct Correlation {
    std::string scenario;
    double rho = std::numeric_limits<double>::quiet_NaN();
    std::size_t datasets = 0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<std::string> datasets;
    std::vector<std::string> techniques;
    std::vector<CellSummary> cells;  ///< dataset-major, techniques in column order
    std::vector<MetaSummary> meta;
    std::vector<PairTest> tests;
    std::vector<Correlation> correlations;
    std::vector<std::vector<ReplicationResult>> replications;  ///< [rep][dataset]

    [[nodiscard]] const CellSummary &cell(const std::string &dataset, const std::string &technique) const {
        for (const auto &c : cells) {
            if (c.dataset == dataset && c.technique == technique) {
                return c;
            }
        }
        throw error{ "no report cell for (" + dataset + ", " + technique + ")" };
    }

    [[nodiscard]] const MetaSummary &meta_row(const std::string &dataset, const std::string &scenario) const {
        for (const auto &m : meta) {
            if (m.dataset == dataset && m.scenario == scenario) {
                return m;
            }
        }
        throw error{ "no meta summary for (" + dataset + ", " + scenario + ")" };
    }

    [[nodiscard]] double rho(const std::string &scenario) const {
        for (const auto &c : correlations) {
            if (c.scenario == scenario) {
                return c.rho;
            }
        }
        return std::numeric_limits<double>::quiet_NaN();
    }
};

/// Reduces per-replication results (any order) into the report. Results are
/// first sorted by replication index, so the reduction is order-independent.
inline ExperimentReport aggregate(const ExperimentConfig &cfg, std::vector<std::vector<ReplicationResult>> reps) {
    if (reps.empty() || reps.front().empty()) {
        throw error{ "nothing to aggregate" };
    }
    std::sort(reps.begin(), reps.end(), [](const auto &a, const auto &b) { return a.front().rep_index < b.front().rep_index; });
    ExperimentReport rep;
    rep.config = cfg;
    rep.techniques = technique_columns(cfg);
    for (const auto &r : reps.front()) {
        rep.datasets.push_back(r.dataset);
    }
    const auto series = [&](std::size_t d, const std::string &name, bool meta) {
        std::vector<double> xs;
        for (const auto &row : reps) {
            const auto &m = meta ? row[d].meta_accuracy : row[d].accuracy;
            xs.push_back(m.at(name));
        }
        return xs;
    };
    for (std::size_t d = 0; d < rep.datasets.size(); ++d) {
        const auto &ds = rep.datasets[d];
        std::vector<std::pair<std::string, std::vector<double>>> all_series;
        for (const auto &t : rep.techniques) {
            const auto xs = series(d, t, false);
            std::vector<double> fb;
            for (const auto &row : reps) {
                fb.push_back(row[d].fallback_rate.at(t));
            }
            rep.cells.push_back({ ds, t, mean(xs), stddev(xs), xs.size(), mean(fb) });
            all_series.emplace_back(t, xs);
        }
        for (const auto s : { ScenarioKind::dependent, ScenarioKind::independent, ScenarioKind::all }) {
            if (!cfg.has(s)) {
                continue;
            }
            const auto des = series(d, des_name(s), false);
            const auto lam = series(d, lambda_name(s), true);
            rep.meta.push_back({ ds, scenario_suffix(s), mean(des), stddev(des), mean(lam), stddev(lam) });
            all_series.emplace_back(lambda_name(s), lam);
        }
        for (std::size_t a = 0; a < all_series.size(); ++a) {
            for (std::size_t b = a + 1; b < all_series.size(); ++b) {
                const bool a_lambda = all_series[a].first.starts_with("lambda_");
                const bool b_lambda = all_series[b].first.starts_with("lambda_");
                if (a_lambda != b_lambda) {
                    continue;  // accuracies of different quantities are not compared
                }
                const auto kw = kruskal_wallis({ all_series[a].second, all_series[b].second });
                rep.tests.push_back({ ds, all_series[a].first, all_series[b].first, kw.h, kw.p_value });
            }
        }
    }
    for (const auto s : { ScenarioKind::dependent, ScenarioKind::independent, ScenarioKind::all }) {
        if (!cfg.has(s)) {
            continue;
        }
        std::vector<double> des;
        std::vector<double> lam;
        for (const auto &ds : rep.datasets) {
            const auto &m = rep.meta_row(ds, scenario_suffix(s));
            des.push_back(m.des_mean);
            lam.push_back(m.meta_mean);
        }
        Correlation c{ scenario_suffix(s), std::numeric_limits<double>::quiet_NaN(), des.size() };
        try {
            c.rho = pearson(des, lam);
        } catch (const error &) {
            // fewer than two datasets or zero variance: left undefined
        }
        rep.correlations.push_back(c);
    }
    rep.replications = std::move(reps);
    return rep;
}

inline std::vector<Dataset> materialize_all(const ExperimentConfig &cfg) {
    std::vector<Dataset> out;
    for (const auto &d : cfg.datasets) {
        out.push_back(detail::with_context(d.name, 0, [&] { return materialize(d, cfg.seed); }));
    }
    return out;
}

/// Runs every replication (in parallel when cfg.threads allows) and
/// aggregates. Results are independent of thread count and scheduling.
inline ExperimentReport run_experiment(const ExperimentConfig &cfg, const std::vector<Dataset> &datasets) {
    validate_config(cfg);
    std::vector<std::vector<ReplicationResult>> reps(cfg.replications);
    std::vector<std::exception_ptr> errors(cfg.replications);
    std::atomic<std::size_t> next{ 0 };
    const auto worker = [&] {
        for (std::size_t r = next++; r < cfg.replications; r = next++) {
            try {
                reps[r] = run_replication_set(cfg, datasets, r);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    std::size_t threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    threads = std::min(threads, cfg.replications);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    for (const auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return aggregate(cfg, std::move(reps));
}

inline ExperimentReport run_experiment(const ExperimentConfig &cfg) {
    validate_config(cfg);
    return run_experiment(cfg, materialize_all(cfg));
}

// ---------------------------------------------------------------------------
// Report files

/// Shortest decimal form that parses back to the same double.
inline std::string format_real(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path &p) {
    std::ofstream out{ p };
    if (!out) {
        throw io_error{ "cannot write '" + p.string() + "'" };
    }
    return out;
}

}  // namespace detail

/// Writes summary.csv, meta_summary.csv, correlation.csv, correlation_rho.csv,
/// kruskal_wallis.csv, replications.csv and config.json into `dir`, plus
/// trace.csv and audit/ when the configuration asks for them.
inline void emit_report(const ExperimentReport &report, const std::filesystem::path &dir) {
    if (report.cells.empty()) {
        throw error{ "refusing to write an empty report" };
    }
    std::filesystem::create_directories(dir);
    {
        auto out = detail::open_out(dir / "summary.csv");
        out << "dataset,technique,mean,std,replications,fallback_rate\n";
        for (const auto &c : report.cells) {
            out << c.dataset << ',' << c.technique << ',' << format_real(c.mean) << ',' << format_real(c.std) << ','
                << c.replications << ',' << format_real(c.fallback_rate) << '\n';
        }
    }
    {
        auto out = detail::open_out(dir / "meta_summary.csv");
        out << "dataset,scenario,des_mean,des_std,lambda_mean,lambda_std\n";
        for (const auto &m : report.meta) {
            out << m.dataset << ',' << m.scenario << ',' << format_real(m.des_mean) << ',' << format_real(m.des_std) << ','
                << format_real(m.meta_mean) << ',' << format_real(m.meta_std) << '\n';
        }
    }
    {
        auto out = detail::open_out(dir / "correlation.csv");
        out << "dataset";
        for (const auto &c : report.correlations) {
            out << ",des_" << c.scenario << ",lambda_" << c.scenario;
        }
        out << '\n';
        for (const auto &ds : report.datasets) {
            out << ds;
            for (const auto &c : report.correlations) {
                const auto &m = report.meta_row(ds, c.scenario);
                out << ',' << format_real(m.des_mean) << ',' << format_real(m.meta_mean);
            }
            out << '\n';
        }
    }
    {
        auto out = detail::open_out(dir / "correlation_rho.csv");
        out << "scenario,rho,datasets\n";
        for (const auto &c : report.correlations) {
            out << c.scenario << ',' << format_real(c.rho) << ',' << c.datasets << '\n';
        }
    }
    {
        auto out = detail::open_out(dir / "kruskal_wallis.csv");
        out << "dataset,a,b,h,p_value,significant\n";
        for (const auto &t : report.tests) {
            out << t.dataset << ',' << t.a << ',' << t.b << ',' << format_real(t.h) << ',' << format_real(t.p_value) << ','
                << (t.significant() ? 1 : 0) << '\n';
        }
    }
    {
        auto out = detail::open_out(dir / "replications.csv");
        out << "dataset,rep,series,value\n";
        for (const auto &row : report.replications) {
            for (const auto &r : row) {
                for (const auto &t : report.techniques) {
                    out << r.dataset << ',' << r.rep_index << ',' << t << ',' << format_real(r.accuracy.at(t)) << '\n';
                }
                for (const auto &[name, v] : r.meta_accuracy) {
                    out << r.dataset << ',' << r.rep_index << ',' << name << ',' << format_real(v) << '\n';
                }
                out << r.dataset << ',' << r.rep_index << ",meta_samples," << r.meta_samples << '\n';
            }
        }
    }
    {
        auto out = detail::open_out(dir / "config.json");
        out << nlohmann::json(report.config).dump(2) << '\n';
    }
    if (report.config.trace) {
        auto out = detail::open_out(dir / "trace.csv");
        out << "dataset,rep,query,technique,selected,fallback,label,truth\n";
        for (const auto &row : report.replications) {
            for (const auto &r : row) {
                for (const auto &t : r.trace) {
                    out << t.dataset << ',' << t.rep << ',' << t.query << ',' << t.technique << ',';
                    for (std::size_t i = 0; i < t.selected.size(); ++i) {
                        out << (i ? ";" : "") << t.selected[i];
                    }
                    out << ',' << (t.fallback ? 1 : 0) << ',' << t.label << ',' << t.truth << '\n';
                }
            }
        }
    }
    if (report.config.audit) {
        const auto audit_dir = dir / "audit";
        std::filesystem::create_directories(audit_dir);
        for (const auto &row : report.replications) {
            for (const auto &r : row) {
                if (!r.audit) {
                    continue;
                }
                const auto stem = r.dataset + "_rep" + std::to_string(r.rep_index);
                save_pool(r.audit->pool, (audit_dir / (stem + "_pool.json")).string());
                save_meta_dataset_csv(r.audit->meta_data, (audit_dir / (stem + "_meta.csv")).string());
                if (r.audit->selector) {
                    save_meta_classifier(*r.audit->selector, (audit_dir / (stem + "_lambda.json")).string());
                    auto curve = detail::open_out(audit_dir / (stem + "_curve.csv"));
                    write_training_curve_csv(r.audit->curve, curve);
                }
            }
        }
    }
}

/// Reads summary.csv back into cells.
inline std::vector<CellSummary> parse_summary_csv(const std::filesystem::path &path) {
    std::ifstream in{ path };
    if (!in) {
        throw io_error{ "cannot open '" + path.string() + "'" };
    }
    std::string line;
    std::getline(in, line);
    std::vector<CellSummary> out;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = detail::split_fields(line, ',');
        if (f.size() != 6) {
            throw io_error{ "malformed summary row '" + line + "'" };
        }
        CellSummary c;
        c.dataset = std::string{ f[0] };
        c.technique = std::string{ f[1] };
        if (!detail::parse_real(f[2], c.mean) || !detail::parse_real(f[3], c.std) ||
            !detail::parse_real(f[5], c.fallback_rate)) {
            throw io_error{ "malformed number in summary row '" + line + "'" };
        }
        c.replications = static_cast<std::size_t>(std::stoul(std::string{ f[4] }));
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace metades

#endif  // METADES_HARNESS_HPP
