#ifndef METADES_META_HPP
#define METADES_META_HPP

// The meta-classifier: a one-hidden-layer perceptron (10 tanh units, sigmoid
// output) that scores how competent a base classifier is for a query, plus
// the assembly of its training data under the three training scenarios.

#include "metades/common.hpp"
#include "metades/competence.hpp"
#include "metades/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace metades {

class MetaClassifier {
  public:
    static constexpr std::size_t hidden_units = 10;

    MetaClassifier() = default;

    /// All-zero network; scores 0.5 everywhere.
    explicit MetaClassifier(std::size_t input_dim)
        : input_dim_{ input_dim }, w_hidden_(hidden_units * input_dim, 0.0), b_hidden_(hidden_units, 0.0),
          w_out_(hidden_units, 0.0) {}

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    static MetaClassifier random(std::size_t input_dim, std::uint64_t seed) {
        MetaClassifier m{ input_dim };
        Rng rng{ seed };
        const double a = 1.0 / std::sqrt(static_cast<double>(input_dim));
        for (auto &w : m.w_hidden_) {
            w = rng.uniform(-a, a);
        }
        const double b = 1.0 / std::sqrt(static_cast<double>(hidden_units));
        for (auto &w : m.w_out_) {
            w = rng.uniform(-b, b);
        }
        return m;
    }

    [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
    [[nodiscard]] double threshold() const noexcept { return threshold_; }
    void set_threshold(double t) noexcept { threshold_ = t; }

    /// Output pre-activation z; the score is sigmoid(z).
    [[nodiscard]] double logit(FeatureView v) const {
        std::array<double, hidden_units> h;
        return forward(v, h);
    }

    [[nodiscard]] double score(FeatureView v) const { return sigmoid(logit(v)); }

    [[nodiscard]] bool competent(FeatureView v) const { return score(v) >= threshold_; }

    /// Number of trainable parameters.
    [[nodiscard]] std::size_t num_params() const noexcept { return w_hidden_.size() + b_hidden_.size() + w_out_.size() + 1; }

    /// Parameters flattened as [hidden weights | hidden biases | output weights | output bias].
    [[nodiscard]] std::vector<double> params() const {
        std::vector<double> p;
        p.reserve(num_params());
        p.insert(p.end(), w_hidden_.begin(), w_hidden_.end());
        p.insert(p.end(), b_hidden_.begin(), b_hidden_.end());
        p.insert(p.end(), w_out_.begin(), w_out_.end());
        p.push_back(b_out_);
        return p;
    }

    void set_params(std::span<const double> p) {
        if (p.size() != num_params()) {
            throw error{ "parameter vector has " + std::to_string(p.size()) + " entries, expected " +
                         std::to_string(num_params()) };
        }
        auto it = p.begin();
        std::copy_n(it, w_hidden_.size(), w_hidden_.begin());
        it += static_cast<std::ptrdiff_t>(w_hidden_.size());
        std::copy_n(it, b_hidden_.size(), b_hidden_.begin());
        it += static_cast<std::ptrdiff_t>(b_hidden_.size());
        std::copy_n(it, w_out_.size(), w_out_.begin());
        it += static_cast<std::ptrdiff_t>(w_out_.size());
        b_out_ = *it;
    }

    /// Binary cross-entropy of one sample, and (optionally) its gradient added
    /// into `grad` in params() layout.
    double loss_and_accumulate(FeatureView v, int alpha, std::span<double> grad) const {
        std::array<double, hidden_units> h;
        const double z = forward(v, h);
        const double y = sigmoid(z);
        const double a = static_cast<double>(alpha);
        // log(1 + e^z) - a z, computed without overflow
        const double loss = (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - a * z;
        if (!grad.empty()) {
            const double dz = y - a;
            const std::size_t off_bh = w_hidden_.size();
            const std::size_t off_wo = off_bh + hidden_units;
            const std::size_t off_bo = off_wo + hidden_units;
            for (std::size_t j = 0; j < hidden_units; ++j) {
                grad[off_wo + j] += dz * h[j];
                const double dpre = dz * w_out_[j] * (1.0 - h[j] * h[j]);
                grad[off_bh + j] += dpre;
                double *row = &grad[j * input_dim_];
                for (std::size_t i = 0; i < input_dim_; ++i) {
                    row[i] += dpre * v[i];
                }
            }
            grad[off_bo] += dz;
        }
        return loss;
    }

    /// One stochastic gradient step on a single sample.
    void sgd_step(FeatureView v, int alpha, double learning_rate) {
        std::array<double, hidden_units> h;
        const double z = forward(v, h);
        const double dz = sigmoid(z) - static_cast<double>(alpha);
        for (std::size_t j = 0; j < hidden_units; ++j) {
            const double dpre = dz * w_out_[j] * (1.0 - h[j] * h[j]);
            w_out_[j] -= learning_rate * dz * h[j];
            b_hidden_[j] -= learning_rate * dpre;
            double *row = &w_hidden_[j * input_dim_];
            for (std::size_t i = 0; i < input_dim_; ++i) {
                row[i] -= learning_rate * dpre * v[i];
            }
        }
        b_out_ -= learning_rate * dz;
    }

    friend bool operator==(const MetaClassifier &, const MetaClassifier &) = default;

    friend void to_json(nlohmann::json &j, const MetaClassifier &m) {
        j = nlohmann::json{ { "input_dim", m.input_dim_ },     { "hidden_units", hidden_units },
                            { "hidden_weights", m.w_hidden_ }, { "hidden_biases", m.b_hidden_ },
                            { "output_weights", m.w_out_ },    { "output_bias", m.b_out_ },
                            { "threshold", m.threshold_ } };
    }

    friend void from_json(const nlohmann::json &j, MetaClassifier &m) {
        if (j.at("hidden_units").get<std::size_t>() != hidden_units) {
            throw io_error{ "meta-classifier dump must have 10 hidden units" };
        }
        m = MetaClassifier{ j.at("input_dim").get<std::size_t>() };
        std::vector<double> wh, bh, wo;
        j.at("hidden_weights").get_to(wh);
        j.at("hidden_biases").get_to(bh);
        j.at("output_weights").get_to(wo);
        if (wh.size() != m.w_hidden_.size() || bh.size() != hidden_units || wo.size() != hidden_units) {
            throw io_error{ "meta-classifier dump has inconsistent shapes" };
        }
        m.w_hidden_ = std::move(wh);
        m.b_hidden_ = std::move(bh);
        m.w_out_ = std::move(wo);
        j.at("output_bias").get_to(m.b_out_);
        j.at("threshold").get_to(m.threshold_);
    }

  private:
    static double sigmoid(double z) {
        if (z >= 0.0) {
            return 1.0 / (1.0 + std::exp(-z));
        }
        const double e = std::exp(z);
        return e / (1.0 + e);
    }

    double forward(FeatureView v, std::array<double, hidden_units> &h) const {
        double z = b_out_;
        for (std::size_t j = 0; j < hidden_units; ++j) {
            h[j] = std::tanh(dot(std::span{ w_hidden_ }.subspan(j * input_dim_, input_dim_), v) + b_hidden_[j]);
            z += w_out_[j] * h[j];
        }
        return z;
    }

    std::size_t input_dim_ = 0;
    std::vector<double> w_hidden_;  // hidden_units x input_dim, row-major
    std::vector<double> b_hidden_;
    std::vector<double> w_out_;
    double b_out_ = 0.0;
    double threshold_ = 0.5;
};

inline double competence_score(const MetaClassifier &m, FeatureView v) { return m.score(v); }

struct MetaTrainConfig {
    int max_epochs = 300;
    double learning_rate = 0.1;
    int patience = 5;
    double val_fraction = 0.25;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct TrainingCurve {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
};

/// Fraction of samples where (score >= threshold) matches alpha.
inline double meta_accuracy(const MetaClassifier &m, std::span<const MetaSample> samples) {
    if (samples.empty()) {
        throw data_error{ "meta accuracy of an empty meta-dataset is undefined" };
    }
    std::size_t hits = 0;
    for (const auto &s : samples) {
        hits += (m.competent(s.v) ? 1 : 0) == s.alpha ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

inline double meta_accuracy(const MetaClassifier &m, const MetaDataset &md) { return meta_accuracy(m, md.samples); }

/// Mean loss and gradient over a batch, in MetaClassifier::params() layout.
inline double batch_loss_and_gradient(const MetaClassifier &m, std::span<const MetaSample> batch, std::vector<double> &grad) {
    grad.assign(m.num_params(), 0.0);
    double loss = 0.0;
    for (const auto &s : batch) {
        loss += m.loss_and_accumulate(s.v, s.alpha, grad);
    }
    const double n = static_cast<double>(batch.size());
    for (auto &g : grad) {
        g /= n;
    }
    return loss / n;
}

inline double batch_loss(const MetaClassifier &m, std::span<const MetaSample> batch) {
    double loss = 0.0;
    for (const auto &s : batch) {
        loss += m.loss_and_accumulate(s.v, s.alpha, {});
    }
    return loss / static_cast<double>(batch.size());
}

struct MetaSplit {
    MetaDataset train;
    MetaDataset validation;
};

/// Stratified (on alpha) seed-shuffled split; round(val_fraction * n_c) of each
/// alpha class goes to validation.
inline MetaSplit split_meta(const MetaDataset &md, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw config_error{ "val_fraction must lie in (0, 1)" };
    }
    std::array<std::vector<std::size_t>, 2> by_alpha;
    for (std::size_t i = 0; i < md.size(); ++i) {
        by_alpha[md.samples[i].alpha != 0 ? 1 : 0].push_back(i);
    }
    Rng rng{ seed };
    MetaSplit out{ { md.provenance, md.layout, {} }, { md.provenance, md.layout, {} } };
    for (auto &idx : by_alpha) {
        rng.shuffle(std::span{ idx });
        const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(idx.size()) + 0.5));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            (k < n_val ? out.validation : out.train).samples.push_back(md.samples[idx[k]]);
        }
    }
    return out;
}

namespace detail {

inline void check_trainable(std::span<const MetaSample> samples) {
    if (samples.empty()) {
        throw training_error{ "cannot train a meta-classifier on an empty meta-dataset" };
    }
    const bool has_pos = std::any_of(samples.begin(), samples.end(), [](const MetaSample &s) { return s.alpha != 0; });
    const bool has_neg = std::any_of(samples.begin(), samples.end(), [](const MetaSample &s) { return s.alpha == 0; });
    if (!has_pos || !has_neg) {
        throw training_error{ "meta-dataset has a single alpha class; both competent and incompetent examples are needed" };
    }
}

}  // namespace detail

/// Online gradient descent on binary cross-entropy over `train`, one shuffled
/// pass per epoch. Validation accuracy is measured after every epoch; training
/// stops once it has not exceeded the best value for `patience` consecutive
/// epochs (or at max_epochs) and the best-epoch weights are returned. With an
/// empty validation set the training accuracy drives model selection.
inline MetaClassifier train_meta(const MetaDataset &train, const MetaDataset &validation, const MetaTrainConfig &cfg,
                                 TrainingCurve *curve = nullptr) {
    detail::check_trainable(train.samples);
    if (cfg.max_epochs < 1 || cfg.patience < 1 || !(cfg.learning_rate > 0.0)) {
        throw config_error{ "meta training needs max_epochs >= 1, patience >= 1 and learning_rate > 0" };
    }
    const std::size_t dim = train.samples.front().v.size();
    MetaClassifier model = MetaClassifier::random(dim, derive_seed(cfg.seed, 1));
    MetaClassifier best = model;
    double best_val = -1.0;
    int since_best = 0;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{ 0 });
    Rng rng{ derive_seed(cfg.seed, 2) };
    if (curve != nullptr) {
        *curve = TrainingCurve{};
    }
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(std::span{ order });
        for (const std::size_t i : order) {
            model.sgd_step(train.samples[i].v, train.samples[i].alpha, cfg.learning_rate);
        }
        const double train_acc = meta_accuracy(model, train);
        const double val_acc = validation.empty() ? train_acc : meta_accuracy(model, validation);
        if (curve != nullptr) {
            curve->epochs.push_back({ epoch, train_acc, val_acc });
        }
        if (val_acc > best_val) {
            best_val = val_acc;
            best = model;
            since_best = 0;
            if (curve != nullptr) {
                curve->best_epoch = epoch;
            }
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return best;
}

/// Splits md 75/25 (cfg.val_fraction) and trains with early stopping.
inline MetaClassifier train_meta(const MetaDataset &md, const MetaTrainConfig &cfg, TrainingCurve *curve = nullptr) {
    detail::check_trainable(md.samples);
    auto split = split_meta(md, cfg.val_fraction, derive_seed(cfg.seed, 0));
    return train_meta(split.train, split.validation, cfg, curve);
}

inline void write_training_curve_csv(const TrainingCurve &curve, std::ostream &out) {
    out << "epoch,train_acc,val_acc\n" << std::setprecision(17);
    for (const auto &e : curve.epochs) {
        out << e.epoch << ',' << e.train_accuracy << ',' << e.val_accuracy << '\n';
    }
}

inline void save_meta_classifier(const MetaClassifier &m, const std::string &path) {
    std::ofstream out{ path };
    if (!out) {
        throw io_error{ "cannot write '" + path + "'" };
    }
    out << nlohmann::json(m).dump(1) << '\n';
}

inline MetaClassifier load_meta_classifier(const std::string &path) {
    std::ifstream in{ path };
    if (!in) {
        throw io_error{ "cannot open '" + path + "'" };
    }
    try {
        return nlohmann::json::parse(in).get<MetaClassifier>();
    } catch (const nlohmann::json::exception &e) {
        throw io_error{ "malformed meta-classifier dump '" + path + "': " + e.what() };
    }
}

// ---------------------------------------------------------------------------
// Scenarios

enum class ScenarioKind { dependent, independent, all };

inline std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::dependent:
            return "dependent";
        case ScenarioKind::independent:
            return "independent";
        case ScenarioKind::all:
            return "all";
    }
    return "?";
}

inline ScenarioKind scenario_from_string(const std::string &s) {
    if (s == "dependent") {
        return ScenarioKind::dependent;
    }
    if (s == "independent") {
        return ScenarioKind::independent;
    }
    if (s == "all") {
        return ScenarioKind::all;
    }
    throw config_error{ "unknown scenario '" + s + "' (expected dependent, independent or all)" };
}

/// Which meta-data trains the selector used on `target`.
///   dependent   the target's own meta-data
///   independent the single source in `sources` (must differ from target)
///   all         every dataset in `sources`, concatenated in that order
struct Scenario {
    ScenarioKind kind = ScenarioKind::dependent;
    std::vector<std::string> sources;
    std::string target;
};

inline MetaDataset assemble_scenario(const Scenario &s, const std::map<std::string, MetaDataset> &per_dataset) {
    auto lookup = [&](const std::string &name) -> const MetaDataset & {
        const auto it = per_dataset.find(name);
        if (it == per_dataset.end()) {
            throw config_error{ "no meta-data for dataset '" + name + "'" };
        }
        return it->second;
    };
    switch (s.kind) {
        case ScenarioKind::dependent:
            return lookup(s.target);
        case ScenarioKind::independent: {
            if (s.sources.size() != 1) {
                throw config_error{ "independent scenario takes exactly one source dataset" };
            }
            if (s.sources.front() == s.target) {
                throw config_error{ "independent scenario needs source != target ('" + s.target + "')" };
            }
            return lookup(s.sources.front());
        }
        case ScenarioKind::all: {
            std::vector<std::string> names = s.sources;
            if (names.empty()) {
                for (const auto &[name, md] : per_dataset) {
                    names.push_back(name);
                }
            }
            MetaDataset out{ "all", lookup(names.front()).layout, {} };
            for (const auto &name : names) {
                const auto &md = lookup(name);
                if (md.layout.size() != out.layout.size()) {
                    throw config_error{ "meta-data of '" + name + "' has a different feature layout" };
                }
                out.samples.insert(out.samples.end(), md.samples.begin(), md.samples.end());
            }
            return out;
        }
    }
    throw config_error{ "unknown scenario kind" };
}

}  // namespace metades

#endif  // METADES_META_HPP
