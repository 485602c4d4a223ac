#ifndef METADES_POOL_HPP
#define METADES_POOL_HPP

// Overproduction: a bagged pool of one-vs-all linear perceptrons.

#include "metades/common.hpp"
#include "metades/data.hpp"
#include "metades/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace metades {

/// One-vs-all linear classifier: class l scores w_l . x + b_l.
struct LinearClassifier {
    std::size_t num_classes = 0;
    std::size_t num_features = 0;
    std::vector<double> weights;  ///< row-major, num_classes x num_features
    std::vector<double> biases;   ///< num_classes
    double posterior_temperature = 1.0;

    LinearClassifier() = default;
    LinearClassifier(std::size_t classes, std::size_t features, double temperature = 1.0)
        : num_classes{ classes }, num_features{ features }, weights(classes * features, 0.0), biases(classes, 0.0),
          posterior_temperature{ temperature } {}

    [[nodiscard]] std::span<const double> row(std::size_t l) const {
        return std::span{ weights }.subspan(l * num_features, num_features);
    }
    [[nodiscard]] std::span<double> row(std::size_t l) { return std::span{ weights }.subspan(l * num_features, num_features); }

    [[nodiscard]] double score(std::size_t l, FeatureView x) const { return dot(row(l), x) + biases[l]; }

    [[nodiscard]] std::vector<double> scores(FeatureView x) const {
        std::vector<double> s(num_classes);
        for (std::size_t l = 0; l < num_classes; ++l) {
            s[l] = score(l, x);
        }
        return s;
    }

    friend bool operator==(const LinearClassifier &, const LinearClassifier &) = default;
};

struct PerceptronConfig {
    int epochs = 100;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    double posterior_temperature = 1.0;
};

struct Pool {
    std::vector<LinearClassifier> members;

    [[nodiscard]] std::size_t size() const noexcept { return members.size(); }
    [[nodiscard]] const LinearClassifier &operator[](std::size_t i) const { return members[i]; }
    [[nodiscard]] std::size_t num_classes() const { return members.empty() ? 0 : members.front().num_classes; }
    [[nodiscard]] std::size_t num_features() const { return members.empty() ? 0 : members.front().num_features; }

    friend bool operator==(const Pool &, const Pool &) = default;
};

/// Arg-max class score; exact ties go to the lowest class index.
inline ClassLabel predict(const LinearClassifier &c, FeatureView x) {
    std::size_t best = 0;
    double best_score = c.score(0, x);
    for (std::size_t l = 1; l < c.num_classes; ++l) {
        const double s = c.score(l, x);
        if (s > best_score) {
            best_score = s;
            best = l;
        }
    }
    return static_cast<ClassLabel>(best);
}

/// Smallest probability emitted by posterior(); keeps every entry strictly
/// inside (0, 1) even when one margin dominates.
inline constexpr double posterior_floor = 1e-15;

/// Softmax of class scores divided by the classifier's temperature.
inline std::vector<double> posterior(const LinearClassifier &c, FeatureView x) {
    std::vector<double> p = c.scores(x);
    const double t = c.posterior_temperature;
    const double top = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (auto &v : p) {
        v = std::exp((v - top) / t);
        sum += v;
    }
    for (auto &v : p) {
        v = std::clamp(v / sum, posterior_floor, 1.0 - posterior_floor);
    }
    return p;
}

/// Distance from x to the decision boundary relevant to its predicted class.
/// Binary: |w_1 . x + b_1| / |w_1|. Multi-class: the nearest pairwise boundary
/// between the predicted class and any other. A zero-norm discriminant means
/// the classifier is degenerate and the distance is reported as 0.
inline double decision_distance(const LinearClassifier &c, FeatureView x) {
    if (c.num_classes == 2) {
        const auto w = c.row(1);
        const double norm = std::sqrt(dot(w, w));
        if (norm == 0.0) {
            return 0.0;
        }
        return std::abs(dot(w, x) + c.biases[1]) / norm;
    }
    const auto yhat = static_cast<std::size_t>(predict(c, x));
    const auto wy = c.row(yhat);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> diff(c.num_features);
    for (std::size_t l = 0; l < c.num_classes; ++l) {
        if (l == yhat) {
            continue;
        }
        const auto wl = c.row(l);
        for (std::size_t j = 0; j < c.num_features; ++j) {
            diff[j] = wy[j] - wl[j];
        }
        const double norm = std::sqrt(dot(diff, diff));
        if (norm == 0.0) {
            return 0.0;
        }
        best = std::min(best, std::abs(dot(diff, x) + c.biases[yhat] - c.biases[l]) / norm);
    }
    return best;
}

namespace detail {

inline std::size_t distinct_labels(std::span<const LabeledSample> samples) {
    std::vector<ClassLabel> seen;
    for (const auto &s : samples) {
        if (std::find(seen.begin(), seen.end(), s.label) == seen.end()) {
            seen.push_back(s.label);
        }
    }
    return seen.size();
}

}  // namespace detail

/// Classic error-driven perceptron, one binary unit per class (target +1 for
/// the class, -1 otherwise), zero initialization, cfg.epochs passes over the
/// samples in a freshly seed-shuffled order each epoch.
///
/// Throws training_error when fewer than two classes are present; bagging
/// uses that to redraw a degenerate bootstrap sample.
inline LinearClassifier train_perceptron(std::span<const LabeledSample> samples, std::size_t num_classes,
                                         const PerceptronConfig &cfg) {
    if (cfg.epochs < 1) {
        throw training_error{ "perceptron needs epochs >= 1" };
    }
    if (samples.empty() || detail::distinct_labels(samples) < 2) {
        throw training_error{ "perceptron training sample contains a single class" };
    }
    const std::size_t d = samples.front().features.size();
    num_classes = std::max<std::size_t>(num_classes, 2);
    LinearClassifier c{ num_classes, d, cfg.posterior_temperature };
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{ 0 });
    Rng rng{ cfg.seed };
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span{ order });
        for (const std::size_t i : order) {
            const auto &s = samples[i];
            for (std::size_t l = 0; l < num_classes; ++l) {
                const double target = static_cast<std::size_t>(s.label) == l ? 1.0 : -1.0;
                if (target * c.score(l, s.features) <= 0.0) {
                    auto w = c.row(l);
                    const double step = cfg.learning_rate * target;
                    for (std::size_t j = 0; j < d; ++j) {
                        w[j] += step * s.features[j];
                    }
                    c.biases[l] += step;
                }
            }
        }
    }
    return c;
}

inline LinearClassifier train_perceptron(const Dataset &ds, const PerceptronConfig &cfg) {
    return train_perceptron(ds.samples, ds.num_classes, cfg);
}

/// Maximum bootstrap redraws per member before bagging gives up.
inline constexpr int max_bootstrap_retries = 100;

/// M perceptrons, each trained on its own |T|-draw bootstrap resample with a
/// seed derived from (seed, member index).
inline Pool bagging_pool(const Dataset &train, std::size_t pool_size, const PerceptronConfig &cfg, std::uint64_t seed) {
    if (train.empty()) {
        throw data_error{ "cannot bag an empty training set" };
    }
    if (pool_size < 1) {
        throw training_error{ "pool size must be at least 1" };
    }
    Pool pool;
    pool.members.reserve(pool_size);
    std::vector<LabeledSample> boot(train.size());
    for (std::size_t m = 0; m < pool_size; ++m) {
        const std::uint64_t member_seed = derive_seed(seed, m);
        Rng rng{ member_seed };
        bool drawn = false;
        for (int attempt = 0; attempt <= max_bootstrap_retries && !drawn; ++attempt) {
            for (auto &b : boot) {
                b = train.samples[rng.below(train.size())];
            }
            drawn = detail::distinct_labels(boot) >= 2;
        }
        if (!drawn) {
            throw training_error{ "bootstrap resample for member " + std::to_string(m) + " stayed single-class after " +
                                  std::to_string(max_bootstrap_retries) + " retries" };
        }
        PerceptronConfig member_cfg = cfg;
        member_cfg.seed = derive_seed(member_seed, 0xbeef);
        pool.members.push_back(train_perceptron(boot, train.num_classes, member_cfg));
    }
    return pool;
}

/// Hard decisions of each member on x.
inline std::vector<ClassLabel> pool_predictions(const Pool &pool, FeatureView x) {
    std::vector<ClassLabel> out(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        out[i] = predict(pool[i], x);
    }
    return out;
}

inline double accuracy(const LinearClassifier &c, const Dataset &ds) {
    if (ds.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (const auto &s : ds.samples) {
        hits += predict(c, s.features) == s.label ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------
// JSON weight dump. nlohmann writes doubles in shortest round-trip form, so
// load(save(pool)) == pool exactly.

inline void to_json(nlohmann::json &j, const LinearClassifier &c) {
    j = nlohmann::json{ { "num_classes", c.num_classes },
                        { "num_features", c.num_features },
                        { "posterior_temperature", c.posterior_temperature },
                        { "weights", c.weights },
                        { "biases", c.biases } };
}

inline void from_json(const nlohmann::json &j, LinearClassifier &c) {
    j.at("num_classes").get_to(c.num_classes);
    j.at("num_features").get_to(c.num_features);
    j.at("posterior_temperature").get_to(c.posterior_temperature);
    j.at("weights").get_to(c.weights);
    j.at("biases").get_to(c.biases);
    if (c.weights.size() != c.num_classes * c.num_features || c.biases.size() != c.num_classes) {
        throw io_error{ "linear classifier dump has inconsistent shapes" };
    }
}

inline void to_json(nlohmann::json &j, const Pool &p) { j = nlohmann::json{ { "members", p.members } }; }

inline void from_json(const nlohmann::json &j, Pool &p) { j.at("members").get_to(p.members); }

inline void save_pool(const Pool &pool, const std::string &path) {
    std::ofstream out{ path };
    if (!out) {
        throw io_error{ "cannot write '" + path + "'" };
    }
    out << nlohmann::json(pool).dump(1) << '\n';
}

inline Pool load_pool(const std::string &path) {
    std::ifstream in{ path };
    if (!in) {
        throw io_error{ "cannot open '" + path + "'" };
    }
    try {
        return nlohmann::json::parse(in).get<Pool>();
    } catch (const nlohmann::json::exception &e) {
        throw io_error{ "malformed pool dump '" + path + "': " + e.what() };
    }
}

}  // namespace metades

#endif  // METADES_POOL_HPP
