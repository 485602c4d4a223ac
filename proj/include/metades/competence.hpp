#ifndef METADES_COMPETENCE_HPP
#define METADES_COMPETENCE_HPP

// Meta-training data production: consensus-based query selection, regions of
// competence in feature space, output-profile neighbors in decision space and
// the five meta-feature groups describing one (classifier, query) pair.

#include "metades/common.hpp"
#include "metades/data.hpp"
#include "metades/pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

namespace metades {

/// A reference-set member near a query. `index` points into the reference set.
struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;

    friend bool operator==(const Neighbor &, const Neighbor &) = default;
};

/// The K nearest reference samples of a query, nearest first.
struct RegionOfCompetence {
    std::vector<Neighbor> neighbors;

    [[nodiscard]] std::size_t size() const noexcept { return neighbors.size(); }
};

/// Hard decisions of every pool member for one sample. Reference profiles
/// also carry the sample's true label and its index in the reference set.
struct OutputProfile {
    std::vector<ClassLabel> decisions;
    ClassLabel true_label = -1;
    std::size_t source_index = no_index;
};

/// Meta-feature vector layout: f1[K] | f2[K] | f3 | f4[Kp] | f5.
struct MetaFeatureLayout {
    std::size_t k = 7;
    std::size_t kp = 5;

    [[nodiscard]] constexpr std::size_t size() const noexcept { return 2 * k + kp + 2; }
    [[nodiscard]] constexpr std::size_t f1() const noexcept { return 0; }
    [[nodiscard]] constexpr std::size_t f2() const noexcept { return k; }
    [[nodiscard]] constexpr std::size_t f3() const noexcept { return 2 * k; }
    [[nodiscard]] constexpr std::size_t f4() const noexcept { return 2 * k + 1; }
    [[nodiscard]] constexpr std::size_t f5() const noexcept { return 2 * k + 1 + kp; }
};

struct MetaSample {
    std::vector<double> v;
    int alpha = 0;  ///< 1 iff the classifier labels the query correctly
    std::size_t classifier_index = 0;
    std::size_t query_index = 0;

    friend bool operator==(const MetaSample &, const MetaSample &) = default;
};

struct MetaDataset {
    std::string provenance;
    MetaFeatureLayout layout;
    std::vector<MetaSample> samples;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }

    friend bool operator==(const MetaDataset &a, const MetaDataset &b) {
        return a.provenance == b.provenance && a.layout.k == b.layout.k && a.layout.kp == b.layout.kp &&
               a.samples == b.samples;
    }
};

// ---------------------------------------------------------------------------
// Consensus and query selection

/// Fraction of pool members voting for the plurality class.
inline double consensus_degree(std::span<const ClassLabel> decisions, std::size_t num_classes) {
    std::vector<std::size_t> votes(num_classes, 0);
    for (const ClassLabel d : decisions) {
        ++votes[static_cast<std::size_t>(d)];
    }
    return static_cast<double>(*std::max_element(votes.begin(), votes.end())) / static_cast<double>(decisions.size());
}

inline double consensus_degree(const Pool &pool, FeatureView x) {
    return consensus_degree(pool_predictions(pool, x), pool.num_classes());
}

/// Indices of samples whose pool consensus falls strictly below h_c.
inline std::vector<std::size_t> select_meta_queries(const Pool &pool, const Dataset &t_lambda, double h_c) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < t_lambda.size(); ++j) {
        if (consensus_degree(pool, t_lambda[j].features) < h_c) {
            out.push_back(j);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Neighborhoods

namespace detail {

// Keeps the k best (distance, index) pairs in a max-heap; the heap top is the
// current worst, replaced whenever a strictly better pair arrives.
class NearestK {
  public:
    explicit NearestK(std::size_t k) : k_{ k } {}

    void offer(double distance, std::size_t index) {
        if (k_ == 0) {
            return;
        }
        if (heap_.size() < k_) {
            heap_.push({ index, distance });
        } else if (better({ index, distance }, heap_.top())) {
            heap_.pop();
            heap_.push({ index, distance });
        }
    }

    std::vector<Neighbor> take_sorted() {
        std::vector<Neighbor> out(heap_.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = heap_.top();
            heap_.pop();
        }
        return out;
    }

  private:
    static bool better(const Neighbor &a, const Neighbor &b) {
        return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    }
    struct Worse {
        bool operator()(const Neighbor &a, const Neighbor &b) const { return better(a, b); }
    };

    std::size_t k_;
    std::priority_queue<Neighbor, std::vector<Neighbor>, Worse> heap_;
};

}  // namespace detail

/// K nearest reference samples under Euclidean distance; ties go to the lower
/// index. `exclude` removes one reference index (the query itself during
/// meta-training).
inline RegionOfCompetence region_of_competence(FeatureView x, const Dataset &ref, std::size_t k,
                                               std::size_t exclude = no_index) {
    const std::size_t available = ref.size() - (exclude < ref.size() ? 1 : 0);
    if (available < k) {
        throw data_error{ "region of competence needs " + std::to_string(k) + " reference samples, have " +
                          std::to_string(available) };
    }
    // Ordering on squared distance is equivalent and avoids k*n square roots.
    detail::NearestK best{ k };
    for (std::size_t n = 0; n < ref.size(); ++n) {
        if (n != exclude) {
            best.offer(squared_distance(x, ref[n].features), n);
        }
    }
    RegionOfCompetence roc{ best.take_sorted() };
    for (auto &nb : roc.neighbors) {
        nb.distance = std::sqrt(nb.distance);
    }
    return roc;
}

inline OutputProfile output_profile(const Pool &pool, FeatureView x) { return OutputProfile{ pool_predictions(pool, x) }; }

/// Profiles of every reference sample, aligned with `ref` by index.
inline std::vector<OutputProfile> reference_profiles(const Pool &pool, const Dataset &ref) {
    std::vector<OutputProfile> out;
    out.reserve(ref.size());
    for (std::size_t n = 0; n < ref.size(); ++n) {
        out.push_back({ pool_predictions(pool, ref[n].features), ref[n].label, n });
    }
    return out;
}

inline int manhattan(std::span<const ClassLabel> a, std::span<const ClassLabel> b) {
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += std::abs(a[i] - b[i]);
    }
    return d;
}

/// The K_p reference profiles closest to p in Manhattan distance; ties go to
/// the lower index. Returned indices point into `refs`.
inline std::vector<Neighbor> profile_neighbors(const OutputProfile &p, std::span<const OutputProfile> refs,
                                               std::size_t kp, std::size_t exclude = no_index) {
    const std::size_t available = refs.size() - (exclude < refs.size() ? 1 : 0);
    if (available < kp) {
        throw data_error{ "profile neighborhood needs " + std::to_string(kp) + " reference profiles, have " +
                          std::to_string(available) };
    }
    detail::NearestK best{ kp };
    for (std::size_t n = 0; n < refs.size(); ++n) {
        if (n != exclude) {
            best.offer(static_cast<double>(manhattan(p.decisions, refs[n].decisions)), n);
        }
    }
    return best.take_sorted();
}

// ---------------------------------------------------------------------------
// Meta-features

/// Meta-feature vector of classifier c for query x.
///
///   f1[k] neighbor k of the region of competence is classified correctly
///   f2[k] posterior c assigns to neighbor k's true class
///   f3    mean of f1 (local accuracy)
///   f4[k] the sample behind profile neighbor k is classified correctly
///   f5    distance from x to c's decision boundary
///
/// Neighbor indices in `roc` and `pn` refer to samples of `ref`.
inline std::vector<double> extract_meta_features(const LinearClassifier &c, FeatureView x, const Dataset &ref,
                                                 const RegionOfCompetence &roc, std::span<const Neighbor> pn,
                                                 const MetaFeatureLayout &layout) {
    if (roc.size() != layout.k) {
        throw data_error{ "region of competence has " + std::to_string(roc.size()) + " neighbors, expected " +
                          std::to_string(layout.k) };
    }
    if (pn.size() != layout.kp) {
        throw data_error{ "profile neighborhood has " + std::to_string(pn.size()) + " members, expected " +
                          std::to_string(layout.kp) };
    }
    std::vector<double> v(layout.size(), 0.0);
    int correct = 0;
    for (std::size_t k = 0; k < layout.k; ++k) {
        const auto &nb = ref[roc.neighbors[k].index];
        const bool hit = predict(c, nb.features) == nb.label;
        correct += hit ? 1 : 0;
        v[layout.f1() + k] = hit ? 1.0 : 0.0;
        v[layout.f2() + k] = posterior(c, nb.features)[static_cast<std::size_t>(nb.label)];
    }
    v[layout.f3()] = static_cast<double>(correct) / static_cast<double>(layout.k);
    for (std::size_t k = 0; k < layout.kp; ++k) {
        const auto &src = ref[pn[k].index];
        v[layout.f4() + k] = predict(c, src.features) == src.label ? 1.0 : 0.0;
    }
    v[layout.f5()] = decision_distance(c, x);
    return v;
}

/// Builds the meta-training set from T_lambda: one MetaSample per
/// (low-consensus query, pool member), in (query, member) order. Each query's
/// neighborhoods are drawn from T_lambda with the query itself removed.
inline MetaDataset build_meta_dataset(const Pool &pool, const Dataset &t_lambda, const MetaFeatureLayout &layout,
                                      double h_c) {
    if (t_lambda.size() <= std::max(layout.k, layout.kp)) {
        throw data_error{ "meta-training set of " + std::to_string(t_lambda.size()) +
                          " samples is too small for K=" + std::to_string(layout.k) +
                          ", Kp=" + std::to_string(layout.kp) };
    }
    const auto profiles = reference_profiles(pool, t_lambda);
    std::vector<std::size_t> queries;
    for (std::size_t j = 0; j < t_lambda.size(); ++j) {
        if (consensus_degree(profiles[j].decisions, pool.num_classes()) < h_c) {
            queries.push_back(j);
        }
    }
    if (queries.empty()) {
        throw data_error{ "empty meta-training set for '" + t_lambda.name + "': no sample has pool consensus below h_C=" +
                          std::to_string(h_c) + "; raise h_C to admit more queries" };
    }
    MetaDataset md{ t_lambda.name, layout, {} };
    md.samples.reserve(queries.size() * pool.size());
    for (const std::size_t q : queries) {
        const auto &query = t_lambda[q];
        const auto roc = region_of_competence(query.features, t_lambda, layout.k, q);
        const auto pn = profile_neighbors(profiles[q], profiles, layout.kp, q);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            md.samples.push_back({ extract_meta_features(pool[i], query.features, t_lambda, roc, pn, layout),
                                   profiles[q].decisions[i] == query.label ? 1 : 0, i, q });
        }
    }
    return md;
}

/// CSV export: the meta-feature columns, then alpha, classifier_index and
/// query_index. Reals are written with 17 significant digits.
inline void write_meta_dataset_csv(const MetaDataset &md, std::ostream &out) {
    const auto &L = md.layout;
    for (std::size_t k = 0; k < L.k; ++k) {
        out << "f1_" << k << ',';
    }
    for (std::size_t k = 0; k < L.k; ++k) {
        out << "f2_" << k << ',';
    }
    out << "f3,";
    for (std::size_t k = 0; k < L.kp; ++k) {
        out << "f4_" << k << ',';
    }
    out << "f5,alpha,classifier_index,query_index\n";
    out << std::setprecision(17);
    for (const auto &s : md.samples) {
        for (const double x : s.v) {
            out << x << ',';
        }
        out << s.alpha << ',' << s.classifier_index << ',' << s.query_index << '\n';
    }
}

inline void save_meta_dataset_csv(const MetaDataset &md, const std::string &path) {
    std::ofstream out{ path };
    if (!out) {
        throw io_error{ "cannot write '" + path + "'" };
    }
    write_meta_dataset_csv(md, out);
}

}  // namespace metades

#endif  // METADES_COMPETENCE_HPP
