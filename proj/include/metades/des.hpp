#ifndef METADES_DES_HPP
#define METADES_DES_HPP

// Dynamic selection at inference: the meta-learning selector, the literature
// baselines (OLA, LCA, KNORA-E, KNORA-U, KNOP) and the static-vote floor.
//
// Every technique falls back to the full pool when its selection would be
// empty, so each one always returns a label.

#include "metades/common.hpp"
#include "metades/competence.hpp"
#include "metades/data.hpp"
#include "metades/meta.hpp"
#include "metades/pool.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace metades {

/// The dynamic-selection reference set with the pool's decisions on it
/// precomputed: predictions(i, n) = predict(pool[i], dsel[n]).
class DSELIndex {
  public:
    DSELIndex(const Pool &pool, Dataset dsel) : samples_{ std::move(dsel) } {
        profiles_ = reference_profiles(pool, samples_);
        pool_size_ = pool.size();
    }

    [[nodiscard]] const Dataset &samples() const noexcept { return samples_; }
    [[nodiscard]] std::span<const OutputProfile> profiles() const noexcept { return profiles_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] std::size_t pool_size() const noexcept { return pool_size_; }

    [[nodiscard]] ClassLabel prediction(std::size_t member, std::size_t n) const { return profiles_[n].decisions[member]; }
    [[nodiscard]] bool correct(std::size_t member, std::size_t n) const {
        return profiles_[n].decisions[member] == samples_[n].label;
    }

  private:
    Dataset samples_;
    std::vector<OutputProfile> profiles_;
    std::size_t pool_size_ = 0;
};

struct SelectionResult {
    std::vector<std::size_t> selected;  ///< ascending member indices
    bool fallback_used = false;
    ClassLabel label = 0;
};

enum class Technique { des_meta, knora_e, knora_u, ola, lca, knop, static_vote };

inline std::string technique_name(Technique t) {
    switch (t) {
        case Technique::des_meta:
            return "DES";
        case Technique::knora_e:
            return "KNORA-E";
        case Technique::knora_u:
            return "KNORA-U";
        case Technique::ola:
            return "OLA";
        case Technique::lca:
            return "LCA";
        case Technique::knop:
            return "KNOP";
        case Technique::static_vote:
            return "STATIC";
    }
    return "?";
}

namespace detail {

inline std::vector<std::size_t> all_members(std::size_t m) {
    std::vector<std::size_t> out(m);
    std::iota(out.begin(), out.end(), std::size_t{ 0 });
    return out;
}

// Highest vote total wins; tied classes are separated by the summed posterior
// of the voting members, then by lowest class index.
inline ClassLabel weighted_vote(const Pool &pool, std::span<const std::size_t> members, std::span<const double> weights,
                                FeatureView x) {
    const std::size_t nc = pool.num_classes();
    std::vector<double> votes(nc, 0.0);
    std::vector<ClassLabel> decision(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
        decision[k] = predict(pool[members[k]], x);
        votes[static_cast<std::size_t>(decision[k])] += weights[k];
    }
    const double top = *std::max_element(votes.begin(), votes.end());
    std::vector<std::size_t> tied;
    for (std::size_t c = 0; c < nc; ++c) {
        if (votes[c] == top) {
            tied.push_back(c);
        }
    }
    if (tied.size() == 1) {
        return static_cast<ClassLabel>(tied.front());
    }
    std::vector<double> mass(nc, 0.0);
    for (const std::size_t i : members) {
        const auto p = posterior(pool[i], x);
        for (std::size_t c = 0; c < nc; ++c) {
            mass[c] += p[c];
        }
    }
    std::size_t best = tied.front();
    for (const std::size_t c : tied) {
        if (mass[c] > mass[best]) {
            best = c;
        }
    }
    return static_cast<ClassLabel>(best);
}

}  // namespace detail

/// Plurality vote of the selected members; vote ties go to the tied class with
/// the largest summed posterior over the selected members, then to the lowest
/// class index.
inline ClassLabel majority_vote(const Pool &pool, std::span<const std::size_t> selected, FeatureView x) {
    if (selected.empty()) {
        throw error{ "majority vote over an empty selection" };
    }
    const std::vector<double> ones(selected.size(), 1.0);
    return detail::weighted_vote(pool, selected, ones, x);
}

inline SelectionResult static_vote_classify(const Pool &pool, FeatureView x) {
    SelectionResult r{ detail::all_members(pool.size()), false, 0 };
    r.label = majority_vote(pool, r.selected, x);
    return r;
}

namespace detail {

inline void check_reference_size(const DSELIndex &idx, std::size_t needed) {
    if (idx.size() < needed) {
        throw data_error{ "dynamic selection set has " + std::to_string(idx.size()) + " samples, need at least " +
                          std::to_string(needed) };
    }
}

inline SelectionResult vote_or_fallback(const Pool &pool, std::vector<std::size_t> selected, FeatureView x) {
    if (selected.empty()) {
        auto r = static_vote_classify(pool, x);
        r.fallback_used = true;
        return r;
    }
    SelectionResult r{ std::move(selected), false, 0 };
    r.label = majority_vote(pool, r.selected, x);
    return r;
}

// Members with one vote per correctly classified neighbor; zero total votes
// falls back to the full pool.
inline SelectionResult union_vote(const Pool &pool, const DSELIndex &idx, std::span<const Neighbor> neighbors,
                                  FeatureView x) {
    std::vector<std::size_t> members;
    std::vector<double> weights;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        int votes = 0;
        for (const auto &nb : neighbors) {
            votes += idx.correct(i, nb.index) ? 1 : 0;
        }
        if (votes > 0) {
            members.push_back(i);
            weights.push_back(static_cast<double>(votes));
        }
    }
    if (members.empty()) {
        auto r = static_vote_classify(pool, x);
        r.fallback_used = true;
        return r;
    }
    SelectionResult r{ members, false, 0 };
    r.label = weighted_vote(pool, members, weights, x);
    return r;
}

inline SelectionResult single_best(const Pool &pool, const std::vector<double> &competence, FeatureView x) {
    const auto best = static_cast<std::size_t>(std::max_element(competence.begin(), competence.end()) - competence.begin());
    return SelectionResult{ { best }, false, predict(pool[best], x) };
}

}  // namespace detail

/// Meta-learning selection: every member whose meta-feature vector the
/// meta-classifier scores at or above its threshold joins the ensemble.
inline SelectionResult des_meta_classify(const Pool &pool, const MetaClassifier &meta, FeatureView x,
                                         const DSELIndex &idx, const MetaFeatureLayout &layout) {
    detail::check_reference_size(idx, std::max(layout.k, layout.kp));
    const auto roc = region_of_competence(x, idx.samples(), layout.k);
    const auto pn = profile_neighbors(output_profile(pool, x), idx.profiles(), layout.kp);
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto v = extract_meta_features(pool[i], x, idx.samples(), roc, pn, layout);
        if (meta.competent(v)) {
            selected.push_back(i);
        }
    }
    return detail::vote_or_fallback(pool, std::move(selected), x);
}

/// Overall local accuracy: the single member most accurate on the K nearest
/// neighbors (ties to the lower index) labels the query.
inline SelectionResult ola_classify(const Pool &pool, FeatureView x, const DSELIndex &idx, std::size_t k) {
    detail::check_reference_size(idx, k);
    const auto roc = region_of_competence(x, idx.samples(), k);
    std::vector<double> competence(pool.size(), 0.0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        int hits = 0;
        for (const auto &nb : roc.neighbors) {
            hits += idx.correct(i, nb.index) ? 1 : 0;
        }
        competence[i] = static_cast<double>(hits) / static_cast<double>(k);
    }
    return detail::single_best(pool, competence, x);
}

/// Local class accuracy: each member is scored on the neighbors whose true
/// class equals the member's prediction for the query.
inline SelectionResult lca_classify(const Pool &pool, FeatureView x, const DSELIndex &idx, std::size_t k) {
    detail::check_reference_size(idx, k);
    const auto roc = region_of_competence(x, idx.samples(), k);
    std::vector<double> competence(pool.size(), 0.0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const ClassLabel yhat = predict(pool[i], x);
        int of_class = 0;
        int hits = 0;
        for (const auto &nb : roc.neighbors) {
            if (idx.samples()[nb.index].label == yhat) {
                ++of_class;
                hits += idx.prediction(i, nb.index) == yhat ? 1 : 0;
            }
        }
        competence[i] = of_class == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(of_class);
    }
    return detail::single_best(pool, competence, x);
}

/// KNORA-Eliminate: members correct on all K neighbors vote; when none exists
/// the farthest neighbor is dropped and the search repeats. Reaching zero
/// neighbors selects the whole pool and is reported as a fallback.
inline SelectionResult knora_e_classify(const Pool &pool, FeatureView x, const DSELIndex &idx, std::size_t k) {
    detail::check_reference_size(idx, k);
    const auto roc = region_of_competence(x, idx.samples(), k);
    for (std::size_t size = k; size > 0; --size) {
        std::vector<std::size_t> selected;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            bool all = true;
            for (std::size_t n = 0; n < size && all; ++n) {
                all = idx.correct(i, roc.neighbors[n].index);
            }
            if (all) {
                selected.push_back(i);
            }
        }
        if (!selected.empty()) {
            return detail::vote_or_fallback(pool, std::move(selected), x);
        }
    }
    return detail::vote_or_fallback(pool, {}, x);
}

/// KNORA-Union: one vote per correctly classified feature-space neighbor.
inline SelectionResult knora_u_classify(const Pool &pool, FeatureView x, const DSELIndex &idx, std::size_t k) {
    detail::check_reference_size(idx, k);
    const auto roc = region_of_competence(x, idx.samples(), k);
    return detail::union_vote(pool, idx, roc.neighbors, x);
}

/// K-nearest output profiles: KNORA-Union over the K_p nearest neighbors in
/// decision space.
inline SelectionResult knop_classify(const Pool &pool, FeatureView x, const DSELIndex &idx, std::size_t kp) {
    detail::check_reference_size(idx, kp);
    const auto pn = profile_neighbors(output_profile(pool, x), idx.profiles(), kp);
    return detail::union_vote(pool, idx, pn, x);
}

/// Dispatch by technique; `meta` is only read for Technique::des_meta.
inline SelectionResult classify(Technique t, const Pool &pool, const MetaClassifier *meta, FeatureView x,
                                const DSELIndex &idx, const MetaFeatureLayout &layout) {
    switch (t) {
        case Technique::des_meta:
            if (meta == nullptr) {
                throw error{ "meta-learning selection needs a meta-classifier" };
            }
            return des_meta_classify(pool, *meta, x, idx, layout);
        case Technique::knora_e:
            return knora_e_classify(pool, x, idx, layout.k);
        case Technique::knora_u:
            return knora_u_classify(pool, x, idx, layout.k);
        case Technique::ola:
            return ola_classify(pool, x, idx, layout.k);
        case Technique::lca:
            return lca_classify(pool, x, idx, layout.k);
        case Technique::knop:
            return knop_classify(pool, x, idx, layout.kp);
        case Technique::static_vote:
            return static_vote_classify(pool, x);
    }
    throw error{ "unknown technique" };
}

}  // namespace metades

#endif  // METADES_DES_HPP
