#ifndef METADES_TESTS_ORACLES_HPP
#define METADES_TESTS_ORACLES_HPP

// Exhaustive reference implementations. They share only predict(),
// posterior() and decision_distance() with the library and recompute every
// neighbor list, correctness bit and vote from scratch.

#include "metades/metades.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <tuple>
#include <vector>

namespace metades::oracle {

struct Ranked {
    double key;
    std::size_t index;
};

inline std::vector<Ranked> sorted_by(std::vector<Ranked> all) {
    std::sort(all.begin(), all.end(),
              [](const Ranked &a, const Ranked &b) { return std::tie(a.key, a.index) < std::tie(b.key, b.index); });
    return all;
}

/// Full sort of the reference set by squared Euclidean distance.
inline std::vector<Neighbor> knn(FeatureView x, const Dataset &ref, std::size_t k, std::size_t exclude = no_index) {
    std::vector<Ranked> all;
    for (std::size_t n = 0; n < ref.size(); ++n) {
        if (n == exclude) {
            continue;
        }
        double d2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            d2 += (x[j] - ref[n].features[j]) * (x[j] - ref[n].features[j]);
        }
        all.push_back({ d2, n });
    }
    all = sorted_by(std::move(all));
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < k; ++i) {
        out.push_back({ all[i].index, std::sqrt(all[i].key) });
    }
    return out;
}

inline std::vector<ClassLabel> decisions(const Pool &pool, FeatureView x) {
    std::vector<ClassLabel> d;
    for (const auto &c : pool.members) {
        d.push_back(predict(c, x));
    }
    return d;
}

/// Full sort of the reference set by Manhattan distance between decision vectors.
inline std::vector<Neighbor> profile_knn(const Pool &pool, FeatureView x, const Dataset &ref, std::size_t kp,
                                         std::size_t exclude = no_index) {
    const auto px = decisions(pool, x);
    std::vector<Ranked> all;
    for (std::size_t n = 0; n < ref.size(); ++n) {
        if (n == exclude) {
            continue;
        }
        const auto pn = decisions(pool, ref[n].features);
        double d = 0.0;
        for (std::size_t i = 0; i < px.size(); ++i) {
            d += std::abs(static_cast<double>(px[i] - pn[i]));
        }
        all.push_back({ d, n });
    }
    all = sorted_by(std::move(all));
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < kp; ++i) {
        out.push_back({ all[i].index, all[i].key });
    }
    return out;
}

inline bool correct(const LinearClassifier &c, const LabeledSample &s) { return predict(c, s.features) == s.label; }

/// Weighted plurality; ties by summed posterior of the voting members, then lowest class.
inline ClassLabel vote(const Pool &pool, const std::vector<std::size_t> &members, const std::vector<double> &weights,
                       FeatureView x) {
    const std::size_t nc = pool.num_classes();
    ClassLabel best = 0;
    double best_votes = -1.0;
    double best_mass = -1.0;
    for (std::size_t c = 0; c < nc; ++c) {
        double votes = 0.0;
        double mass = 0.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            const auto &m = pool[members[k]];
            if (static_cast<std::size_t>(predict(m, x)) == c) {
                votes += weights[k];
            }
            mass += posterior(m, x)[c];
        }
        if (votes > best_votes || (votes == best_votes && mass > best_mass)) {
            best = static_cast<ClassLabel>(c);
            best_votes = votes;
            best_mass = mass;
        }
    }
    return best;
}

inline SelectionResult full_pool(const Pool &pool, FeatureView x, bool fallback) {
    std::vector<std::size_t> all(pool.size());
    std::iota(all.begin(), all.end(), std::size_t{ 0 });
    return { all, fallback, vote(pool, all, std::vector<double>(all.size(), 1.0), x) };
}

inline SelectionResult static_vote(const Pool &pool, FeatureView x) { return full_pool(pool, x, false); }

inline SelectionResult best_single(const Pool &pool, const std::vector<double> &score, FeatureView x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < score.size(); ++i) {
        if (score[i] > score[best]) {
            best = i;
        }
    }
    return { { best }, false, predict(pool[best], x) };
}

inline SelectionResult ola(const Pool &pool, FeatureView x, const Dataset &dsel, std::size_t k) {
    const auto nb = knn(x, dsel, k);
    std::vector<double> score;
    for (const auto &c : pool.members) {
        double hits = 0.0;
        for (const auto &n : nb) {
            hits += correct(c, dsel[n.index]) ? 1.0 : 0.0;
        }
        score.push_back(hits / static_cast<double>(k));
    }
    return best_single(pool, score, x);
}

inline SelectionResult lca(const Pool &pool, FeatureView x, const Dataset &dsel, std::size_t k) {
    const auto nb = knn(x, dsel, k);
    std::vector<double> score;
    for (const auto &c : pool.members) {
        const ClassLabel yhat = predict(c, x);
        double den = 0.0;
        double num = 0.0;
        for (const auto &n : nb) {
            if (dsel[n.index].label == yhat) {
                den += 1.0;
                num += correct(c, dsel[n.index]) ? 1.0 : 0.0;
            }
        }
        score.push_back(den == 0.0 ? 0.0 : num / den);
    }
    return best_single(pool, score, x);
}

inline SelectionResult knora_e(const Pool &pool, FeatureView x, const Dataset &dsel, std::size_t k) {
    const auto nb = knn(x, dsel, k);
    for (std::size_t size = k; size >= 1; --size) {
        std::vector<std::size_t> chosen;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            bool all = true;
            for (std::size_t j = 0; j < size; ++j) {
                all = all && correct(pool[i], dsel[nb[j].index]);
            }
            if (all) {
                chosen.push_back(i);
            }
        }
        if (!chosen.empty()) {
            return { chosen, false, vote(pool, chosen, std::vector<double>(chosen.size(), 1.0), x) };
        }
    }
    return full_pool(pool, x, true);
}

inline SelectionResult union_of(const Pool &pool, FeatureView x, const Dataset &dsel, const std::vector<Neighbor> &nb) {
    std::vector<std::size_t> chosen;
    std::vector<double> weights;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        double w = 0.0;
        for (const auto &n : nb) {
            w += correct(pool[i], dsel[n.index]) ? 1.0 : 0.0;
        }
        if (w > 0.0) {
            chosen.push_back(i);
            weights.push_back(w);
        }
    }
    if (chosen.empty()) {
        return full_pool(pool, x, true);
    }
    return { chosen, false, vote(pool, chosen, weights, x) };
}

inline SelectionResult knora_u(const Pool &pool, FeatureView x, const Dataset &dsel, std::size_t k) {
    return union_of(pool, x, dsel, knn(x, dsel, k));
}

inline SelectionResult knop(const Pool &pool, FeatureView x, const Dataset &dsel, std::size_t kp) {
    return union_of(pool, x, dsel, profile_knn(pool, x, dsel, kp));
}

/// Meta-feature vector recomputed from its definition.
inline std::vector<double> meta_features(const Pool &pool, std::size_t member, FeatureView x, const Dataset &ref,
                                         std::size_t k, std::size_t kp, std::size_t exclude = no_index) {
    const auto &c = pool[member];
    const auto nb = knn(x, ref, k, exclude);
    const auto pn = profile_knn(pool, x, ref, kp, exclude);
    std::vector<double> f1, f2, f4;
    for (const auto &n : nb) {
        f1.push_back(correct(c, ref[n.index]) ? 1.0 : 0.0);
        f2.push_back(posterior(c, ref[n.index].features)[static_cast<std::size_t>(ref[n.index].label)]);
    }
    for (const auto &n : pn) {
        f4.push_back(correct(c, ref[n.index]) ? 1.0 : 0.0);
    }
    const double f3 = std::accumulate(f1.begin(), f1.end(), 0.0) / static_cast<double>(k);
    std::vector<double> v = f1;
    v.insert(v.end(), f2.begin(), f2.end());
    v.push_back(f3);
    v.insert(v.end(), f4.begin(), f4.end());
    v.push_back(decision_distance(c, x));
    return v;
}

inline SelectionResult des_meta(const Pool &pool, const MetaClassifier &meta, FeatureView x, const Dataset &dsel,
                                std::size_t k, std::size_t kp) {
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (meta.score(meta_features(pool, i, x, dsel, k, kp)) >= meta.threshold()) {
            chosen.push_back(i);
        }
    }
    if (chosen.empty()) {
        return full_pool(pool, x, true);
    }
    return { chosen, false, vote(pool, chosen, std::vector<double>(chosen.size(), 1.0), x) };
}

/// Kruskal-Wallis H from its mean-rank definition,
/// H = 12/(N(N+1)) * sum n_i (rbar_i - rbar)^2, divided by the tie correction.
inline double kruskal_h(const std::vector<std::vector<double>> &groups) {
    std::vector<double> pooled;
    for (const auto &g : groups) {
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const auto n = static_cast<double>(pooled.size());
    auto rank_of = [&](double v) {
        double below = 0.0;
        double equal = 0.0;
        for (const double p : pooled) {
            below += p < v ? 1.0 : 0.0;
            equal += p == v ? 1.0 : 0.0;
        }
        return below + (equal + 1.0) / 2.0;
    };
    const double rbar = (n + 1.0) / 2.0;
    double h = 0.0;
    for (const auto &g : groups) {
        double r = 0.0;
        for (const double v : g) {
            r += rank_of(v);
        }
        r /= static_cast<double>(g.size());
        h += static_cast<double>(g.size()) * (r - rbar) * (r - rbar);
    }
    h *= 12.0 / (n * (n + 1.0));
    double ties = 0.0;
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) {
            ++j;
        }
        const auto t = static_cast<double>(j - i);
        ties += t * t * t - t;
        i = j;
    }
    return h / (1.0 - ties / (n * n * n - n));
}

/// Central finite-difference gradient of the mean batch loss.
inline std::vector<double> numeric_gradient(const MetaClassifier &m, std::span<const MetaSample> batch, double eps) {
    auto params = m.params();
    std::vector<double> g(params.size());
    MetaClassifier probe = m;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + eps;
        probe.set_params(params);
        const double up = batch_loss(probe, batch);
        params[i] = saved - eps;
        probe.set_params(params);
        const double down = batch_loss(probe, batch);
        params[i] = saved;
        g[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

}  // namespace metades::oracle

#endif  // METADES_TESTS_ORACLES_HPP
