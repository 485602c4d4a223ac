#ifndef METADES_STATS_HPP
#define METADES_STATS_HPP

#include "metades/common.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace metades {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) {
        throw error{ "mean of an empty sample" };
    }
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double stddev(std::span<const double> xs) {
    if (xs.size() < 2) {
        return 0.0;
    }
    const double m = mean(xs);
    double ss = 0.0;
    for (const double x : xs) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

struct KruskalWallisResult {
    double h = 0.0;
    double p_value = 1.0;
};

/// Kruskal-Wallis H test with tie correction; p from the chi-square tail with
/// (groups - 1) degrees of freedom. All-equal data yields H = 0, p = 1.
inline KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>> &groups) {
    if (groups.size() < 2) {
        throw error{ "Kruskal-Wallis needs at least two groups" };
    }
    struct Entry {
        double value;
        std::size_t group;
    };
    std::vector<Entry> pooled;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) {
            throw error{ "Kruskal-Wallis group " + std::to_string(g) + " is empty" };
        }
        for (const double v : groups[g]) {
            pooled.push_back({ v, g });
        }
    }
    std::sort(pooled.begin(), pooled.end(), [](const Entry &a, const Entry &b) { return a.value < b.value; });

    const auto n = static_cast<double>(pooled.size());
    std::vector<double> rank_sum(groups.size(), 0.0);
    double tie_term = 0.0;  // sum of t^3 - t over tie blocks
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].value == pooled[i].value) {
            ++j;
        }
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            rank_sum[pooled[k].group] += avg_rank;
        }
        const auto t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double correction = 1.0 - tie_term / (n * n * n - n);
    if (correction <= 0.0) {
        return { 0.0, 1.0 };
    }
    double h = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        h += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
    }
    h = (12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0)) / correction;
    h = std::max(h, 0.0);
    const boost::math::chi_squared dist{ static_cast<double>(groups.size() - 1) };
    return { h, boost::math::cdf(boost::math::complement(dist, h)) };
}

/// Pearson product-moment correlation.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw error{ "Pearson correlation needs two equal-length samples of size >= 2" };
    }
    const double mx = mean(xs);
    const double my = mean(ys);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw error{ "Pearson correlation is undefined for a zero-variance sample" };
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace metades

#endif  // METADES_STATS_HPP
