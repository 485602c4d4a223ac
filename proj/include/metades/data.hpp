#ifndef METADES_DATA_HPP
#define METADES_DATA_HPP

// Dataset ingestion, synthetic 2-D generators, the stratified four-way split
// (train / meta-train / dynamic-selection / generalization) and standardization.

#include "metades/common.hpp"
#include "metades/random.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace metades {

struct LabeledSample {
    FeatureVector features;
    ClassLabel label = 0;

    friend bool operator==(const LabeledSample &, const LabeledSample &) = default;
};

struct Dataset {
    std::string name;
    std::size_t num_classes = 0;
    std::size_t num_features = 0;
    std::vector<LabeledSample> samples;
    /// Original label strings for CSV inputs; indexed by class.
    std::vector<std::string> class_names;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
    [[nodiscard]] const LabeledSample &operator[](std::size_t i) const { return samples[i]; }

    [[nodiscard]] std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(num_classes, 0);
        for (const auto &s : samples) {
            ++counts[static_cast<std::size_t>(s.label)];
        }
        return counts;
    }

    /// Samples at `indices`, in that order, sharing this dataset's metadata.
    [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const {
        Dataset out{ name, num_classes, num_features, {}, class_names };
        out.samples.reserve(indices.size());
        for (const std::size_t i : indices) {
            out.samples.push_back(samples.at(i));
        }
        return out;
    }

    friend bool operator==(const Dataset &, const Dataset &) = default;
};

/// Checks the structural invariants of a full (unsplit) dataset and throws
/// data_error on the first violation.
inline void validate_dataset(const Dataset &ds, std::size_t min_per_class = 2) {
    if (ds.num_classes < 2) {
        throw data_error{ "dataset '" + ds.name + "' needs at least 2 classes" };
    }
    if (ds.num_features == 0) {
        throw data_error{ "dataset '" + ds.name + "' has no features" };
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto &s = ds.samples[i];
        if (s.features.size() != ds.num_features) {
            throw data_error{ "sample " + std::to_string(i) + " has " + std::to_string(s.features.size()) +
                              " features, expected " + std::to_string(ds.num_features) };
        }
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= ds.num_classes) {
            throw data_error{ "sample " + std::to_string(i) + " has out-of-range label " + std::to_string(s.label) };
        }
    }
    const auto counts = ds.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] < min_per_class) {
            throw data_error{ "class " + std::to_string(c) + " of dataset '" + ds.name + "' has " +
                              std::to_string(counts[c]) + " samples, need at least " +
                              std::to_string(min_per_class) };
        }
    }
}

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
    bool header = false;
    /// Column holding the class label; negative values count from the end.
    int label_column = -1;
    char delimiter = ',';
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    s = s.substr(first, last - first + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
    }
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

inline bool parse_real(std::string_view s, double &out) {
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses delimited text. Labels are re-encoded densely in order of first
/// appearance; all other columns must be finite reals.
inline Dataset parse_csv(std::istream &in, const CsvOptions &opt = {}, std::string name = "csv") {
    Dataset ds;
    ds.name = std::move(name);
    std::unordered_map<std::string, ClassLabel> codes;
    std::string line;
    std::size_t line_no = 0;
    std::size_t arity = 0;
    bool header_pending = opt.header;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line, opt.delimiter);
        if (arity == 0) {
            arity = fields.size();
            if (arity < 2) {
                throw data_error{ "line " + std::to_string(line_no) + ": need at least one feature and a label" };
            }
        } else if (fields.size() != arity) {
            throw data_error{ "ragged rows: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                              " fields, expected " + std::to_string(arity) };
        }
        if (header_pending) {
            header_pending = false;
            continue;
        }
        const long lc = opt.label_column < 0 ? static_cast<long>(arity) + opt.label_column : opt.label_column;
        if (lc < 0 || lc >= static_cast<long>(arity)) {
            throw data_error{ "label column " + std::to_string(opt.label_column) + " out of range for " +
                              std::to_string(arity) + " columns" };
        }
        LabeledSample s;
        s.features.reserve(arity - 1);
        for (std::size_t c = 0; c < arity; ++c) {
            if (static_cast<long>(c) == lc) {
                continue;
            }
            double v = 0.0;
            if (!detail::parse_real(fields[c], v)) {
                throw data_error{ "line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                                  ": non-numeric feature '" + std::string{ fields[c] } + "'" };
            }
            s.features.push_back(v);
        }
        const std::string key{ fields[static_cast<std::size_t>(lc)] };
        auto [it, inserted] = codes.try_emplace(key, static_cast<ClassLabel>(codes.size()));
        if (inserted) {
            ds.class_names.push_back(key);
        }
        s.label = it->second;
        ds.samples.push_back(std::move(s));
    }
    if (ds.empty()) {
        throw data_error{ "no data rows in '" + ds.name + "'" };
    }
    ds.num_features = arity - 1;
    ds.num_classes = codes.size();
    if (ds.num_classes < 2) {
        throw data_error{ "single-class file '" + ds.name + "': need at least 2 distinct labels" };
    }
    validate_dataset(ds);
    return ds;
}

inline std::string file_stem(const std::string &path) {
    const auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}

inline Dataset load_csv(const std::string &path, const CsvOptions &opt = {}) {
    std::ifstream in{ path };
    if (!in) {
        throw io_error{ "cannot open '" + path + "'" };
    }
    return parse_csv(in, opt, file_stem(path));
}

inline Dataset load_csv(const std::string &path, int label_column, bool header = false) {
    return load_csv(path, CsvOptions{ header, label_column, ',' });
}

// ---------------------------------------------------------------------------
// Synthetic generators

/// Two interleaved unit-radius half-circle arcs; the second is the lower half
/// shifted by (-0.375, 0.5). Isotropic Gaussian noise of std `noise`.
inline Dataset gen_banana(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 4) {
        throw data_error{ "banana generator needs n >= 4" };
    }
    if (!(noise > 0.0)) {
        throw data_error{ "banana generator needs noise > 0" };
    }
    constexpr double r = 1.0;
    Rng rng{ seed };
    Dataset ds{ "banana", 2, 2, {}, { "0", "1" } };
    ds.samples.reserve(n);
    const std::size_t n0 = n / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const bool upper = i < n0;
        const double theta = upper ? rng.uniform(0.0, std::numbers::pi) : rng.uniform(std::numbers::pi, 2.0 * std::numbers::pi);
        double x = r * std::cos(theta);
        double y = r * std::sin(theta);
        if (!upper) {
            x += -0.375 * r;
            y += 0.5 * r;
        }
        x += rng.normal(0.0, noise);
        y += rng.normal(0.0, noise);
        ds.samples.push_back({ { x, y }, upper ? 0 : 1 });
    }
    return ds;
}

/// Two crescents on concentric arcs of radii 1 and 1.3, each spanning pi
/// radians, the outer one rotated by pi/4; radial Gaussian noise 0.15.
inline Dataset gen_lithuanian(std::size_t n, std::uint64_t seed) {
    if (n < 4) {
        throw data_error{ "lithuanian generator needs n >= 4" };
    }
    constexpr double radius[2] = { 1.0, 1.3 };
    constexpr double sigma = 0.15;
    constexpr double offset = std::numbers::pi / 4.0;
    Rng rng{ seed };
    Dataset ds{ "lithuanian", 2, 2, {}, { "0", "1" } };
    ds.samples.reserve(n);
    const std::size_t n0 = n / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = i < n0 ? 0 : 1;
        const double start = cls == 0 ? 0.0 : offset;
        const double theta = rng.uniform(start, start + std::numbers::pi);
        const double rho = radius[cls] + rng.normal(0.0, sigma);
        ds.samples.push_back({ { rho * std::cos(theta), rho * std::sin(theta) }, cls });
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Four-way stratified split

struct SplitQuartet {
    Dataset train;       ///< pool training
    Dataset meta_train;  ///< meta-feature extraction for the selector
    Dataset dsel;        ///< reference set at selection time
    Dataset test;        ///< generalization
    /// Source indices of each part, in part order.
    std::array<std::vector<std::size_t>, 4> indices;
};

/// Shuffles each class independently and deals it into four parts whose
/// per-class counts are floor or ceil of n_c / 4. Leftover samples are dealt
/// round-robin across classes so part sizes also differ by at most one.
inline SplitQuartet stratified_split(const Dataset &ds, std::uint64_t seed) {
    constexpr std::size_t parts = 4;
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].size() < parts) {
            throw data_error{ "class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                              " samples; the four-way split needs at least 4 per class" };
        }
    }
    Rng rng{ seed };
    SplitQuartet out;
    std::size_t next_extra = 0;
    for (auto &members : by_class) {
        rng.shuffle(std::span{ members });
        const std::size_t base = members.size() / parts;
        const std::size_t extra = members.size() % parts;
        std::array<std::size_t, parts> count;
        count.fill(base);
        for (std::size_t e = 0; e < extra; ++e) {
            ++count[(next_extra + e) % parts];
        }
        next_extra = (next_extra + extra) % parts;
        std::size_t pos = 0;
        for (std::size_t p = 0; p < parts; ++p) {
            for (std::size_t k = 0; k < count[p]; ++k) {
                out.indices[p].push_back(members[pos++]);
            }
        }
    }
    for (auto &idx : out.indices) {
        std::sort(idx.begin(), idx.end());
        rng.shuffle(std::span{ idx });
    }
    out.train = ds.subset(out.indices[0]);
    out.meta_train = ds.subset(out.indices[1]);
    out.dsel = ds.subset(out.indices[2]);
    out.test = ds.subset(out.indices[3]);
    return out;
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-feature z-scoring with population standard deviation. Constant
/// features keep std = 1 and map to 0.
struct Standardizer {
    FeatureVector mean;
    FeatureVector stddev;

    [[nodiscard]] FeatureVector apply(FeatureView x) const {
        FeatureVector out(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            out[j] = (x[j] - mean[j]) / stddev[j];
        }
        return out;
    }

    [[nodiscard]] FeatureVector invert(FeatureView z) const {
        FeatureVector out(z.size());
        for (std::size_t j = 0; j < z.size(); ++j) {
            out[j] = z[j] * stddev[j] + mean[j];
        }
        return out;
    }

    [[nodiscard]] Dataset apply(const Dataset &ds) const {
        if (ds.num_features != mean.size()) {
            throw data_error{ "standardizer fitted on " + std::to_string(mean.size()) + " features, got " +
                              std::to_string(ds.num_features) };
        }
        Dataset out = ds;
        for (auto &s : out.samples) {
            s.features = apply(s.features);
        }
        return out;
    }
};

inline Standardizer fit_standardizer(const Dataset &ds) {
    if (ds.empty()) {
        throw data_error{ "cannot fit a standardizer on an empty dataset" };
    }
    const std::size_t d = ds.num_features;
    const auto n = static_cast<double>(ds.size());
    Standardizer st{ FeatureVector(d, 0.0), FeatureVector(d, 0.0) };
    for (const auto &s : ds.samples) {
        for (std::size_t j = 0; j < d; ++j) {
            st.mean[j] += s.features[j];
        }
    }
    for (auto &m : st.mean) {
        m /= n;
    }
    for (const auto &s : ds.samples) {
        for (std::size_t j = 0; j < d; ++j) {
            const double t = s.features[j] - st.mean[j];
            st.stddev[j] += t * t;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        const double first = ds.samples.front().features[j];
        const bool constant = std::all_of(ds.samples.begin(), ds.samples.end(),
                                          [&](const LabeledSample &s) { return s.features[j] == first; });
        double v = std::sqrt(st.stddev[j] / n);
        if (constant || !(v > 1e-12 * std::max(1.0, std::abs(st.mean[j])))) {
            // constant columns map to exactly 0
            if (constant) {
                st.mean[j] = first;
            }
            v = 1.0;
        }
        st.stddev[j] = v;
    }
    return st;
}

inline Dataset apply_standardizer(const Standardizer &st, const Dataset &ds) { return st.apply(ds); }

}  // namespace metades

#endif  // METADES_DATA_HPP
