#ifndef METADES_COMMON_HPP
#define METADES_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metades {

using FeatureVector = std::vector<double>;
using FeatureView = std::span<const double>;

/// Class index in [0, num_classes).
using ClassLabel = int;

/// Base of every exception thrown by the library.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// File access or malformed file contents.
class io_error : public error {
  public:
    using error::error;
};

/// A dataset violates a precondition (class counts, arity, emptiness).
class data_error : public error {
  public:
    using error::error;
};

/// Training could not proceed (single-class sample, retry exhaustion).
class training_error : public error {
  public:
    using error::error;
};

/// Invalid experiment configuration or scenario.
class config_error : public error {
  public:
    using error::error;
};

/// Sentinel for "no index", e.g. no query to exclude from a reference set.
inline constexpr std::size_t no_index = static_cast<std::size_t>(-1);

inline double squared_distance(FeatureView a, FeatureView b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

inline double dot(FeatureView a, FeatureView b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

}  // namespace metades

#endif  // METADES_COMMON_HPP
