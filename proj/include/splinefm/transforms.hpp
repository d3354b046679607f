/**
 * @file transforms.hpp
 * @brief Monotone maps from a raw numerical domain onto [0, 1].
 *
 * QuantileTransform is a piecewise-linear empirical CDF; AffineTransform is
 * min-max normalization; IdentityTransform passes values through (with
 * clamping). FieldTransform wraps the three behind one value type.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "splinefm/error.hpp"

namespace splinefm {

namespace detail {

inline void require_finite(double z, std::string_view what) {
    if (!std::isfinite(z)) {
        throw DataError(std::string(what) + ": non-finite value");
    }
}

inline void require_unit(double u, std::string_view what) {
    if (!(u >= 0.0 && u <= 1.0)) {
        throw DataError(std::string(what) + ": argument must lie in [0, 1]");
    }
}

/// Linear-interpolation quantile of sorted data (the "type 7" estimator).
inline double sorted_quantile(std::span<const double> sorted, double level) {
    const double pos = level * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) {
        return sorted[lo];
    }
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

class IdentityTransform {
public:
    [[nodiscard]] double apply(double z) const {
        detail::require_finite(z, "identity transform");
        return std::clamp(z, 0.0, 1.0);
    }
    [[nodiscard]] double inverse(double u) const {
        detail::require_unit(u, "identity transform inverse");
        return u;
    }
    friend bool operator==(const IdentityTransform&, const IdentityTransform&) = default;
};

/// Min-max normalization (z - lo) / (hi - lo), clamped.
class AffineTransform {
public:
    AffineTransform(double lo, double hi) : lo_(lo), hi_(hi) {
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
            throw ConfigError("affine transform needs finite lo < hi");
        }
    }

    static AffineTransform fit(std::span<const double> values) {
        if (values.empty()) {
            throw DataError("affine transform: no values to fit");
        }
        for (double v : values) {
            detail::require_finite(v, "affine transform fit");
        }
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        if (!(*hi > *lo)) {
            throw DataError("affine transform: all values are identical");
        }
        return {*lo, *hi};
    }

    [[nodiscard]] double lo() const noexcept { return lo_; }
    [[nodiscard]] double hi() const noexcept { return hi_; }

    [[nodiscard]] double apply(double z) const {
        detail::require_finite(z, "affine transform");
        return std::clamp((z - lo_) / (hi_ - lo_), 0.0, 1.0);
    }
    [[nodiscard]] double inverse(double u) const {
        detail::require_unit(u, "affine transform inverse");
        if (u == 1.0) {
            return hi_;
        }
        return lo_ + u * (hi_ - lo_);
    }
    friend bool operator==(const AffineTransform&, const AffineTransform&) = default;

private:
    double lo_;
    double hi_;
};

/// Empirical-quantile transform. reference_points()[j] maps to j / resolution()
/// and values in between are interpolated linearly.
class QuantileTransform {
public:
    static constexpr std::size_t kDefaultResolution = 1000;
    static constexpr std::size_t kDefaultMaxSamples = 100000;

    /// Reference points must be strictly increasing, at least two of them.
    explicit QuantileTransform(std::vector<double> reference_points) : points_(std::move(reference_points)) {
        if (points_.size() < 2) {
            throw ConfigError("quantile transform needs at least two reference points");
        }
        for (std::size_t j = 0; j < points_.size(); ++j) {
            detail::require_finite(points_[j], "quantile transform reference point");
            if (j > 0 && !(points_[j] > points_[j - 1])) {
                throw ConfigError("quantile transform reference points must be strictly increasing");
            }
        }
    }

    /// Quantiles at levels 0, 1/R, ..., 1. Tied quantiles are merged, which
    /// lowers the effective resolution.
    static QuantileTransform fit(std::span<const double> values, std::size_t resolution = kDefaultResolution) {
        if (resolution < 1) {
            throw ConfigError("quantile transform resolution must be positive");
        }
        if (values.empty()) {
            throw DataError("quantile transform: no values to fit");
        }
        std::vector<double> sorted(values.begin(), values.end());
        for (double v : sorted) {
            detail::require_finite(v, "quantile transform fit");
        }
        std::sort(sorted.begin(), sorted.end());
        if (!(sorted.back() > sorted.front())) {
            throw DataError("quantile transform: needs at least two distinct values");
        }
        std::vector<double> points;
        points.reserve(resolution + 1);
        for (std::size_t j = 0; j <= resolution; ++j) {
            const double level = static_cast<double>(j) / static_cast<double>(resolution);
            const double q = detail::sorted_quantile(sorted, level);
            if (points.empty() || q > points.back()) {
                points.push_back(q);
            }
        }
        return QuantileTransform(std::move(points));
    }

    /// Fit on an evenly strided sub-sample of at most max_samples values.
    static QuantileTransform fit_subsampled(std::span<const double> values,
                                            std::size_t resolution = kDefaultResolution,
                                            std::size_t max_samples = kDefaultMaxSamples) {
        if (max_samples == 0 || values.size() <= max_samples) {
            return fit(values, resolution);
        }
        std::vector<double> sample;
        sample.reserve(max_samples);
        for (std::size_t i = 0; i < max_samples; ++i) {
            sample.push_back(values[i * values.size() / max_samples]);
        }
        return fit(sample, resolution);
    }

    [[nodiscard]] std::span<const double> reference_points() const noexcept { return points_; }
    [[nodiscard]] std::size_t resolution() const noexcept { return points_.size() - 1; }

    [[nodiscard]] double apply(double z) const {
        detail::require_finite(z, "quantile transform");
        if (z <= points_.front()) {
            return 0.0;
        }
        if (z >= points_.back()) {
            return 1.0;
        }
        const auto it = std::upper_bound(points_.begin(), points_.end(), z);
        const auto j = static_cast<std::size_t>(it - points_.begin()) - 1;
        const double frac = (z - points_[j]) / (points_[j + 1] - points_[j]);
        return (static_cast<double>(j) + frac) / static_cast<double>(resolution());
    }

    [[nodiscard]] double inverse(double u) const {
        detail::require_unit(u, "quantile transform inverse");
        const double t = u * static_cast<double>(resolution());
        const std::size_t j = std::min(static_cast<std::size_t>(t), resolution() - 1);
        const double frac = t - static_cast<double>(j);
        if (frac == 0.0) {
            return points_[j];
        }
        if (frac == 1.0) {
            return points_[j + 1];
        }
        return points_[j] + frac * (points_[j + 1] - points_[j]);
    }

    friend bool operator==(const QuantileTransform&, const QuantileTransform&) = default;

private:
    std::vector<double> points_;
};

enum class TransformKind { identity, affine, quantile };

inline std::string_view to_string(TransformKind kind) {
    switch (kind) {
        case TransformKind::identity: return "identity";
        case TransformKind::affine: return "minmax";
        case TransformKind::quantile: return "quantile";
    }
    return "?";
}

/// Any of the supported transforms, as a value.
class FieldTransform {
public:
    using Variant = std::variant<IdentityTransform, AffineTransform, QuantileTransform>;

    FieldTransform() = default;
    FieldTransform(IdentityTransform t) : impl_(t) {}  // NOLINT(google-explicit-constructor)
    FieldTransform(AffineTransform t) : impl_(t) {}    // NOLINT(google-explicit-constructor)
    FieldTransform(QuantileTransform t) : impl_(std::move(t)) {}  // NOLINT(google-explicit-constructor)

    [[nodiscard]] TransformKind kind() const noexcept { return static_cast<TransformKind>(impl_.index()); }
    [[nodiscard]] const Variant& variant() const noexcept { return impl_; }

    [[nodiscard]] double apply(double z) const {
        return std::visit([z](const auto& t) { return t.apply(z); }, impl_);
    }
    [[nodiscard]] double inverse(double u) const {
        return std::visit([u](const auto& t) { return t.inverse(u); }, impl_);
    }

    friend bool operator==(const FieldTransform&, const FieldTransform&) = default;

private:
    Variant impl_;
};

}  // namespace splinefm
