/**
 * @file spline_basis.hpp
 * @brief Clamped uniform B-spline basis on the unit interval.
 *
 * The basis has `num_functions` functions of a given degree (cubic by
 * default) over `num_functions - degree` equal sub-intervals of [0, 1].
 * End knots are repeated degree+1 times, so B_1(0) = 1 and B_l(1) = 1 and
 * the functions sum to one everywhere on the interval.
 *
 * Evaluation uses the triangular de Boor scheme restricted to the
 * degree+1 functions that are active on the knot span containing z, so
 * one evaluation costs O(degree^2) regardless of the basis size.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "splinefm/error.hpp"

namespace splinefm {

/// Nonzero window of a basis evaluation: values[r] belongs to function first_index + r.
struct SparseBasisValues {
    std::size_t first_index = 0;
    std::vector<double> values;
};

class SplineBasis {
public:
    static constexpr std::size_t kMaxDegree = 10;

    /// Clamped basis with uniformly spaced break-points.
    /// Throws ConfigError unless degree <= kMaxDegree and num_functions >= degree + 1.
    static SplineBasis build_uniform(std::size_t num_functions, std::size_t degree = 3) {
        if (degree > kMaxDegree) {
            throw ConfigError("spline degree " + std::to_string(degree) + " exceeds the supported maximum of " +
                              std::to_string(kMaxDegree));
        }
        if (num_functions < degree + 1) {
            throw ConfigError("spline basis of degree " + std::to_string(degree) + " needs at least " +
                              std::to_string(degree + 1) + " functions, got " + std::to_string(num_functions));
        }
        return SplineBasis(num_functions, degree);
    }

    [[nodiscard]] std::size_t degree() const noexcept { return degree_; }
    [[nodiscard]] std::size_t num_functions() const noexcept { return num_functions_; }
    [[nodiscard]] std::size_t num_intervals() const noexcept { return num_functions_ - degree_; }
    [[nodiscard]] std::span<const double> knots() const noexcept { return knots_; }

    /// Break-points 0 = a_0 < ... < a_{intervals} = 1.
    [[nodiscard]] std::vector<double> breakpoints() const {
        return {knots_.begin() + static_cast<std::ptrdiff_t>(degree_),
                knots_.end() - static_cast<std::ptrdiff_t>(degree_)};
    }

    /// Writes the degree+1 active basis values at z into `out` and returns the
    /// index of the first one. z is clamped to [0, 1]; non-finite z throws DataError.
    std::size_t eval_into(double z, std::span<double> out) const {
        if (out.size() != degree_ + 1) {
            throw ConfigError("eval_into: output window must hold degree+1 values");
        }
        const double x = clamp_unit(z);
        const std::size_t span = find_span(x);

        std::array<double, kMaxDegree + 1> left{};
        std::array<double, kMaxDegree + 1> right{};
        out[0] = 1.0;
        for (std::size_t j = 1; j <= degree_; ++j) {
            left[j] = x - knots_[span + 1 - j];
            right[j] = knots_[span + j] - x;
            double saved = 0.0;
            for (std::size_t r = 0; r < j; ++r) {
                const double temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        return span - degree_;
    }

    [[nodiscard]] SparseBasisValues eval_sparse(double z) const {
        SparseBasisValues result;
        result.values.resize(degree_ + 1);
        result.first_index = eval_into(z, result.values);
        return result;
    }

    /// Dense vector (B_1(z), ..., B_l(z)).
    [[nodiscard]] std::vector<double> eval(double z) const {
        std::vector<double> dense(num_functions_, 0.0);
        std::array<double, kMaxDegree + 1> window{};
        const std::size_t first = eval_into(z, std::span<double>(window.data(), degree_ + 1));
        for (std::size_t r = 0; r <= degree_; ++r) {
            dense[first + r] = window[r];
        }
        return dense;
    }

    friend bool operator==(const SplineBasis& a, const SplineBasis& b) noexcept {
        return a.degree_ == b.degree_ && a.num_functions_ == b.num_functions_;
    }

private:
    SplineBasis(std::size_t num_functions, std::size_t degree)
        : degree_(degree), num_functions_(num_functions) {
        const std::size_t intervals = num_functions - degree;
        knots_.reserve(num_functions + degree + 1);
        knots_.insert(knots_.end(), degree + 1, 0.0);
        for (std::size_t j = 1; j < intervals; ++j) {
            knots_.push_back(static_cast<double>(j) / static_cast<double>(intervals));
        }
        knots_.insert(knots_.end(), degree + 1, 1.0);
    }

    static double clamp_unit(double z) {
        if (!std::isfinite(z)) {
            throw DataError("spline basis evaluated at a non-finite point");
        }
        return std::clamp(z, 0.0, 1.0);
    }

    // Knot span s in [degree, num_functions - 1] with knots[s] <= x < knots[s+1];
    // x == 1 belongs to the last non-empty span.
    [[nodiscard]] std::size_t find_span(double x) const {
        const std::size_t last = num_functions_ - 1;
        if (x >= knots_[last + 1]) {
            return last;
        }
        const auto first = knots_.begin() + static_cast<std::ptrdiff_t>(degree_);
        const auto end = knots_.begin() + static_cast<std::ptrdiff_t>(last + 1);
        const auto it = std::upper_bound(first, end, x);
        return static_cast<std::size_t>(it - knots_.begin()) - 1;
    }

    std::size_t degree_ = 3;
    std::size_t num_functions_ = 4;
    std::vector<double> knots_;
};

}  // namespace splinefm
