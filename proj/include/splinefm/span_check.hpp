/**
 * @file span_check.hpp
 * @brief Least-squares checks that segmentized outputs lie in the span of a field's basis.
 *
 * For a sum-reduced continuous field, the score as a function of that field's
 * value is an affine combination of its basis functions; for two such fields
 * it lies in the tensor-product span with constant rows and columns. These
 * routines sample the model on a grid, fit the relevant family by least
 * squares, and report the largest absolute residual.
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "splinefm/error.hpp"
#include "splinefm/model.hpp"

namespace splinefm {

struct SpanFit {
    std::vector<double> alpha;  ///< one coefficient per basis function
    double beta = 0.0;
    double max_residual = 0.0;
    std::size_t samples = 0;
};

/// Minimum-norm least-squares fit of `curve` onto {B_1(T(z)), ..., B_l(T(z)), 1}.
/// Because the basis sums to one the constant column is redundant, so only the
/// residual is meaningful; (alpha, beta) is the minimum-norm representative.
inline SpanFit fit_curve_to_basis(std::span<const double> grid, std::span<const double> curve,
                                  const FieldTransform& transform, const SplineBasis& basis) {
    if (grid.size() != curve.size() || grid.empty()) {
        throw ConfigError("fit_curve_to_basis: grid and curve must be non-empty and of equal length");
    }
    const auto l = static_cast<Eigen::Index>(basis.num_functions());
    const auto rows = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd design(rows, l + 1);
    Eigen::VectorXd target(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto values = basis.eval(transform.apply(grid[static_cast<std::size_t>(r)]));
        for (Eigen::Index c = 0; c < l; ++c) {
            design(r, c) = values[static_cast<std::size_t>(c)];
        }
        design(r, l) = 1.0;
        target(r) = curve[static_cast<std::size_t>(r)];
    }
    const Eigen::VectorXd coef = design.completeOrthogonalDecomposition().solve(target);
    SpanFit fit;
    fit.alpha.assign(coef.data(), coef.data() + l);
    fit.beta = coef(l);
    fit.max_residual = (design * coef - target).cwiseAbs().maxCoeff();
    fit.samples = grid.size();
    return fit;
}

/// Raw-value grid whose transformed values are evenly spaced on [0, 1].
inline std::vector<double> transformed_grid(const FieldTransform& transform, std::size_t points) {
    std::vector<double> grid;
    grid.reserve(points);
    for (std::size_t j = 0; j < points; ++j) {
        grid.push_back(transform.inverse(static_cast<double>(j) / static_cast<double>(points - 1)));
    }
    return grid;
}

/// Fits the segmentized curve of continuous field `field` (other fields fixed by
/// `segment`). Samples max(10*l, min_samples) points.
inline SpanFit fit_span(const Model& model, const RawRow& segment, std::size_t field, std::size_t min_samples = 201) {
    const auto& fs = model.schema().field(field);
    if (!fs.is_continuous()) {
        throw ConfigError("fit_span: field '" + fs.name + "' is not a continuous numerical field");
    }
    const auto& enc = fs.continuous();
    const std::size_t points = std::max(10 * enc.basis.num_functions() + 1, min_samples);
    const auto grid = transformed_grid(enc.transform, points);
    const auto curve = segmentized_curve(model, segment, field, grid);
    return fit_curve_to_basis(grid, curve, enc.transform, enc.basis);
}

/// Two-field fit. alpha is (l+1) x (kappa+1), row-major, with index 0 standing
/// for the constant function. The fit uses the full-rank gauge that drops the
/// last function of each basis (alpha[l][*] = alpha[*][kappa] = 0) and puts the
/// constant in beta (alpha[0][0] = 0), so the coefficients are unique and an
/// additive surface has exactly zero cross terms.
struct PairwiseSpanFit {
    std::size_t rows = 0;  ///< l + 1
    std::size_t cols = 0;  ///< kappa + 1
    std::vector<double> alpha;
    double beta = 0.0;
    double max_residual = 0.0;
    std::size_t samples = 0;

    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return alpha.at(i * cols + j); }

    /// Largest |alpha[i][j]| over i, j >= 1.
    [[nodiscard]] double max_cross_coefficient() const {
        double worst = 0.0;
        for (std::size_t i = 1; i < rows; ++i) {
            for (std::size_t j = 1; j < cols; ++j) {
                worst = std::max(worst, std::abs(at(i, j)));
            }
        }
        return worst;
    }
};

inline PairwiseSpanFit fit_pairwise_span(const Model& model, const RawRow& segment, std::size_t field_e,
                                         std::size_t field_f) {
    const auto& schema = model.schema();
    if (field_e == field_f) {
        throw ConfigError("fit_pairwise_span: the two fields must differ");
    }
    const auto& fe = schema.field(field_e);
    const auto& ff = schema.field(field_f);
    if (!fe.is_continuous() || !ff.is_continuous()) {
        throw ConfigError("fit_pairwise_span: both fields must be continuous numerical fields");
    }
    const auto& enc_e = fe.continuous();
    const auto& enc_f = ff.continuous();
    const std::size_t l = enc_e.basis.num_functions();
    const std::size_t kappa = enc_f.basis.num_functions();
    const auto grid_e = transformed_grid(enc_e.transform, 10 * l + 1);
    const auto grid_f = transformed_grid(enc_f.transform, 10 * kappa + 1);

    // Columns: 1 | B_1..B_{l-1} | C_1..C_{kappa-1} | B_i C_j (i < l, j < kappa)
    const std::size_t le = l - 1;
    const std::size_t kf = kappa - 1;
    const auto ncols = static_cast<Eigen::Index>(1 + le + kf + le * kf);
    const auto nrows = static_cast<Eigen::Index>(grid_e.size() * grid_f.size());
    Eigen::MatrixXd design(nrows, ncols);
    Eigen::VectorXd target(nrows);

    std::vector<std::vector<double>> basis_f;
    basis_f.reserve(grid_f.size());
    for (double z : grid_f) {
        basis_f.push_back(enc_f.basis.eval(enc_f.transform.apply(z)));
    }

    RawRow raw = segment;
    ForwardTrace trace;
    Eigen::Index r = 0;
    for (double ze : grid_e) {
        const auto be = enc_e.basis.eval(enc_e.transform.apply(ze));
        raw.at(field_e) = ze;
        for (std::size_t q = 0; q < grid_f.size(); ++q) {
            raw.at(field_f) = grid_f[q];
            const auto& cf = basis_f[q];
            Eigen::Index c = 0;
            design(r, c++) = 1.0;
            for (std::size_t i = 0; i < le; ++i) design(r, c++) = be[i];
            for (std::size_t j = 0; j < kf; ++j) design(r, c++) = cf[j];
            for (std::size_t i = 0; i < le; ++i) {
                for (std::size_t j = 0; j < kf; ++j) design(r, c++) = be[i] * cf[j];
            }
            target(r) = forward(model, encode_row(schema, raw), trace);
            ++r;
        }
    }

    const Eigen::VectorXd coef = design.completeOrthogonalDecomposition().solve(target);
    PairwiseSpanFit fit;
    fit.rows = l + 1;
    fit.cols = kappa + 1;
    fit.alpha.assign(fit.rows * fit.cols, 0.0);
    fit.beta = coef(0);
    Eigen::Index c = 1;
    for (std::size_t i = 1; i <= le; ++i) fit.alpha[i * fit.cols] = coef(c++);
    for (std::size_t j = 1; j <= kf; ++j) fit.alpha[j] = coef(c++);
    for (std::size_t i = 1; i <= le; ++i) {
        for (std::size_t j = 1; j <= kf; ++j) fit.alpha[i * fit.cols + j] = coef(c++);
    }
    fit.max_residual = (design * coef - target).cwiseAbs().maxCoeff();
    fit.samples = static_cast<std::size_t>(nrows);
    return fit;
}

}  // namespace splinefm
