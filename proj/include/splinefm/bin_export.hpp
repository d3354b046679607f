/**
 * @file bin_export.hpp
 * @brief Turn a continuous numerical field into a binned one by sampling its
 *        reduced embedding at bin midpoints.
 *
 * For a field f and value z, the sum-reduced slot of f is p(z) = sum_i B_i(T(z)) v_i
 * (and likewise for the linear term). Given N intervals, the exported field
 * gets one one-hot feature per interval whose embedding is p(midpoint), so
 * the exported model scores z exactly as the source model scores z's midpoint.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "splinefm/error.hpp"
#include "splinefm/model.hpp"
#include "splinefm/schema.hpp"

namespace splinefm {

enum class BoundaryMode { inverse_cdf, geometric, explicit_list };
enum class MidpointSpace { raw, transformed };

inline BoundaryMode parse_boundary_mode(std::string_view s) {
    if (s == "inverse_cdf") return BoundaryMode::inverse_cdf;
    if (s == "geometric") return BoundaryMode::geometric;
    if (s == "explicit") return BoundaryMode::explicit_list;
    throw ConfigError("unknown boundary mode '" + std::string(s) + "' (expected inverse_cdf, geometric or explicit)");
}

inline MidpointSpace parse_midpoint_space(std::string_view s) {
    if (s == "raw") return MidpointSpace::raw;
    if (s == "transformed") return MidpointSpace::transformed;
    throw ConfigError("unknown midpoint space '" + std::string(s) + "' (expected raw or transformed)");
}

inline constexpr std::size_t kDefaultExportBins = 200;

inline void check_boundaries(std::span<const double> b) {
    if (b.size() < 2) {
        throw ConfigError("bin boundaries need at least two values");
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
        if (!std::isfinite(b[j]) || (j > 0 && !(b[j] > b[j - 1]))) {
            throw ConfigError("bin boundaries must be finite and strictly increasing");
        }
    }
}

/// N+1 boundaries. inverse_cdf: T^{-1}(j/N). geometric: lo * (hi/lo)^{j/N} over the
/// transform's range [T^{-1}(0), T^{-1}(1)], which must be positive. explicit: `given`, validated.
inline std::vector<double> make_boundaries(const FieldTransform& transform, std::size_t bins, BoundaryMode mode,
                                           std::span<const double> given = {}) {
    if (mode == BoundaryMode::explicit_list) {
        check_boundaries(given);
        return {given.begin(), given.end()};
    }
    if (bins < 1) {
        throw ConfigError("bin count must be at least 1");
    }
    std::vector<double> out;
    out.reserve(bins + 1);
    if (mode == BoundaryMode::inverse_cdf) {
        for (std::size_t j = 0; j <= bins; ++j) {
            out.push_back(transform.inverse(static_cast<double>(j) / static_cast<double>(bins)));
        }
    } else {
        const double lo = transform.inverse(0.0);
        const double hi = transform.inverse(1.0);
        if (!(lo > 0.0) || !(hi > lo)) {
            throw ConfigError("geometric boundaries need a positive domain with lo < hi");
        }
        const double octaves = std::log2(hi / lo);
        for (std::size_t j = 0; j < bins; ++j) {
            out.push_back(lo * std::exp2(octaves * static_cast<double>(j) / static_cast<double>(bins)));
        }
        out.push_back(hi);
    }
    check_boundaries(out);
    return out;
}

struct BinnedExport {
    std::size_t field = 0;
    std::string field_name;
    std::vector<double> boundaries;                  ///< N + 1 edges
    std::vector<double> midpoints;                   ///< raw values the embeddings were sampled at
    std::vector<double> bin_linear;                  ///< N linear weights
    std::vector<std::vector<double>> bin_embeddings; ///< N vectors of dim k_f
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t num_bins() const noexcept { return bin_linear.size(); }
};

struct ExportResult {
    Model model;
    BinnedExport table;
};

/// Replaces numerical field `field` by a binned field over `boundaries`. Every
/// other parameter is copied unchanged. Works for continuous fields and (as a
/// re-binning) for already-binned fields.
inline ExportResult export_binned(const Model& model, std::size_t field, std::span<const double> boundaries,
                                  MidpointSpace space = MidpointSpace::raw) {
    check_boundaries(boundaries);
    const auto& schema = model.schema();
    const auto& source = schema.field(field);
    if (!source.is_numerical()) {
        throw ConfigError("export: field '" + source.name + "' is not numerical");
    }
    if (source.is_continuous() && model.reduction(field) != Reduction::sum) {
        throw ConfigError("export: continuous field '" + source.name + "' must use the sum reduction");
    }

    BinnedExport table;
    table.field = field;
    table.field_name = source.name;
    table.boundaries.assign(boundaries.begin(), boundaries.end());
    const std::size_t bins = boundaries.size() - 1;

    if (source.is_continuous()) {
        const auto& t = source.continuous().transform;
        const double lo = t.inverse(0.0);
        const double hi = t.inverse(1.0);
        if (boundaries.front() > lo || boundaries.back() < hi) {
            table.warnings.push_back("boundaries [" + format_number(boundaries.front()) + ", " +
                                     format_number(boundaries.back()) + "] do not cover the transform range [" +
                                     format_number(lo) + ", " + format_number(hi) +
                                     "]; outside values are clamped into the outer bins");
        }
    }

    for (std::size_t j = 0; j < bins; ++j) {
        double mid = 0.5 * (boundaries[j] + boundaries[j + 1]);
        if (space == MidpointSpace::transformed && source.is_continuous()) {
            const auto& t = source.continuous().transform;
            mid = t.inverse(0.5 * (t.apply(boundaries[j]) + t.apply(boundaries[j + 1])));
        }
        auto reduced = reduce_field(model, field, RawValue{mid});
        table.midpoints.push_back(mid);
        table.bin_linear.push_back(reduced.linear);
        table.bin_embeddings.push_back(std::move(reduced.embedding));
    }

    FieldSchema replacement{source.name, BinnedEncoding(table.boundaries, source.is_binned()
                                                                             ? source.binned().missing_value
                                                                             : source.continuous().transform.inverse(0.5)),
                            source.missing};
    auto new_schema = schema.with_field(field, std::move(replacement));
    auto reductions = std::vector<Reduction>(model.reductions().begin(), model.reductions().end());
    reductions[field] = Reduction::identity;
    Model out(new_schema, model.interaction(), std::move(reductions));
    out.set_target_standardization(model.target_shift(), model.target_scale());

    auto dst = out.mutable_params();
    dst[0] = model.bias();
    for (std::size_t f = 0; f < schema.num_fields(); ++f) {
        const std::size_t width = new_schema.field(f).width();
        for (std::size_t i = 0; i < width; ++i) {
            const std::size_t new_feature = new_schema.offset(f) + i;
            auto emb = dst.subspan(out.embedding_index(new_feature), out.embedding_dim(new_feature));
            if (f == field) {
                dst[out.linear_index(new_feature)] = table.bin_linear[i];
                std::copy(table.bin_embeddings[i].begin(), table.bin_embeddings[i].end(), emb.begin());
            } else {
                const std::size_t old_feature = schema.offset(f) + i;
                dst[out.linear_index(new_feature)] = model.linear(old_feature);
                const auto src = model.embedding(old_feature);
                std::copy(src.begin(), src.end(), emb.begin());
            }
        }
    }
    const auto src_params = model.params();
    std::copy(src_params.begin() + static_cast<std::ptrdiff_t>(model.interaction_offset()), src_params.end(),
              dst.begin() + static_cast<std::ptrdiff_t>(out.interaction_offset()));
    return {std::move(out), std::move(table)};
}

/// Tab-separated table: bin, lower, upper, midpoint, linear, emb_0 ... emb_{k-1}.
inline void write_export_table(std::ostream& out, const BinnedExport& table) {
    const std::size_t k = table.bin_embeddings.empty() ? 0 : table.bin_embeddings.front().size();
    out << "bin\tlower\tupper\tmidpoint\tlinear";
    for (std::size_t r = 0; r < k; ++r) {
        out << "\temb_" << r;
    }
    out << '\n';
    for (std::size_t j = 0; j < table.num_bins(); ++j) {
        out << j << '\t' << format_number(table.boundaries[j]) << '\t' << format_number(table.boundaries[j + 1])
            << '\t' << format_number(table.midpoints[j]) << '\t' << format_number(table.bin_linear[j]);
        for (double v : table.bin_embeddings[j]) {
            out << '\t' << format_number(v);
        }
        out << '\n';
    }
}

}  // namespace splinefm
