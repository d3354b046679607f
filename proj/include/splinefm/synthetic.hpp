/**
 * @file synthetic.hpp
 * @brief Toy CTR data set and the bins-versus-splines comparison.
 *
 * Rows have three binary categorical fields (the bits of a segment index
 * s in 0..7) and one integer field z in [0, 40]. With p_0..p_7 smooth
 * ground-truth CTR curves:
 *
 *     s ~ Uniform{0..7},  z ~ BetaBinomial(40, 0.9, 1.2),  y ~ Bernoulli(p_s(z))
 *
 * The beta-binomial is sampled as Binomial(40, q) with q ~ Beta(0.9, 1.2).
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "splinefm/error.hpp"
#include "splinefm/model.hpp"
#include "splinefm/schema.hpp"
#include "splinefm/training.hpp"

namespace splinefm::synthetic {

inline constexpr int kMaxZ = 40;
inline constexpr std::size_t kNumSegments = 8;
inline constexpr double kBetaAlpha = 0.9;
inline constexpr double kBetaBeta = 1.2;

enum class CurveFamily { logistic_ramp, gaussian_bump, sine_ramp };

inline std::string_view to_string(CurveFamily f) {
    switch (f) {
        case CurveFamily::logistic_ramp: return "logistic_ramp";
        case CurveFamily::gaussian_bump: return "gaussian_bump";
        case CurveFamily::sine_ramp: return "sine_ramp";
    }
    return "?";
}

inline CurveFamily parse_curve_family(std::string_view s) {
    if (s == "logistic_ramp") return CurveFamily::logistic_ramp;
    if (s == "gaussian_bump") return CurveFamily::gaussian_bump;
    if (s == "sine_ramp") return CurveFamily::sine_ramp;
    throw ConfigError("unknown curve family '" + std::string(s) + "'");
}

/// One ground-truth CTR curve on [0, 40]. Coefficient meaning by family:
///   logistic_ramp  a + (b - a) / (1 + exp(-(z - c) / d))          (lo, hi, center, width)
///   gaussian_bump  a + b * exp(-((z - c) / d)^2 / 2)              (base, amplitude, center, width)
///   sine_ramp      a + (b - a) z / 40 + c sin(2 pi d z / 40 + e)  (start, end, amplitude, periods, phase)
struct Curve {
    CurveFamily family = CurveFamily::logistic_ramp;
    std::array<double, 5> c{};

    [[nodiscard]] double operator()(double z) const {
        switch (family) {
            case CurveFamily::logistic_ramp: return c[0] + (c[1] - c[0]) / (1.0 + std::exp(-(z - c[2]) / c[3]));
            case CurveFamily::gaussian_bump: {
                const double t = (z - c[2]) / c[3];
                return c[0] + c[1] * std::exp(-0.5 * t * t);
            }
            case CurveFamily::sine_ramp:
                return c[0] + (c[1] - c[0]) * z / kMaxZ + c[2] * std::sin(2.0 * std::numbers::pi * c[3] * z / kMaxZ + c[4]);
        }
        return NAN;
    }

    [[nodiscard]] static std::size_t num_coefficients(CurveFamily f) { return f == CurveFamily::sine_ramp ? 5 : 4; }
};

/// p_0 .. p_7. Construction checks every curve stays strictly inside (0, 1) on [0, 40].
class SegmentCurves {
public:
    explicit SegmentCurves(std::vector<Curve> curves) : curves_(std::move(curves)) {
        if (curves_.size() != kNumSegments) {
            throw ConfigError("synthetic experiment needs exactly 8 segment curves, got " +
                              std::to_string(curves_.size()));
        }
        for (std::size_t s = 0; s < curves_.size(); ++s) {
            if ((curves_[s].family == CurveFamily::logistic_ramp || curves_[s].family == CurveFamily::gaussian_bump) &&
                curves_[s].c[3] == 0.0) {
                throw ConfigError("curve " + std::to_string(s) + ": width must be nonzero");
            }
            for (int step = 0; step <= kMaxZ * 100; ++step) {
                const double p = curves_[s](step / 100.0);
                if (!(p > 0.0 && p < 1.0)) {
                    throw ConfigError("curve " + std::to_string(s) + " leaves (0, 1) at z = " +
                                      format_number(step / 100.0));
                }
            }
        }
    }

    [[nodiscard]] double operator()(std::size_t segment, double z) const { return curves_.at(segment)(z); }
    [[nodiscard]] const std::vector<Curve>& curves() const noexcept { return curves_; }

    /// The default curve set: ramps, bumps and gentle oscillations, all inside (0.1, 0.9).
    static SegmentCurves defaults() {
        using F = CurveFamily;
        return SegmentCurves({
            {F::logistic_ramp, {0.12, 0.35, 18.0, 5.0, 0.0}},
            {F::gaussian_bump, {0.12, 0.20, 14.0, 6.0, 0.0}},
            {F::sine_ramp, {0.15, 0.28, 0.04, 1.0, 0.0}},
            {F::logistic_ramp, {0.38, 0.12, 20.0, 4.0, 0.0}},
            {F::gaussian_bump, {0.13, 0.18, 24.0, 7.0, 0.0}},
            {F::sine_ramp, {0.22, 0.14, 0.05, 1.5, 0.5}},
            {F::logistic_ramp, {0.13, 0.45, 10.0, 3.5, 0.0}},
            {F::gaussian_bump, {0.30, -0.17, 16.0, 6.0, 0.0}},
        });
    }

private:
    std::vector<Curve> curves_;
};

struct SyntheticRow {
    int segment = 0;
    int z = 0;
    int label = 0;
};

/// Reproducible given seed.
inline std::vector<SyntheticRow> generate(const SegmentCurves& curves, std::size_t n, std::uint64_t seed) {
    if (n < 1) {
        throw ConfigError("synthetic row count must be at least 1");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> segment_dist(0, static_cast<int>(kNumSegments) - 1);
    std::gamma_distribution<double> gamma_a(kBetaAlpha, 1.0);
    std::gamma_distribution<double> gamma_b(kBetaBeta, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<SyntheticRow> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SyntheticRow row;
        row.segment = segment_dist(rng);
        const double x = gamma_a(rng);
        const double y = gamma_b(rng);
        const double q = x + y > 0.0 ? x / (x + y) : 0.5;
        std::binomial_distribution<int> binom(kMaxZ, q);
        row.z = binom(rng);
        row.label = unit(rng) < curves(static_cast<std::size_t>(row.segment), row.z) ? 1 : 0;
        rows.push_back(row);
    }
    return rows;
}

enum class Strategy { binned, spline };

inline std::string_view to_string(Strategy s) { return s == Strategy::binned ? "bins" : "splines"; }

/// Fields s0, s1, s2 (bits of the segment, vocabulary {"0","1"}) and z. Binned: `intervals`
/// equal-width bins on [0, 40]. Spline: cubic basis on `intervals` sub-intervals of
/// the min-max normalized value, i.e. intervals + 3 functions.
inline DatasetSchema make_schema(Strategy strategy, std::size_t intervals) {
    std::vector<FieldSchema> fields;
    for (int b = 0; b < 3; ++b) {
        fields.push_back(categorical_field("s" + std::to_string(b), {"0", "1"}, false));
    }
    if (strategy == Strategy::binned) {
        std::vector<double> edges;
        for (std::size_t j = 0; j <= intervals; ++j) {
            edges.push_back(kMaxZ * static_cast<double>(j) / static_cast<double>(intervals));
        }
        fields.push_back(binned_field("z", std::move(edges)));
    } else {
        fields.push_back(continuous_field("z", AffineTransform(0.0, kMaxZ), SplineBasis::build_uniform(intervals + 3, 3)));
    }
    return {std::move(fields), LabelKind::binary, "y"};
}

inline RawRow raw_row(int segment, double z) {
    RawRow raw;
    for (int b = 0; b < 3; ++b) {
        raw.emplace_back(std::string((segment >> b) & 1 ? "1" : "0"));
    }
    raw.emplace_back(z);
    return raw;
}

inline std::vector<EncodedRow> encode(const DatasetSchema& schema, const std::vector<SyntheticRow>& rows) {
    std::vector<EncodedRow> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        out.push_back(encode_row(schema, raw_row(r.segment, r.z), r.label));
    }
    return out;
}

struct ModelShape {
    Variant variant = Variant::ffm;
    std::size_t k = 4;  ///< embedding size (per-field block size for ffm)
};

inline Model make_model(const DatasetSchema& schema, const ModelShape& shape) {
    const std::size_t m = schema.num_fields();
    switch (shape.variant) {
        case Variant::fm: return {schema, InteractionSpec::fm(m, shape.k)};
        case Variant::ffm: return {schema, InteractionSpec::ffm(m, shape.k)};
        case Variant::fwfm: return {schema, InteractionSpec::fwfm(m, shape.k)};
        case Variant::fmfm: return {schema, InteractionSpec::fmfm(std::vector<std::size_t>(m, shape.k))};
    }
    throw ConfigError("unknown variant");
}

struct ComparisonConfig {
    std::size_t train_rows = 25000;
    std::size_t test_rows = 75000;
    std::size_t repeats = 15;
    std::vector<std::size_t> bin_counts{5, 12, 120};
    std::vector<std::size_t> spline_intervals{6};
    std::uint64_t seed = 2024;
    ModelShape model;
    TrainConfig train = [] {
        TrainConfig t;
        t.loss = LossKind::logloss;
        t.optimizer = OptimizerKind::adagrad;
        t.step_size = 0.05;
        t.batch_size = 32;
        t.epochs = 12;
        t.holdout_fraction = 0.2;
        return t;
    }();
};

struct ComparisonCell {
    Strategy strategy = Strategy::binned;
    std::size_t intervals = 0;
    std::size_t repeat = 0;
    double test_loss = NAN;
    double train_loss = NAN;
    std::size_t best_epoch = 0;
    std::string error;  ///< non-empty if training failed for this cell
};

struct ComparisonResult {
    std::vector<ComparisonCell> cells;

    /// Mean test loss over the successful repeats of one configuration.
    [[nodiscard]] std::optional<double> mean_test_loss(Strategy strategy, std::size_t intervals) const {
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& c : cells) {
            if (c.strategy == strategy && c.intervals == intervals && c.error.empty()) {
                total += c.test_loss;
                ++count;
            }
        }
        if (count == 0) {
            return std::nullopt;
        }
        return total / static_cast<double>(count);
    }
};

/// Data sets shared by every configuration of one comparison run.
struct ComparisonData {
    std::vector<SyntheticRow> train;
    std::vector<SyntheticRow> test;
};

inline ComparisonData make_comparison_data(const SegmentCurves& curves, const ComparisonConfig& config) {
    return {generate(curves, config.train_rows, derive_seed(config.seed, 10)),
            generate(curves, config.test_rows, derive_seed(config.seed, 11))};
}

/// Trains one configuration; repeat r uses training seed derive_seed(seed, 100 + r).
inline std::pair<ComparisonCell, std::optional<Model>> run_cell(const ComparisonData& data,
                                                                const ComparisonConfig& config, Strategy strategy,
                                                                std::size_t intervals, std::size_t repeat) {
    ComparisonCell cell;
    cell.strategy = strategy;
    cell.intervals = intervals;
    cell.repeat = repeat;
    try {
        const auto schema = make_schema(strategy, intervals);
        TrainConfig tc = config.train;
        tc.seed = derive_seed(config.seed, 100 + repeat);
        const auto train_rows = encode(schema, data.train);
        const auto test_rows = encode(schema, data.test);
        auto result = train(tc, make_model(schema, config.model), train_rows);
        cell.train_loss = result.metrics.value();
        cell.best_epoch = result.metrics.best_epoch;
        cell.test_loss = evaluate(result.model, test_rows, LossKind::logloss).value();
        return {cell, std::move(result.model)};
    } catch (const Error& e) {
        cell.error = e.what();
        return {cell, std::nullopt};
    }
}

/// Every (strategy, interval count, repeat) cell, binned configurations first.
inline ComparisonResult run_comparison(const SegmentCurves& curves, const ComparisonConfig& config) {
    if (config.repeats < 1) {
        throw ConfigError("synthetic comparison needs at least one repeat");
    }
    const auto data = make_comparison_data(curves, config);
    ComparisonResult result;
    for (auto [strategy, counts] : {std::pair{Strategy::binned, &config.bin_counts},
                                    std::pair{Strategy::spline, &config.spline_intervals}}) {
        for (std::size_t intervals : *counts) {
            for (std::size_t r = 0; r < config.repeats; ++r) {
                result.cells.push_back(run_cell(data, config, strategy, intervals, r).first);
            }
        }
    }
    return result;
}

struct CurvePoint {
    int segment = 0;
    double z = 0.0;
    double predicted = 0.0;  ///< sigmoid of the segmentized score
    double truth = 0.0;
};

/// Learned and ground-truth CTR curves for all eight segments over `grid`.
inline std::vector<CurvePoint> emit_curves(const Model& model, const SegmentCurves& curves,
                                           std::span<const double> grid) {
    const auto z_field = model.schema().field_id("z");
    std::vector<CurvePoint> out;
    out.reserve(kNumSegments * grid.size());
    for (int s = 0; s < static_cast<int>(kNumSegments); ++s) {
        const auto scores = segmentized_curve(model, raw_row(s, 0.0), z_field, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out.push_back({s, grid[i], sigmoid(scores[i]), curves(static_cast<std::size_t>(s), grid[i])});
        }
    }
    return out;
}

}  // namespace splinefm::synthetic
