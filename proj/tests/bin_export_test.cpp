#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "splinefm/bin_export.hpp"
#include "splinefm/synthetic.hpp"
#include "splinefm/training.hpp"

namespace {

using namespace splinefm;

bool near_relative(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1.0}); }

/// Categorical field plus two continuous fields, sum-reduced, random parameters.
Model random_continuous_model(std::uint64_t seed, Variant variant = Variant::fm) {
    oracle::Rng rng(seed);
    std::vector<double> sample;
    for (int i = 0; i < 1000; ++i) sample.push_back(std::exp(oracle::normal(rng)));
    const DatasetSchema schema({categorical_field("c", {"a", "b", "c"}),
                                continuous_field("x", QuantileTransform::fit(sample, 100), SplineBasis::build_uniform(9, 3)),
                                continuous_field("y", AffineTransform(-5.0, 5.0), SplineBasis::build_uniform(6, 2))},
                               LabelKind::binary);
    Model model(schema, oracle::random_interaction(rng, variant, 3));
    oracle::randomize_params(model, rng);
    return model;
}

RawRow row_at(double x, double y) { return {std::string("b"), x, y}; }

TEST(MakeBoundaries, InverseCdfOfTheIdentityIsAnEvenGrid) {
    const auto b = make_boundaries(IdentityTransform{}, 4, BoundaryMode::inverse_cdf);
    EXPECT_EQ(b, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
}

TEST(MakeBoundaries, GeometricIsARatioTwoLadder) {
    const auto b = make_boundaries(AffineTransform(1.0, 256.0), 8, BoundaryMode::geometric);
    EXPECT_EQ(b, (std::vector<double>{1, 2, 4, 8, 16, 32, 64, 128, 256}));
}

TEST(MakeBoundaries, InverseCdfOfAFittedTransformGivesDeciles) {
    oracle::Rng rng(41);
    std::vector<double> sample;
    for (int i = 0; i < 2001; ++i) sample.push_back(oracle::normal(rng, 3.0));
    const auto b = make_boundaries(QuantileTransform::fit(sample, 100), 10, BoundaryMode::inverse_cdf);
    std::sort(sample.begin(), sample.end());
    ASSERT_EQ(b.size(), 11u);
    for (std::size_t j = 0; j <= 10; ++j) {
        const double h = static_cast<double>(sample.size() - 1) * static_cast<double>(j) / 10.0;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, sample.size() - 1);
        const double decile = sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
        EXPECT_NEAR(b[j], decile, 1e-9) << "j = " << j;
    }
}

TEST(MakeBoundaries, RejectsBadRequests) {
    const std::vector<double> descending{0.0, 2.0, 1.0};
    const std::vector<double> repeated{0.0, 1.0, 1.0};
    EXPECT_THROW(make_boundaries(IdentityTransform{}, 0, BoundaryMode::explicit_list, descending), ConfigError);
    EXPECT_THROW(make_boundaries(IdentityTransform{}, 0, BoundaryMode::explicit_list, repeated), ConfigError);
    EXPECT_THROW(make_boundaries(IdentityTransform{}, 0, BoundaryMode::inverse_cdf), ConfigError);
    EXPECT_THROW(make_boundaries(AffineTransform(-1.0, 4.0), 8, BoundaryMode::geometric), ConfigError);
    const std::vector<double> good{-1.0, 0.5, 3.0};
    EXPECT_EQ(make_boundaries(IdentityTransform{}, 0, BoundaryMode::explicit_list, good), good);
    EXPECT_EQ(parse_boundary_mode("explicit"), BoundaryMode::explicit_list);
    EXPECT_THROW(parse_boundary_mode("log"), ConfigError);
}

TEST(ExportBinned, MidpointScoresMatchTheContinuousModel) {
    for (Variant v : {Variant::fm, Variant::ffm, Variant::fwfm, Variant::fmfm}) {
        const auto model = random_continuous_model(42, v);
        const auto& t = model.schema().field(1).continuous().transform;
        const auto boundaries = make_boundaries(t, 50, BoundaryMode::inverse_cdf);
        const auto [exported, table] = export_binned(model, 1, boundaries);
        ASSERT_EQ(table.num_bins(), 50u);
        EXPECT_TRUE(table.warnings.empty());
        for (std::size_t j = 0; j < table.num_bins(); ++j) {
            const double mid = table.midpoints[j];
            EXPECT_DOUBLE_EQ(mid, 0.5 * (boundaries[j] + boundaries[j + 1]));
            for (double y : {-4.0, 0.3, 5.0}) {
                const double want = score(model, encode_row(model.schema(), row_at(mid, y)));
                const double got = score(exported, encode_row(exported.schema(), row_at(mid, y)));
                EXPECT_TRUE(near_relative(got, want, 1e-12)) << to_string(v) << " bin " << j << ": " << got << " vs " << want;
            }
        }
    }
}

TEST(ExportBinned, BinEmbeddingsAreBasisCombinationsAtTheMidpoint) {
    const auto model = random_continuous_model(43);
    const std::vector<double> boundaries{-5.0, -1.0, 0.0, 2.5, 5.0};
    const auto table = export_binned(model, 2, boundaries).table;
    const std::size_t offset = model.schema().offset(2);
    for (std::size_t j = 0; j < 4; ++j) {
        const auto b = oracle::cox_de_boor_all(6, 2, (table.midpoints[j] + 5.0) / 10.0);
        double linear = 0.0;
        std::vector<double> emb(model.interaction().dim(2), 0.0);
        for (std::size_t i = 0; i < 6; ++i) {
            linear += b[i] * model.linear(offset + i);
            for (std::size_t r = 0; r < emb.size(); ++r) emb[r] += b[i] * model.embedding(offset + i)[r];
        }
        EXPECT_NEAR(table.bin_linear[j], linear, 1e-12);
        for (std::size_t r = 0; r < emb.size(); ++r) EXPECT_NEAR(table.bin_embeddings[j][r], emb[r], 1e-12);
    }
}

TEST(ExportBinned, ScoresAreConstantWithinBinsAndEqualTheMidpointScore) {
    const auto model = random_continuous_model(44, Variant::fwfm);
    const auto boundaries = make_boundaries(model.schema().field(2).continuous().transform, 7, BoundaryMode::inverse_cdf);
    const auto [exported, table] = export_binned(model, 2, boundaries);
    EXPECT_TRUE(exported.schema().field(2).is_binned());
    EXPECT_EQ(exported.reduction(2), Reduction::identity);
    for (int i = 0; i <= 700; ++i) {
        const double y = -5.0 + i / 70.0;
        const std::size_t bin = exported.schema().field(2).binned().bin_of(y);
        const double got = score(exported, encode_row(exported.schema(), row_at(1.0, y)));
        const double at_mid = score(exported, encode_row(exported.schema(), row_at(1.0, table.midpoints[bin])));
        EXPECT_EQ(got, at_mid);
        const double source_mid = score(model, encode_row(model.schema(), row_at(1.0, table.midpoints[bin])));
        EXPECT_TRUE(near_relative(got, source_mid, 1e-12));
    }
}

TEST(ExportBinned, DiscrepancyShrinksWithMoreBinsOnATrainedModel) {
    namespace syn = splinefm::synthetic;
    const auto curves = syn::SegmentCurves::defaults();
    const auto schema = syn::make_schema(syn::Strategy::spline, 6);
    const auto rows = syn::encode(schema, syn::generate(curves, 8000, 45));
    TrainConfig config;
    config.epochs = 4;
    config.holdout_fraction = 0.0;
    const auto trained = train(config, syn::make_model(schema, {}), rows).model;
    const std::size_t z = schema.field_id("z");
    const auto& t = schema.field(z).continuous().transform;

    std::vector<double> mean_gap;
    for (std::size_t n : {10u, 100u, 1000u}) {
        const auto exported = export_binned(trained, z, make_boundaries(t, n, BoundaryMode::inverse_cdf)).model;
        double total = 0.0;
        std::size_t count = 0;
        for (int segment = 0; segment < 8; ++segment) {
            for (int i = 0; i <= 4000; ++i) {
                const auto raw = syn::raw_row(segment, i / 100.0);
                total += std::abs(score(exported, encode_row(exported.schema(), raw)) - score(trained, encode_row(schema, raw)));
                ++count;
            }
        }
        mean_gap.push_back(total / static_cast<double>(count));
    }
    EXPECT_GT(mean_gap[0], mean_gap[1]);
    EXPECT_GT(mean_gap[1], mean_gap[2]);
    EXPECT_LT(mean_gap[2], 1e-3);
}

TEST(ExportBinned, ReexportIsIdempotentInScore) {
    const auto model = random_continuous_model(46, Variant::fmfm);
    const auto boundaries = make_boundaries(model.schema().field(1).continuous().transform, 20, BoundaryMode::inverse_cdf);
    const auto once = export_binned(model, 1, boundaries).model;
    const auto twice = export_binned(once, 1, boundaries).model;
    oracle::Rng rng(47);
    for (int i = 0; i < 300; ++i) {
        const auto raw = oracle::random_raw_row(rng, model.schema());
        EXPECT_EQ(score(twice, encode_row(twice.schema(), raw)), score(once, encode_row(once.schema(), raw)));
    }
}

TEST(ExportBinned, MixedExportMatchesPartialSubstitution) {
    const auto model = random_continuous_model(48, Variant::ffm);
    const std::vector<double> boundaries{-5.0, -2.0, 1.0, 5.0};
    const auto [exported, table] = export_binned(model, 2, boundaries);
    EXPECT_TRUE(exported.schema().field(1).is_continuous());
    oracle::Rng rng(49);
    for (int i = 0; i < 300; ++i) {
        auto raw = oracle::random_raw_row(rng, model.schema());
        const double y = std::get<double>(raw[2]);
        const double got = score(exported, encode_row(exported.schema(), raw));
        raw[2] = table.midpoints[exported.schema().field(2).binned().bin_of(y)];
        EXPECT_TRUE(near_relative(got, score(model, encode_row(model.schema(), raw)), 1e-12));
    }
}

TEST(ExportBinned, NarrowBoundariesWarnAndClamp) {
    const auto model = random_continuous_model(50);
    const std::vector<double> boundaries{-1.0, 0.0, 1.0};
    const auto [exported, table] = export_binned(model, 2, boundaries);
    ASSERT_EQ(table.warnings.size(), 1u);
    EXPECT_NE(table.warnings[0].find("clamped"), std::string::npos);
    const auto at = [&](double y) { return score(exported, encode_row(exported.schema(), row_at(1.0, y))); };
    EXPECT_EQ(at(-4.5), at(-0.5));
    EXPECT_EQ(at(4.5), at(0.5));
}

TEST(ExportBinned, TransformedMidpointsUseTheTransformScale) {
    const auto model = random_continuous_model(51);
    const auto& t = model.schema().field(1).continuous().transform;
    const std::vector<double> boundaries{t.inverse(0.0), t.inverse(0.2), t.inverse(0.6), t.inverse(1.0)};
    const auto table = export_binned(model, 1, boundaries, MidpointSpace::transformed).table;
    EXPECT_NEAR(t.apply(table.midpoints[0]), 0.1, 1e-12);
    EXPECT_NEAR(t.apply(table.midpoints[1]), 0.4, 1e-12);
    EXPECT_NEAR(t.apply(table.midpoints[2]), 0.8, 1e-12);
}

TEST(ExportBinned, RejectsUnsuitableFields) {
    const auto model = random_continuous_model(52);
    const std::vector<double> b{0.0, 1.0, 2.0};
    EXPECT_THROW(export_binned(model, 0, b), ConfigError);
    const std::vector<double> bad{0.0, 2.0, 1.0};
    EXPECT_THROW(export_binned(model, 1, bad), ConfigError);
    Model identity(model.schema(), model.interaction(), std::vector<Reduction>(3, Reduction::identity));
    EXPECT_THROW(export_binned(identity, 1, b), ConfigError);
}

TEST(ExportBinned, TableListsEveryBin) {
    const auto model = random_continuous_model(53);
    const std::vector<double> boundaries{-5.0, 0.0, 5.0};
    std::ostringstream out;
    write_export_table(out, export_binned(model, 2, boundaries).table);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header.rfind("bin\tlower\tupper\tmidpoint\tlinear\temb_0", 0), 0u);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    EXPECT_EQ(lines, 2u);
}

}  // namespace
