// Independent reference implementations and random fixtures shared by the
// unit tests and the acceptance binary. Nothing here depends on GoogleTest.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "splinefm/model.hpp"
#include "splinefm/schema.hpp"
#include "splinefm/spline_basis.hpp"
#include "splinefm/training.hpp"

namespace oracle {

using namespace splinefm;

// ---------------------------------------------------------------------------
// B-splines by the textbook recursion
// ---------------------------------------------------------------------------

/// Clamped uniform knot vector for `num_functions` functions of degree `degree`.
inline std::vector<double> clamped_knots(std::size_t num_functions, std::size_t degree) {
    const std::size_t intervals = num_functions - degree;
    std::vector<double> t;
    for (std::size_t i = 0; i < degree; ++i) t.push_back(0.0);
    for (std::size_t j = 0; j <= intervals; ++j) t.push_back(static_cast<double>(j) / static_cast<double>(intervals));
    for (std::size_t i = 0; i < degree; ++i) t.push_back(1.0);
    return t;
}

/// B_{i,d}(x) by the direct recursion, with 0/0 = 0. The last non-empty
/// interval is closed on the right so the basis is defined at x = 1.
inline double cox_de_boor(const std::vector<double>& t, std::size_t i, std::size_t d, double x) {
    if (d == 0) {
        if (t[i] <= x && x < t[i + 1]) return 1.0;
        const bool last_nonempty = t[i] < t[i + 1] && t[i + 1] == t.back();
        return (x == t.back() && last_nonempty) ? 1.0 : 0.0;
    }
    double value = 0.0;
    const double left = t[i + d] - t[i];
    if (left > 0.0) value += (x - t[i]) / left * cox_de_boor(t, i, d - 1, x);
    const double right = t[i + d + 1] - t[i + 1];
    if (right > 0.0) value += (t[i + d + 1] - x) / right * cox_de_boor(t, i + 1, d - 1, x);
    return value;
}

inline std::vector<double> cox_de_boor_all(std::size_t num_functions, std::size_t degree, double x) {
    const auto t = clamped_knots(num_functions, degree);
    std::vector<double> out(num_functions);
    for (std::size_t i = 0; i < num_functions; ++i) out[i] = cox_de_boor(t, i, degree, x);
    return out;
}

// ---------------------------------------------------------------------------
// Scoring by a direct double loop
// ---------------------------------------------------------------------------

struct Item {
    std::size_t field;
    double linear;
    std::vector<double> vec;
};

/// <a, b> for fields e <= f, read straight from the parameter vector.
inline double pair_value(const Model& model, std::size_t e, std::size_t f, const std::vector<double>& a,
                         const std::vector<double>& b) {
    const auto& spec = model.interaction();
    const auto p = model.pair_params(e, f);
    double total = 0.0;
    switch (spec.variant()) {
        case Variant::fm:
            for (std::size_t r = 0; r < a.size(); ++r) total += a[r] * b[r];
            return total;
        case Variant::fwfm:
            for (std::size_t r = 0; r < a.size(); ++r) total += a[r] * b[r];
            return p[0] * total;
        case Variant::ffm: {
            const std::size_t k = spec.block();
            for (std::size_t r = 0; r < k; ++r) total += a[f * k + r] * b[e * k + r];
            return total;
        }
        case Variant::fmfm:
            for (std::size_t r = 0; r < a.size(); ++r) {
                for (std::size_t c = 0; c < b.size(); ++c) total += a[r] * p[r * b.size() + c] * b[c];
            }
            return total;
    }
    return NAN;
}

/// w0 + sum_i x_i w_i + sum_{i<j} x_i x_j <v_i, v_j>, every entry its own
/// term, except that the entries of fields in `presum` are first replaced by
/// a single item holding sum x_i w_i and sum x_i v_i.
inline double brute_force_score(const Model& model, const EncodedRow& row, const std::set<std::size_t>& presum = {}) {
    std::vector<Item> items;
    for (const auto& e : row.entries) {
        const auto v = model.embedding(e.index);
        std::vector<double> xv(v.size());
        for (std::size_t r = 0; r < v.size(); ++r) xv[r] = e.value * v[r];
        const double xw = e.value * model.linear(e.index);
        if (presum.count(e.field) && !items.empty() && items.back().field == e.field) {
            items.back().linear += xw;
            for (std::size_t r = 0; r < v.size(); ++r) items.back().vec[r] += xv[r];
        } else {
            items.push_back({e.field, xw, std::move(xv)});
        }
    }
    double score = model.bias();
    for (const auto& it : items) score += it.linear;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = i + 1; j < items.size(); ++j) {
            score += pair_value(model, items[i].field, items[j].field, items[i].vec, items[j].vec);
        }
    }
    return score;
}

// ---------------------------------------------------------------------------
// Random fixtures
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline double normal(Rng& rng, double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng); }
inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline FieldTransform random_transform(Rng& rng) {
    switch (uniform_index(rng, 0, 2)) {
        case 0: return IdentityTransform{};
        case 1: {
            const double lo = normal(rng, 3.0);
            return AffineTransform(lo, lo + 0.5 + std::abs(normal(rng, 5.0)));
        }
        default: {
            std::vector<double> sample;
            for (int i = 0; i < 500; ++i) sample.push_back(std::exp(normal(rng)));
            return QuantileTransform::fit(sample, uniform_index(rng, 5, 60));
        }
    }
}

inline FieldSchema random_continuous(Rng& rng, const std::string& name) {
    const std::size_t degree = uniform_index(rng, 1, 3);
    return continuous_field(name, random_transform(rng),
                            SplineBasis::build_uniform(degree + uniform_index(rng, 1, 8), degree));
}

/// Random schema with `categorical`, `binned` and `continuous` fields in random order.
inline DatasetSchema random_schema(Rng& rng, std::size_t categorical, std::size_t binned, std::size_t continuous) {
    std::vector<FieldSchema> fields;
    for (std::size_t i = 0; i < categorical; ++i) {
        std::vector<std::string> vocab;
        const std::size_t n = uniform_index(rng, 1, 5);
        for (std::size_t v = 0; v < n; ++v) vocab.push_back("v" + std::to_string(v));
        fields.push_back(categorical_field("c" + std::to_string(i), vocab, uniform_index(rng, 0, 1) == 1));
    }
    for (std::size_t i = 0; i < binned; ++i) {
        std::vector<double> edges{normal(rng)};
        const std::size_t n = uniform_index(rng, 1, 6);
        for (std::size_t b = 0; b < n; ++b) edges.push_back(edges.back() + 0.1 + std::abs(normal(rng)));
        fields.push_back(binned_field("b" + std::to_string(i), edges));
    }
    for (std::size_t i = 0; i < continuous; ++i) fields.push_back(random_continuous(rng, "z" + std::to_string(i)));
    std::shuffle(fields.begin(), fields.end(), rng);
    return {std::move(fields), LabelKind::binary};
}

inline InteractionSpec random_interaction(Rng& rng, Variant variant, std::size_t num_fields) {
    switch (variant) {
        case Variant::fm: return InteractionSpec::fm(num_fields, uniform_index(rng, 1, 5));
        case Variant::ffm: return InteractionSpec::ffm(num_fields, uniform_index(rng, 1, 3));
        case Variant::fwfm: return InteractionSpec::fwfm(num_fields, uniform_index(rng, 1, 5));
        case Variant::fmfm: {
            std::vector<std::size_t> dims;
            for (std::size_t f = 0; f < num_fields; ++f) dims.push_back(uniform_index(rng, 1, 4));
            return InteractionSpec::fmfm(dims);
        }
    }
    return InteractionSpec::fm(num_fields, 1);
}

inline void randomize_params(Model& model, Rng& rng, double sd = 0.5) {
    for (double& p : model.mutable_params()) p = normal(rng, sd);
}

/// A raw value for `field`: a vocabulary entry (or an unseen one if the field
/// has an unknown slot), or a number spread over and somewhat beyond its range.
inline RawValue random_raw(Rng& rng, const FieldSchema& field) {
    if (field.is_categorical()) {
        const auto& c = field.categorical();
        const std::size_t i = uniform_index(rng, 0, c.vocabulary.size() - (c.unknown_slot ? 0 : 1));
        return i < c.vocabulary.size() ? c.vocabulary[i] : std::string("unseen");
    }
    if (field.is_binned()) {
        const auto& b = field.binned().boundaries;
        return std::uniform_real_distribution<double>(b.front() - 0.5, b.back() + 0.5)(rng);
    }
    const auto& t = field.continuous().transform;
    const double u = std::uniform_real_distribution<double>(-0.05, 1.05)(rng);
    return t.inverse(std::clamp(u, 0.0, 1.0)) + (u < 0.0 ? u : (u > 1.0 ? u - 1.0 : 0.0));
}

inline RawRow random_raw_row(Rng& rng, const DatasetSchema& schema) {
    RawRow raw;
    for (const auto& f : schema.fields()) raw.push_back(random_raw(rng, f));
    return raw;
}

inline Variant random_variant(Rng& rng) { return static_cast<Variant>(uniform_index(rng, 0, 3)); }

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// Unclamped log loss of `row` (label 0 or 1), -log sigmoid(+-s) written as a softplus.
inline double row_logloss(const Model& model, const EncodedRow& row) {
    const double s = score(model, row);
    return row.label == 1.0 ? softplus(-s) : softplus(s);
}

/// Central difference of f(model) in parameter `index`.
template <typename F>
double central_difference(Model& model, std::size_t index, double h, F&& f) {
    const double saved = model.params()[index];
    model.mutable_params()[index] = saved + h;
    const double up = f(model);
    model.mutable_params()[index] = saved - h;
    const double down = f(model);
    model.mutable_params()[index] = saved;
    return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|), with a floor on the denominator so that two
/// vanishing gradients compare equal.
inline double relative_error(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
