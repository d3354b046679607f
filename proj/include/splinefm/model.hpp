/**
 * @file model.hpp
 * @brief FmFM-family model with per-field reductions: parameters, forward, backward.
 *
 * The score of an encoded row x is
 *
 *     w0 + sum_s yhat_s + sum_{s<t} <p_s, p_t>_{M(f_s, f_t)}
 *
 * where the slots s come from applying each field's reduction to the scaled
 * linear terms x_i w_i and embeddings x_i v_i: a sum-reduced field yields a
 * single slot (yhat = sum x_i w_i, p = sum x_i v_i), an identity-reduced
 * field yields one slot per nonzero entry. Slots are ordered by field and
 * then by entry, so the first member of a pair never belongs to a later
 * field than the second.
 *
 * All parameters live in one flat vector laid out as
 *   [w0 | w_0 .. w_{n-1} | v_0 | v_1 | ... | interaction parameters]
 * which is also the index space of SparseGradient.
 */
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "splinefm/error.hpp"
#include "splinefm/interaction.hpp"
#include "splinefm/schema.hpp"

namespace splinefm {

class Model {
public:
    Model() = default;

    /// Zero-initialized model. `reductions` overrides the schema's per-field
    /// defaults (sum for continuous fields, identity otherwise).
    Model(DatasetSchema schema, InteractionSpec interaction,
          std::optional<std::vector<Reduction>> reductions = std::nullopt)
        : schema_(std::move(schema)), interaction_(std::move(interaction)) {
        const std::size_t m = schema_.num_fields();
        if (interaction_.num_fields() != m) {
            throw ConfigError("interaction spec covers " + std::to_string(interaction_.num_fields()) +
                              " fields but the schema has " + std::to_string(m));
        }
        if (interaction_.variant() == Variant::ffm && m > 0 && interaction_.dim(0) != m * interaction_.block()) {
            throw ConfigError("ffm embedding dimension must equal num_fields * block");
        }
        if (reductions) {
            if (reductions->size() != m) {
                throw ConfigError("reduction list length does not match the number of fields");
            }
            reductions_ = std::move(*reductions);
        } else {
            reductions_.reserve(m);
            for (const auto& f : schema_.fields()) {
                reductions_.push_back(f.reduction());
            }
        }

        const std::size_t n = schema_.total_features();
        embedding_offsets_.clear();
        embedding_offsets_.reserve(n + 1);
        std::size_t offset = 1 + n;
        for (std::size_t f = 0; f < m; ++f) {
            for (std::size_t i = 0; i < schema_.field(f).width(); ++i) {
                embedding_offsets_.push_back(offset);
                offset += interaction_.dim(f);
            }
        }
        embedding_offsets_.push_back(offset);
        interaction_offset_ = offset;
        params_.assign(offset + interaction_.num_params(), 0.0);
        reset_interaction();
    }

    [[nodiscard]] const DatasetSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] const InteractionSpec& interaction() const noexcept { return interaction_; }
    [[nodiscard]] std::span<const Reduction> reductions() const noexcept { return reductions_; }
    [[nodiscard]] Reduction reduction(std::size_t field) const { return reductions_.at(field); }

    [[nodiscard]] std::size_t num_features() const noexcept { return schema_.total_features(); }
    [[nodiscard]] std::size_t num_params() const noexcept { return params_.size(); }
    [[nodiscard]] std::uint64_t revision() const noexcept { return revision_; }

    [[nodiscard]] std::size_t linear_index(std::size_t feature) const noexcept { return 1 + feature; }
    [[nodiscard]] std::size_t embedding_index(std::size_t feature) const noexcept {
        return embedding_offsets_[feature];
    }
    [[nodiscard]] std::size_t embedding_dim(std::size_t feature) const noexcept {
        return embedding_offsets_[feature + 1] - embedding_offsets_[feature];
    }
    [[nodiscard]] std::size_t interaction_index(std::size_t e, std::size_t f) const noexcept {
        return interaction_offset_ + interaction_.pair_offset(e, f);
    }
    [[nodiscard]] std::size_t interaction_offset() const noexcept { return interaction_offset_; }

    [[nodiscard]] double bias() const noexcept { return params_[0]; }
    [[nodiscard]] double linear(std::size_t feature) const { return params_.at(linear_index(feature)); }
    [[nodiscard]] std::span<const double> embedding(std::size_t feature) const {
        return {params_.data() + embedding_index(feature), embedding_dim(feature)};
    }
    [[nodiscard]] std::span<const double> pair_params(std::size_t e, std::size_t f) const {
        return {params_.data() + interaction_index(e, f), interaction_.pair_size(e, f)};
    }
    [[nodiscard]] std::span<const double> params() const noexcept { return params_; }

    /// Mutable views. Each call invalidates outstanding forward traces.
    std::span<double> mutable_params() noexcept {
        ++revision_;
        return params_;
    }
    void set_bias(double v) { mutable_params()[0] = v; }
    void set_linear(std::size_t feature, double v) { mutable_params()[linear_index(feature)] = v; }
    std::span<double> mutable_embedding(std::size_t feature) {
        return mutable_params().subspan(embedding_index(feature), embedding_dim(feature));
    }
    std::span<double> mutable_pair_params(std::size_t e, std::size_t f) {
        return mutable_params().subspan(interaction_index(e, f), interaction_.pair_size(e, f));
    }

    /// Regression targets are modelled as (y - shift) / scale.
    [[nodiscard]] double target_shift() const noexcept { return target_shift_; }
    [[nodiscard]] double target_scale() const noexcept { return target_scale_; }
    void set_target_standardization(double shift, double scale) {
        if (!std::isfinite(shift) || !std::isfinite(scale) || !(scale > 0.0)) {
            throw ConfigError("target standardization needs a finite shift and a positive scale");
        }
        target_shift_ = shift;
        target_scale_ = scale;
    }

    /// Gaussian embeddings with standard deviation 1/sqrt(k_f) (or `stddev` if given),
    /// zero bias and linear weights, interaction parameters at their identity values.
    void initialize(std::uint64_t seed, std::optional<double> stddev = std::nullopt) {
        std::mt19937_64 rng(seed);
        auto p = mutable_params();
        std::fill(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(interaction_offset_), 0.0);
        for (std::size_t i = 0; i < num_features(); ++i) {
            const std::size_t k = embedding_dim(i);
            if (k == 0) {
                continue;
            }
            std::normal_distribution<double> gauss(0.0, stddev.value_or(1.0 / std::sqrt(static_cast<double>(k))));
            for (auto& v : p.subspan(embedding_index(i), k)) {
                v = gauss(rng);
            }
        }
        reset_interaction();
    }

    friend bool operator==(const Model& a, const Model& b) {
        return a.schema_ == b.schema_ && a.interaction_ == b.interaction_ && a.reductions_ == b.reductions_ &&
               a.params_ == b.params_ && a.target_shift_ == b.target_shift_ && a.target_scale_ == b.target_scale_;
    }

private:
    // fwfm scalars start at 1, fmfm matrices at the identity padded to k_e x k_f.
    void reset_interaction() {
        ++revision_;
        const std::size_t m = interaction_.num_fields();
        for (std::size_t e = 0; e < m; ++e) {
            for (std::size_t f = e; f < m; ++f) {
                const std::size_t base = interaction_index(e, f);
                if (interaction_.variant() == Variant::fwfm) {
                    params_[base] = 1.0;
                } else if (interaction_.variant() == Variant::fmfm) {
                    const std::size_t ke = interaction_.dim(e);
                    const std::size_t kf = interaction_.dim(f);
                    for (std::size_t r = 0; r < ke; ++r) {
                        for (std::size_t c = 0; c < kf; ++c) {
                            params_[base + r * kf + c] = r == c ? 1.0 : 0.0;
                        }
                    }
                }
            }
        }
    }

    DatasetSchema schema_;
    InteractionSpec interaction_ = InteractionSpec::fm(0, 0);
    std::vector<Reduction> reductions_;
    std::vector<std::size_t> embedding_offsets_{1};
    std::size_t interaction_offset_ = 1;
    std::vector<double> params_{0.0};
    std::uint64_t revision_ = 0;
    double target_shift_ = 0.0;
    double target_scale_ = 1.0;
};

/// One post-reduction slot: a contiguous run of row entries of a single field.
struct Slot {
    std::size_t field = 0;
    std::size_t begin = 0;  ///< first entry (index into row.entries)
    std::size_t end = 0;    ///< one past the last entry
    std::size_t offset = 0; ///< start of this slot's vector in ForwardTrace::reduced
    std::size_t dim = 0;
};

/// Intermediate values of a forward pass, needed by backward.
struct ForwardTrace {
    std::vector<Slot> slots;
    std::vector<double> reduced;         ///< reduced embedding vectors, concatenated
    std::vector<double> reduced_linear;  ///< yhat per slot
    double score = 0.0;
    std::uint64_t model_revision = 0;
    std::uint64_t row_fingerprint = 0;

    [[nodiscard]] std::span<const double> vector(std::size_t slot) const {
        return {reduced.data() + slots[slot].offset, slots[slot].dim};
    }
};

/// Parameter gradient restricted to the parameters a row touches; `index`
/// is strictly increasing and refers to Model::params().
struct SparseGradient {
    std::vector<std::size_t> index;
    std::vector<double> value;

    [[nodiscard]] bool empty() const noexcept { return index.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return index.size(); }
    void push(std::size_t i, double v) {
        index.push_back(i);
        value.push_back(v);
    }
    void clear() noexcept {
        index.clear();
        value.clear();
    }
};

namespace detail {

inline std::uint64_t fingerprint(const EncodedRow& row) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(row.entries.size());
    for (const auto& e : row.entries) {
        mix(e.index);
        mix(e.field);
        mix(std::bit_cast<std::uint64_t>(e.value));
    }
    return h;
}

inline void check_row(const Model& model, const EncodedRow& row) {
    const auto& schema = model.schema();
    std::size_t prev_field = 0;
    for (std::size_t k = 0; k < row.entries.size(); ++k) {
        const auto& e = row.entries[k];
        if (e.field >= schema.num_fields()) {
            throw DataError("entry field id " + std::to_string(e.field) + " is not in the model schema");
        }
        const std::size_t lo = schema.offset(e.field);
        const std::size_t hi = lo + schema.field(e.field).width();
        if (e.index < lo || e.index >= hi) {
            throw DataError("feature index " + std::to_string(e.index) + " does not belong to field '" +
                            schema.field(e.field).name + "'");
        }
        if (k > 0 && (e.index <= row.entries[k - 1].index || e.field < prev_field)) {
            throw DataError("row entries must have strictly increasing feature indices");
        }
        prev_field = e.field;
    }
}

}  // namespace detail

/// Forward pass into a caller-owned trace (reused across calls to avoid allocation).
inline double forward(const Model& model, const EncodedRow& row, ForwardTrace& trace) {
    detail::check_row(model, row);
    const auto& spec = model.interaction();
    const auto params = model.params();

    trace.slots.clear();
    trace.reduced.clear();
    trace.reduced_linear.clear();
    const auto& entries = row.entries;
    for (std::size_t k = 0; k < entries.size();) {
        const std::size_t f = entries[k].field;
        std::size_t end = k + 1;
        if (model.reduction(f) == Reduction::sum) {
            while (end < entries.size() && entries[end].field == f) {
                ++end;
            }
        }
        Slot slot{f, k, end, trace.reduced.size(), spec.dim(f)};
        trace.reduced.resize(trace.reduced.size() + slot.dim, 0.0);
        double yhat = 0.0;
        for (std::size_t j = k; j < end; ++j) {
            const double x = entries[j].value;
            yhat += x * params[model.linear_index(entries[j].index)];
            const auto v = model.embedding(entries[j].index);
            for (std::size_t r = 0; r < slot.dim; ++r) {
                trace.reduced[slot.offset + r] += x * v[r];
            }
        }
        trace.slots.push_back(slot);
        trace.reduced_linear.push_back(yhat);
        k = end;
    }

    double score = model.bias();
    for (double y : trace.reduced_linear) {
        score += y;
    }
    const std::size_t num_slots = trace.slots.size();
    for (std::size_t s = 0; s < num_slots; ++s) {
        const std::size_t e = trace.slots[s].field;
        const auto a = trace.vector(s);
        for (std::size_t t = s + 1; t < num_slots; ++t) {
            const std::size_t f = trace.slots[t].field;
            score += spec.inner(e, f, a, trace.vector(t), model.pair_params(e, f));
        }
    }
    trace.score = score;
    trace.model_revision = model.revision();
    trace.row_fingerprint = detail::fingerprint(row);
    return score;
}

inline std::pair<double, ForwardTrace> forward(const Model& model, const EncodedRow& row) {
    ForwardTrace trace;
    const double score = forward(model, row, trace);
    return {score, std::move(trace)};
}

inline double score(const Model& model, const EncodedRow& row) {
    ForwardTrace trace;
    return forward(model, row, trace);
}

/// d(loss)/d(params) for the parameters touched by `row`, given d(loss)/d(score).
/// `trace` must come from forward(model, row) with the model unchanged since.
inline void backward(const Model& model, const EncodedRow& row, const ForwardTrace& trace, double dloss_dscore,
                     SparseGradient& grad) {
    if (trace.model_revision != model.revision() || trace.row_fingerprint != detail::fingerprint(row)) {
        throw Error("backward: forward trace does not match the current model and row");
    }
    grad.clear();
    if (dloss_dscore == 0.0) {
        return;
    }
    const auto& spec = model.interaction();
    const auto& entries = row.entries;
    const std::size_t num_slots = trace.slots.size();

    // Gradient of the score w.r.t. every reduced vector, plus pair parameter gradients.
    std::vector<double> slot_grad(trace.reduced.size(), 0.0);
    std::map<std::size_t, std::vector<double>> pair_grad;
    for (std::size_t s = 0; s < num_slots; ++s) {
        const auto& ss = trace.slots[s];
        const auto a = trace.vector(s);
        for (std::size_t t = s + 1; t < num_slots; ++t) {
            const auto& st = trace.slots[t];
            const auto b = trace.vector(t);
            const auto pair = model.pair_params(ss.field, st.field);
            spec.accumulate_vector_grad(ss.field, st.field, a, b, pair, 1.0,
                                        std::span<double>(slot_grad.data() + ss.offset, ss.dim),
                                        std::span<double>(slot_grad.data() + st.offset, st.dim));
            if (spec.learned()) {
                auto& g = pair_grad[model.interaction_index(ss.field, st.field)];
                g.resize(pair.size(), 0.0);
                spec.accumulate_pair_grad(a, b, dloss_dscore, g);
            }
        }
    }

    grad.push(0, dloss_dscore);
    for (const auto& e : entries) {
        grad.push(model.linear_index(e.index), e.value * dloss_dscore);
    }
    for (const auto& slot : trace.slots) {
        for (std::size_t j = slot.begin; j < slot.end; ++j) {
            const double scale = entries[j].value * dloss_dscore;
            const std::size_t base = model.embedding_index(entries[j].index);
            for (std::size_t r = 0; r < slot.dim; ++r) {
                grad.push(base + r, scale * slot_grad[slot.offset + r]);
            }
        }
    }
    for (const auto& [base, g] : pair_grad) {
        for (std::size_t r = 0; r < g.size(); ++r) {
            grad.push(base + r, g[r]);
        }
    }
}

inline SparseGradient backward(const Model& model, const EncodedRow& row, const ForwardTrace& trace,
                               double dloss_dscore) {
    SparseGradient grad;
    backward(model, row, trace, dloss_dscore, grad);
    return grad;
}

/// Reduced linear term and reduced embedding of one field's value, exactly as
/// a forward pass would compute them for a sum-reduced slot.
struct FieldReduction {
    double linear = 0.0;
    std::vector<double> embedding;
};

inline FieldReduction reduce_field(const Model& model, std::size_t field, const RawValue& value) {
    const auto& schema = model.schema();
    std::vector<FeatureEntry> entries;
    encode_field(schema.field(field), field, schema.offset(field), value, entries);
    FieldReduction out;
    out.embedding.assign(model.interaction().dim(field), 0.0);
    for (const auto& e : entries) {
        out.linear += e.value * model.linear(e.index);
        const auto v = model.embedding(e.index);
        for (std::size_t r = 0; r < v.size(); ++r) {
            out.embedding[r] += e.value * v[r];
        }
    }
    return out;
}

/// Scores with field `field` swept over `grid` (raw values) and every other
/// field fixed to its value in `segment`.
inline std::vector<double> segmentized_curve(const Model& model, const RawRow& segment, std::size_t field,
                                             std::span<const double> grid) {
    if (field >= model.schema().num_fields()) {
        throw ConfigError("segmentized_curve: field id out of range");
    }
    RawRow raw = segment;
    std::vector<double> curve;
    curve.reserve(grid.size());
    ForwardTrace trace;
    for (double z : grid) {
        raw.at(field) = z;
        curve.push_back(forward(model, encode_row(model.schema(), raw), trace));
    }
    return curve;
}

}  // namespace splinefm
