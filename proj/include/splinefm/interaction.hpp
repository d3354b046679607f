#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splinefm/error.hpp"

namespace splinefm {

enum class Variant { fm, ffm, fwfm, fmfm };

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::fm: return "fm";
        case Variant::ffm: return "ffm";
        case Variant::fwfm: return "fwfm";
        case Variant::fmfm: return "fmfm";
    }
    return "?";
}

inline Variant parse_variant(std::string_view s) {
    if (s == "fm") return Variant::fm;
    if (s == "ffm") return Variant::ffm;
    if (s == "fwfm") return Variant::fwfm;
    if (s == "fmfm") return Variant::fmfm;
    throw ConfigError("unknown model variant '" + std::string(s) + "' (expected fm, ffm, fwfm or fmfm)");
}

/// How two reduced vectors of fields e <= f interact.
///
///  fm    <a, b>
///  ffm   <a[block f], b[block e]>; each embedding is num_fields blocks of `block` values
///  fwfm  s_{e,f} <a, b>, one learned scalar per unordered field pair
///  fmfm  a^T M_{e,f} b, one k_e x k_f matrix per unordered field pair
///
/// Pairs with e == f occur only when a field keeps several slots (identity
/// reduction with more than one nonzero entry).
class InteractionSpec {
public:
    static InteractionSpec fm(std::size_t num_fields, std::size_t k) {
        return {Variant::fm, std::vector<std::size_t>(num_fields, k), 0, false};
    }
    static InteractionSpec ffm(std::size_t num_fields, std::size_t block) {
        return {Variant::ffm, std::vector<std::size_t>(num_fields, num_fields * block), block, false};
    }
    static InteractionSpec fwfm(std::size_t num_fields, std::size_t k, bool learned = true) {
        return {Variant::fwfm, std::vector<std::size_t>(num_fields, k), 0, learned};
    }
    static InteractionSpec fmfm(std::vector<std::size_t> dims, bool learned = true) {
        return {Variant::fmfm, std::move(dims), 0, learned};
    }

    [[nodiscard]] Variant variant() const noexcept { return variant_; }
    [[nodiscard]] std::size_t num_fields() const noexcept { return dims_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t field) const { return dims_.at(field); }
    [[nodiscard]] std::span<const std::size_t> dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t block() const noexcept { return block_; }
    [[nodiscard]] bool learned() const noexcept { return learned_; }

    /// Index of the unordered pair (e, f), e <= f, in the packed upper triangle.
    [[nodiscard]] std::size_t pair_index(std::size_t e, std::size_t f) const noexcept {
        const std::size_t m = dims_.size();
        return e * m - e * (e - 1) / 2 + (f - e);
    }
    [[nodiscard]] std::size_t num_pairs() const noexcept { return dims_.size() * (dims_.size() + 1) / 2; }

    /// Number of interaction parameters (stored after the embeddings).
    [[nodiscard]] std::size_t num_params() const noexcept {
        if (variant_ == Variant::fwfm) {
            return num_pairs();
        }
        if (variant_ == Variant::fmfm) {
            return pair_offsets_.empty() ? 0 : pair_offsets_.back();
        }
        return 0;
    }

    /// Offset of pair (e, f)'s parameters inside the interaction block.
    [[nodiscard]] std::size_t pair_offset(std::size_t e, std::size_t f) const noexcept {
        const std::size_t p = pair_index(e, f);
        return variant_ == Variant::fmfm ? pair_offsets_[p] : p;
    }
    [[nodiscard]] std::size_t pair_size(std::size_t e, std::size_t f) const noexcept {
        return variant_ == Variant::fmfm ? dims_[e] * dims_[f] : (variant_ == Variant::fwfm ? 1 : 0);
    }

    /// <a, b> under this pair's interaction; `pair` points at the pair's parameters.
    [[nodiscard]] double inner(std::size_t e, std::size_t f, std::span<const double> a, std::span<const double> b,
                               std::span<const double> pair) const noexcept {
        switch (variant_) {
            case Variant::fm: return dot(a.data(), b.data(), a.size());
            case Variant::fwfm: return pair[0] * dot(a.data(), b.data(), a.size());
            case Variant::ffm: return dot(a.data() + f * block_, b.data() + e * block_, block_);
            case Variant::fmfm: {
                const std::size_t ke = dims_[e];
                const std::size_t kf = dims_[f];
                double total = 0.0;
                for (std::size_t r = 0; r < ke; ++r) {
                    total += a[r] * dot(pair.data() + r * kf, b.data(), kf);
                }
                return total;
            }
        }
        return 0.0;
    }

    /// Adds scale * d<a,b>/da to ga and scale * d<a,b>/db to gb.
    void accumulate_vector_grad(std::size_t e, std::size_t f, std::span<const double> a, std::span<const double> b,
                                std::span<const double> pair, double scale, std::span<double> ga,
                                std::span<double> gb) const noexcept {
        switch (variant_) {
            case Variant::fm:
            case Variant::fwfm: {
                const double s = variant_ == Variant::fwfm ? scale * pair[0] : scale;
                for (std::size_t r = 0; r < a.size(); ++r) {
                    ga[r] += s * b[r];
                    gb[r] += s * a[r];
                }
                break;
            }
            case Variant::ffm: {
                const double* ab = a.data() + f * block_;
                const double* bb = b.data() + e * block_;
                double* gab = ga.data() + f * block_;
                double* gbb = gb.data() + e * block_;
                for (std::size_t r = 0; r < block_; ++r) {
                    gab[r] += scale * bb[r];
                    gbb[r] += scale * ab[r];
                }
                break;
            }
            case Variant::fmfm: {
                const std::size_t ke = dims_[e];
                const std::size_t kf = dims_[f];
                for (std::size_t r = 0; r < ke; ++r) {
                    const double* row = pair.data() + r * kf;
                    ga[r] += scale * dot(row, b.data(), kf);
                    for (std::size_t c = 0; c < kf; ++c) {
                        gb[c] += scale * a[r] * row[c];
                    }
                }
                break;
            }
        }
    }

    /// Adds scale * d<a,b>/d(pair parameters) to gpair (fwfm and fmfm only).
    void accumulate_pair_grad(std::span<const double> a, std::span<const double> b, double scale,
                              std::span<double> gpair) const noexcept {
        if (variant_ == Variant::fwfm) {
            gpair[0] += scale * dot(a.data(), b.data(), a.size());
        } else if (variant_ == Variant::fmfm) {
            const std::size_t kf = b.size();
            for (std::size_t r = 0; r < a.size(); ++r) {
                for (std::size_t c = 0; c < kf; ++c) {
                    gpair[r * kf + c] += scale * a[r] * b[c];
                }
            }
        }
    }

    friend bool operator==(const InteractionSpec& a, const InteractionSpec& b) {
        return a.variant_ == b.variant_ && a.dims_ == b.dims_ && a.block_ == b.block_ && a.learned_ == b.learned_;
    }

private:
    InteractionSpec(Variant variant, std::vector<std::size_t> dims, std::size_t block, bool learned)
        : variant_(variant), dims_(std::move(dims)), block_(block), learned_(learned) {
        if (variant_ == Variant::fmfm) {
            pair_offsets_.assign(1, 0);
            for (std::size_t e = 0; e < dims_.size(); ++e) {
                for (std::size_t f = e; f < dims_.size(); ++f) {
                    pair_offsets_.push_back(pair_offsets_.back() + dims_[e] * dims_[f]);
                }
            }
        }
        if (variant_ == Variant::fm || variant_ == Variant::ffm) {
            learned_ = false;
        }
    }

    static double dot(const double* a, const double* b, std::size_t n) noexcept {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total += a[i] * b[i];
        }
        return total;
    }

    Variant variant_ = Variant::fm;
    std::vector<std::size_t> dims_;
    std::size_t block_ = 0;
    bool learned_ = false;
    std::vector<std::size_t> pair_offsets_;
};

}  // namespace splinefm
