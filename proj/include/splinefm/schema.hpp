/**
 * @file schema.hpp
 * @brief Field schemas and encoding of raw rows into sparse feature vectors.
 *
 * Each field owns a contiguous range of global feature indices:
 *  - categorical fields one-hot encode a vocabulary plus one reserved
 *    "unknown" slot;
 *  - binned numerical fields one-hot encode the interval containing z
 *    (right-open intervals, last interval closed, out-of-range clamped);
 *  - continuous numerical fields emit the nonzero B-spline values of T(z).
 */
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "splinefm/error.hpp"
#include "splinefm/spline_basis.hpp"
#include "splinefm/transforms.hpp"

namespace splinefm {

enum class Reduction { identity, sum };
enum class LabelKind { binary, real };
enum class MissingPolicy { median, error };

inline std::string_view to_string(Reduction r) { return r == Reduction::sum ? "sum" : "identity"; }
inline std::string_view to_string(LabelKind k) { return k == LabelKind::binary ? "binary" : "real"; }
inline std::string_view to_string(MissingPolicy p) { return p == MissingPolicy::median ? "median" : "error"; }

struct CategoricalEncoding {
    std::vector<std::string> vocabulary;
    bool unknown_slot = true;  ///< reserve index vocabulary.size() for unseen values

    explicit CategoricalEncoding(std::vector<std::string> vocab, bool with_unknown_slot = true)
        : vocabulary(std::move(vocab)), unknown_slot(with_unknown_slot) {
        if (vocabulary.empty()) {
            throw ConfigError("categorical vocabulary is empty");
        }
        for (std::size_t i = 0; i < vocabulary.size(); ++i) {
            if (!lookup.emplace(vocabulary[i], i).second) {
                throw ConfigError("categorical vocabulary contains duplicate value '" + vocabulary[i] + "'");
            }
        }
    }

    [[nodiscard]] std::size_t width() const noexcept { return vocabulary.size() + (unknown_slot ? 1 : 0); }

    /// Vocabulary index of `value`, if present.
    [[nodiscard]] std::optional<std::size_t> find(std::string_view value) const {
        const auto it = lookup.find(value);
        if (it != lookup.end()) {
            return it->second;
        }
        return std::nullopt;
    }

    friend bool operator==(const CategoricalEncoding& a, const CategoricalEncoding& b) {
        return a.vocabulary == b.vocabulary && a.unknown_slot == b.unknown_slot;
    }

private:
    std::map<std::string, std::size_t, std::less<>> lookup;
};

struct BinnedEncoding {
    std::vector<double> boundaries;  ///< N+1 strictly increasing edges of N bins
    double missing_value = 0.0;      ///< raw value substituted for missing input

    BinnedEncoding(std::vector<double> edges, double missing) : boundaries(std::move(edges)), missing_value(missing) {
        if (boundaries.size() < 2) {
            throw ConfigError("binned field needs at least two boundaries");
        }
        for (std::size_t j = 0; j < boundaries.size(); ++j) {
            if (!std::isfinite(boundaries[j]) || (j > 0 && !(boundaries[j] > boundaries[j - 1]))) {
                throw ConfigError("bin boundaries must be finite and strictly increasing");
            }
        }
        if (!std::isfinite(missing_value)) {
            throw ConfigError("binned field missing value must be finite");
        }
    }

    [[nodiscard]] std::size_t width() const noexcept { return boundaries.size() - 1; }

    [[nodiscard]] std::size_t bin_of(double z) const {
        const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), z);
        const auto pos = static_cast<std::ptrdiff_t>(it - boundaries.begin()) - 1;
        return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(pos, 0, static_cast<std::ptrdiff_t>(width()) - 1));
    }

    friend bool operator==(const BinnedEncoding&, const BinnedEncoding&) = default;
};

struct ContinuousEncoding {
    FieldTransform transform;
    SplineBasis basis;

    [[nodiscard]] std::size_t width() const noexcept { return basis.num_functions(); }
    friend bool operator==(const ContinuousEncoding&, const ContinuousEncoding&) = default;
};

using FieldKind = std::variant<CategoricalEncoding, BinnedEncoding, ContinuousEncoding>;

struct FieldSchema {
    std::string name;
    FieldKind kind;
    MissingPolicy missing = MissingPolicy::median;

    [[nodiscard]] bool is_categorical() const noexcept { return std::holds_alternative<CategoricalEncoding>(kind); }
    [[nodiscard]] bool is_binned() const noexcept { return std::holds_alternative<BinnedEncoding>(kind); }
    [[nodiscard]] bool is_continuous() const noexcept { return std::holds_alternative<ContinuousEncoding>(kind); }
    [[nodiscard]] bool is_numerical() const noexcept { return !is_categorical(); }

    [[nodiscard]] std::size_t width() const {
        return std::visit([](const auto& k) { return k.width(); }, kind);
    }

    /// Continuous fields are summed; every other kind keeps one slot per entry.
    [[nodiscard]] Reduction reduction() const noexcept {
        return is_continuous() ? Reduction::sum : Reduction::identity;
    }

    [[nodiscard]] const ContinuousEncoding& continuous() const { return std::get<ContinuousEncoding>(kind); }
    [[nodiscard]] const BinnedEncoding& binned() const { return std::get<BinnedEncoding>(kind); }
    [[nodiscard]] const CategoricalEncoding& categorical() const { return std::get<CategoricalEncoding>(kind); }

    friend bool operator==(const FieldSchema&, const FieldSchema&) = default;
};

inline FieldSchema categorical_field(std::string name, std::vector<std::string> vocabulary,
                                     bool unknown_slot = true) {
    return {std::move(name), CategoricalEncoding(std::move(vocabulary), unknown_slot), MissingPolicy::median};
}

inline FieldSchema binned_field(std::string name, std::vector<double> boundaries,
                                std::optional<double> missing_value = std::nullopt) {
    const double fill = missing_value.value_or(boundaries.empty() ? 0.0 : 0.5 * (boundaries.front() + boundaries.back()));
    return {std::move(name), BinnedEncoding(std::move(boundaries), fill), MissingPolicy::median};
}

inline FieldSchema continuous_field(std::string name, FieldTransform transform, SplineBasis basis) {
    return {std::move(name), ContinuousEncoding{std::move(transform), std::move(basis)}, MissingPolicy::median};
}

struct FeatureEntry {
    std::size_t index = 0;  ///< global feature index
    double value = 0.0;
    std::size_t field = 0;

    friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

struct EncodedRow {
    std::vector<FeatureEntry> entries;  ///< strictly increasing index, grouped by field
    double label = 0.0;

    friend bool operator==(const EncodedRow&, const EncodedRow&) = default;
};

/// Missing, numeric, or textual raw cell.
using RawValue = std::variant<std::monostate, double, std::string>;
using RawRow = std::vector<RawValue>;

class DatasetSchema {
public:
    DatasetSchema() = default;

    DatasetSchema(std::vector<FieldSchema> fields, LabelKind label_kind, std::string label_name = "label")
        : fields_(std::move(fields)), label_kind_(label_kind), label_name_(std::move(label_name)) {
        std::set<std::string, std::less<>> names;
        offsets_.assign(1, 0);
        for (const auto& f : fields_) {
            if (f.name.empty()) {
                throw ConfigError("field names must be non-empty");
            }
            if (!names.insert(f.name).second) {
                throw ConfigError("duplicate field name '" + f.name + "'");
            }
            offsets_.push_back(offsets_.back() + f.width());
        }
    }

    [[nodiscard]] std::span<const FieldSchema> fields() const noexcept { return fields_; }
    [[nodiscard]] const FieldSchema& field(std::size_t id) const { return fields_.at(id); }
    [[nodiscard]] std::size_t num_fields() const noexcept { return fields_.size(); }
    [[nodiscard]] std::size_t total_features() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
    [[nodiscard]] std::size_t offset(std::size_t field_id) const { return offsets_.at(field_id); }
    [[nodiscard]] LabelKind label_kind() const noexcept { return label_kind_; }
    [[nodiscard]] const std::string& label_name() const noexcept { return label_name_; }

    [[nodiscard]] std::optional<std::size_t> find_field(std::string_view name) const {
        for (std::size_t i = 0; i < fields_.size(); ++i) {
            if (fields_[i].name == name) {
                return i;
            }
        }
        return std::nullopt;
    }

    [[nodiscard]] std::size_t field_id(std::string_view name) const {
        if (auto id = find_field(name)) {
            return *id;
        }
        throw ConfigError("unknown field '" + std::string(name) + "'");
    }

    /// Field owning a global feature index.
    [[nodiscard]] std::size_t field_of_feature(std::size_t index) const {
        if (index >= total_features()) {
            throw DataError("feature index " + std::to_string(index) + " out of range");
        }
        const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
        return static_cast<std::size_t>(it - offsets_.begin()) - 1;
    }

    /// Copy with one field replaced; feature offsets are recomputed.
    [[nodiscard]] DatasetSchema with_field(std::size_t id, FieldSchema replacement) const {
        auto fields = fields_;
        fields.at(id) = std::move(replacement);
        return {std::move(fields), label_kind_, label_name_};
    }

    friend bool operator==(const DatasetSchema& a, const DatasetSchema& b) {
        return a.fields_ == b.fields_ && a.label_kind_ == b.label_kind_ && a.label_name_ == b.label_name_;
    }

private:
    std::vector<FieldSchema> fields_;
    std::vector<std::size_t> offsets_{0};
    LabelKind label_kind_ = LabelKind::binary;
    std::string label_name_ = "label";
};

// ---------------------------------------------------------------------------
// Raw value parsing
// ---------------------------------------------------------------------------

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline bool is_missing_token(std::string_view s) {
    s = trim(s);
    return s.empty() || s == "NA" || s == "N/A" || s == "NaN" || s == "nan" || s == "?" || s == "null";
}

/// Parses a finite decimal number; nullopt for anything else.
inline std::optional<double> parse_number(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value) || text.empty()) {
        return std::nullopt;
    }
    return value;
}

inline std::string format_number(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return {buf, ptr};
}

namespace detail {

/// Numeric value of a raw cell, or nullopt if missing. Throws DataError naming the field.
inline std::optional<double> numeric_value(const RawValue& raw, const std::string& field) {
    if (std::holds_alternative<std::monostate>(raw)) {
        return std::nullopt;
    }
    if (const auto* d = std::get_if<double>(&raw)) {
        if (std::isnan(*d)) {
            return std::nullopt;
        }
        if (!std::isfinite(*d)) {
            throw DataError("field '" + field + "': non-finite value");
        }
        return *d;
    }
    const auto& text = std::get<std::string>(raw);
    if (is_missing_token(text)) {
        return std::nullopt;
    }
    if (auto v = parse_number(text)) {
        return v;
    }
    throw DataError("field '" + field + "': cannot parse '" + text + "' as a number");
}

}  // namespace detail

/// Appends the entries of one field. `offset` is the field's first global index.
inline void encode_field(const FieldSchema& field, std::size_t field_id, std::size_t offset, const RawValue& raw,
                         std::vector<FeatureEntry>& out) {
    if (const auto* cat = std::get_if<CategoricalEncoding>(&field.kind)) {
        std::optional<std::size_t> idx;
        if (const auto* s = std::get_if<std::string>(&raw)) {
            idx = cat->find(trim(*s));
        } else if (const auto* d = std::get_if<double>(&raw)) {
            idx = cat->find(format_number(*d));
        }
        if (!idx) {
            if (!cat->unknown_slot) {
                throw DataError("field '" + field.name + "': value not in the vocabulary and no unknown slot");
            }
            idx = cat->vocabulary.size();
        }
        out.push_back({offset + *idx, 1.0, field_id});
        return;
    }

    const auto value = detail::numeric_value(raw, field.name);
    if (!value && field.missing == MissingPolicy::error) {
        throw DataError("field '" + field.name + "': missing value");
    }

    if (const auto* bin = std::get_if<BinnedEncoding>(&field.kind)) {
        const double z = value.value_or(bin->missing_value);
        out.push_back({offset + bin->bin_of(z), 1.0, field_id});
        return;
    }

    const auto& cont = std::get<ContinuousEncoding>(field.kind);
    // Missing values sit at the transform's median point.
    const double u = value ? cont.transform.apply(*value) : 0.5;
    std::array<double, SplineBasis::kMaxDegree + 1> window{};
    const std::size_t order = cont.basis.degree() + 1;
    const std::size_t first = cont.basis.eval_into(u, std::span<double>(window.data(), order));
    for (std::size_t r = 0; r < order; ++r) {
        if (window[r] != 0.0) {
            out.push_back({offset + first + r, window[r], field_id});
        }
    }
}

/// Encodes one raw row; raw[i] is the value of field i.
inline EncodedRow encode_row(const DatasetSchema& schema, const RawRow& raw, double label = 0.0) {
    if (raw.size() != schema.num_fields()) {
        throw DataError("row has " + std::to_string(raw.size()) + " values but the schema has " +
                        std::to_string(schema.num_fields()) + " fields");
    }
    EncodedRow row;
    row.label = label;
    row.entries.reserve(schema.num_fields() + 4);
    for (std::size_t f = 0; f < schema.num_fields(); ++f) {
        encode_field(schema.field(f), f, schema.offset(f), raw[f], row.entries);
    }
    return row;
}

// ---------------------------------------------------------------------------
// Delimited text tables
// ---------------------------------------------------------------------------

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::optional<std::size_t> find_column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        return std::nullopt;
    }

    [[nodiscard]] std::size_t column(std::string_view name) const {
        if (auto c = find_column(name)) {
            return *c;
        }
        throw ConfigError("column '" + std::string(name) + "' not found in the data header");
    }
};

/// Splits one line; double-quoted cells may contain the delimiter and "" escapes.
inline std::vector<std::string> split_delimited(std::string_view line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell.push_back(c);
            }
        } else if (c == '"' && cell.empty()) {
            quoted = true;
        } else if (c == delimiter) {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    if (!cell.empty() && cell.back() == '\r') {
        cell.pop_back();
    }
    cells.push_back(std::move(cell));
    return cells;
}

inline Table read_delimited(std::istream& in, char delimiter = ',') {
    Table table;
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("data file is empty (a header row is required)");
    }
    table.header = split_delimited(line, delimiter);
    for (auto& h : table.header) {
        h = std::string(trim(h));
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto cells = split_delimited(line, delimiter);
        if (cells.size() != table.header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                            " cells, found " + std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Schema inference
// ---------------------------------------------------------------------------

enum class FieldKindTag { categorical, binned, continuous };
enum class BinningMode { uniform, quantile };

/// Declaration of one field; only the members relevant to `kind` are used.
struct FieldSpec {
    std::string name;
    FieldKindTag kind = FieldKindTag::continuous;
    std::size_t bins = 10;
    BinningMode binning = BinningMode::uniform;
    std::size_t num_functions = 9;
    std::size_t degree = 3;
    TransformKind transform = TransformKind::quantile;
    std::size_t resolution = QuantileTransform::kDefaultResolution;
    std::size_t max_fit_samples = QuantileTransform::kDefaultMaxSamples;
    MissingPolicy missing = MissingPolicy::median;
    bool unknown_slot = true;
};

/// Bin edges from a sample: equal width, or empirical quantiles with ties merged.
inline std::vector<double> sample_bin_boundaries(std::span<const double> values, std::size_t bins, BinningMode mode) {
    if (bins < 1) {
        throw ConfigError("bin count must be positive");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty() || !(sorted.back() > sorted.front())) {
        throw DataError("binning needs at least two distinct values");
    }
    std::vector<double> edges;
    edges.reserve(bins + 1);
    const double lo = sorted.front();
    const double hi = sorted.back();
    for (std::size_t j = 0; j <= bins; ++j) {
        const double level = static_cast<double>(j) / static_cast<double>(bins);
        double edge = 0.0;
        if (j == bins) {
            edge = hi;
        } else if (mode == BinningMode::uniform) {
            edge = lo + level * (hi - lo);
        } else {
            edge = detail::sorted_quantile(sorted, level);
        }
        if (edges.empty() || edge > edges.back()) {
            edges.push_back(edge);
        }
    }
    return edges;
}

inline double sample_median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return detail::sorted_quantile(values, 0.5);
}

/// Builds vocabularies, transforms, and bin boundaries from a sample table.
inline DatasetSchema infer_schema(const Table& table, std::span<const FieldSpec> specs, std::string_view label_column,
                                  LabelKind label_kind) {
    static_cast<void>(table.column(label_column));  // throws if absent
    std::vector<FieldSchema> fields;
    fields.reserve(specs.size());
    for (const auto& spec : specs) {
        const std::size_t col = table.column(spec.name);
        if (spec.name == label_column) {
            throw ConfigError("field '" + spec.name + "' is also the label column");
        }
        if (spec.kind == FieldKindTag::categorical) {
            std::set<std::string> seen;
            for (const auto& row : table.rows) {
                const auto v = trim(row[col]);
                if (!is_missing_token(v)) {
                    seen.emplace(v);
                }
            }
            if (seen.empty()) {
                throw DataError("field '" + spec.name + "' has no valid values");
            }
            fields.push_back(categorical_field(spec.name, {seen.begin(), seen.end()}, spec.unknown_slot));
            fields.back().missing = spec.missing;
            continue;
        }

        std::vector<double> values;
        values.reserve(table.rows.size());
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const auto& text = table.rows[r][col];
            if (is_missing_token(text)) {
                continue;
            }
            auto v = parse_number(text);
            if (!v) {
                throw DataError("row " + std::to_string(r + 1) + ", field '" + spec.name + "': cannot parse '" +
                                text + "' as a number");
            }
            values.push_back(*v);
        }
        if (values.empty()) {
            throw DataError("field '" + spec.name + "' has no valid values");
        }
        try {
            if (spec.kind == FieldKindTag::binned) {
                auto edges = sample_bin_boundaries(values, spec.bins, spec.binning);
                const double fill = sample_median(values);
                fields.push_back({spec.name, BinnedEncoding(std::move(edges), fill), spec.missing});
            } else {
                FieldTransform transform;
                switch (spec.transform) {
                    case TransformKind::identity: transform = IdentityTransform{}; break;
                    case TransformKind::affine: transform = AffineTransform::fit(values); break;
                    case TransformKind::quantile:
                        transform = QuantileTransform::fit_subsampled(values, spec.resolution, spec.max_fit_samples);
                        break;
                }
                fields.push_back({spec.name,
                                  ContinuousEncoding{std::move(transform),
                                                     SplineBasis::build_uniform(spec.num_functions, spec.degree)},
                                  spec.missing});
            }
        } catch (const DataError& e) {
            throw DataError("field '" + spec.name + "': " + e.what());
        }
    }
    return {std::move(fields), label_kind, std::string(label_column)};
}

/// Label cell to number; binary labels must be 0 or 1.
inline double parse_label(std::string_view text, LabelKind kind) {
    const auto v = parse_number(text);
    if (!v) {
        throw DataError("cannot parse label '" + std::string(text) + "'");
    }
    if (kind == LabelKind::binary && *v != 0.0 && *v != 1.0) {
        throw DataError("binary label must be 0 or 1, got '" + std::string(text) + "'");
    }
    return *v;
}

/// Encodes every table row. Errors carry the 1-based data row number.
inline std::vector<EncodedRow> encode_table(const DatasetSchema& schema, const Table& table) {
    const std::size_t label_col = table.column(schema.label_name());
    std::vector<std::size_t> cols;
    cols.reserve(schema.num_fields());
    for (const auto& f : schema.fields()) {
        cols.push_back(table.column(f.name));
    }
    std::vector<EncodedRow> rows;
    rows.reserve(table.rows.size());
    RawRow raw(schema.num_fields());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        try {
            for (std::size_t f = 0; f < cols.size(); ++f) {
                raw[f] = table.rows[r][cols[f]];
            }
            rows.push_back(encode_row(schema, raw, parse_label(table.rows[r][label_col], schema.label_kind())));
        } catch (const DataError& e) {
            throw DataError("data row " + std::to_string(r + 1) + ": " + e.what());
        }
    }
    return rows;
}

}  // namespace splinefm
