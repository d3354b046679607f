/**
 * @file serialization.hpp
 * @brief Versioned JSON documents for schemas and models.
 *
 * Doubles are written in shortest round-trip form, so load(save(m)) == m
 * bit for bit. Readers are strict: unknown keys and wrong types are errors.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "splinefm/error.hpp"
#include "splinefm/model.hpp"
#include "splinefm/schema.hpp"

namespace splinefm {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::string_view kModelFormatName = "splinefm-model";

namespace json_util {

/// Rejects keys outside `allowed`; `where` names the object in messages.
template <typename ErrorT = ConfigError>
void expect_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) {
        throw ErrorT(std::string(where) + ": expected an object");
    }
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) {
            ok = ok || key == a;
        }
        if (!ok) {
            throw ErrorT(std::string(where) + ": unknown key '" + key + "'");
        }
    }
}

template <typename T, typename ErrorT = ConfigError>
T get(const json& obj, std::string_view key, std::string_view where) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ErrorT(std::string(where) + ": missing key '" + std::string(key) + "'");
    }
    try {
        return it->template get<T>();
    } catch (const json::exception&) {
        throw ErrorT(std::string(where) + ": key '" + std::string(key) + "' has the wrong type");
    }
}

template <typename T, typename ErrorT = ConfigError>
T get_or(const json& obj, std::string_view key, T fallback, std::string_view where) {
    if (!obj.contains(key)) {
        return fallback;
    }
    return get<T, ErrorT>(obj, key, where);
}

}  // namespace json_util

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

inline json to_json(const FieldTransform& t) {
    switch (t.kind()) {
        case TransformKind::identity: return {{"type", "identity"}};
        case TransformKind::affine: {
            const auto& a = std::get<AffineTransform>(t.variant());
            return {{"type", "minmax"}, {"lo", a.lo()}, {"hi", a.hi()}};
        }
        case TransformKind::quantile: {
            const auto& q = std::get<QuantileTransform>(t.variant());
            const auto pts = q.reference_points();
            return {{"type", "quantile"}, {"reference_points", std::vector<double>(pts.begin(), pts.end())}};
        }
    }
    return {};
}

inline json to_json(const FieldSchema& f) {
    json out{{"name", f.name}, {"missing", to_string(f.missing)}};
    if (f.is_categorical()) {
        out["kind"] = "categorical";
        out["vocabulary"] = f.categorical().vocabulary;
        out["unknown_slot"] = f.categorical().unknown_slot;
    } else if (f.is_binned()) {
        out["kind"] = "binned";
        out["boundaries"] = f.binned().boundaries;
        out["missing_value"] = f.binned().missing_value;
    } else {
        const auto& c = f.continuous();
        out["kind"] = "continuous";
        out["transform"] = to_json(c.transform);
        out["basis"] = {{"degree", c.basis.degree()}, {"num_functions", c.basis.num_functions()}};
    }
    return out;
}

inline json to_json(const DatasetSchema& schema) {
    json fields = json::array();
    for (const auto& f : schema.fields()) {
        fields.push_back(to_json(f));
    }
    return {{"label", schema.label_name()}, {"label_kind", to_string(schema.label_kind())}, {"fields", fields}};
}

inline json to_json(const InteractionSpec& spec) {
    return {{"variant", to_string(spec.variant())},
            {"dims", std::vector<std::size_t>(spec.dims().begin(), spec.dims().end())},
            {"block", spec.block()},
            {"learned", spec.learned()}};
}

inline json to_json(const Model& model) {
    json reductions = json::array();
    for (auto r : model.reductions()) {
        reductions.push_back(to_string(r));
    }
    const auto p = model.params();
    return {{"format", kModelFormatName},
            {"version", kModelFormatVersion},
            {"schema", to_json(model.schema())},
            {"interaction", to_json(model.interaction())},
            {"reductions", reductions},
            {"target", {{"shift", model.target_shift()}, {"scale", model.target_scale()}}},
            {"params", std::vector<double>(p.begin(), p.end())}};
}

// ---------------------------------------------------------------------------
// Readers
// ---------------------------------------------------------------------------

inline FieldTransform transform_from_json(const json& j) {
    using json_util::get;
    const auto type = get<std::string>(j, "type", "transform");
    if (type == "identity") {
        json_util::expect_keys(j, {"type"}, "identity transform");
        return IdentityTransform{};
    }
    if (type == "minmax") {
        json_util::expect_keys(j, {"type", "lo", "hi"}, "minmax transform");
        return AffineTransform(get<double>(j, "lo", "minmax transform"), get<double>(j, "hi", "minmax transform"));
    }
    if (type == "quantile") {
        json_util::expect_keys(j, {"type", "reference_points"}, "quantile transform");
        return QuantileTransform(get<std::vector<double>>(j, "reference_points", "quantile transform"));
    }
    throw ConfigError("unknown transform type '" + type + "'");
}

inline MissingPolicy parse_missing_policy(std::string_view s) {
    if (s == "median") return MissingPolicy::median;
    if (s == "error") return MissingPolicy::error;
    throw ConfigError("unknown missing-value policy '" + std::string(s) + "' (expected median or error)");
}

inline LabelKind parse_label_kind(std::string_view s) {
    if (s == "binary") return LabelKind::binary;
    if (s == "real") return LabelKind::real;
    throw ConfigError("unknown label kind '" + std::string(s) + "' (expected binary or real)");
}

inline Reduction parse_reduction(std::string_view s) {
    if (s == "sum") return Reduction::sum;
    if (s == "identity") return Reduction::identity;
    throw ConfigError("unknown reduction '" + std::string(s) + "'");
}

inline FieldSchema field_from_json(const json& j) {
    using json_util::get;
    const auto name = get<std::string>(j, "name", "field");
    const std::string where = "field '" + name + "'";
    const auto kind = get<std::string>(j, "kind", where);
    const auto missing = parse_missing_policy(json_util::get_or<std::string>(j, "missing", "median", where));
    if (kind == "categorical") {
        json_util::expect_keys(j, {"name", "kind", "missing", "vocabulary", "unknown_slot"}, where);
        return {name,
                CategoricalEncoding(get<std::vector<std::string>>(j, "vocabulary", where),
                                    json_util::get_or<bool>(j, "unknown_slot", true, where)),
                missing};
    }
    if (kind == "binned") {
        json_util::expect_keys(j, {"name", "kind", "missing", "boundaries", "missing_value"}, where);
        return {name,
                BinnedEncoding(get<std::vector<double>>(j, "boundaries", where), get<double>(j, "missing_value", where)),
                missing};
    }
    if (kind == "continuous") {
        json_util::expect_keys(j, {"name", "kind", "missing", "transform", "basis"}, where);
        const auto& basis = j.at("basis");
        json_util::expect_keys(basis, {"degree", "num_functions"}, where + " basis");
        return {name,
                ContinuousEncoding{transform_from_json(j.at("transform")),
                                   SplineBasis::build_uniform(get<std::size_t>(basis, "num_functions", where),
                                                              get<std::size_t>(basis, "degree", where))},
                missing};
    }
    throw ConfigError(where + ": unknown kind '" + kind + "'");
}

inline DatasetSchema schema_from_json(const json& j) {
    json_util::expect_keys(j, {"label", "label_kind", "fields"}, "schema");
    std::vector<FieldSchema> fields;
    for (const auto& f : j.at("fields")) {
        fields.push_back(field_from_json(f));
    }
    return {std::move(fields), parse_label_kind(json_util::get<std::string>(j, "label_kind", "schema")),
            json_util::get<std::string>(j, "label", "schema")};
}

inline InteractionSpec interaction_from_json(const json& j) {
    using json_util::get;
    json_util::expect_keys(j, {"variant", "dims", "block", "learned"}, "interaction");
    const auto variant = parse_variant(get<std::string>(j, "variant", "interaction"));
    const auto dims = get<std::vector<std::size_t>>(j, "dims", "interaction");
    const auto block = get<std::size_t>(j, "block", "interaction");
    const bool learned = get<bool>(j, "learned", "interaction");
    InteractionSpec spec = InteractionSpec::fmfm(dims, learned);
    switch (variant) {
        case Variant::fm: spec = InteractionSpec::fm(dims.size(), dims.empty() ? 0 : dims.front()); break;
        case Variant::ffm: spec = InteractionSpec::ffm(dims.size(), block); break;
        case Variant::fwfm: spec = InteractionSpec::fwfm(dims.size(), dims.empty() ? 0 : dims.front(), learned); break;
        case Variant::fmfm: break;
    }
    if (!std::equal(spec.dims().begin(), spec.dims().end(), dims.begin(), dims.end())) {
        throw ConfigError("interaction: dims are inconsistent with the variant");
    }
    return spec;
}

inline Model model_from_json(const json& j) {
    using json_util::get;
    json_util::expect_keys(j, {"format", "version", "schema", "interaction", "reductions", "target", "params"},
                           "model");
    if (get<std::string>(j, "format", "model") != kModelFormatName) {
        throw ConfigError("not a splinefm model document");
    }
    const int version = get<int>(j, "version", "model");
    if (version != kModelFormatVersion) {
        throw ConfigError("unsupported model format version " + std::to_string(version));
    }
    std::vector<Reduction> reductions;
    for (const auto& r : j.at("reductions")) {
        reductions.push_back(parse_reduction(r.get<std::string>()));
    }
    Model model(schema_from_json(j.at("schema")), interaction_from_json(j.at("interaction")), std::move(reductions));
    const auto& target = j.at("target");
    json_util::expect_keys(target, {"shift", "scale"}, "model target");
    model.set_target_standardization(get<double>(target, "shift", "target"), get<double>(target, "scale", "target"));
    const auto params = get<std::vector<double>>(j, "params", "model");
    if (params.size() != model.num_params()) {
        throw ConfigError("model has " + std::to_string(params.size()) + " parameters, expected " +
                          std::to_string(model.num_params()));
    }
    std::copy(params.begin(), params.end(), model.mutable_params().begin());
    return model;
}

inline std::string dump_model(const Model& model) { return to_json(model).dump(1) + "\n"; }

inline void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write model file '" + path + "'");
    }
    out << dump_model(model);
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline Model load_model(const std::string& path) {
    try {
        return model_from_json(read_json_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("malformed model file '" + path + "': " + e.what());
    }
}

}  // namespace splinefm
