/**
 * @file config.hpp
 * @brief The JSON run-configuration document read by the command-line tool.
 *
 * Parsing is strict: unknown keys, wrong types and out-of-range values are
 * ConfigErrors naming the offending key. The original document is kept so a
 * run can snapshot it into its manifest and so sweeps can override values by
 * JSON pointer.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "splinefm/bin_export.hpp"
#include "splinefm/error.hpp"
#include "splinefm/interaction.hpp"
#include "splinefm/schema.hpp"
#include "splinefm/serialization.hpp"
#include "splinefm/synthetic.hpp"
#include "splinefm/training.hpp"

namespace splinefm {

inline constexpr int kConfigVersion = 1;

struct DataConfig {
    std::filesystem::path train;           ///< required by train and sweep
    std::optional<std::filesystem::path> test;
    char delimiter = ',';
    std::string label = "label";
    LabelKind label_kind = LabelKind::binary;
};

struct ModelConfig {
    Variant variant = Variant::ffm;
    std::size_t k = 4;                               ///< embedding size; per-field block size for ffm
    std::optional<std::vector<std::size_t>> dims;    ///< fmfm only: one size per field
    bool learned = true;                             ///< fwfm / fmfm: train the interaction parameters
};

struct ExportConfig {
    std::string field;
    BoundaryMode mode = BoundaryMode::inverse_cdf;
    std::size_t bins = kDefaultExportBins;
    std::vector<double> boundaries;  ///< explicit mode only
    MidpointSpace midpoints = MidpointSpace::raw;
};

struct SynthConfig {
    synthetic::ComparisonConfig comparison;
    std::vector<synthetic::Curve> curves = synthetic::SegmentCurves::defaults().curves();
    std::size_t grid_points = 401;
    bool write_datasets = true;
};

struct OutputConfig {
    std::filesystem::path dir = "out";
    bool svg = true;
};

struct SweepAxis {
    std::string pointer;       ///< JSON pointer into the config document
    std::vector<json> values;
};

struct SweepConfig {
    std::vector<SweepAxis> grid;
    std::vector<std::uint64_t> seeds;  ///< empty: the train seed only
};

struct RunConfig {
    json document;                       ///< as read, before defaults
    std::filesystem::path base_dir;      ///< relative paths resolve against this
    std::optional<DataConfig> data;
    std::vector<FieldSpec> fields;
    ModelConfig model;
    TrainConfig train;
    bool standardize_target = true;      ///< squared loss: train on (y - mean) / sd of the training labels
    std::optional<ExportConfig> export_bins;
    std::optional<SynthConfig> synth;
    OutputConfig output;
    std::optional<SweepConfig> sweep;

    [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.is_absolute() ? p : base_dir / p;
    }
};

namespace config_detail {

using json_util::expect_keys;
using json_util::get;
using json_util::get_or;

inline std::size_t get_count(const json& j, std::string_view key, std::size_t fallback, std::string_view where,
                             std::size_t minimum = 0) {
    if (!j.contains(key)) {
        return fallback;
    }
    const auto& v = j.at(std::string(key));
    if (!v.is_number_integer() || v.get<std::int64_t>() < static_cast<std::int64_t>(minimum)) {
        throw ConfigError(std::string(where) + ": '" + std::string(key) + "' must be an integer >= " +
                          std::to_string(minimum));
    }
    return v.get<std::size_t>();
}

inline TransformKind parse_transform_kind(std::string_view s) {
    if (s == "quantile") return TransformKind::quantile;
    if (s == "minmax") return TransformKind::affine;
    if (s == "identity") return TransformKind::identity;
    throw ConfigError("unknown transform '" + std::string(s) + "' (expected quantile, minmax or identity)");
}

inline FieldKindTag parse_field_kind(std::string_view s) {
    if (s == "categorical") return FieldKindTag::categorical;
    if (s == "binned") return FieldKindTag::binned;
    if (s == "continuous") return FieldKindTag::continuous;
    throw ConfigError("unknown field kind '" + std::string(s) + "' (expected categorical, binned or continuous)");
}

inline BinningMode parse_binning(std::string_view s) {
    if (s == "uniform") return BinningMode::uniform;
    if (s == "quantile") return BinningMode::quantile;
    throw ConfigError("unknown binning '" + std::string(s) + "' (expected uniform or quantile)");
}

/// Applies the keys present in `j` on top of `spec`. Shared by field entries and schema defaults.
inline void apply_field_keys(const json& j, FieldSpec& spec, std::string_view where) {
    if (j.contains("kind")) spec.kind = parse_field_kind(get<std::string>(j, "kind", where));
    spec.bins = get_count(j, "bins", spec.bins, where, 1);
    if (j.contains("binning")) spec.binning = parse_binning(get<std::string>(j, "binning", where));
    spec.degree = get_count(j, "degree", spec.degree, where);
    if (j.contains("num_functions") && j.contains("intervals")) {
        throw ConfigError(std::string(where) + ": give either 'num_functions' or 'intervals', not both");
    }
    spec.num_functions = get_count(j, "num_functions", spec.num_functions, where, 1);
    if (j.contains("intervals")) {
        spec.num_functions = get_count(j, "intervals", 0, where, 1) + spec.degree;
    }
    if (j.contains("transform")) spec.transform = parse_transform_kind(get<std::string>(j, "transform", where));
    spec.resolution = get_count(j, "resolution", spec.resolution, where, 1);
    spec.max_fit_samples = get_count(j, "max_fit_samples", spec.max_fit_samples, where, 1);
    if (j.contains("missing")) spec.missing = parse_missing_policy(get<std::string>(j, "missing", where));
    spec.unknown_slot = get_or<bool>(j, "unknown_slot", spec.unknown_slot, where);
}

#define SPLINEFM_FIELD_KEYS                                                                                        \
    "kind", "bins", "binning", "degree", "num_functions", "intervals", "transform", "resolution", "max_fit_samples", \
        "missing", "unknown_slot"

inline std::vector<FieldSpec> parse_schema(const json& j) {
    expect_keys(j, {"defaults", "fields"}, "schema");
    FieldSpec defaults;
    if (j.contains("defaults")) {
        expect_keys(j.at("defaults"), {SPLINEFM_FIELD_KEYS}, "schema.defaults");
        apply_field_keys(j.at("defaults"), defaults, "schema.defaults");
    }
    if (!j.contains("fields") || !j.at("fields").is_array() || j.at("fields").empty()) {
        throw ConfigError("schema: 'fields' must be a non-empty array");
    }
    std::vector<FieldSpec> out;
    std::set<std::string> names;
    for (const auto& f : j.at("fields")) {
        FieldSpec spec = defaults;
        if (f.is_string()) {
            spec.name = f.get<std::string>();
        } else {
            spec.name = get<std::string>(f, "name", "schema field");
            const std::string where = "schema field '" + spec.name + "'";
            expect_keys(f, {"name", SPLINEFM_FIELD_KEYS}, where);
            apply_field_keys(f, spec, where);
        }
        if (!names.insert(spec.name).second) {
            throw ConfigError("schema: field '" + spec.name + "' is declared more than once");
        }
        out.push_back(std::move(spec));
    }
    return out;
}

#undef SPLINEFM_FIELD_KEYS

inline DataConfig parse_data(const json& j) {
    expect_keys(j, {"train", "test", "delimiter", "label", "label_kind"}, "data");
    DataConfig d;
    d.train = get<std::string>(j, "train", "data");
    if (j.contains("test")) d.test = get<std::string>(j, "test", "data");
    const auto delim = get_or<std::string>(j, "delimiter", ",", "data");
    if (delim == "\\t" || delim == "tab") {
        d.delimiter = '\t';
    } else if (delim.size() == 1) {
        d.delimiter = delim[0];
    } else {
        throw ConfigError("data: 'delimiter' must be a single character or \"tab\"");
    }
    d.label = get_or<std::string>(j, "label", d.label, "data");
    if (j.contains("label_kind")) d.label_kind = parse_label_kind(get<std::string>(j, "label_kind", "data"));
    return d;
}

inline ModelConfig parse_model(const json& j) {
    expect_keys(j, {"variant", "k", "dims", "learned"}, "model");
    ModelConfig m;
    if (j.contains("variant")) m.variant = parse_variant(get<std::string>(j, "variant", "model"));
    m.k = get_count(j, "k", m.k, "model");  // k = 0 is a linear-only model
    if (j.contains("dims")) {
        if (m.variant != Variant::fmfm) {
            throw ConfigError("model: 'dims' is only valid for the fmfm variant");
        }
        m.dims = get<std::vector<std::size_t>>(j, "dims", "model");
    }
    m.learned = get_or<bool>(j, "learned", m.learned, "model");
    return m;
}

/// Keys on top of `base`. `loss` is left untouched when absent.
inline TrainConfig parse_train(const json& j, TrainConfig base, std::string_view where, bool* standardize = nullptr) {
    if (standardize != nullptr) {
        expect_keys(j, {"loss", "optimizer", "step_size", "adagrad_epsilon", "batch_size", "epochs", "l2", "seed",
                        "holdout_fraction", "shuffle", "keep_best", "init_stddev", "standardize_target"},
                    where);
        *standardize = get_or<bool>(j, "standardize_target", *standardize, where);
    } else {
        expect_keys(j, {"loss", "optimizer", "step_size", "adagrad_epsilon", "batch_size", "epochs", "l2", "seed",
                        "holdout_fraction", "shuffle", "keep_best", "init_stddev"},
                    where);
    }
    if (j.contains("loss")) base.loss = parse_loss(get<std::string>(j, "loss", where));
    if (j.contains("optimizer")) base.optimizer = parse_optimizer(get<std::string>(j, "optimizer", where));
    base.step_size = get_or<double>(j, "step_size", base.step_size, where);
    base.adagrad_epsilon = get_or<double>(j, "adagrad_epsilon", base.adagrad_epsilon, where);
    base.batch_size = get_count(j, "batch_size", base.batch_size, where, 1);
    base.epochs = get_count(j, "epochs", base.epochs, where, 1);
    base.l2 = get_or<double>(j, "l2", base.l2, where);
    base.seed = get_or<std::uint64_t>(j, "seed", base.seed, where);
    base.holdout_fraction = get_or<double>(j, "holdout_fraction", base.holdout_fraction, where);
    base.shuffle = get_or<bool>(j, "shuffle", base.shuffle, where);
    base.keep_best = get_or<bool>(j, "keep_best", base.keep_best, where);
    if (j.contains("init_stddev")) base.init_stddev = get<double>(j, "init_stddev", where);
    base.validate();
    return base;
}

inline ExportConfig parse_export(const json& j) {
    expect_keys(j, {"field", "mode", "bins", "boundaries", "midpoints"}, "export");
    ExportConfig e;
    e.field = get<std::string>(j, "field", "export");
    if (j.contains("mode")) e.mode = parse_boundary_mode(get<std::string>(j, "mode", "export"));
    e.bins = get_count(j, "bins", e.bins, "export", 1);
    if (j.contains("boundaries")) e.boundaries = get<std::vector<double>>(j, "boundaries", "export");
    if (e.mode == BoundaryMode::explicit_list) {
        check_boundaries(e.boundaries);
    } else if (!e.boundaries.empty()) {
        throw ConfigError("export: 'boundaries' is only valid with mode \"explicit\"");
    }
    if (j.contains("midpoints")) e.midpoints = parse_midpoint_space(get<std::string>(j, "midpoints", "export"));
    return e;
}

inline SynthConfig parse_synth(const json& j) {
    expect_keys(j, {"train_rows", "test_rows", "repeats", "bin_counts", "spline_intervals", "seed", "variant", "k",
                    "train", "curves", "grid_points", "write_datasets"},
                "synth");
    SynthConfig s;
    auto& c = s.comparison;
    c.train_rows = get_count(j, "train_rows", c.train_rows, "synth", 1);
    c.test_rows = get_count(j, "test_rows", c.test_rows, "synth", 1);
    c.repeats = get_count(j, "repeats", c.repeats, "synth", 1);
    if (j.contains("bin_counts")) c.bin_counts = get<std::vector<std::size_t>>(j, "bin_counts", "synth");
    if (j.contains("spline_intervals")) {
        c.spline_intervals = get<std::vector<std::size_t>>(j, "spline_intervals", "synth");
    }
    for (auto n : c.bin_counts) {
        if (n < 1) throw ConfigError("synth: bin counts must be at least 1");
    }
    for (auto n : c.spline_intervals) {
        if (n < 1) throw ConfigError("synth: spline interval counts must be at least 1");
    }
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "synth");
    if (j.contains("variant")) c.model.variant = parse_variant(get<std::string>(j, "variant", "synth"));
    c.model.k = get_count(j, "k", c.model.k, "synth", 1);
    if (j.contains("train")) c.train = parse_train(j.at("train"), c.train, "synth.train");
    if (c.train.loss != LossKind::logloss) {
        throw ConfigError("synth.train: the synthetic experiment uses the logloss");
    }
    if (j.contains("curves")) {
        s.curves.clear();
        for (const auto& cj : j.at("curves")) {
            expect_keys(cj, {"family", "coefficients"}, "synth curve");
            synthetic::Curve curve;
            curve.family = synthetic::parse_curve_family(get<std::string>(cj, "family", "synth curve"));
            const auto coef = get<std::vector<double>>(cj, "coefficients", "synth curve");
            if (coef.size() != synthetic::Curve::num_coefficients(curve.family)) {
                throw ConfigError("synth curve: " + std::string(synthetic::to_string(curve.family)) + " takes " +
                                  std::to_string(synthetic::Curve::num_coefficients(curve.family)) + " coefficients");
            }
            std::copy(coef.begin(), coef.end(), curve.c.begin());
            s.curves.push_back(curve);
        }
    }
    synthetic::SegmentCurves check(s.curves);
    s.grid_points = get_count(j, "grid_points", s.grid_points, "synth", 2);
    s.write_datasets = get_or<bool>(j, "write_datasets", s.write_datasets, "synth");
    return s;
}

inline OutputConfig parse_output(const json& j) {
    expect_keys(j, {"dir", "svg"}, "output");
    OutputConfig o;
    o.dir = get_or<std::string>(j, "dir", o.dir.string(), "output");
    o.svg = get_or<bool>(j, "svg", o.svg, "output");
    return o;
}

inline SweepConfig parse_sweep(const json& j) {
    expect_keys(j, {"grid", "seeds"}, "sweep");
    SweepConfig s;
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (!g.is_object()) {
            throw ConfigError("sweep: 'grid' must map JSON pointers to arrays of values");
        }
        for (const auto& [pointer, values] : g.items()) {
            if (!values.is_array() || values.empty()) {
                throw ConfigError("sweep: grid entry '" + pointer + "' must be a non-empty array");
            }
            if (pointer.empty() || pointer[0] != '/' || pointer.rfind("/sweep", 0) == 0) {
                throw ConfigError("sweep: '" + pointer + "' is not a JSON pointer into the run config");
            }
            s.grid.push_back({pointer, std::vector<json>(values.begin(), values.end())});
        }
    }
    if (j.contains("seeds")) s.seeds = get<std::vector<std::uint64_t>>(j, "seeds", "sweep");
    return s;
}

}  // namespace config_detail

/// Parses a run config. `base_dir` anchors relative data paths.
inline RunConfig parse_run_config(const json& j, std::filesystem::path base_dir = {}) {
    using namespace config_detail;
    expect_keys(j, {"version", "data", "schema", "model", "train", "export", "synth", "output", "sweep"}, "config");
    const int version = get_or<int>(j, "version", kConfigVersion, "config");
    if (version != kConfigVersion) {
        throw ConfigError("config: unsupported version " + std::to_string(version));
    }
    RunConfig c;
    c.document = j;
    c.base_dir = std::move(base_dir);
    if (j.contains("data")) c.data = parse_data(j.at("data"));
    if (j.contains("schema")) c.fields = parse_schema(j.at("schema"));
    if (j.contains("model")) c.model = parse_model(j.at("model"));
    const LabelKind labels = c.data ? c.data->label_kind : LabelKind::binary;
    c.train.loss = labels == LabelKind::binary ? LossKind::logloss : LossKind::squared;
    if (j.contains("train")) c.train = parse_train(j.at("train"), c.train, "train", &c.standardize_target);
    if (c.train.loss == LossKind::logloss && labels != LabelKind::binary) {
        throw ConfigError("train: logloss needs data.label_kind \"binary\"");
    }
    if (j.contains("export")) c.export_bins = parse_export(j.at("export"));
    if (j.contains("synth")) c.synth = parse_synth(j.at("synth"));
    if (j.contains("output")) c.output = parse_output(j.at("output"));
    if (j.contains("sweep")) c.sweep = parse_sweep(j.at("sweep"));

    if (c.data) {
        for (const auto& f : c.fields) {
            if (f.name == c.data->label) {
                throw ConfigError("schema: field '" + f.name + "' is also the label column");
            }
        }
    }
    if (c.model.dims && !c.fields.empty() && c.model.dims->size() != c.fields.size()) {
        throw ConfigError("model: 'dims' needs one entry per schema field (" + std::to_string(c.fields.size()) + ")");
    }
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    const auto j = read_json_file(path.string());
    return parse_run_config(j, path.parent_path());
}

/// Interaction spec for `num_fields` fields as configured.
inline InteractionSpec make_interaction(const ModelConfig& m, std::size_t num_fields) {
    switch (m.variant) {
        case Variant::fm: return InteractionSpec::fm(num_fields, m.k);
        case Variant::ffm: return InteractionSpec::ffm(num_fields, m.k);
        case Variant::fwfm: return InteractionSpec::fwfm(num_fields, m.k, m.learned);
        case Variant::fmfm:
            return InteractionSpec::fmfm(m.dims.value_or(std::vector<std::size_t>(num_fields, m.k)), m.learned);
    }
    throw ConfigError("unknown model variant");
}

}  // namespace splinefm
