/**
 * @file runner.hpp
 * @brief Command-line verbs: train, eval, export-bins, synth, curves, sweep, rerun.
 *
 * Every verb writes its outputs into one directory together with
 * manifest.json. The manifest holds the full invocation (including a
 * snapshot of the config document), the tool and library versions, and the
 * wall time; `rerun` replays an invocation from a manifest. Model, metrics
 * and table files contain no timing information, so a replay reproduces
 * them byte for byte.
 */
#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "splinefm/bin_export.hpp"
#include "splinefm/config.hpp"
#include "splinefm/error.hpp"
#include "splinefm/model.hpp"
#include "splinefm/plot.hpp"
#include "splinefm/schema.hpp"
#include "splinefm/serialization.hpp"
#include "splinefm/synthetic.hpp"
#include "splinefm/training.hpp"

namespace splinefm::cli {

namespace fs = std::filesystem;

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kManifestFormat = "splinefm-manifest";

/// Everything a verb needs. Serialized into the manifest.
struct Invocation {
    std::string verb;
    std::optional<json> config;        ///< config document snapshot
    std::string base_dir;              ///< directory relative config paths resolve against
    std::optional<std::string> model;  ///< input model file
    std::optional<std::string> data;   ///< input data file (eval)
    char delimiter = ',';
    std::optional<std::string> field;  ///< export-bins / curves
    std::optional<std::size_t> bins;   ///< export-bins override
    std::optional<std::string> mode;   ///< export-bins override
    json segment = json::object();     ///< curves: raw values of the fixed fields
    std::optional<std::string> grid;   ///< curves: "lo:hi:points"
    std::string out_dir = "out";
};

inline json to_json(const Invocation& inv) {
    json j{{"verb", inv.verb}, {"base_dir", inv.base_dir}, {"delimiter", std::string(1, inv.delimiter)},
           {"segment", inv.segment}, {"out_dir", inv.out_dir}};
    j["config"] = inv.config ? *inv.config : json(nullptr);
    j["model"] = inv.model ? json(*inv.model) : json(nullptr);
    j["data"] = inv.data ? json(*inv.data) : json(nullptr);
    j["field"] = inv.field ? json(*inv.field) : json(nullptr);
    j["bins"] = inv.bins ? json(*inv.bins) : json(nullptr);
    j["mode"] = inv.mode ? json(*inv.mode) : json(nullptr);
    j["grid"] = inv.grid ? json(*inv.grid) : json(nullptr);
    return j;
}

inline Invocation invocation_from_json(const json& j) {
    using json_util::get;
    json_util::expect_keys(j, {"verb", "config", "base_dir", "model", "data", "delimiter", "field", "bins", "mode",
                               "segment", "grid", "out_dir"},
                           "invocation");
    auto opt_string = [&](std::string_view key) -> std::optional<std::string> {
        if (!j.contains(key) || j.at(std::string(key)).is_null()) return std::nullopt;
        return get<std::string>(j, key, "invocation");
    };
    Invocation inv;
    inv.verb = get<std::string>(j, "verb", "invocation");
    if (j.contains("config") && !j.at("config").is_null()) inv.config = j.at("config");
    inv.base_dir = get<std::string>(j, "base_dir", "invocation");
    inv.model = opt_string("model");
    inv.data = opt_string("data");
    const auto delim = get<std::string>(j, "delimiter", "invocation");
    if (delim.size() != 1) throw ConfigError("invocation: bad delimiter");
    inv.delimiter = delim[0];
    inv.field = opt_string("field");
    if (j.contains("bins") && !j.at("bins").is_null()) inv.bins = get<std::size_t>(j, "bins", "invocation");
    inv.mode = opt_string("mode");
    inv.segment = j.value("segment", json::object());
    inv.grid = opt_string("grid");
    inv.out_dir = get<std::string>(j, "out_dir", "invocation");
    return inv;
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

inline void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw DataError("cannot write '" + path.string() + "'");
    }
}

template <typename F>
void write_with(const fs::path& path, F&& body) {
    std::ostringstream buf;
    body(buf);
    write_file(path, buf.str());
}

inline json metrics_to_json(const Metrics& m) {
    json j{{"loss", to_string(m.loss)}, {"sample_count", m.sample_count}};
    if (m.cross_entropy) j["cross_entropy"] = *m.cross_entropy;
    if (m.rmse) j["rmse"] = *m.rmse;
    if (m.rmse_original) j["rmse_original"] = *m.rmse_original;
    return j;
}

inline json history_to_json(const std::vector<EpochRecord>& history) {
    json out = json::array();
    for (const auto& r : history) {
        out.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"holdout_loss", r.holdout_loss ? json(*r.holdout_loss) : json(nullptr)}});
    }
    return out;
}

inline std::string dump_json(const json& j) { return j.dump(1) + "\n"; }

inline json versions() {
    return {{"splinefm", kToolVersion},
            {"model_format", kModelFormatVersion},
            {"config_format", kConfigVersion},
            {"compiler", __VERSION__},
            {"cplusplus", __cplusplus},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Files the verb produced, for the manifest.
struct RunOutputs {
    std::vector<std::string> files;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> warnings;
};

class OutputDir {
public:
    explicit OutputDir(const fs::path& dir) : dir_(dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) {
            throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
        }
    }

    [[nodiscard]] fs::path path(const std::string& name) {
        outputs_.files.push_back(name);
        return dir_ / name;
    }

    [[nodiscard]] const fs::path& dir() const noexcept { return dir_; }
    RunOutputs& outputs() noexcept { return outputs_; }

private:
    fs::path dir_;
    RunOutputs outputs_;
};

inline void write_manifest(OutputDir& out, const Invocation& inv, std::chrono::system_clock::time_point started,
                           double wall_seconds) {
    json manifest{{"format", kManifestFormat},
                  {"invocation", to_json(inv)},
                  {"seed", out.outputs().seed ? json(*out.outputs().seed) : json(nullptr)},
                  {"versions", versions()},
                  {"threads", 1},
                  {"outputs", out.outputs().files},
                  {"warnings", out.outputs().warnings},
                  {"started_utc", utc_timestamp(started)},
                  {"wall_time_seconds", wall_seconds}};
    write_file(out.dir() / "manifest.json", dump_json(manifest));
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces
// ---------------------------------------------------------------------------

inline Table read_table(const fs::path& path, char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open data file '" + path.string() + "'");
    }
    try {
        return read_delimited(in, delimiter);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline RunConfig config_of(const Invocation& inv) {
    if (!inv.config) {
        throw ConfigError(inv.verb + ": a config document is required (--config)");
    }
    return parse_run_config(*inv.config, inv.base_dir);
}

inline LossKind loss_for(const DatasetSchema& schema) {
    return schema.label_kind() == LabelKind::binary ? LossKind::logloss : LossKind::squared;
}

struct TrainingOutcome {
    Model model;
    Metrics train;                   ///< returned parameters on the training split, with history
    std::optional<Metrics> holdout;
    Metrics all_rows;                ///< returned parameters on every row of data.train
    std::optional<Metrics> test;
};

using TableCache = std::map<fs::path, Table>;

inline const Table& cached_table(TableCache& cache, const fs::path& path, char delimiter) {
    auto it = cache.find(path);
    if (it == cache.end()) {
        it = cache.emplace(path, read_table(path, delimiter)).first;
    }
    return it->second;
}

/// Schema inference, encoding, holdout split, target standardization and training.
inline TrainingOutcome run_training(const RunConfig& cfg, TableCache& cache, std::ostream* progress) {
    if (!cfg.data) {
        throw ConfigError("train: the config needs a 'data' section");
    }
    if (cfg.fields.empty()) {
        throw ConfigError("train: the config needs a 'schema' section with at least one field");
    }
    const auto& data = *cfg.data;
    const Table& table = cached_table(cache, cfg.resolve(data.train), data.delimiter);
    const auto schema = infer_schema(table, cfg.fields, data.label, data.label_kind);
    const auto rows = encode_table(schema, table);
    auto [train_rows, holdout_rows] = split_holdout(rows, cfg.train.holdout_fraction, cfg.train.seed);

    Model model(schema, make_interaction(cfg.model, schema.num_fields()));
    if (cfg.train.loss == LossKind::squared && cfg.standardize_target) {
        const auto [mean, sd] = label_moments(train_rows);
        model.set_target_standardization(mean, sd);
    }
    auto result = train(cfg.train, std::move(model), train_rows, holdout_rows, progress);
    TrainingOutcome out{std::move(result.model), std::move(result.metrics), std::nullopt, {}, std::nullopt};
    if (!holdout_rows.empty()) {
        out.holdout = evaluate(out.model, holdout_rows, cfg.train.loss);
    }
    out.all_rows = evaluate(out.model, rows, cfg.train.loss);
    if (data.test) {
        const Table& test_table = cached_table(cache, cfg.resolve(*data.test), data.delimiter);
        out.test = evaluate(out.model, encode_table(schema, test_table), cfg.train.loss);
    }
    return out;
}

inline json outcome_to_json(const TrainingOutcome& o) {
    json j{{"best_epoch", o.train.best_epoch},
           {"history", history_to_json(o.train.history)},
           {"train", metrics_to_json(o.train)},
           {"all_rows", metrics_to_json(o.all_rows)}};
    j["holdout"] = o.holdout ? metrics_to_json(*o.holdout) : json(nullptr);
    j["test"] = o.test ? metrics_to_json(*o.test) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Verbs
// ---------------------------------------------------------------------------

inline void verb_train(const Invocation& inv, OutputDir& out, std::ostream& log) {
    const auto cfg = config_of(inv);
    out.outputs().seed = cfg.train.seed;
    TableCache cache;
    std::ostringstream progress;
    const auto outcome = run_training(cfg, cache, &progress);
    write_file(out.path("progress.jsonl"), progress.str());
    save_model(outcome.model, out.path("model.json").string());
    write_file(out.path("metrics.json"), dump_json(outcome_to_json(outcome)));
    log << "trained " << outcome.model.num_params() << " parameters; best epoch " << outcome.train.best_epoch
        << ", " << to_string(cfg.train.loss) << " "
        << format_number(outcome.holdout ? outcome.holdout->value() : outcome.train.value()) << "\n";
}

inline void verb_eval(const Invocation& inv, OutputDir& out, std::ostream& log) {
    if (!inv.model || !inv.data) {
        throw ConfigError("eval: --model and --data are required");
    }
    const auto model = load_model(*inv.model);
    const auto table = read_table(*inv.data, inv.delimiter);
    const auto metrics = evaluate(model, encode_table(model.schema(), table), loss_for(model.schema()));
    write_file(out.path("metrics.json"), dump_json({{"data", metrics_to_json(metrics)}}));
    log << "evaluated " << metrics.sample_count << " rows: " << to_string(metrics.loss) << " "
        << format_number(metrics.value()) << "\n";
}

inline void verb_export_bins(const Invocation& inv, OutputDir& out, std::ostream& log) {
    if (!inv.model) {
        throw ConfigError("export-bins: --model is required");
    }
    const auto model = load_model(*inv.model);
    ExportConfig ec;
    if (inv.config) {
        const auto cfg = config_of(inv);
        if (cfg.export_bins) ec = *cfg.export_bins;
    }
    if (inv.field) ec.field = *inv.field;
    if (inv.bins) ec.bins = *inv.bins;
    if (inv.mode) ec.mode = parse_boundary_mode(*inv.mode);
    if (ec.field.empty()) {
        throw ConfigError("export-bins: no field given (export.field or --field)");
    }
    const auto field = model.schema().find_field(ec.field);
    if (!field) {
        throw ConfigError("export-bins: model has no field '" + ec.field + "'");
    }
    const auto& source = model.schema().field(*field);
    if (!source.is_numerical()) {
        throw ConfigError("export-bins: field '" + ec.field + "' is not numerical");
    }
    const FieldTransform transform =
        source.is_continuous() ? source.continuous().transform
                               : FieldTransform(AffineTransform(source.binned().boundaries.front(),
                                                                source.binned().boundaries.back()));
    const auto boundaries = make_boundaries(transform, ec.bins, ec.mode, ec.boundaries);
    auto result = export_binned(model, *field, boundaries, ec.midpoints);
    for (const auto& w : result.table.warnings) {
        log << "warning: " << w << "\n";
        out.outputs().warnings.push_back(w);
    }
    save_model(result.model, out.path("model.json").string());
    write_with(out.path("bins.tsv"), [&](std::ostream& o) { write_export_table(o, result.table); });
    log << "exported field '" << ec.field << "' into " << result.table.num_bins() << " bins\n";
}

/// Parses "lo:hi:points".
inline std::vector<double> parse_grid(const std::string& spec) {
    const auto parts = split_delimited(spec, ':');
    if (parts.size() != 3) {
        throw ConfigError("grid '" + spec + "' must look like lo:hi:points");
    }
    const auto lo = parse_number(parts[0]);
    const auto hi = parse_number(parts[1]);
    const auto n = parse_number(parts[2]);
    if (!lo || !hi || !n || !(*hi > *lo) || *n < 2 || *n != std::floor(*n)) {
        throw ConfigError("grid '" + spec + "' needs lo < hi and an integer point count >= 2");
    }
    std::vector<double> grid;
    const auto count = static_cast<std::size_t>(*n);
    for (std::size_t i = 0; i < count; ++i) {
        grid.push_back(*lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    return grid;
}

inline RawRow segment_row(const DatasetSchema& schema, const json& segment) {
    RawRow raw(schema.num_fields());
    for (const auto& [name, value] : segment.items()) {
        const auto id = schema.find_field(name);
        if (!id) {
            throw ConfigError("segment: model has no field '" + name + "'");
        }
        if (value.is_number()) {
            raw[*id] = value.get<double>();
        } else if (value.is_string()) {
            raw[*id] = value.get<std::string>();
        } else if (!value.is_null()) {
            throw ConfigError("segment: value for '" + name + "' must be a string or number");
        }
    }
    return raw;
}

inline void verb_curves(const Invocation& inv, OutputDir& out, std::ostream& log) {
    if (!inv.model || !inv.field) {
        throw ConfigError("curves: --model and --field are required");
    }
    const auto model = load_model(*inv.model);
    const auto& schema = model.schema();
    const auto field = schema.find_field(*inv.field);
    if (!field) {
        throw ConfigError("curves: model has no field '" + *inv.field + "'");
    }
    const auto& f = schema.field(*field);
    std::vector<double> grid;
    if (inv.grid) {
        grid = parse_grid(*inv.grid);
    } else if (f.is_continuous()) {
        grid = parse_grid(format_number(f.continuous().transform.inverse(0.0)) + ":" +
                          format_number(f.continuous().transform.inverse(1.0)) + ":201");
    } else if (f.is_binned()) {
        grid = parse_grid(format_number(f.binned().boundaries.front()) + ":" +
                          format_number(f.binned().boundaries.back()) + ":201");
    } else {
        throw ConfigError("curves: field '" + f.name + "' is not numerical");
    }
    const auto segment = segment_row(schema, inv.segment);
    const auto scores = segmentized_curve(model, segment, *field, grid);
    const bool binary = schema.label_kind() == LabelKind::binary;
    plot::TsvTable table({f.name, "score", "prediction"});
    plot::Series series{binary ? "probability" : "prediction", grid, {}, false, false};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double pred = binary ? sigmoid(scores[i]) : model.target_shift() + model.target_scale() * scores[i];
        series.y.push_back(pred);
        table.add_row({plot::cell(grid[i]), plot::cell(scores[i]), plot::cell(pred)});
    }
    write_with(out.path("curve.tsv"), [&](std::ostream& o) { table.write(o); });
    if (!inv.config || config_of(inv).output.svg) {
        write_with(out.path("curve.svg"), [&](std::ostream& o) {
            plot::write_svg(o, {series}, {"segmentized curve of " + f.name, f.name, series.label});
        });
    }
    log << "wrote " << grid.size() << " curve points for field '" << f.name << "'\n";
}

inline void verb_synth(const Invocation& inv, OutputDir& out, std::ostream& log) {
    const auto cfg = config_of(inv);
    if (!cfg.synth) {
        throw ConfigError("synth: the config needs a 'synth' section");
    }
    const auto& sc = *cfg.synth;
    const auto& cc = sc.comparison;
    out.outputs().seed = cc.seed;
    const synthetic::SegmentCurves curves(sc.curves);
    const auto data = synthetic::make_comparison_data(curves, cc);

    if (sc.write_datasets) {
        for (auto [name, rows] : {std::pair{"train.tsv", &data.train}, std::pair{"test.tsv", &data.test}}) {
            write_with(out.path(name), [&](std::ostream& o) {
                o << "s0\ts1\ts2\tz\ty\n";
                for (const auto& r : *rows) {
                    o << (r.segment & 1) << '\t' << ((r.segment >> 1) & 1) << '\t' << ((r.segment >> 2) & 1) << '\t'
                      << r.z << '\t' << r.label << '\n';
                }
            });
        }
    }

    std::vector<double> grid;
    for (std::size_t i = 0; i < sc.grid_points; ++i) {
        grid.push_back(synthetic::kMaxZ * static_cast<double>(i) / static_cast<double>(sc.grid_points - 1));
    }

    plot::TsvTable results({"strategy", "intervals", "repeat", "test_loss", "train_loss", "best_epoch", "error"});
    plot::TsvTable summary({"strategy", "intervals", "mean_test_loss", "sd_test_loss", "repeats"});
    std::vector<plot::Series> loss_series;
    for (auto [strategy, counts] : {std::pair{synthetic::Strategy::binned, &cc.bin_counts},
                                    std::pair{synthetic::Strategy::spline, &cc.spline_intervals}}) {
        plot::Series s{std::string(synthetic::to_string(strategy)), {}, {}, false, true};
        for (std::size_t intervals : *counts) {
            std::vector<double> losses;
            for (std::size_t r = 0; r < cc.repeats; ++r) {
                auto [cell, model] = synthetic::run_cell(data, cc, strategy, intervals, r);
                results.add_row({std::string(synthetic::to_string(strategy)), plot::cell(intervals), plot::cell(r),
                                 plot::cell(cell.test_loss), plot::cell(cell.train_loss), plot::cell(cell.best_epoch),
                                 cell.error});
                log << synthetic::to_string(strategy) << " " << intervals << " repeat " << r << ": "
                    << (cell.error.empty() ? format_number(cell.test_loss) : "failed: " + cell.error) << "\n";
                if (!cell.error.empty()) {
                    out.outputs().warnings.push_back(std::string(synthetic::to_string(strategy)) + " " +
                                                     std::to_string(intervals) + " repeat " + std::to_string(r) +
                                                     ": " + cell.error);
                    continue;
                }
                losses.push_back(cell.test_loss);
                if (r == 0 && model) {
                    const std::string stem =
                        "curves_" + std::string(synthetic::to_string(strategy)) + "_" + std::to_string(intervals);
                    const auto points = synthetic::emit_curves(*model, curves, grid);
                    plot::TsvTable ct({"segment", "z", "predicted", "truth"});
                    std::vector<plot::Series> learned(synthetic::kNumSegments), truth(synthetic::kNumSegments);
                    for (const auto& p : points) {
                        ct.add_row({plot::cell(p.segment), plot::cell(p.z), plot::cell(p.predicted),
                                    plot::cell(p.truth)});
                        auto& l = learned[static_cast<std::size_t>(p.segment)];
                        auto& t = truth[static_cast<std::size_t>(p.segment)];
                        l.label = "s=" + std::to_string(p.segment);
                        t.label = "p_" + std::to_string(p.segment) + " (truth)";
                        t.dashed = true;
                        l.x.push_back(p.z);
                        l.y.push_back(p.predicted);
                        t.x.push_back(p.z);
                        t.y.push_back(p.truth);
                    }
                    write_with(out.path(stem + ".tsv"), [&](std::ostream& o) { ct.write(o); });
                    if (cfg.output.svg) {
                        learned.insert(learned.end(), truth.begin(), truth.end());
                        write_with(out.path(stem + ".svg"), [&](std::ostream& o) {
                            plot::write_svg(o, learned,
                                            {std::string(synthetic::to_string(strategy)) + ", " +
                                                 std::to_string(intervals) + " intervals",
                                             "z", "CTR", 760, 460});
                        });
                    }
                }
            }
            double mean = NAN;
            double sd = NAN;
            if (!losses.empty()) {
                mean = 0.0;
                for (double v : losses) mean += v;
                mean /= static_cast<double>(losses.size());
                double var = 0.0;
                for (double v : losses) var += (v - mean) * (v - mean);
                sd = losses.size() > 1 ? std::sqrt(var / static_cast<double>(losses.size() - 1)) : 0.0;
                s.x.push_back(static_cast<double>(intervals));
                s.y.push_back(mean);
            }
            summary.add_row({std::string(synthetic::to_string(strategy)), plot::cell(intervals), plot::cell(mean),
                             plot::cell(sd), plot::cell(losses.size())});
        }
        loss_series.push_back(std::move(s));
    }
    write_with(out.path("results.tsv"), [&](std::ostream& o) { results.write(o); });
    write_with(out.path("summary.tsv"), [&](std::ostream& o) { summary.write(o); });
    if (cfg.output.svg) {
        write_with(out.path("loss_vs_intervals.svg"), [&](std::ostream& o) {
            plot::write_svg(o, loss_series, {"mean test cross-entropy", "intervals", "cross-entropy"});
        });
    }
}

inline void verb_sweep(const Invocation& inv, OutputDir& out, std::ostream& log) {
    const auto cfg = config_of(inv);
    if (!cfg.sweep) {
        throw ConfigError("sweep: the config needs a 'sweep' section");
    }
    const auto& sweep = *cfg.sweep;
    std::vector<std::uint64_t> seeds = sweep.seeds;
    if (seeds.empty()) seeds.push_back(cfg.train.seed);
    out.outputs().seed = seeds.front();

    std::vector<std::string> columns;
    for (const auto& axis : sweep.grid) columns.push_back(axis.pointer);
    for (const char* c : {"seed", "best_epoch", "train_loss", "holdout_loss", "test_loss", "holdout_rmse_original",
                          "test_rmse_original", "error"}) {
        columns.emplace_back(c);
    }
    plot::TsvTable table(columns);
    TableCache cache;

    std::size_t cells = 1;
    for (const auto& axis : sweep.grid) cells *= axis.values.size();
    auto opt_cell = [](const std::optional<Metrics>& m, bool original) {
        if (!m) return std::string();
        if (original) return m->rmse_original ? plot::cell(*m->rmse_original) : std::string();
        return plot::cell(m->value());
    };
    for (std::size_t c = 0; c < cells; ++c) {
        json doc = *inv.config;
        doc.erase("sweep");
        std::vector<std::string> row;
        std::size_t rest = c;
        for (const auto& axis : sweep.grid) {
            const auto& value = axis.values[rest % axis.values.size()];
            rest /= axis.values.size();
            try {
                doc[json::json_pointer(axis.pointer)] = value;
            } catch (const json::exception& e) {
                throw ConfigError("sweep: cannot apply '" + axis.pointer + "': " + e.what());
            }
            row.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        }
        for (auto seed : seeds) {
            doc[json::json_pointer("/train/seed")] = seed;
            auto cell_row = row;
            cell_row.push_back(std::to_string(seed));
            try {
                const auto cell_cfg = parse_run_config(doc, inv.base_dir);
                const auto o = run_training(cell_cfg, cache, nullptr);
                for (auto v : {plot::cell(o.train.best_epoch), plot::cell(o.train.value()), opt_cell(o.holdout, false),
                               opt_cell(o.test, false), opt_cell(o.holdout, true), opt_cell(o.test, true)}) {
                    cell_row.push_back(v);
                }
                cell_row.emplace_back();
                log << "sweep cell " << c + 1 << "/" << cells << " seed " << seed << ": holdout "
                    << opt_cell(o.holdout, false) << "\n";
            } catch (const NumericalError& e) {
                cell_row.resize(columns.size() - 1);
                cell_row.emplace_back(e.what());
                log << "sweep cell " << c + 1 << "/" << cells << " seed " << seed << " failed: " << e.what() << "\n";
            }
            table.add_row(std::move(cell_row));
        }
    }
    write_with(out.path("sweep.tsv"), [&](std::ostream& o) { table.write(o); });
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const DataError*>(&e) != nullptr) return 3;
    if (dynamic_cast<const NumericalError*>(&e) != nullptr) return 4;
    return 1;
}

inline const std::map<std::string, std::function<void(const Invocation&, OutputDir&, std::ostream&)>, std::less<>>&
verbs() {
    static const std::map<std::string, std::function<void(const Invocation&, OutputDir&, std::ostream&)>, std::less<>>
        table{{"train", verb_train},   {"eval", verb_eval},   {"export-bins", verb_export_bins},
              {"curves", verb_curves}, {"synth", verb_synth}, {"sweep", verb_sweep}};
    return table;
}

/// Runs one invocation and writes its manifest. Throws splinefm::Error subclasses.
inline void run(const Invocation& inv, std::ostream& log) {
    const auto it = verbs().find(inv.verb);
    if (it == verbs().end()) {
        throw ConfigError("unknown verb '" + inv.verb + "'");
    }
    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    OutputDir out(inv.out_dir);
    try {
        it->second(inv, out, log);
    } catch (const json::exception& e) {
        throw ConfigError(e.what());
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out, inv, started, wall);
}

/// Reads a manifest and returns its invocation, optionally redirected to `out_dir`.
inline Invocation invocation_from_manifest(const fs::path& path, std::optional<std::string> out_dir) {
    const auto j = read_json_file(path.string());
    if (!j.is_object() || j.value("format", std::string()) != kManifestFormat) {
        throw ConfigError("'" + path.string() + "' is not a splinefm manifest");
    }
    auto inv = invocation_from_json(j.at("invocation"));
    if (out_dir) inv.out_dir = *out_dir;
    return inv;
}

}  // namespace splinefm::cli
