// splinefm command-line tool. See README.md for the config format.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "splinefm/runner.hpp"

namespace {

namespace fs = std::filesystem;
using splinefm::cli::Invocation;

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

void attach_config(Invocation& inv, const std::string& path) {
    inv.config = splinefm::read_json_file(path);
    inv.base_dir = fs::absolute(path).parent_path().lexically_normal().string();
}

/// Output directory: --out, else the config's output.dir, else "out".
std::string output_dir(const Invocation& inv, const std::optional<std::string>& flag) {
    if (flag) return absolute(*flag);
    if (inv.config) {
        const auto cfg = splinefm::parse_run_config(*inv.config, inv.base_dir);
        return absolute(cfg.resolve(cfg.output.dir).string());
    }
    return absolute("out");
}

char parse_delimiter(const std::string& s) {
    if (s == "tab" || s == "\\t") return '\t';
    if (s.size() != 1) throw splinefm::ConfigError("--delimiter must be a single character or \"tab\"");
    return s[0];
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spline-encoded factorization machines: train, evaluate, export and experiment."};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(splinefm::cli::kToolVersion));

    std::string config_path;
    std::string model_path;
    std::string data_path;
    std::string manifest_path;
    std::string delimiter = ",";
    std::string field;
    std::string mode;
    std::string grid;
    std::size_t bins = 0;
    std::vector<std::string> segment;
    std::optional<std::string> out_flag;

    auto add_out = [&](CLI::App* cmd) {
        cmd->add_option_function<std::string>(
            "-o,--out", [&](const std::string& v) { out_flag = v; }, "output directory");
    };

    auto* train = app.add_subcommand("train", "fit a model from a config document");
    train->add_option("-c,--config", config_path, "run config (JSON)")->required()->check(CLI::ExistingFile);
    add_out(train);

    auto* eval = app.add_subcommand("eval", "evaluate a model file on a data file");
    eval->add_option("-m,--model", model_path, "model file")->required();
    eval->add_option("-d,--data", data_path, "delimited data file with header")->required();
    eval->add_option("--delimiter", delimiter, "field delimiter (a character or \"tab\")");
    add_out(eval);

    auto* exp = app.add_subcommand("export-bins", "replace a continuous field with a binned one");
    exp->add_option("-m,--model", model_path, "model file")->required();
    exp->add_option("-c,--config", config_path, "run config with an 'export' section")->check(CLI::ExistingFile);
    exp->add_option("--field", field, "field to export");
    exp->add_option("--bins", bins, "number of bins")->check(CLI::PositiveNumber);
    exp->add_option("--mode", mode, "inverse_cdf, geometric or explicit");
    add_out(exp);

    auto* curves = app.add_subcommand("curves", "emit the segmentized curve of one field");
    curves->add_option("-m,--model", model_path, "model file")->required();
    curves->add_option("--field", field, "numerical field to vary")->required();
    curves->add_option("--segment", segment, "fixed value of another field, as name=value (repeatable)");
    curves->add_option("--grid", grid, "lo:hi:points (default: the field's range, 201 points)");
    curves->add_option("-c,--config", config_path, "run config (output options)")->check(CLI::ExistingFile);
    add_out(curves);

    auto* synth = app.add_subcommand("synth", "run the synthetic bins-versus-splines experiment");
    synth->add_option("-c,--config", config_path, "run config with a 'synth' section")
        ->required()
        ->check(CLI::ExistingFile);
    add_out(synth);

    auto* sweep = app.add_subcommand("sweep", "train over a grid of config overrides and seeds");
    sweep->add_option("-c,--config", config_path, "run config with a 'sweep' section")
        ->required()
        ->check(CLI::ExistingFile);
    add_out(sweep);

    auto* rerun = app.add_subcommand("rerun", "replay the invocation recorded in a manifest");
    rerun->add_option("manifest", manifest_path, "manifest.json of an earlier run")
        ->required()
        ->check(CLI::ExistingFile);
    add_out(rerun);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Invocation inv;
        if (rerun->parsed()) {
            inv = splinefm::cli::invocation_from_manifest(manifest_path,
                                                          out_flag ? std::optional(absolute(*out_flag)) : std::nullopt);
        } else {
            auto* cmd = app.get_subcommands().front();
            inv.verb = cmd->get_name();
            if (!config_path.empty()) attach_config(inv, config_path);
            if (!model_path.empty()) inv.model = absolute(model_path);
            if (!data_path.empty()) inv.data = absolute(data_path);
            inv.delimiter = parse_delimiter(delimiter);
            if (!field.empty()) inv.field = field;
            if (bins > 0) inv.bins = bins;
            if (!mode.empty()) inv.mode = mode;
            if (!grid.empty()) inv.grid = grid;
            for (const auto& s : segment) {
                const auto eq = s.find('=');
                if (eq == std::string::npos || eq == 0) {
                    throw splinefm::ConfigError("--segment '" + s + "' must look like name=value");
                }
                const std::string value = s.substr(eq + 1);
                const auto number = splinefm::parse_number(value);
                inv.segment[s.substr(0, eq)] = number ? splinefm::json(*number) : splinefm::json(value);
            }
            inv.out_dir = output_dir(inv, out_flag);
        }
        splinefm::cli::run(inv, std::cerr);
        std::cerr << "outputs in " << inv.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return splinefm::cli::exit_code(e);
    }
}
