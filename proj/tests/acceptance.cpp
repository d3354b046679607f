// Acceptance checks. Prints one PASS / FAIL / SKIP line per criterion and
// exits non-zero if any criterion fails.
//
//   acceptance            run every criterion
//   acceptance 3 5 9      run only the listed ones
//
// Criterion 8 needs the California housing CSV; point SPLINEFM_CALIFORNIA_CSV
// at it (columns as in the usual housing.csv) or the criterion is skipped.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "splinefm/bin_export.hpp"
#include "splinefm/runner.hpp"
#include "splinefm/span_check.hpp"
#include "splinefm/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
namespace syn = splinefm::synthetic;
using namespace splinefm;
using nlohmann::json;

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::fail;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(3);
    s << x;
    return s.str();
}

std::vector<std::size_t> continuous_fields(const DatasetSchema& schema) {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < schema.num_fields(); ++f) {
        if (schema.field(f).is_continuous()) out.push_back(f);
    }
    return out;
}

// 1. Segmentized curves of continuous fields lie in the spline span.
Outcome spanning() {
    oracle::Rng rng(1001);
    double worst = 0.0;
    std::size_t fits = 0;
    std::set<Variant> seen;
    for (int trial = 0; trial < 50; ++trial) {
        const auto schema = oracle::random_schema(rng, oracle::uniform_index(rng, 0, 2), oracle::uniform_index(rng, 0, 1),
                                                  oracle::uniform_index(rng, 1, 3));
        const auto variant = static_cast<Variant>(trial % 4);
        seen.insert(variant);
        Model model(schema, oracle::random_interaction(rng, variant, schema.num_fields()));
        oracle::randomize_params(model, rng);
        const auto segment = oracle::random_raw_row(rng, schema);
        for (std::size_t f : continuous_fields(schema)) {
            worst = std::max(worst, fit_span(model, segment, f).max_residual);
            ++fits;
        }
    }
    return verdict(worst < 1e-9 && seen.size() == 4,
                   std::to_string(fits) + " fits over 50 models, max residual " + fmt(worst));
}

// 2. Two-field surfaces lie in the tensor span; a zero coupling matrix gives no cross terms.
Outcome pairwise_spanning() {
    oracle::Rng rng(1002);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto schema = oracle::random_schema(rng, 1, 0, 2);
        Model model(schema, oracle::random_interaction(rng, static_cast<Variant>(trial % 4), 3));
        oracle::randomize_params(model, rng);
        const auto fields = continuous_fields(schema);
        const auto fit = fit_pairwise_span(model, oracle::random_raw_row(rng, schema), fields[0], fields[1]);
        worst = std::max(worst, fit.max_residual);
    }
    double cross = 0.0;
    double decoupled_residual = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto schema = oracle::random_schema(rng, 1, 0, 2);
        Model model(schema, oracle::random_interaction(rng, Variant::fmfm, 3));
        oracle::randomize_params(model, rng);
        const auto fields = continuous_fields(schema);
        for (double& m : model.mutable_pair_params(fields[0], fields[1])) m = 0.0;
        const auto fit = fit_pairwise_span(model, oracle::random_raw_row(rng, schema), fields[0], fields[1]);
        decoupled_residual = std::max(decoupled_residual, fit.max_residual);
        cross = std::max(cross, fit.max_cross_coefficient());
    }
    return verdict(worst < 1e-9 && decoupled_residual < 1e-9 && cross < 1e-9,
                   "max residual " + fmt(std::max(worst, decoupled_residual)) + ", max cross coefficient with M = 0 " +
                       fmt(cross));
}

// 3. Partition of unity, local support and agreement with the recursion.
Outcome bspline_correctness() {
    oracle::Rng rng(1003);
    double unity = 0.0;
    std::size_t most_nonzero = 0;
    double oracle_gap = 0.0;
    for (std::size_t l : {4u, 8u, 9u, 16u}) {
        const auto basis = SplineBasis::build_uniform(l, 3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 10000; ++i) {
            const auto values = basis.eval(u(rng));
            double sum = 0.0;
            std::size_t nonzero = 0;
            for (double v : values) {
                sum += v;
                nonzero += v != 0.0 ? 1 : 0;
            }
            unity = std::max(unity, std::abs(sum - 1.0));
            most_nonzero = std::max(most_nonzero, nonzero);
        }
        for (int i = 0; i <= 1000; ++i) {
            const double x = i / 1000.0;
            const auto got = basis.eval(x);
            const auto want = oracle::cox_de_boor_all(l, 3, x);
            for (std::size_t j = 0; j < l; ++j) oracle_gap = std::max(oracle_gap, std::abs(got[j] - want[j]));
        }
    }
    return verdict(unity <= 1e-12 && most_nonzero <= 4 && oracle_gap <= 1e-12,
                   "unity error " + fmt(unity) + ", max nonzeros " + std::to_string(most_nonzero) + ", oracle gap " +
                       fmt(oracle_gap));
}

// 4. Analytic gradients against central differences.
Outcome gradient_check() {
    oracle::Rng rng(1004);
    constexpr double kStep = 1e-5;
    double worst = 0.0;
    std::size_t checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto schema = oracle::random_schema(rng, 1, 1, 2);
        const auto variant = static_cast<Variant>(trial % 4);
        std::optional<std::vector<Reduction>> reductions;
        if (trial % 8 >= 4) reductions = std::vector<Reduction>(4, Reduction::identity);
        Model model(schema, oracle::random_interaction(rng, variant, 4), reductions);
        oracle::randomize_params(model, rng);
        const auto row = encode_row(schema, oracle::random_raw_row(rng, schema), static_cast<double>(trial % 3 == 0));
        const auto [s, trace] = forward(model, row);
        const auto grad = backward(model, row, trace, sigmoid(s) - row.label);
        for (std::size_t q = 0; q < grad.size(); ++q) {
            const double fd = oracle::central_difference(model, grad.index[q], kStep,
                                                         [&row](const Model& m) { return oracle::row_logloss(m, row); });
            worst = std::max(worst, oracle::relative_error(grad.value[q], fd, 1e-6));
            ++checked;
        }
    }
    return verdict(worst <= 1e-4, std::to_string(checked) + " parameters, max relative error " + fmt(worst));
}

// 5. The model against a direct double loop.
Outcome brute_force() {
    oracle::Rng rng(1005);
    double identity_gap = 0.0;
    double presum_gap = 0.0;
    std::size_t most_features = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto variant = static_cast<Variant>(trial % 4);
        const auto schema = oracle::random_schema(rng, 1, 1, 1);
        Model model(schema, oracle::random_interaction(rng, variant, 3), std::vector<Reduction>(3, Reduction::identity));
        oracle::randomize_params(model, rng);
        const auto row = encode_row(schema, oracle::random_raw_row(rng, schema));
        most_features = std::max(most_features, row.entries.size());
        identity_gap = std::max(identity_gap, oracle::relative_error(score(model, row), oracle::brute_force_score(model, row)));

        const auto mixed = oracle::random_schema(rng, 2, 0, 1);
        Model summed(mixed, oracle::random_interaction(rng, variant, 3));
        oracle::randomize_params(summed, rng);
        const auto z = continuous_fields(mixed).front();
        const auto mixed_row = encode_row(mixed, oracle::random_raw_row(rng, mixed));
        presum_gap = std::max(presum_gap, oracle::relative_error(score(summed, mixed_row),
                                                                 oracle::brute_force_score(summed, mixed_row, {z})));
    }
    return verdict(most_features <= 6 && identity_gap <= 1e-12 && presum_gap <= 1e-12,
                   "identity gap " + fmt(identity_gap) + ", pre-summed gap " + fmt(presum_gap) + ", at most " +
                       std::to_string(most_features) + " features");
}

// 6. Binned export agrees at midpoints and converges as N grows.
Outcome export_fidelity() {
    const auto curves = syn::SegmentCurves::defaults();
    const auto schema = syn::make_schema(syn::Strategy::spline, 6);
    TrainConfig config;
    config.epochs = 4;
    config.holdout_fraction = 0.0;
    const auto trained = train(config, syn::make_model(schema, {}), syn::encode(schema, syn::generate(curves, 8000, 1006))).model;
    const std::size_t z = schema.field_id("z");
    const auto& t = schema.field(z).continuous().transform;

    double midpoint_gap = 0.0;
    std::vector<double> mean_gap;
    for (std::size_t n : {10u, 200u, 1000u}) {
        const auto [exported, table] = export_binned(trained, z, make_boundaries(t, n, BoundaryMode::inverse_cdf));
        double total = 0.0;
        std::size_t count = 0;
        for (int segment = 0; segment < 8; ++segment) {
            for (double mid : table.midpoints) {
                const auto raw = syn::raw_row(segment, mid);
                midpoint_gap = std::max(midpoint_gap, oracle::relative_error(score(exported, encode_row(exported.schema(), raw)),
                                                                             score(trained, encode_row(schema, raw)), 1.0));
            }
            for (int i = 0; i <= 4000; ++i) {
                const auto raw = syn::raw_row(segment, i / 100.0);
                total += std::abs(score(exported, encode_row(exported.schema(), raw)) - score(trained, encode_row(schema, raw)));
                ++count;
            }
        }
        mean_gap.push_back(total / static_cast<double>(count));
    }
    const bool monotone = mean_gap[0] > mean_gap[1] && mean_gap[1] > mean_gap[2];
    return verdict(midpoint_gap <= 1e-12 && monotone, "midpoint gap " + fmt(midpoint_gap) + ", mean grid gap " +
                                                          fmt(mean_gap[0]) + " / " + fmt(mean_gap[1]) + " / " +
                                                          fmt(mean_gap[2]) + " for N = 10 / 200 / 1000");
}

// 7. Bins versus splines on the synthetic data.
Outcome synthetic_experiment() {
    const syn::ComparisonConfig config;
    const auto result = syn::run_comparison(syn::SegmentCurves::defaults(), config);
    std::ostringstream detail;
    bool ok = true;
    const auto spline = result.mean_test_loss(syn::Strategy::spline, 6);
    std::map<std::size_t, std::optional<double>> bins;
    for (std::size_t n : {5u, 12u, 120u}) bins[n] = result.mean_test_loss(syn::Strategy::binned, n);
    for (const auto& [n, loss] : bins) {
        detail << "bins " << n << " " << (loss ? std::to_string(*loss) : "failed") << ", ";
        ok = ok && loss && spline && *spline < *loss;
    }
    detail << "splines 6 " << (spline ? std::to_string(*spline) : "failed");
    ok = ok && bins[120] && bins[12] && *bins[120] > *bins[12];
    std::size_t failed_cells = 0;
    for (const auto& c : result.cells) failed_cells += c.error.empty() ? 0 : 1;
    if (failed_cells > 0) detail << ", " << failed_cells << " failed cells";
    return verdict(ok, detail.str() + " (" + std::to_string(config.repeats) + " repeats)");
}

// 8. California housing: spline encoding against binning under a shared small grid.
Outcome california() {
    const char* path = std::getenv("SPLINEFM_CALIFORNIA_CSV");
    if (path == nullptr || *path == '\0') {
        return {Status::skip, "set SPLINEFM_CALIFORNIA_CSV to the housing data to run it"};
    }
    const std::vector<std::string> numeric{"longitude",   "latitude",   "housing_median_age", "total_rooms",
                                           "total_bedrooms", "population", "households",         "median_income"};
    auto document = [&](bool splines, std::size_t resolution, double step, std::uint64_t seed) {
        json fields = json::array();
        for (const auto& name : numeric) {
            json f{{"name", name}, {"missing", "median"}};
            if (splines) {
                f.update({{"kind", "continuous"}, {"transform", "quantile"}, {"intervals", resolution}});
            } else {
                f.update({{"kind", "binned"}, {"binning", "quantile"}, {"bins", resolution}});
            }
            fields.push_back(f);
        }
        fields.push_back({{"name", "ocean_proximity"}, {"kind", "categorical"}});
        return json{{"version", 1},
                    {"data", {{"train", path}, {"label", "median_house_value"}, {"label_kind", "real"}}},
                    {"schema", {{"fields", fields}}},
                    {"model", {{"variant", "fwfm"}, {"k", 8}}},
                    {"train", {{"loss", "squared"}, {"step_size", step}, {"epochs", 20}, {"batch_size", 64}, {"seed", seed}}}};
    };

    cli::TableCache cache;
    std::ostringstream detail;
    std::map<bool, double> best;
    for (bool splines : {false, true}) {
        const std::vector<std::size_t> resolutions = splines ? std::vector<std::size_t>{4, 8} : std::vector<std::size_t>{10, 30};
        best[splines] = INFINITY;
        for (std::size_t resolution : resolutions) {
            for (double step : {0.02, 0.05}) {
                double total = 0.0;
                for (std::uint64_t seed = 1; seed <= 20; ++seed) {
                    const auto o = cli::run_training(parse_run_config(document(splines, resolution, step, seed)), cache, nullptr);
                    total += o.holdout.value().rmse_original.value();
                }
                best[splines] = std::min(best[splines], total / 20.0);
            }
        }
    }
    const double gap = (best[false] - best[true]) / best[false];
    detail << "best mean holdout RMSE: bins " << best[false] << ", splines " << best[true] << " (gap " << fmt(100.0 * gap)
           << "%)";
    return verdict(gap >= 0.02, detail.str());
}

// 9. Replaying a manifest reproduces the outputs bit for bit.
int run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" + SPLINEFM_CLI + "' " + args + " >> log.txt 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "splinefm_acceptance_9";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream data(dir / "data.csv");
        data << "b0,b1,b2,z,y\n";
        for (const auto& r : syn::generate(syn::SegmentCurves::defaults(), 2000, 1009)) {
            data << (r.segment & 1) << ',' << ((r.segment >> 1) & 1) << ',' << ((r.segment >> 2) & 1) << ',' << r.z << ','
                 << r.label << '\n';
        }
        json config{{"version", 1},
                    {"data", {{"train", "data.csv"}, {"label", "y"}}},
                    {"schema",
                     {{"defaults", {{"kind", "categorical"}}},
                      {"fields", {"b0", "b1", "b2", {{"name", "z"}, {"kind", "continuous"}, {"transform", "minmax"}}}}}},
                    {"model", {{"variant", "fwfm"}, {"k", 3}}},
                    {"train", {{"epochs", 3}, {"seed", 7}}},
                    {"export", {{"field", "z"}, {"bins", 40}}}};
        std::ofstream(dir / "run.json") << config.dump(1);
        config["sweep"] = {{"grid", {{"/model/k", {2, 4}}}}, {"seeds", {1, 2}}};
        std::ofstream(dir / "sweep.json") << config.dump(1);
        std::ofstream(dir / "synth.json")
            << json{{"version", 1},
                    {"synth",
                     {{"train_rows", 1500}, {"test_rows", 1500}, {"repeats", 2}, {"bin_counts", {5, 12}},
                      {"spline_intervals", {6}}, {"train", {{"epochs", 2}}}, {"grid_points", 41}}}}
                   .dump(1);
    }

    const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
        {"train -c run.json -o train", {"model.json", "metrics.json", "progress.jsonl"}},
        {"eval -m train/model.json -d data.csv -o eval", {"metrics.json"}},
        {"export-bins -m train/model.json -c run.json -o export", {"model.json", "bins.tsv"}},
        {"sweep -c sweep.json -o sweep", {"sweep.tsv"}},
        {"synth -c synth.json -o synth", {"results.tsv", "summary.tsv", "train.tsv"}},
    };
    std::size_t compared = 0;
    for (const auto& [args, files] : runs) {
        const std::string out = args.substr(args.rfind(' ') + 1);
        if (run_cli(dir, args) != 0) return verdict(false, "'" + args + "' failed: " + slurp(dir / "log.txt"));
        if (run_cli(dir, "rerun " + out + "/manifest.json -o " + out + "_again") != 0) {
            return verdict(false, "rerun of '" + args + "' failed: " + slurp(dir / "log.txt"));
        }
        for (const auto& f : files) {
            const auto first = slurp(dir / out / f);
            if (first.empty() || first != slurp(dir / (out + "_again") / f)) {
                return verdict(false, out + "/" + f + " differs after rerun");
            }
            ++compared;
        }
    }
    fs::remove_all(dir);
    return verdict(true, std::to_string(runs.size()) + " verbs rerun, " + std::to_string(compared) +
                             " output files byte-identical");
}

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "spanning property", 10, spanning},
        {2, "pairwise spanning", 30, pairwise_spanning},
        {3, "B-spline correctness", 5, bspline_correctness},
        {4, "gradient check", 30, gradient_check},
        {5, "brute-force equivalence", 30, brute_force},
        {6, "binning export fidelity", 60, export_fidelity},
        {7, "synthetic bins versus splines", 1800, synthetic_experiment},
        {8, "California housing direction", 3600, california},
        {9, "determinism", 120, determinism},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && wanted.count(c.id) == 0) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.check();
        } catch (const std::exception& e) {
            outcome = {Status::fail, std::string("error: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (outcome.status == Status::pass && seconds > c.budget_seconds) {
            outcome = {Status::fail, outcome.detail + "; over the " + fmt(c.budget_seconds) + " s budget"};
        }
        const char* label = outcome.status == Status::pass ? "PASS" : outcome.status == Status::skip ? "SKIP" : "FAIL";
        failures += outcome.status == Status::fail ? 1 : 0;
        std::cout << "criterion " << c.id << " " << label << " " << c.name << ": " << outcome.detail << " ["
                  << fmt(seconds) << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
