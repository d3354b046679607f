// Trains a spline-encoded model on synthetic click data, compares it with a
// binned model, then exports the spline model to 20 bins.
#include <cstdio>

#include "splinefm/bin_export.hpp"
#include "splinefm/synthetic.hpp"

int main() {
    using namespace splinefm;
    namespace syn = splinefm::synthetic;

    const auto curves = syn::SegmentCurves::defaults();
    const auto train_raw = syn::generate(curves, 20000, 1);
    const auto test_raw = syn::generate(curves, 20000, 2);

    TrainConfig config;
    config.epochs = 8;

    auto fit = [&](syn::Strategy strategy, std::size_t intervals) {
        const auto schema = syn::make_schema(strategy, intervals);
        auto model = train(config, syn::make_model(schema, {}), syn::encode(schema, train_raw)).model;
        const double loss = evaluate(model, syn::encode(schema, test_raw), LossKind::logloss).value();
        std::printf("%-8s %3zu intervals: test log loss %.5f\n", std::string(syn::to_string(strategy)).c_str(), intervals,
                    loss);
        return model;
    };
    fit(syn::Strategy::binned, 12);
    const Model spline = fit(syn::Strategy::spline, 6);

    const std::size_t z = spline.schema().field_id("z");
    const auto boundaries = make_boundaries(spline.schema().field(z).continuous().transform, 20, BoundaryMode::inverse_cdf);
    const auto [binned, table] = export_binned(spline, z, boundaries);

    std::printf("\nsegment 3, true vs spline vs exported:\n");
    for (double value : {2.0, 10.0, 20.0, 30.0, 38.0}) {
        const auto raw = syn::raw_row(3, value);
        std::printf("  z = %4.1f  %.4f  %.4f  %.4f\n", value, curves(3, value),
                    sigmoid(score(spline, encode_row(spline.schema(), raw))),
                    sigmoid(score(binned, encode_row(binned.schema(), raw))));
    }
    return 0;
}
