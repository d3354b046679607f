/**
 * @file training.hpp
 * @brief Mini-batch SGD / Adagrad training and evaluation.
 *
 * Training is single-threaded and fully determined by TrainConfig::seed:
 * parameter initialization, the holdout split, and per-epoch shuffling each
 * draw from their own seeded stream.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splinefm/error.hpp"
#include "splinefm/model.hpp"

namespace splinefm {

enum class LossKind { logloss, squared };
enum class OptimizerKind { sgd, adagrad };

inline std::string_view to_string(LossKind k) { return k == LossKind::logloss ? "logloss" : "squared"; }
inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adagrad"; }

inline LossKind parse_loss(std::string_view s) {
    if (s == "logloss") return LossKind::logloss;
    if (s == "squared") return LossKind::squared;
    throw ConfigError("unknown loss '" + std::string(s) + "' (expected logloss or squared)");
}

inline OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adagrad") return OptimizerKind::adagrad;
    throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected sgd or adagrad)");
}

/// Predicted probabilities are clamped to [kProbabilityClamp, 1 - kProbabilityClamp] before the log.
inline constexpr double kProbabilityClamp = 1e-7;

struct TrainConfig {
    LossKind loss = LossKind::logloss;
    OptimizerKind optimizer = OptimizerKind::adagrad;
    double step_size = 0.05;
    double adagrad_epsilon = 1e-8;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    double l2 = 0.0;
    std::uint64_t seed = 1;
    double holdout_fraction = 0.2;
    bool shuffle = true;
    bool keep_best = true;                ///< return the epoch with the lowest holdout loss
    std::optional<double> init_stddev;    ///< default 1/sqrt(k_f)

    void validate() const {
        if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("train: step_size must be positive");
        if (!(adagrad_epsilon > 0.0)) throw ConfigError("train: adagrad_epsilon must be positive");
        if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
        if (!(l2 >= 0.0)) throw ConfigError("train: l2 must be non-negative");
        if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
            throw ConfigError("train: holdout_fraction must lie in [0, 1)");
        }
        if (init_stddev && !(*init_stddev >= 0.0)) throw ConfigError("train: init_stddev must be non-negative");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> holdout_loss;
};

struct Metrics {
    LossKind loss = LossKind::logloss;
    std::optional<double> cross_entropy;
    std::optional<double> rmse;           ///< in the model's (possibly standardized) target units
    std::optional<double> rmse_original;  ///< rmse rescaled to the raw target units
    std::size_t sample_count = 0;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;

    /// The number minimized by training: cross-entropy or rmse.
    [[nodiscard]] double value() const {
        return loss == LossKind::logloss ? cross_entropy.value_or(NAN) : rmse.value_or(NAN);
    }
};

inline double sigmoid(double s) {
    if (s >= 0.0) {
        return 1.0 / (1.0 + std::exp(-s));
    }
    const double e = std::exp(s);
    return e / (1.0 + e);
}

inline double clamped_log_loss(double probability, double label) {
    const double p = std::clamp(probability, kProbabilityClamp, 1.0 - kProbabilityClamp);
    return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

/// Target in model units: labels as-is for logloss, standardized for squared loss.
inline double model_target(const Model& model, LossKind loss, double label) {
    return loss == LossKind::logloss ? label : (label - model.target_shift()) / model.target_scale();
}

/// Prediction in label units: probability for logloss, de-standardized value otherwise.
inline double predict(const Model& model, const EncodedRow& row, LossKind loss) {
    const double s = score(model, row);
    return loss == LossKind::logloss ? sigmoid(s) : model.target_shift() + model.target_scale() * s;
}

inline Metrics evaluate(const Model& model, std::span<const EncodedRow> rows, LossKind loss) {
    if (rows.empty()) {
        throw DataError("evaluate: no rows");
    }
    ForwardTrace trace;
    double total = 0.0;
    for (const auto& row : rows) {
        const double s = forward(model, row, trace);
        if (loss == LossKind::logloss) {
            total += clamped_log_loss(sigmoid(s), row.label);
        } else {
            const double d = s - model_target(model, loss, row.label);
            total += d * d;
        }
    }
    Metrics m;
    m.loss = loss;
    m.sample_count = rows.size();
    const double mean = total / static_cast<double>(rows.size());
    if (loss == LossKind::logloss) {
        m.cross_entropy = mean;
    } else {
        m.rmse = std::sqrt(mean);
        m.rmse_original = *m.rmse * model.target_scale();
    }
    return m;
}

/// Independent sub-seed for stream `stream` of a run seeded with `seed` (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct TrainResult {
    Model model;
    Metrics metrics;  ///< metrics of the returned parameters on the training rows, plus history
};

namespace detail {

class Optimizer {
public:
    Optimizer(const TrainConfig& config, std::size_t num_params)
        : config_(config), accum_(config.optimizer == OptimizerKind::adagrad ? num_params : 0, 0.0) {}

    void apply(std::span<double> params, std::span<const std::size_t> touched, std::span<double> grad,
               double inv_batch) {
        for (std::size_t idx : touched) {
            double g = grad[idx] * inv_batch;
            grad[idx] = 0.0;
            if (idx != 0) {
                g += config_.l2 * params[idx];
            }
            if (config_.optimizer == OptimizerKind::adagrad) {
                accum_[idx] += g * g;
                params[idx] -= config_.step_size * g / (std::sqrt(accum_[idx]) + config_.adagrad_epsilon);
            } else {
                params[idx] -= config_.step_size * g;
            }
        }
    }

private:
    const TrainConfig& config_;
    std::vector<double> accum_;
};

}  // namespace detail

/// Trains `model` (its shape; parameters are re-initialized from config.seed)
/// on `train_rows`, scoring `holdout_rows` after every epoch. Holdout rows never
/// produce gradients; they only select the returned epoch when keep_best is set.
inline TrainResult train(const TrainConfig& config, Model model, std::span<const EncodedRow> train_rows,
                         std::span<const EncodedRow> holdout_rows, std::ostream* progress = nullptr) {
    config.validate();
    if (train_rows.empty()) {
        throw DataError("train: no training rows");
    }
    const LabelKind labels = model.schema().label_kind();
    if (config.loss == LossKind::logloss && labels != LabelKind::binary) {
        throw ConfigError("train: logloss requires binary labels");
    }
    model.initialize(derive_seed(config.seed, 0), config.init_stddev);

    std::mt19937_64 shuffle_rng(derive_seed(config.seed, 2));
    std::vector<std::size_t> order(train_rows.size());
    std::iota(order.begin(), order.end(), 0);

    detail::Optimizer optimizer(config, model.num_params());
    std::vector<double> grad_accum(model.num_params(), 0.0);
    std::vector<char> is_touched(model.num_params(), 0);
    std::vector<std::size_t> touched;
    ForwardTrace trace;
    SparseGradient grad;

    Metrics result_metrics;
    std::vector<double> best_params;
    double best_holdout = INFINITY;
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> history;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.shuffle) {
            std::shuffle(order.begin(), order.end(), shuffle_rng);
        }
        for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
            const std::size_t stop = std::min(start + config.batch_size, order.size());
            for (std::size_t k = start; k < stop; ++k) {
                const auto& row = train_rows[order[k]];
                const double s = forward(model, row, trace);
                double dloss = 0.0;
                if (config.loss == LossKind::logloss) {
                    dloss = sigmoid(s) - row.label;
                } else {
                    dloss = s - model_target(model, config.loss, row.label);
                }
                if (!std::isfinite(s) || !std::isfinite(dloss)) {
                    throw NumericalError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(batch) + " (row " + std::to_string(order[k]) +
                                         "); try a smaller step size");
                }
                backward(model, row, trace, dloss, grad);
                for (std::size_t g = 0; g < grad.size(); ++g) {
                    const std::size_t idx = grad.index[g];
                    grad_accum[idx] += grad.value[g];
                    if (!is_touched[idx]) {
                        is_touched[idx] = 1;
                        touched.push_back(idx);
                    }
                }
            }
            std::sort(touched.begin(), touched.end());
            optimizer.apply(model.mutable_params(), touched, grad_accum, 1.0 / static_cast<double>(stop - start));
            for (std::size_t idx : touched) {
                is_touched[idx] = 0;
            }
            touched.clear();
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = evaluate(model, train_rows, config.loss).value();
        if (!std::isfinite(record.train_loss)) {
            throw NumericalError("non-finite training loss after epoch " + std::to_string(epoch));
        }
        if (!holdout_rows.empty()) {
            record.holdout_loss = evaluate(model, holdout_rows, config.loss).value();
        }
        if (progress != nullptr) {
            *progress << "{\"epoch\":" << epoch << ",\"train_loss\":" << format_number(record.train_loss)
                      << ",\"holdout_loss\":"
                      << (record.holdout_loss ? format_number(*record.holdout_loss) : std::string("null")) << "}\n";
        }
        if (config.keep_best && record.holdout_loss && *record.holdout_loss < best_holdout) {
            best_holdout = *record.holdout_loss;
            best_epoch = epoch;
            best_params.assign(model.params().begin(), model.params().end());
        }
        history.push_back(record);
    }

    if (!best_params.empty() && best_epoch != config.epochs) {
        std::copy(best_params.begin(), best_params.end(), model.mutable_params().begin());
    } else {
        best_epoch = config.epochs;
    }
    Metrics metrics = evaluate(model, train_rows, config.loss);
    metrics.history = std::move(history);
    metrics.best_epoch = best_epoch;
    return {std::move(model), std::move(metrics)};
}

/// Deterministic split: a seeded permutation assigns round(n * fraction) rows to the holdout.
inline std::pair<std::vector<EncodedRow>, std::vector<EncodedRow>> split_holdout(std::span<const EncodedRow> rows,
                                                                                double fraction,
                                                                                std::uint64_t seed) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 1));
    std::shuffle(order.begin(), order.end(), rng);
    const auto holdout_count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    std::vector<char> in_holdout(rows.size(), 0);
    for (std::size_t k = 0; k < holdout_count; ++k) {
        in_holdout[order[k]] = 1;
    }
    std::vector<EncodedRow> train_rows;
    std::vector<EncodedRow> holdout_rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        (in_holdout[i] ? holdout_rows : train_rows).push_back(rows[i]);
    }
    return {std::move(train_rows), std::move(holdout_rows)};
}

/// Splits `rows` by config.holdout_fraction and trains.
inline TrainResult train(const TrainConfig& config, Model model, std::span<const EncodedRow> rows,
                         std::ostream* progress = nullptr) {
    config.validate();
    auto [train_rows, holdout_rows] = split_holdout(rows, config.holdout_fraction, config.seed);
    return train(config, std::move(model), train_rows, holdout_rows, progress);
}

/// Mean and (population) standard deviation of the labels, for target standardization.
inline std::pair<double, double> label_moments(std::span<const EncodedRow> rows) {
    if (rows.empty()) {
        throw DataError("label_moments: no rows");
    }
    double mean = 0.0;
    for (const auto& r : rows) mean += r.label;
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (const auto& r : rows) var += (r.label - mean) * (r.label - mean);
    var /= static_cast<double>(rows.size());
    return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

}  // namespace splinefm
