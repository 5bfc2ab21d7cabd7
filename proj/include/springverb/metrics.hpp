#pragma once

#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "springverb/dataset.hpp"
#include "springverb/losses.hpp"
#include "springverb/models.hpp"

namespace springverb {

/// Error-to-signal ratio: sum (y - yhat)^2 / sum y^2. Throws when the target
/// is identically zero.
real esr(std::span<const real> pred, std::span<const real> target);

/// mrstft with the default config, value only.
real mrstft_metric(const Tensor& pred, const Tensor& target);

struct RtfResult {
    real median = 0;
    real min_v = 0;
    real max_v = 0;
    int repeats = 0;
    bool real_time() const { return median <= 1; }
};

/// Median over `repeats` timed runs (one untimed warm-up) of processing time
/// divided by clip duration. Single-threaded inference on the full clip.
RtfResult rtf(Model& model, real clip_len_s, int sample_rate, int repeats);

struct EvalRow {
    std::string model;
    real esr = 0;
    real mrstft = 0;
    std::optional<real> rtf;  // absent for the reference baselines
};

struct EvalReport {
    std::vector<EvalRow> rows;
    int test_items = 0;
    std::string split;
    std::string hardware;
    std::uint64_t seed = 0;
    nlohmann::json run_config;
};

/// Prediction = dry input, target = wet.
EvalRow naive_baseline_metrics(const DatasetManifest& manifest, const std::string& split);

/// Prediction = seeded uniform white noise in [-1, 1] of target length.
EvalRow dummy_regressor_metrics(const DatasetManifest& manifest, const std::string& split,
                                std::uint64_t seed);

/// Trained-model row over a split (per-item metrics averaged; inference may
/// fan out across worker threads, accumulation order stays fixed).
EvalRow model_metrics(Model& model, const DatasetManifest& manifest, const std::string& split,
                      const std::string& row_name);

std::string hardware_descriptor();
std::string report_table(const EvalReport& report);
nlohmann::json report_json(const EvalReport& report);

}  // namespace springverb
