#pragma once

#include <iosfwd>
#include <limits>
#include <string>

#include <json.hpp>

#include "springverb/dataset.hpp"
#include "springverb/losses.hpp"
#include "springverb/models.hpp"

namespace springverb {

struct TrainConfig {
    real lr0 = static_cast<real>(0.01);
    real factor = static_cast<real>(0.1);
    int patience = 10;
    real plateau_eps = static_cast<real>(1e-6);
    int batch_size = 0;   // 0 -> 64 at 16 kHz, 16 otherwise
    int segment_len = 0;  // 0 -> 2 s at 16 kHz, 2.5 s otherwise
    int max_epochs = 200;
    std::uint64_t seed = 0;
    real grad_clip = -1;  // <0 -> 5.0 for recurrent kinds, off for conv kinds
    ModelConfig model;
    MrstftConfig loss = MrstftConfig::defaults();

    int effective_batch_size() const;
    int effective_segment_len() const;
    real effective_grad_clip() const;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Bias-corrected Adam on one parameter group. Moments m/v are owned by the
/// caller and must match the parameter length; t is the 1-based step count.
void adam_step(std::span<real> param, std::span<const real> grad, std::vector<real>& m,
               std::vector<real>& v, std::int64_t t, real lr,
               real beta1 = static_cast<real>(0.9), real beta2 = static_cast<real>(0.999),
               real eps = static_cast<real>(1e-8));

/// Reduce-on-plateau: an epoch improves when val < best - eps; after
/// `patience` consecutive non-improving epochs the lr is multiplied by
/// `factor` and the counter resets.
struct PlateauScheduler {
    real lr;
    real factor;
    int patience;
    real eps;
    real best = std::numeric_limits<real>::infinity();
    int since_improve = 0;

    PlateauScheduler(real lr0, real factor_, int patience_, real eps_)
        : lr(lr0), factor(factor_), patience(patience_), eps(eps_) {}

    /// Returns true when this update reduced the learning rate.
    bool update(real val_loss);
    bool improved_last = false;
};

/// Serialized training snapshot. On disk: "SPRV" magic, u32 version, u64
/// header length, JSON header, then raw little-endian parameter blobs
/// (params, buffers, adam m, adam v, in header order) at the declared
/// scalar width.
struct Checkpoint {
    std::uint32_t version = 1;
    std::string scalar = kScalarName;
    nlohmann::json run_config;
    int epoch = 0;
    std::int64_t step = 0;
    real lr = 0;
    real best_val = std::numeric_limits<real>::infinity();
    int since_improve = 0;
    std::int64_t nonfinite_skips = 0;
    std::vector<std::uint64_t> rng_state;
    std::vector<real> train_hist;
    std::vector<real> val_hist;
    std::vector<std::pair<std::string, Tensor>> params;
    std::vector<std::pair<std::string, Tensor>> buffers;
    std::vector<std::pair<std::string, Tensor>> adam_m;
    std::vector<std::pair<std::string, Tensor>> adam_v;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds the model recorded in a checkpoint and loads its tensors.
Model model_from_checkpoint(const Checkpoint& ckpt);

struct TrainResult {
    std::string best_path;
    std::string last_path;
    std::vector<real> train_hist;
    std::vector<real> val_hist;
    int epochs_run = 0;
    real best_val = 0;
};

/// Full optimization loop: per epoch, seed-shuffled train batches ->
/// forward -> combined loss -> backward -> Adam; then validation, plateau
/// scheduling and checkpointing (best on improvement, last every epoch).
/// `log` receives one JSON line per epoch. `resume_path` continues a run
/// bit-exactly on the same build.
TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest,
                  const std::string& out_dir, const std::string& resume_path = "",
                  std::ostream* log = nullptr);

}  // namespace springverb
