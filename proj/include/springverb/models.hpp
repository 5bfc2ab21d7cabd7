#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "springverb/layers.hpp"
#include "springverb/tensor.hpp"

namespace springverb {

enum class ModelKind { tcn, wavenet, gcn, lstm, gru };

const std::vector<ModelKind>& all_model_kinds();
std::string kind_name(ModelKind k);
/// Throws listing the valid names on an unknown kind.
ModelKind kind_from(const std::string& name);

struct ModelConfig {
    ModelKind kind = ModelKind::tcn;
    int channels = 32;
    int kernel_size = 3;
    int dilation_growth = 2;
    int n_blocks = 8;
    int stacks_per_block = 1;  // WaveNet stacks / GCN layers per block
    int hidden_size = 64;      // recurrent kinds
    int cond_dim = 2;
    int sample_rate = 16000;
    bool use_batchnorm = false;
    bool use_skip = false;
    int pool_kernel = 2;
    int pool_stride = 1;

    static ModelConfig defaults(ModelKind kind, int sample_rate = 16000);
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

bool is_convolutional(ModelKind k);

/// Closed-form receptive field for convolutional kinds; nullopt for the
/// recurrent kinds (unbounded).
std::optional<int> receptive_field(const ModelConfig& cfg);

/// Parameter count as a pure function of the config.
std::int64_t param_count(const ModelConfig& cfg);

/// One built architecture: a config plus named parameter tensors. Parameters
/// are shared with the internal layers, so writing through the registry (or
/// an optimizer) updates the model in place.
class Model {
public:
    static Model build(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    /// x: [B x 1 x T], cond: [B x cond_dim] -> [B x 1 x T].
    Tensor forward(const Tensor& x, const Tensor& cond, Ctx& ctx);

    /// Convenience inference entry point on a 1-D signal with zero cond.
    Tensor process(const Tensor& x);

    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
    std::vector<std::pair<std::string, Tensor>>& params_mut() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& buffers() const { return buffers_; }
    Tensor* find_param(const std::string& name);
    Tensor* find_buffer(const std::string& name);

private:
    struct ConvBlock {
        CausalConv conv;
        Film film;
        Prelu act;
        std::optional<CausalConv> proj;
    };
    struct GcnLayer {
        CausalConv conv;  // valid convolution, re-padded after gating
        Film film;
        CausalConv mix;
        std::optional<CausalConv> proj;
    };
    struct Recurrent {
        CausalConv front;
        Lstm lstm;
        Gru gru;
        Film film;
        CausalConv head;
    };

    Tensor forward_conv_net(const Tensor& x, const Tensor& cond, Ctx& ctx);
    Tensor forward_recurrent(const Tensor& x, const Tensor& cond, Ctx& ctx);

    ModelConfig cfg_;
    std::vector<ConvBlock> blocks_;
    std::vector<GcnLayer> gcn_;
    std::optional<Recurrent> rec_;
    CausalConv head_;  // convolutional kinds
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<std::pair<std::string, Tensor>> buffers_;
};

}  // namespace springverb
