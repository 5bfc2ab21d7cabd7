#include "springverb/models.hpp"

#include <cmath>
#include <sstream>

#include "springverb/rng.hpp"

namespace springverb {

const std::vector<ModelKind>& all_model_kinds() {
    static const std::vector<ModelKind> kinds{ModelKind::tcn, ModelKind::wavenet, ModelKind::gcn,
                                              ModelKind::lstm, ModelKind::gru};
    return kinds;
}

std::string kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::tcn: return "tcn";
        case ModelKind::wavenet: return "wavenet";
        case ModelKind::gcn: return "gcn";
        case ModelKind::lstm: return "lstm";
        case ModelKind::gru: return "gru";
    }
    return "?";
}

ModelKind kind_from(const std::string& name) {
    for (ModelKind k : all_model_kinds())
        if (kind_name(k) == name) return k;
    std::ostringstream os;
    os << "unknown model kind '" << name << "'; valid kinds:";
    for (ModelKind k : all_model_kinds()) os << " " << kind_name(k);
    throw std::invalid_argument(os.str());
}

bool is_convolutional(ModelKind k) {
    return k == ModelKind::tcn || k == ModelKind::wavenet || k == ModelKind::gcn;
}

ModelConfig ModelConfig::defaults(ModelKind kind, int sample_rate) {
    ModelConfig c;
    c.kind = kind;
    c.sample_rate = sample_rate;
    switch (kind) {
        case ModelKind::tcn:
            c.channels = 32;
            c.n_blocks = 8;
            c.stacks_per_block = 1;
            break;
        case ModelKind::wavenet:
            c.channels = 16;
            c.n_blocks = 2;
            c.stacks_per_block = 4;
            break;
        case ModelKind::gcn:
            c.channels = 16;
            c.n_blocks = 2;
            c.stacks_per_block = 4;
            break;
        case ModelKind::lstm:
            c.channels = 32;
            c.hidden_size = 64;
            c.use_skip = true;
            break;
        case ModelKind::gru:
            c.channels = 32;
            c.hidden_size = 64;
            break;
    }
    return c;
}

nlohmann::json ModelConfig::to_json() const {
    return {{"kind", kind_name(kind)},
            {"channels", channels},
            {"kernel_size", kernel_size},
            {"dilation_growth", dilation_growth},
            {"n_blocks", n_blocks},
            {"stacks_per_block", stacks_per_block},
            {"hidden_size", hidden_size},
            {"cond_dim", cond_dim},
            {"sample_rate", sample_rate},
            {"use_batchnorm", use_batchnorm},
            {"use_skip", use_skip},
            {"pool_kernel", pool_kernel},
            {"pool_stride", pool_stride}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.kind = kind_from(j.at("kind").get<std::string>());
    c.channels = j.at("channels").get<int>();
    c.kernel_size = j.at("kernel_size").get<int>();
    c.dilation_growth = j.at("dilation_growth").get<int>();
    c.n_blocks = j.at("n_blocks").get<int>();
    c.stacks_per_block = j.at("stacks_per_block").get<int>();
    c.hidden_size = j.at("hidden_size").get<int>();
    c.cond_dim = j.at("cond_dim").get<int>();
    c.sample_rate = j.at("sample_rate").get<int>();
    c.use_batchnorm = j.at("use_batchnorm").get<bool>();
    c.use_skip = j.at("use_skip").get<bool>();
    c.pool_kernel = j.at("pool_kernel").get<int>();
    c.pool_stride = j.at("pool_stride").get<int>();
    return c;
}

namespace {

void validate(const ModelConfig& c) {
    if (c.channels <= 0 || c.kernel_size <= 0 || c.dilation_growth <= 0 || c.n_blocks <= 0 ||
        c.stacks_per_block <= 0 || c.hidden_size <= 0 || c.cond_dim <= 0 || c.pool_kernel <= 0 ||
        c.pool_stride <= 0)
        throw std::invalid_argument("model config has non-positive dimensions");
}

// dilations of every conv layer in network order
std::vector<int> conv_dilations(const ModelConfig& c) {
    std::vector<int> d;
    if (c.kind == ModelKind::tcn) {
        int cur = 1;
        for (int i = 0; i < c.n_blocks; ++i) {
            d.push_back(cur);
            cur *= c.dilation_growth;
        }
    } else {  // wavenet / gcn: dilation resets each block
        for (int b = 0; b < c.n_blocks; ++b) {
            int cur = 1;
            for (int s = 0; s < c.stacks_per_block; ++s) {
                d.push_back(cur);
                cur *= c.dilation_growth;
            }
        }
    }
    return d;
}

}  // namespace

std::optional<int> receptive_field(const ModelConfig& cfg) {
    if (!is_convolutional(cfg.kind)) return std::nullopt;
    std::int64_t sum = 0;
    for (int d : conv_dilations(cfg)) sum += d;
    return static_cast<int>(1 + static_cast<std::int64_t>(cfg.kernel_size - 1) * sum);
}

std::int64_t param_count(const ModelConfig& c) {
    const auto conv_n = [](std::int64_t cout, std::int64_t cin, std::int64_t k) {
        return cout * cin * k + cout;
    };
    const auto film_n = [&](std::int64_t ch) {
        return static_cast<std::int64_t>(c.cond_dim) * 16 + 16 + 16 * 2 * ch + 2 * ch;
    };
    const std::int64_t C = c.channels, K = c.kernel_size, H = c.hidden_size;
    std::int64_t n = 0;
    switch (c.kind) {
        case ModelKind::tcn:
        case ModelKind::wavenet: {
            const int layers = (c.kind == ModelKind::tcn) ? c.n_blocks : c.n_blocks * c.stacks_per_block;
            for (int i = 0; i < layers; ++i) {
                const std::int64_t cin = i == 0 ? 1 : C;
                n += conv_n(C, cin, K) + film_n(C) + C;  // conv + film + prelu
                if (cin != C) n += conv_n(C, cin, 1);    // residual projection
            }
            n += conv_n(1, C, 1);  // head
            break;
        }
        case ModelKind::gcn: {
            const int layers = c.n_blocks * c.stacks_per_block;
            for (int i = 0; i < layers; ++i) {
                const std::int64_t cin = i == 0 ? 1 : C;
                n += conv_n(2 * C, cin, K) + film_n(2 * C) + conv_n(C, C, 1);
                if (cin != C) n += conv_n(C, cin, 1);
            }
            n += conv_n(1, C, 1);
            break;
        }
        case ModelKind::lstm:
            n += conv_n(C, 1, K) + (C * 4 * H + H * 4 * H + 4 * H) + film_n(H) + conv_n(1, H, 1);
            break;
        case ModelKind::gru:
            n += conv_n(C, 1, K) + (C * 3 * H + H * 3 * H + 3 * H) + film_n(H) + conv_n(1, H, 1);
            break;
    }
    return n;
}

// --- construction -------------------------------------------------------------

namespace {

Tensor uniform_tensor(Rng& rng, Shape shape, real bound) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.mut_data()) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

Model Model::build(const ModelConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    Model m;
    m.cfg_ = cfg;
    Rng rng(seed);

    auto reg = [&m](const std::string& name, Tensor t) -> Tensor {
        m.params_.emplace_back(name, t);
        return t;
    };
    auto reg_buf = [&m](const std::string& name, Tensor t) -> Tensor {
        m.buffers_.emplace_back(name, t);
        return t;
    };

    auto make_conv = [&](const std::string& name, int cout, int cin, int k, int dilation,
                         bool causal) {
        CausalConv conv;
        const real bound = 1 / std::sqrt(static_cast<real>(cin * k));
        conv.w = reg(name + ".w", uniform_tensor(rng, {cout, cin, k}, bound));
        conv.b = reg(name + ".b", Tensor::zeros({cout}));
        conv.dilation = dilation;
        conv.causal_pad = causal;
        return conv;
    };
    auto make_film = [&](const std::string& name, int ch) {
        Film f;
        const real b1w = 1 / std::sqrt(static_cast<real>(cfg.cond_dim));
        const real b2w = 1 / std::sqrt(static_cast<real>(16));
        f.w1 = reg(name + ".w1", uniform_tensor(rng, {cfg.cond_dim, 16}, b1w));
        f.b1 = reg(name + ".b1", Tensor::zeros({16}));
        f.w2 = reg(name + ".w2", uniform_tensor(rng, {16, 2 * ch}, b2w));
        // gamma half starts at 1 so an all-zero conditioning vector leaves the
        // modulated signal alive
        Tensor b2 = Tensor::zeros({2 * ch});
        for (int i = 0; i < ch; ++i) b2.mut_data()[static_cast<std::size_t>(i)] = 1;
        f.b2 = reg(name + ".b2", b2);
        f.use_batchnorm = cfg.use_batchnorm;
        if (cfg.use_batchnorm) {
            f.bn_mean = reg_buf(name + ".bn_mean", Tensor::zeros({ch}));
            f.bn_var = reg_buf(name + ".bn_var", Tensor::full({ch}, 1));
        }
        return f;
    };
    auto make_prelu = [&](const std::string& name, int ch) {
        Prelu p;
        p.slope = reg(name + ".slope", Tensor::full({ch}, static_cast<real>(0.25)));
        return p;
    };

    const int C = cfg.channels, K = cfg.kernel_size, H = cfg.hidden_size;
    switch (cfg.kind) {
        case ModelKind::tcn:
        case ModelKind::wavenet: {
            const auto dil = conv_dilations(cfg);
            for (std::size_t i = 0; i < dil.size(); ++i) {
                std::ostringstream name;
                if (cfg.kind == ModelKind::tcn)
                    name << "block" << i;
                else
                    name << "block" << (i / static_cast<std::size_t>(cfg.stacks_per_block)) << ".stack"
                         << (i % static_cast<std::size_t>(cfg.stacks_per_block));
                const int cin = i == 0 ? 1 : C;
                ConvBlock blk;
                blk.conv = make_conv(name.str() + ".conv", C, cin, K, dil[i], true);
                blk.film = make_film(name.str() + ".film", C);
                blk.act = make_prelu(name.str() + ".act", C);
                if (cin != C) blk.proj = make_conv(name.str() + ".proj", C, cin, 1, 1, true);
                m.blocks_.push_back(std::move(blk));
            }
            m.head_ = make_conv("head", 1, C, 1, 1, true);
            break;
        }
        case ModelKind::gcn: {
            const auto dil = conv_dilations(cfg);
            for (std::size_t i = 0; i < dil.size(); ++i) {
                std::ostringstream name;
                name << "block" << (i / static_cast<std::size_t>(cfg.stacks_per_block)) << ".layer"
                     << (i % static_cast<std::size_t>(cfg.stacks_per_block));
                const int cin = i == 0 ? 1 : C;
                GcnLayer layer;
                layer.conv = make_conv(name.str() + ".conv", 2 * C, cin, K, dil[i], false);
                layer.film = make_film(name.str() + ".film", 2 * C);
                layer.mix = make_conv(name.str() + ".mix", C, C, 1, 1, true);
                if (cin != C) layer.proj = make_conv(name.str() + ".proj", C, cin, 1, 1, true);
                m.gcn_.push_back(std::move(layer));
            }
            m.head_ = make_conv("head", 1, C, 1, 1, true);
            break;
        }
        case ModelKind::lstm:
        case ModelKind::gru: {
            Recurrent rec;
            rec.front = make_conv("front", C, 1, K, 1, true);
            const real rb = 1 / std::sqrt(static_cast<real>(H));
            if (cfg.kind == ModelKind::lstm) {
                rec.lstm.wx = reg("rnn.wx", uniform_tensor(rng, {C, 4 * H}, rb));
                rec.lstm.wh = reg("rnn.wh", uniform_tensor(rng, {H, 4 * H}, rb));
                Tensor b = Tensor::zeros({4 * H});
                for (int i = H; i < 2 * H; ++i) b.mut_data()[static_cast<std::size_t>(i)] = 1;  // forget gate
                rec.lstm.b = reg("rnn.b", b);
                rec.lstm.hidden = H;
            } else {
                rec.gru.wx = reg("rnn.wx", uniform_tensor(rng, {C, 3 * H}, rb));
                rec.gru.wh = reg("rnn.wh", uniform_tensor(rng, {H, 3 * H}, rb));
                rec.gru.b = reg("rnn.b", Tensor::zeros({3 * H}));
                rec.gru.hidden = H;
            }
            rec.film = make_film("film", H);
            rec.head = make_conv("head", 1, H, 1, 1, true);
            m.rec_ = std::move(rec);
            break;
        }
    }
    return m;
}

Tensor* Model::find_param(const std::string& name) {
    for (auto& [n, t] : params_)
        if (n == name) return &t;
    return nullptr;
}

Tensor* Model::find_buffer(const std::string& name) {
    for (auto& [n, t] : buffers_)
        if (n == name) return &t;
    return nullptr;
}

Tensor Model::forward(const Tensor& x, const Tensor& cond, Ctx& ctx) {
    if (x.rank() != 3 || x.dim(1) != 1)
        throw ShapeError("model forward expects x[Bx1xT], got " + shape_str(x.shape()));
    if (cond.rank() != 2 || cond.dim(0) != x.dim(0) || cond.dim(1) != cfg_.cond_dim)
        throw ShapeError("model forward expects cond[Bx" + std::to_string(cfg_.cond_dim) +
                         "], got " + shape_str(cond.shape()));
    if (is_convolutional(cfg_.kind)) {
        const int rf = *receptive_field(cfg_);
        if (x.dim(2) < rf)
            throw ShapeError("input of " + std::to_string(x.dim(2)) +
                             " samples is shorter than the receptive field; need at least " +
                             std::to_string(rf));
        return forward_conv_net(x, cond, ctx);
    }
    return forward_recurrent(x, cond, ctx);
}

Tensor Model::forward_conv_net(const Tensor& x, const Tensor& cond, Ctx& ctx) {
    Tensor h = x;
    if (cfg_.kind == ModelKind::gcn) {
        for (auto& layer : gcn_) {
            Tensor z = layer.conv.forward(ctx, h);
            z = layer.film.forward(ctx, z, cond);
            z = gated_activation(z);
            z = pad_time_left(z, layer.conv.dilation * (layer.conv.kernel() - 1));
            z = layer.mix.forward(ctx, z);
            Tensor res = layer.proj ? layer.proj->forward(ctx, h) : h;
            h = add(z, res);
        }
    } else {
        for (auto& blk : blocks_) {
            Tensor z = blk.conv.forward(ctx, h);
            z = blk.film.forward(ctx, z, cond);
            z = blk.act.forward(ctx, z);
            Tensor res = blk.proj ? blk.proj->forward(ctx, h) : h;
            h = add(z, res);
        }
    }
    return head_.forward(ctx, h);
}

Tensor Model::forward_recurrent(const Tensor& x, const Tensor& cond, Ctx& ctx) {
    auto& rec = *rec_;
    Tensor h = relu(rec.front.forward(ctx, x));
    h = max_pool1d(h, cfg_.pool_kernel, cfg_.pool_stride);
    if (cfg_.kind == ModelKind::lstm) {
        h = rec.lstm.forward(ctx, h).y;
    } else {
        h = rec.gru.forward(ctx, h).y;
    }
    h = rec.film.forward(ctx, h, cond);
    h = rec.head.forward(ctx, h);
    if (cfg_.kind == ModelKind::gru) return tanh(h);
    if (cfg_.use_skip) h = add(h, x);
    return h;
}

Tensor Model::process(const Tensor& x) {
    if (x.rank() != 1) throw ShapeError("process expects a 1-D signal");
    Ctx ctx;  // no tape
    Tensor cond = Tensor::zeros({1, cfg_.cond_dim});
    Tensor y = forward(reshape(x, {1, 1, static_cast<int>(x.numel())}), cond, ctx);
    return y.with_shape({static_cast<int>(x.numel())});
}

}  // namespace springverb
