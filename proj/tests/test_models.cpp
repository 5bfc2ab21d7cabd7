#include <doctest.h>

#include <cmath>

#include "springverb/gradcheck.hpp"
#include "springverb/models.hpp"
#include "oracles.hpp"

using namespace springverb;

namespace {

Tensor forward_once(Model& m, const Tensor& x, const Tensor& cond) {
    Ctx ctx;
    return m.forward(x, cond, ctx);
}

// zero out every bias-like parameter
void zero_biases(Model& m) {
    for (auto& [name, t] : m.params_mut()) {
        const bool bias = name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2");
        if (!bias) continue;
        for (auto& v : t.mut_data()) v = 0;
    }
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("builds are deterministic in the seed") {
    for (ModelKind kind : all_model_kinds()) {
        Model a = Model::build(ModelConfig::defaults(kind), 42);
        Model b = Model::build(ModelConfig::defaults(kind), 42);
        Model c = Model::build(ModelConfig::defaults(kind), 43);
        REQUIRE(a.params().size() == b.params().size());
        bool all_equal = true, differs_from_c = false;
        for (std::size_t i = 0; i < a.params().size(); ++i) {
            const auto da = a.params()[i].second.data();
            const auto db = b.params()[i].second.data();
            const auto dc = c.params()[i].second.data();
            for (std::size_t j = 0; j < da.size(); ++j) {
                if (da[j] != db[j]) all_equal = false;
                if (da[j] != dc[j]) differs_from_c = true;
            }
        }
        CHECK(all_equal);
        CHECK(differs_from_c);
    }
}

TEST_CASE("receptive field closed forms") {
    ModelConfig tcn = ModelConfig::defaults(ModelKind::tcn);
    CHECK(*receptive_field(tcn) == 511);  // 1 + 2*(2^8 - 1)

    ModelConfig wn = ModelConfig::defaults(ModelKind::wavenet);
    CHECK(*receptive_field(wn) == 61);  // 1 + 2*(1+2+4+8)*2

    ModelConfig single;
    single.kind = ModelKind::tcn;
    single.n_blocks = 1;
    single.kernel_size = 3;
    CHECK(*receptive_field(single) == 3);

    ModelConfig k1 = ModelConfig::defaults(ModelKind::gcn);
    k1.kernel_size = 1;
    CHECK(*receptive_field(k1) == 1);

    CHECK(!receptive_field(ModelConfig::defaults(ModelKind::lstm)).has_value());
    CHECK(!receptive_field(ModelConfig::defaults(ModelKind::gru)).has_value());
}

TEST_CASE("kind parsing lists valid kinds on error") {
    CHECK(kind_from("gcn") == ModelKind::gcn);
    CHECK_THROWS_WITH_AS(kind_from("bogus"), doctest::Contains("tcn"), std::invalid_argument);
}

TEST_CASE("config json round trip") {
    for (ModelKind kind : all_model_kinds()) {
        ModelConfig c = ModelConfig::defaults(kind, 48000);
        ModelConfig back = ModelConfig::from_json(c.to_json());
        CHECK(back.to_json() == c.to_json());
    }
}

TEST_CASE("parameter count formula matches an exhaustive walk") {
    for (ModelKind kind : all_model_kinds()) {
        Model m = Model::build(ModelConfig::defaults(kind), 1);
        std::int64_t walked = 0;
        for (const auto& [name, t] : m.params()) walked += t.numel();
        CHECK(walked == param_count(m.config()));
    }
}

TEST_CASE("forward preserves length and rejects short inputs") {
    for (ModelKind kind : all_model_kinds()) {
        ModelConfig cfg = ModelConfig::defaults(kind);
        // shrink for speed, keep topology
        cfg.channels = 4;
        cfg.hidden_size = 4;
        if (is_convolutional(kind)) cfg.n_blocks = 2, cfg.stacks_per_block = 2;
        Model m = Model::build(cfg, 5);
        const int T = is_convolutional(kind) ? *receptive_field(cfg) + 20 : 40;
        Tensor y = forward_once(m, oracles::random_tensor({2, 1, T}, 6), Tensor::zeros({2, cfg.cond_dim}));
        CHECK(y.shape() == Shape{2, 1, T});
        if (is_convolutional(kind)) {
            CHECK_THROWS_WITH_AS(forward_once(m, Tensor::zeros({1, 1, *receptive_field(cfg) - 1}),
                                              Tensor::zeros({1, cfg.cond_dim})),
                                 doctest::Contains("receptive field"), ShapeError);
        }
    }
}

TEST_CASE("zero input with zero biases gives zero output for conv kinds") {
    for (ModelKind kind : {ModelKind::tcn, ModelKind::wavenet, ModelKind::gcn}) {
        ModelConfig cfg = ModelConfig::defaults(kind);
        cfg.channels = 4;
        cfg.n_blocks = 2;
        cfg.stacks_per_block = 2;
        Model m = Model::build(cfg, 8);
        zero_biases(m);
        const int T = *receptive_field(cfg) + 10;
        Tensor y = forward_once(m, Tensor::zeros({1, 1, T}), Tensor::zeros({1, cfg.cond_dim}));
        for (real v : y.data()) CHECK(v == 0);
    }
}

TEST_CASE("gcn rigged for identity reproduces the input through residuals") {
    ModelConfig cfg = ModelConfig::defaults(ModelKind::gcn);
    Model m = Model::build(cfg, 3);
    // gate branch silenced, residual projection copies the input into every
    // channel, head passes channel 0 straight through
    for (auto& [name, t] : m.params_mut()) {
        auto d = t.mut_data();
        if (name.find(".conv.") != std::string::npos || name.find(".mix.") != std::string::npos ||
            name.ends_with(".b") || name.ends_with(".b1")) {
            for (auto& v : d) v = 0;
        } else if (name.find(".film.w2") != std::string::npos) {
            for (auto& v : d) v = 0;
        } else if (name.find(".film.b2") != std::string::npos) {
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = i < d.size() / 2 ? 1 : 0;
        } else if (name.find(".proj.w") != std::string::npos) {
            for (auto& v : d) v = 1;  // 1x1 1->C copy
        } else if (name == "head.w") {
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = i == 0 ? 1 : 0;
        }
    }
    const int T = *receptive_field(cfg) + 25;
    Tensor x = oracles::random_tensor({1, 1, T}, 9);
    Tensor y = forward_once(m, x, Tensor::zeros({1, cfg.cond_dim}));
    for (std::size_t i = 0; i < static_cast<std::size_t>(T); ++i)
        CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("gru output stays inside (-1, 1)") {
    ModelConfig cfg = ModelConfig::defaults(ModelKind::gru);
    cfg.channels = 4;
    cfg.hidden_size = 4;
    Model m = Model::build(cfg, 11);
    Tensor y = forward_once(m, oracles::random_tensor({1, 1, 64}, 12, -1, 1), Tensor::zeros({1, cfg.cond_dim}));
    for (real v : y.data()) {
        CHECK(v > -1);
        CHECK(v < 1);
    }
}

TEST_CASE("causality: no output before the perturbation for any kind") {
    for (ModelKind kind : all_model_kinds()) {
        ModelConfig cfg = ModelConfig::defaults(kind);
        cfg.channels = 4;
        cfg.hidden_size = 6;
        if (is_convolutional(kind)) cfg.n_blocks = 2, cfg.stacks_per_block = 2;
        Model m = Model::build(cfg, 21);
        const int T = is_convolutional(kind) ? *receptive_field(cfg) + 30 : 80;
        const int t0 = T / 2;
        Tensor x1 = oracles::random_tensor({1, 1, T}, 22);
        Tensor x2 = Tensor::from(x1.shape(), {x1.data().begin(), x1.data().end()});
        x2.mut_data()[static_cast<std::size_t>(t0)] += real(0.5);
        Tensor y1 = forward_once(m, x1, Tensor::zeros({1, cfg.cond_dim}));
        Tensor y2 = forward_once(m, x2, Tensor::zeros({1, cfg.cond_dim}));
        INFO(kind_name(kind));
        for (int t = 0; t < t0; ++t) CHECK(y1.data()[static_cast<std::size_t>(t)] ==
                                           y2.data()[static_cast<std::size_t>(t)]);
        CHECK(y1.data()[static_cast<std::size_t>(t0)] != y2.data()[static_cast<std::size_t>(t0)]);
    }
}

TEST_CASE("empirical perturbation extent matches the receptive field formula") {
    oracles::random_vec(1, 0);
    std::mt19937 gen(1234);
    for (int trial = 0; trial < 10; ++trial) {
        ModelConfig cfg;
        cfg.kind = static_cast<ModelKind>(gen() % 3);  // tcn / wavenet / gcn
        cfg.channels = 2 + static_cast<int>(gen() % 3);
        cfg.kernel_size = 1 + static_cast<int>(gen() % 3);
        cfg.dilation_growth = 1 + static_cast<int>(gen() % 3);
        cfg.n_blocks = 1 + static_cast<int>(gen() % 3);
        cfg.stacks_per_block = 1 + static_cast<int>(gen() % 2);
        const int rf = *receptive_field(cfg);
        Model m = Model::build(cfg, 1000 + static_cast<std::uint64_t>(trial));
        const int t0 = 10, T = rf + 40;
        Tensor x1 = oracles::random_tensor({1, 1, T}, 300 + static_cast<unsigned>(trial));
        Tensor x2 = Tensor::from(x1.shape(), {x1.data().begin(), x1.data().end()});
        x2.mut_data()[static_cast<std::size_t>(t0)] += 1;
        Tensor y1 = forward_once(m, x1, Tensor::zeros({1, cfg.cond_dim}));
        Tensor y2 = forward_once(m, x2, Tensor::zeros({1, cfg.cond_dim}));
        int first = -1, last = -1;
        for (int t = 0; t < T; ++t) {
            if (y1.data()[static_cast<std::size_t>(t)] != y2.data()[static_cast<std::size_t>(t)]) {
                if (first < 0) first = t;
                last = t;
            }
        }
        INFO("kind=", kind_name(cfg.kind), " K=", cfg.kernel_size, " growth=", cfg.dilation_growth,
             " blocks=", cfg.n_blocks, " stacks=", cfg.stacks_per_block, " rf=", rf);
        CHECK(first == t0);
        CHECK(last == t0 + rf - 1);
    }
}

TEST_CASE("conv kinds are exactly time invariant beyond the receptive field") {
    for (ModelKind kind : {ModelKind::tcn, ModelKind::wavenet, ModelKind::gcn}) {
        ModelConfig cfg = ModelConfig::defaults(kind);
        cfg.channels = 4;
        cfg.n_blocks = 2;
        cfg.stacks_per_block = 2;
        Model m = Model::build(cfg, 31);
        const int rf = *receptive_field(cfg);
        const int T = rf + 200, s = 16;
        auto base = oracles::random_vec(static_cast<std::size_t>(T), 33);
        Tensor x1 = Tensor::from({1, 1, T}, base);
        std::vector<real> shifted(static_cast<std::size_t>(T), 0);
        for (int t = s; t < T; ++t) shifted[static_cast<std::size_t>(t)] = base[static_cast<std::size_t>(t - s)];
        Tensor x2 = Tensor::from({1, 1, T}, shifted);
        Tensor y1 = forward_once(m, x1, Tensor::zeros({1, cfg.cond_dim}));
        Tensor y2 = forward_once(m, x2, Tensor::zeros({1, cfg.cond_dim}));
        // overlap region: y2[t] must equal y1[t-s] once the shifted input's
        // receptive field holds only real (non zero-padded) samples
        for (int t = s + rf; t < T; ++t)
            CHECK(y2.data()[static_cast<std::size_t>(t)] == y1.data()[static_cast<std::size_t>(t - s)]);
    }
}

TEST_CASE("recurrent kinds are approximately shift invariant after warmup") {
    for (ModelKind kind : {ModelKind::lstm, ModelKind::gru}) {
        ModelConfig cfg = ModelConfig::defaults(kind);
        cfg.channels = 8;
        cfg.hidden_size = 8;
        Model m = Model::build(cfg, 41);
        const int T = 2600, s = 64, warmup = 1000;
        auto base = oracles::random_vec(static_cast<std::size_t>(T), 43, real(-0.5), real(0.5));
        Tensor x1 = Tensor::from({1, 1, T}, base);
        std::vector<real> shifted(static_cast<std::size_t>(T), 0);
        for (int t = s; t < T; ++t) shifted[static_cast<std::size_t>(t)] = base[static_cast<std::size_t>(t - s)];
        Tensor x2 = Tensor::from({1, 1, T}, shifted);
        Tensor y1 = forward_once(m, x1, Tensor::zeros({1, cfg.cond_dim}));
        Tensor y2 = forward_once(m, x2, Tensor::zeros({1, cfg.cond_dim}));
        for (int t = s + warmup; t < T; ++t)
            CHECK(std::fabs(y2.data()[static_cast<std::size_t>(t)] -
                            y1.data()[static_cast<std::size_t>(t - s)]) < 1e-5);
    }
}

TEST_CASE("gradcheck passes on small configs of every kind") {
    for (ModelKind kind : all_model_kinds()) {
        ModelConfig cfg = ModelConfig::defaults(kind);
        cfg.channels = 3;
        cfg.hidden_size = 3;
        if (is_convolutional(kind)) cfg.n_blocks = 2, cfg.stacks_per_block = 2;
        GradCheckOptions opt;
        opt.coords_per_group = 4;
        auto rows = gradcheck_model(cfg, 7, opt);
        INFO(kind_name(kind));
        for (const auto& r : rows) {
            INFO(r.group, " rel_err=", r.max_rel_err);
            CHECK(r.pass);
        }
        // every named parameter group appears exactly once
        Model m = Model::build(cfg, 7);
        CHECK(rows.size() == m.params().size());
    }
}

TEST_CASE("invalid configs are rejected") {
    ModelConfig cfg = ModelConfig::defaults(ModelKind::tcn);
    cfg.channels = 0;
    CHECK_THROWS_AS(Model::build(cfg, 1), std::invalid_argument);
}

}  // TEST_SUITE
