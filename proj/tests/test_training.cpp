#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "springverb/training.hpp"
#include "oracles.hpp"

using namespace springverb;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// tiny corpus: wet is a damped one-sample delay of dry
fs::path make_corpus(const std::string& name, int n, int len) {
    auto dir = oracles::test_dir(name);
    fs::create_directories(dir / "dry");
    fs::create_directories(dir / "wet");
    for (int i = 0; i < n; ++i) {
        auto vals = oracles::random_vec(static_cast<std::size_t>(len), 700u + static_cast<unsigned>(i),
                                        real(-0.5), real(0.5));
        for (auto& v : vals) v = static_cast<real>(static_cast<float>(v));
        std::vector<real> wetv(vals.size(), 0);
        for (std::size_t t = 1; t < vals.size(); ++t)
            wetv[t] = static_cast<real>(static_cast<float>(real(0.7) * vals[t - 1]));
        char buf[16];
        std::snprintf(buf, sizeof buf, "c%02d", i);
        write_wav({Tensor::from({len}, vals), 16000, 1}, (dir / "dry" / (std::string(buf) + ".wav")).string(), 32);
        write_wav({Tensor::from({len}, wetv), 16000, 1}, (dir / "wet" / (std::string(buf) + ".wav")).string(), 32);
    }
    return dir;
}

TrainConfig tiny_config(ModelKind kind, std::uint64_t seed, int epochs) {
    TrainConfig cfg;
    cfg.model = ModelConfig::defaults(kind);
    cfg.model.channels = 4;
    cfg.model.hidden_size = 6;
    if (is_convolutional(kind)) {
        cfg.model.n_blocks = 1;
        cfg.model.stacks_per_block = 2;
    }
    cfg.seed = seed;
    cfg.max_epochs = epochs;
    cfg.batch_size = 4;
    cfg.segment_len = 2600;
    cfg.loss.resolutions = {StftConfig::make(512, 128, 512), StftConfig::make(1024, 256, 1024)};
    return cfg;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("adam leaves fresh parameters alone on zero gradients and decays moments") {
    std::vector<real> p{1, -2};
    std::vector<real> g{0, 0};
    std::vector<real> m{0, 0}, v{0, 0};
    adam_step(p, g, m, v, 1, real(0.01));
    CHECK(p[0] == 1);
    CHECK(p[1] == -2);

    // with history, zero gradients still decay the moments geometrically
    std::vector<real> m2{0.5}, v2{0.25}, p2{1}, g2{0};
    adam_step(p2, g2, m2, v2, 10, real(0.01));
    CHECK(m2[0] == doctest::Approx(0.45));    // beta1 decay
    CHECK(v2[0] == doctest::Approx(0.24975)); // beta2 decay
}

TEST_CASE("first adam step moves by almost exactly the learning rate") {
    for (real g0 : {real(0.37), real(-2.0), real(0.001)}) {
        std::vector<real> p{0};
        std::vector<real> g{g0};
        std::vector<real> m{0}, v{0};
        adam_step(p, g, m, v, 1, real(0.01));
        CHECK(std::fabs(p[0]) == doctest::Approx(0.01).epsilon(1e-4));
        CHECK((g0 > 0 ? p[0] < 0 : p[0] > 0));
    }
}

TEST_CASE("constant gradient drives the parameter monotonically down") {
    std::vector<real> p{1};
    std::vector<real> m{0}, v{0};
    real prev = p[0];
    for (std::int64_t t = 1; t <= 50; ++t) {
        std::vector<real> g{real(0.5)};
        adam_step(p, g, m, v, t, real(0.01));
        CHECK(p[0] < prev);
        prev = p[0];
    }
}

TEST_CASE("plateau scheduler unit scenarios") {
    SUBCASE("flat for 11 epochs reduces exactly once: 0.01 -> 0.001") {
        PlateauScheduler s(real(0.01), real(0.1), 10, real(1e-6));
        int reductions = 0;
        for (int e = 0; e < 11; ++e)
            if (s.update(real(1.0))) ++reductions;
        CHECK(reductions == 1);
        CHECK(s.lr == doctest::Approx(0.001));
    }
    SUBCASE("strictly improving losses never change the lr") {
        PlateauScheduler s(real(0.01), real(0.1), 10, real(1e-6));
        real v = 1;
        for (int e = 0; e < 40; ++e) {
            CHECK(!s.update(v));
            v *= real(0.9);
        }
        CHECK(s.lr == real(0.01));
    }
    SUBCASE("an improvement resets the counter") {
        PlateauScheduler s(real(0.01), real(0.1), 10, real(1e-6));
        s.update(real(1.0));
        for (int e = 0; e < 9; ++e) s.update(real(1.0));
        CHECK(s.since_improve == 9);
        s.update(real(0.5));  // improvement at the brink
        CHECK(s.since_improve == 0);
        for (int e = 0; e < 9; ++e) CHECK(!s.update(real(0.5)));
        CHECK(s.lr == real(0.01));
    }
    SUBCASE("sub-epsilon improvements do not count") {
        PlateauScheduler s(real(0.01), real(0.1), 2, real(1e-6));
        s.update(real(1.0));
        CHECK(!s.update(real(1.0) - real(1e-9)));
        CHECK(s.update(real(1.0) - real(2e-9)));  // second bad epoch hits patience 2
    }
}

TEST_CASE("checkpoint save -> load -> save is byte identical") {
    auto dir = oracles::test_dir("train_ckpt");
    const TrainConfig tcfg = tiny_config(ModelKind::gcn, 5, 3);
    Checkpoint c;
    c.run_config = tcfg.to_json();
    c.epoch = 7;
    c.step = 123;
    c.lr = real(0.001);
    c.best_val = real(0.25);
    c.since_improve = 2;
    c.rng_state = {1, 2, 3, 0xffffffffffffffffULL};
    c.train_hist = {real(1.5), real(0.7)};
    c.val_hist = {real(1.2), real(0.9)};
    Model m = Model::build(tcfg.model, 9);
    c.params = m.params();
    c.buffers = m.buffers();
    for (const auto& [name, t] : m.params()) {
        c.adam_m.emplace_back(name, Tensor::zeros(t.shape()));
        c.adam_v.emplace_back(name, Tensor::full(t.shape(), real(0.5)));
    }
    const auto p1 = (dir / "a.ckpt").string();
    const auto p2 = (dir / "b.ckpt").string();
    save_checkpoint(c, p1);
    Checkpoint back = load_checkpoint(p1);
    save_checkpoint(back, p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(back.rng_state[3] == 0xffffffffffffffffULL);

    Model m2 = model_from_checkpoint(back);
    for (std::size_t i = 0; i < m.params().size(); ++i) {
        const auto a = m.params()[i].second.data();
        const auto b = m2.params()[i].second.data();
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
    }
}

TEST_CASE("corrupted checkpoints are rejected") {
    auto dir = oracles::test_dir("train_ckpt_bad");
    const auto path = (dir / "bad.ckpt").string();
    std::ofstream(path, std::ios::binary) << "XXXX not a checkpoint";
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("bad magic"), IoError);
}

TEST_CASE("identical seeds give byte-identical checkpoints") {
    auto corpus = make_corpus("train_det", 5, 2600);
    auto m = DatasetManifest::build((corpus / "dry").string(), (corpus / "wet").string(), 3);
    TrainConfig cfg = tiny_config(ModelKind::gcn, 11, 2);
    auto out1 = oracles::test_dir("train_det_run1");
    auto out2 = oracles::test_dir("train_det_run2");
    auto r1 = train(cfg, m, out1.string());
    auto r2 = train(cfg, m, out2.string());
    CHECK(slurp(r1.last_path) == slurp(r2.last_path));
    CHECK(r1.train_hist == r2.train_hist);
}

TEST_CASE("split-and-resume equals straight-through training bit-exactly") {
    auto corpus = make_corpus("train_resume", 5, 2600);
    auto m = DatasetManifest::build((corpus / "dry").string(), (corpus / "wet").string(), 3);

    TrainConfig cfg4 = tiny_config(ModelKind::wavenet, 17, 4);
    auto out_full = oracles::test_dir("train_resume_full");
    auto r_full = train(cfg4, m, out_full.string());

    TrainConfig cfg2 = cfg4;
    cfg2.max_epochs = 2;
    auto out_half = oracles::test_dir("train_resume_half");
    auto r_half = train(cfg2, m, out_half.string());

    auto out_rest = oracles::test_dir("train_resume_rest");
    auto r_rest = train(cfg4, m, out_rest.string(), r_half.last_path);

    CHECK(slurp(r_full.last_path) == slurp(r_rest.last_path));
    CHECK(r_full.train_hist == r_rest.train_hist);
}

TEST_CASE("one small step on a frozen batch does not increase the loss") {
    auto corpus = make_corpus("train_step", 2, 2600);
    auto manifest = DatasetManifest::build((corpus / "dry").string(), (corpus / "wet").string(), 3);
    for (auto& e : manifest.entries) e.split = "train";

    TrainConfig cfg = tiny_config(ModelKind::gcn, 23, 1);
    Model model = Model::build(cfg.model, cfg.seed);
    SegmentStream stream(manifest, "train", 2600, 2, 0);
    Batch batch = stream.epoch(-1)[0];

    auto loss_of = [&](Ctx& ctx) {
        Tensor pred = model.forward(batch.dry, batch.cond, ctx);
        return combined_loss_batch(pred, batch.wet, cfg.loss);
    };
    Ctx plain;
    const real before = loss_of(plain).item();

    Tape tape;
    Ctx ctx(&tape, true);
    Tensor loss = loss_of(ctx);
    tape.backward(loss);
    std::vector<std::vector<real>> m2, v2;
    std::size_t pi = 0;
    for (auto& [name, t] : model.params_mut()) {
        auto g = ctx.grad_of(t);
        m2.emplace_back(g.size(), real{0});
        v2.emplace_back(g.size(), real{0});
        adam_step(t.mut_data(), g, m2[pi], v2[pi], 1, real(1e-5));
        ++pi;
    }
    Ctx plain2;
    const real after = loss_of(plain2).item();
    CHECK(after <= before);
}

TEST_CASE("training writes an epoch log with the documented fields") {
    auto corpus = make_corpus("train_log", 5, 2600);
    auto m = DatasetManifest::build((corpus / "dry").string(), (corpus / "wet").string(), 3);
    TrainConfig cfg = tiny_config(ModelKind::gcn, 29, 2);
    std::ostringstream log;
    auto out = oracles::test_dir("train_log_out");
    train(cfg, m, out.string(), "", &log);
    std::istringstream lines(log.str());
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("epoch"));
        CHECK(j.contains("train_loss"));
        CHECK(j.contains("val_loss"));
        CHECK(j.contains("lr"));
        CHECK(j.contains("seconds"));
        ++count;
    }
    CHECK(count == 2);
}

TEST_CASE("training loss decreases on a learnable toy problem") {
    auto corpus = make_corpus("train_learn", 5, 2600);
    auto m = DatasetManifest::build((corpus / "dry").string(), (corpus / "wet").string(), 3);
    TrainConfig cfg = tiny_config(ModelKind::gcn, 31, 12);
    auto out = oracles::test_dir("train_learn_out");
    auto res = train(cfg, m, out.string());
    REQUIRE(res.train_hist.size() == 12);
    CHECK(res.train_hist.back() < res.train_hist.front());
}

}  // TEST_SUITE
