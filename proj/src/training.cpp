#include "springverb/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "springverb/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace springverb {

int TrainConfig::effective_batch_size() const {
    if (batch_size > 0) return batch_size;
    return model.sample_rate == 16000 ? 64 : 16;
}

int TrainConfig::effective_segment_len() const {
    if (segment_len > 0) return segment_len;
    return model.sample_rate == 16000 ? 32000 : model.sample_rate * 5 / 2;
}

real TrainConfig::effective_grad_clip() const {
    if (grad_clip >= 0) return grad_clip;
    return is_convolutional(model.kind) ? 0 : static_cast<real>(5);
}

json TrainConfig::to_json() const {
    json r;
    for (const auto& res : loss.resolutions)
        r.push_back({{"fft_size", res.fft_size}, {"hop", res.hop}, {"win_length", res.win_length}});
    return {{"lr0", lr0},
            {"factor", factor},
            {"patience", patience},
            {"plateau_eps", plateau_eps},
            {"batch_size", batch_size},
            {"segment_len", segment_len},
            {"max_epochs", max_epochs},
            {"seed", seed},
            {"grad_clip", grad_clip},
            {"model", model.to_json()},
            {"loss", {{"alpha", loss.alpha}, {"resolutions", r}}}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.lr0 = j.at("lr0").get<real>();
    c.factor = j.at("factor").get<real>();
    c.patience = j.at("patience").get<int>();
    c.plateau_eps = j.at("plateau_eps").get<real>();
    c.batch_size = j.at("batch_size").get<int>();
    c.segment_len = j.at("segment_len").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.grad_clip = j.at("grad_clip").get<real>();
    c.model = ModelConfig::from_json(j.at("model"));
    c.loss.resolutions.clear();
    c.loss.alpha = j.at("loss").at("alpha").get<real>();
    for (const auto& r : j.at("loss").at("resolutions"))
        c.loss.resolutions.push_back(StftConfig::make(r.at("fft_size").get<int>(),
                                                      r.at("hop").get<int>(),
                                                      r.at("win_length").get<int>()));
    return c;
}

void adam_step(std::span<real> param, std::span<const real> grad, std::vector<real>& m,
               std::vector<real>& v, std::int64_t t, real lr, real beta1, real beta2, real eps) {
    if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size())
        throw ShapeError("adam_step: parameter/gradient/moment sizes differ");
    if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
    const real bc1 = 1 - std::pow(beta1, static_cast<real>(t));
    const real bc2 = 1 - std::pow(beta2, static_cast<real>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = beta1 * m[i] + (1 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1 - beta2) * grad[i] * grad[i];
        const real mhat = m[i] / bc1;
        const real vhat = v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

bool PlateauScheduler::update(real val_loss) {
    if (val_loss < best - eps) {
        best = val_loss;
        since_improve = 0;
        improved_last = true;
        return false;
    }
    improved_last = false;
    if (++since_improve >= patience) {
        lr *= factor;
        since_improve = 0;
        return true;
    }
    return false;
}

// --- checkpoint io -------------------------------------------------------------

namespace {

json tensor_list_header(const std::vector<std::pair<std::string, Tensor>>& list) {
    json out = json::array();
    for (const auto& [name, t] : list) out.push_back({{"name", name}, {"shape", t.shape()}});
    return out;
}

void append_blob(std::vector<unsigned char>& out, const Tensor& t, const std::string& scalar) {
    const auto d = t.data();
    if (scalar == "f32") {
        for (real v : d) {
            const float f = static_cast<float>(v);
            const unsigned char* p = reinterpret_cast<const unsigned char*>(&f);
            out.insert(out.end(), p, p + 4);
        }
    } else {
        for (real v : d) {
            const double f = static_cast<double>(v);
            const unsigned char* p = reinterpret_cast<const unsigned char*>(&f);
            out.insert(out.end(), p, p + 8);
        }
    }
}

std::vector<std::pair<std::string, Tensor>> read_tensor_list(const json& header,
                                                             const unsigned char*& p,
                                                             const unsigned char* end,
                                                             const std::string& scalar) {
    std::vector<std::pair<std::string, Tensor>> out;
    const std::size_t width = scalar == "f32" ? 4 : 8;
    for (const auto& item : header) {
        Shape shape;
        for (const auto& d : item.at("shape")) shape.push_back(d.get<int>());
        const auto n = static_cast<std::size_t>(shape_numel(shape));
        if (p + n * width > end) throw IoError("checkpoint: truncated parameter blob");
        std::vector<real> vals(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (width == 4) {
                float f;
                std::memcpy(&f, p + i * 4, 4);
                vals[i] = static_cast<real>(f);
            } else {
                double f;
                std::memcpy(&f, p + i * 8, 8);
                vals[i] = static_cast<real>(f);
            }
        }
        p += n * width;
        out.emplace_back(item.at("name").get<std::string>(), Tensor::from(shape, std::move(vals)));
    }
    return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json header;
    header["version"] = ckpt.version;
    header["scalar"] = ckpt.scalar;
    header["run_config"] = ckpt.run_config;
    header["state"] = {{"epoch", ckpt.epoch},
                       {"step", ckpt.step},
                       {"lr", ckpt.lr},
                       {"best_val", std::isfinite(ckpt.best_val) ? json(ckpt.best_val) : json()},
                       {"since_improve", ckpt.since_improve},
                       {"nonfinite_skips", ckpt.nonfinite_skips},
                       {"rng", ckpt.rng_state},
                       {"train_hist", ckpt.train_hist},
                       {"val_hist", ckpt.val_hist}};
    header["params"] = tensor_list_header(ckpt.params);
    header["buffers"] = tensor_list_header(ckpt.buffers);
    header["adam_m"] = tensor_list_header(ckpt.adam_m);
    header["adam_v"] = tensor_list_header(ckpt.adam_v);

    const std::string hs = header.dump();
    std::vector<unsigned char> out;
    out.insert(out.end(), {'S', 'P', 'R', 'V'});
    const std::uint32_t ver = ckpt.version;
    const std::uint64_t hlen = hs.size();
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((ver >> (8 * i)) & 0xff));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((hlen >> (8 * i)) & 0xff));
    out.insert(out.end(), hs.begin(), hs.end());
    for (const auto* list : {&ckpt.params, &ckpt.buffers, &ckpt.adam_m, &ckpt.adam_v})
        for (const auto& [name, t] : *list) append_blob(out, t, ckpt.scalar);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("checkpoint write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "SPRV", 4) != 0)
        throw IoError(path + ": not a checkpoint (bad magic)");
    std::uint32_t ver = 0;
    std::uint64_t hlen = 0;
    for (int i = 0; i < 4; ++i) ver |= static_cast<std::uint32_t>(bytes[4 + i]) << (8 * i);
    for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
    if (ver != 1) throw IoError(path + ": unsupported checkpoint version " + std::to_string(ver));
    if (16 + hlen > bytes.size()) throw IoError(path + ": truncated checkpoint header");
    const json header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));

    Checkpoint ckpt;
    ckpt.version = ver;
    ckpt.scalar = header.at("scalar").get<std::string>();
    if (ckpt.scalar != "f32" && ckpt.scalar != "f64")
        throw IoError(path + ": unknown scalar type " + ckpt.scalar);
    ckpt.run_config = header.at("run_config");
    const json& st = header.at("state");
    ckpt.epoch = st.at("epoch").get<int>();
    ckpt.step = st.at("step").get<std::int64_t>();
    ckpt.lr = st.at("lr").get<real>();
    ckpt.best_val = st.at("best_val").is_null() ? std::numeric_limits<real>::infinity()
                                                : st.at("best_val").get<real>();
    ckpt.since_improve = st.at("since_improve").get<int>();
    ckpt.nonfinite_skips = st.at("nonfinite_skips").get<std::int64_t>();
    ckpt.rng_state = st.at("rng").get<std::vector<std::uint64_t>>();
    ckpt.train_hist = st.at("train_hist").get<std::vector<real>>();
    ckpt.val_hist = st.at("val_hist").get<std::vector<real>>();

    const unsigned char* p = bytes.data() + 16 + hlen;
    const unsigned char* end = bytes.data() + bytes.size();
    ckpt.params = read_tensor_list(header.at("params"), p, end, ckpt.scalar);
    ckpt.buffers = read_tensor_list(header.at("buffers"), p, end, ckpt.scalar);
    ckpt.adam_m = read_tensor_list(header.at("adam_m"), p, end, ckpt.scalar);
    ckpt.adam_v = read_tensor_list(header.at("adam_v"), p, end, ckpt.scalar);
    return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
    const ModelConfig mc = ModelConfig::from_json(ckpt.run_config.at("model"));
    Model model = Model::build(mc, 0);
    auto load_into = [](Model& mdl, const std::vector<std::pair<std::string, Tensor>>& src,
                        bool buffer) {
        for (const auto& [name, t] : src) {
            Tensor* dst = buffer ? mdl.find_buffer(name) : mdl.find_param(name);
            if (!dst) throw IoError("checkpoint names unknown tensor '" + name + "'");
            if (dst->shape() != t.shape())
                throw IoError("checkpoint tensor '" + name + "' has shape " + shape_str(t.shape()) +
                              ", model expects " + shape_str(dst->shape()));
            std::copy(t.data().begin(), t.data().end(), dst->mut_data().begin());
        }
    };
    load_into(model, ckpt.params, false);
    load_into(model, ckpt.buffers, true);
    return model;
}

// --- train loop ----------------------------------------------------------------

namespace {

real global_grad_norm(const std::vector<std::vector<real>>& grads) {
    real sq = 0;
    for (const auto& g : grads)
        for (real v : g) sq += v * v;
    return std::sqrt(sq);
}

Checkpoint snapshot(const TrainConfig& cfg, Model& model, const PlateauScheduler& sched,
                    const std::vector<std::vector<real>>& m, const std::vector<std::vector<real>>& v,
                    std::int64_t step, int epoch, std::int64_t skips, const Rng& rng,
                    const std::vector<real>& train_hist, const std::vector<real>& val_hist) {
    Checkpoint c;
    c.run_config = cfg.to_json();
    c.epoch = epoch;
    c.step = step;
    c.lr = sched.lr;
    c.best_val = sched.best;
    c.since_improve = sched.since_improve;
    c.nonfinite_skips = skips;
    c.rng_state = rng.state();
    c.train_hist = train_hist;
    c.val_hist = val_hist;
    c.params = model.params();
    c.buffers = model.buffers();
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        const auto& [name, t] = model.params()[i];
        c.adam_m.emplace_back(name, Tensor::from(t.shape(), m[i]));
        c.adam_v.emplace_back(name, Tensor::from(t.shape(), v[i]));
    }
    return c;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest,
                  const std::string& out_dir, const std::string& resume_path, std::ostream* log) {
    fs::create_directories(out_dir);
    const std::string best_path = (fs::path(out_dir) / "best.ckpt").string();
    const std::string last_path = (fs::path(out_dir) / "last.ckpt").string();

    Model model = Model::build(cfg.model, cfg.seed);
    std::vector<std::vector<real>> adam_m, adam_v;
    for (const auto& [name, t] : model.params()) {
        adam_m.emplace_back(static_cast<std::size_t>(t.numel()), real{0});
        adam_v.emplace_back(static_cast<std::size_t>(t.numel()), real{0});
    }
    PlateauScheduler sched(cfg.lr0, cfg.factor, cfg.patience, cfg.plateau_eps);
    std::int64_t step = 0, skips = 0;
    int start_epoch = 0;
    std::vector<real> train_hist, val_hist;
    Rng rng(cfg.seed);

    if (!resume_path.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_path);
        model = model_from_checkpoint(ckpt);
        adam_m.clear();
        adam_v.clear();
        for (std::size_t i = 0; i < ckpt.adam_m.size(); ++i) {
            const auto d = ckpt.adam_m[i].second.data();
            adam_m.emplace_back(d.begin(), d.end());
            const auto dv = ckpt.adam_v[i].second.data();
            adam_v.emplace_back(dv.begin(), dv.end());
        }
        sched.lr = ckpt.lr;
        sched.best = ckpt.best_val;
        sched.since_improve = ckpt.since_improve;
        step = ckpt.step;
        skips = ckpt.nonfinite_skips;
        start_epoch = ckpt.epoch;
        train_hist = ckpt.train_hist;
        val_hist = ckpt.val_hist;
        rng.set_state(ckpt.rng_state);
    }

    const int seg_len = cfg.effective_segment_len();
    const int bsz = cfg.effective_batch_size();
    SegmentStream train_stream(manifest, "train", seg_len, bsz, cfg.seed);
    SegmentStream val_stream(manifest, "val", seg_len, bsz, cfg.seed);
    const real clip_norm = cfg.effective_grad_clip();

    int consecutive_nonfinite = 0;
    for (int epoch = start_epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        real train_loss_sum = 0;
        int train_items = 0;
        int batch_index = 0;
        for (const auto& batch : train_stream.epoch(epoch)) {
            Tape tape;
            Ctx ctx(&tape, true);
            Tensor pred = model.forward(batch.dry, batch.cond, ctx);
            Tensor loss = combined_loss_batch(pred, batch.wet, cfg.loss);
            const real loss_v = loss.item();
            if (!std::isfinite(loss_v)) {
                if (++consecutive_nonfinite >= 2)
                    throw std::runtime_error(
                        "training diverged: non-finite loss twice in a row (lr=" +
                        std::to_string(sched.lr) + ", epoch=" + std::to_string(epoch) +
                        ", batch=" + std::to_string(batch_index) + ")");
                ++skips;
                ++batch_index;
                continue;
            }
            consecutive_nonfinite = 0;
            tape.backward(loss);

            std::vector<std::vector<real>> grads;
            grads.reserve(model.params().size());
            bool finite = true;
            for (const auto& [name, t] : model.params()) {
                grads.push_back(ctx.grad_of(t));
                if (finite && !all_finite(grads.back())) finite = false;
            }
            if (!finite) {
                ++skips;  // step skipped, moments untouched
                ++batch_index;
                train_loss_sum += loss_v * static_cast<real>(batch.items);
                train_items += batch.items;
                continue;
            }
            if (clip_norm > 0) {
                const real norm = global_grad_norm(grads);
                if (norm > clip_norm) {
                    const real s = clip_norm / norm;
                    for (auto& g : grads)
                        for (auto& v : g) v *= s;
                }
            }
            ++step;
            std::size_t pi = 0;
            for (auto& [name, t] : model.params_mut()) {
                adam_step(t.mut_data(), grads[pi], adam_m[pi], adam_v[pi], step, sched.lr);
                ++pi;
            }
            train_loss_sum += loss_v * static_cast<real>(batch.items);
            train_items += batch.items;
            ++batch_index;
        }
        const real train_loss = train_items ? train_loss_sum / static_cast<real>(train_items)
                                            : std::numeric_limits<real>::quiet_NaN();

        real val_loss_sum = 0;
        int val_items = 0;
        for (const auto& batch : val_stream.epoch(-1)) {
            Ctx ctx(nullptr, false);
            Tensor pred = model.forward(batch.dry, batch.cond, ctx);
            val_loss_sum += combined_loss_batch(pred, batch.wet, cfg.loss).item() *
                            static_cast<real>(batch.items);
            val_items += batch.items;
        }
        const real val_loss = val_loss_sum / static_cast<real>(val_items);

        sched.update(val_loss);
        train_hist.push_back(train_loss);
        val_hist.push_back(val_loss);

        if (sched.improved_last)
            save_checkpoint(snapshot(cfg, model, sched, adam_m, adam_v, step, epoch, skips, rng,
                                     train_hist, val_hist),
                            best_path);
        save_checkpoint(snapshot(cfg, model, sched, adam_m, adam_v, step, epoch, skips, rng,
                                 train_hist, val_hist),
                        last_path);

        if (log) {
            const real seconds = std::chrono::duration<real>(std::chrono::steady_clock::now() - t0).count();
            json line{{"epoch", epoch},
                      {"train_loss", train_loss},
                      {"val_loss", val_loss},
                      {"lr", sched.lr},
                      {"seconds", seconds}};
            (*log) << line.dump() << "\n";
        }
    }

    TrainResult res;
    res.best_path = best_path;
    res.last_path = last_path;
    res.train_hist = train_hist;
    res.val_hist = val_hist;
    res.epochs_run = static_cast<int>(train_hist.size());
    res.best_val = sched.best;
    if (!fs::exists(last_path))
        save_checkpoint(snapshot(cfg, model, sched, adam_m, adam_v, step, start_epoch, skips, rng,
                                 train_hist, val_hist),
                        last_path);
    if (!fs::exists(best_path)) fs::copy_file(last_path, best_path);
    return res;
}

}  // namespace springverb
