// springverb command line: train, evaluate, benchmark and run spring reverb
// neural effect models over paired dry/wet WAV corpora.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "springverb/dataset.hpp"
#include "springverb/features.hpp"
#include "springverb/gradcheck.hpp"
#include "springverb/metrics.hpp"
#include "springverb/models.hpp"
#include "springverb/training.hpp"
#include "springverb/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace springverb;

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path);
    json j;
    f >> j;
    return j;
}

// defaults <- config file <- flags
struct TrainCli {
    std::string config_path, dry_dir, wet_dir, manifest_path, out_dir = "runs/latest", resume;
    std::string model_name;
    int sample_rate = 0;
    std::int64_t seed = -1;
    int epochs = -1;
    int batch_size = 0;
    int segment_len = 0;
    double lr = -1;

    TrainConfig resolve() const {
        TrainConfig cfg;
        if (!resume.empty()) {
            cfg = TrainConfig::from_json(load_checkpoint(resume).run_config);
        } else if (!config_path.empty()) {
            cfg = TrainConfig::from_json(load_json_file(config_path));
        } else {
            const ModelKind kind = kind_from(model_name.empty() ? "gcn" : model_name);
            cfg.model = ModelConfig::defaults(kind, sample_rate > 0 ? sample_rate : 16000);
        }
        if (!model_name.empty() && resume.empty() && !config_path.empty())
            cfg.model = ModelConfig::defaults(kind_from(model_name), cfg.model.sample_rate);
        if (sample_rate > 0) cfg.model.sample_rate = sample_rate;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (epochs > 0) cfg.max_epochs = epochs;
        if (batch_size > 0) cfg.batch_size = batch_size;
        if (segment_len > 0) cfg.segment_len = segment_len;
        if (lr > 0) cfg.lr0 = static_cast<real>(lr);
        return cfg;
    }
};

DatasetManifest resolve_manifest(const std::string& manifest_path, const std::string& dry_dir,
                                 const std::string& wet_dir, std::uint64_t seed) {
    if (!manifest_path.empty()) return DatasetManifest::load(manifest_path);
    if (dry_dir.empty() || wet_dir.empty())
        throw UsageError("provide either --manifest or both --dry-dir and --wet-dir");
    return DatasetManifest::build(dry_dir, wet_dir, seed);
}

int cmd_train(const TrainCli& cli) {
    TrainConfig cfg = cli.resolve();
    DatasetManifest manifest = resolve_manifest(cli.manifest_path, cli.dry_dir, cli.wet_dir, cfg.seed);
    if (manifest.sample_rate != cfg.model.sample_rate) {
        if (cli.sample_rate == 0) {
            cfg.model.sample_rate = manifest.sample_rate;  // follow the corpus
        } else {
            throw IoError("corpus is at " + std::to_string(manifest.sample_rate) +
                          " Hz but the run is configured for " + std::to_string(cfg.model.sample_rate));
        }
    }
    if (cfg.model.sample_rate != 16000 && cfg.effective_batch_size() > 16)
        std::cerr << "warning: batch size " << cfg.effective_batch_size() << " at "
                  << cfg.model.sample_rate << " Hz; 16 is the tested setting at high rates\n";

    fs::create_directories(cli.out_dir);
    manifest.save((fs::path(cli.out_dir) / "manifest.json").string());
    {
        std::ofstream provenance((fs::path(cli.out_dir) / "run_config.json").string());
        provenance << cfg.to_json().dump(2) << "\n";
    }
    std::ofstream log((fs::path(cli.out_dir) / "train_log.jsonl").string(),
                      cli.resume.empty() ? std::ios::trunc : std::ios::app);

    TrainResult res = train(cfg, manifest, cli.out_dir, cli.resume, &log);
    std::cout << "trained " << kind_name(cfg.model.kind) << " for " << res.epochs_run
              << " epochs; best val loss " << res.best_val << "\n"
              << "best checkpoint: " << res.best_path << "\n"
              << "last checkpoint: " << res.last_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& split, std::int64_t seed_flag, const std::string& out_prefix,
             double rtf_duration, int rtf_repeats) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model = model_from_checkpoint(ckpt);
    DatasetManifest manifest = DatasetManifest::load(manifest_path);
    if (manifest.sample_rate != model.config().sample_rate)
        throw IoError("checkpoint was trained at " + std::to_string(model.config().sample_rate) +
                      " Hz, corpus is at " + std::to_string(manifest.sample_rate) + " Hz");

    const std::uint64_t seed = seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : manifest.seed;
    EvalReport report;
    report.split = split;
    report.test_items = static_cast<int>(manifest.split_entries(split).size());
    report.hardware = hardware_descriptor();
    report.seed = seed;
    report.run_config = ckpt.run_config;

    EvalRow model_row = model_metrics(model, manifest, split, kind_name(model.config().kind));
    model_row.rtf = rtf(model, static_cast<real>(rtf_duration), model.config().sample_rate,
                        rtf_repeats).median;
    report.rows.push_back(model_row);
    report.rows.push_back(naive_baseline_metrics(manifest, split));
    report.rows.push_back(dummy_regressor_metrics(manifest, split, seed));

    std::cout << report_table(report);
    if (!out_prefix.empty()) {
        std::ofstream jf(out_prefix + ".json");
        jf << report_json(report).dump(2) << "\n";
        std::ofstream tf(out_prefix + ".txt");
        tf << report_table(report);
        std::cout << "report written to " << out_prefix << ".json\n";
    }
    return 0;
}

int cmd_process(const std::string& ckpt_path, const std::string& input, const std::string& output,
                bool force, int bit_depth) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model = model_from_checkpoint(ckpt);
    AudioClip clip = read_wav(input);
    if (clip.sample_rate != model.config().sample_rate && !force)
        throw IoError("input is at " + std::to_string(clip.sample_rate) +
                      " Hz but the checkpoint expects " +
                      std::to_string(model.config().sample_rate) + " Hz (use --force to override)");

    Tensor wet = model.process(clip.samples);
    AudioClip out{wet, clip.sample_rate, 1};
    WriteStats stats = write_wav(out, output, bit_depth);
    std::cout << "wrote " << output << " (" << wet.numel() << " samples @" << clip.sample_rate
              << " Hz, " << stats.clipped << " clamped)\n";
    return 0;
}

Model model_from_flags(const std::string& ckpt_path, const std::string& model_name,
                       int sample_rate, ModelConfig* cfg_out) {
    if (!ckpt_path.empty()) {
        Checkpoint ckpt = load_checkpoint(ckpt_path);
        Model m = model_from_checkpoint(ckpt);
        if (cfg_out) *cfg_out = m.config();
        return m;
    }
    if (model_name.empty()) throw UsageError("provide --checkpoint or --model");
    ModelConfig cfg = ModelConfig::defaults(kind_from(model_name), sample_rate);
    if (cfg_out) *cfg_out = cfg;
    return Model::build(cfg, 0);
}

int cmd_benchmark_rtf(const std::string& ckpt_path, const std::string& model_name, int sample_rate,
                      double duration_s, int repeats) {
    ModelConfig cfg;
    Model model = model_from_flags(ckpt_path, model_name, sample_rate, &cfg);
    RtfResult r = rtf(model, static_cast<real>(duration_s), cfg.sample_rate, repeats);
    std::cout << "model: " << kind_name(cfg.kind) << " @" << cfg.sample_rate << " Hz\n"
              << "hardware: " << hardware_descriptor() << "\n"
              << "clip: " << duration_s << " s, repeats: " << repeats << "\n"
              << "rtf median " << r.median << "  min " << r.min_v << "  max " << r.max_v << "\n"
              << (r.real_time() ? "real-time capable (rtf <= 1)\n" : "slower than real time (rtf > 1)\n");
    return 0;
}

int cmd_analyze_dataset(const std::string& dry_dir, const std::string& wet_dir,
                        const std::string& out_prefix) {
    const auto dry = DatasetManifest::build(dry_dir, wet_dir, 0);
    struct Acc {
        double leq = 0, pitch = 0, hfc_v = 0;
        int n = 0, voiced = 0;
    } acc[2];
    for (const auto& e : dry.entries) {
        for (int side = 0; side < 2; ++side) {
            AudioClip clip = read_wav(side == 0 ? e.dry : e.wet);
            FeatureRow row = analyze_clip(clip);
            acc[side].leq += row.leq_db;
            acc[side].hfc_v += row.hfc;
            if (row.pitch_hz) {
                acc[side].pitch += *row.pitch_hz;
                acc[side].voiced += 1;
            }
            acc[side].n += 1;
        }
    }
    json out = {{"version", 1}, {"pairs", acc[0].n}};
    const char* names[2] = {"dry", "wet"};
    std::cout << "feature        dry        wet\n";
    json cols;
    for (int side = 0; side < 2; ++side) {
        cols[names[side]] = {
            {"leq_db", acc[side].leq / acc[side].n},
            {"pitch_hz", acc[side].voiced ? json(acc[side].pitch / acc[side].voiced) : json()},
            {"hfc", acc[side].hfc_v / acc[side].n}};
    }
    out["features"] = cols;
    auto cell = [](const json& v) { return v.is_null() ? std::string("-") : v.dump(); };
    std::cout << "LEQ (dB)   " << cell(cols["dry"]["leq_db"]) << "   " << cell(cols["wet"]["leq_db"]) << "\n"
              << "Pitch (Hz) " << cell(cols["dry"]["pitch_hz"]) << "   " << cell(cols["wet"]["pitch_hz"]) << "\n"
              << "HFC        " << cell(cols["dry"]["hfc"]) << "   " << cell(cols["wet"]["hfc"]) << "\n";
    if (!out_prefix.empty()) {
        std::ofstream jf(out_prefix + ".json");
        jf << out.dump(2) << "\n";
        std::ofstream cf(out_prefix + ".csv");
        cf << "feature,dry,wet\n"
           << "leq_db," << cell(cols["dry"]["leq_db"]) << "," << cell(cols["wet"]["leq_db"]) << "\n"
           << "pitch_hz," << cell(cols["dry"]["pitch_hz"]) << "," << cell(cols["wet"]["pitch_hz"]) << "\n"
           << "hfc," << cell(cols["dry"]["hfc"]) << "," << cell(cols["wet"]["hfc"]) << "\n";
    }
    return 0;
}

int cmd_gradcheck(const std::string& model_name, std::uint64_t seed) {
#ifdef SPRINGVERB_REAL32
    (void)model_name;
    (void)seed;
    std::cerr << "gradcheck requires the 64-bit build (configure without SPRINGVERB_REAL32)\n";
    return 2;
#else
    std::vector<ModelKind> kinds;
    if (model_name.empty() || model_name == "all") {
        kinds = all_model_kinds();
    } else {
        kinds = {kind_from(model_name)};
    }
    bool all_pass = true;
    for (ModelKind kind : kinds) {
        const auto rows = gradcheck_model(ModelConfig::defaults(kind), seed);
        std::cout << kind_name(kind) << " (seed " << seed << ")\n";
        for (const auto& r : rows) {
            std::cout << "  " << (r.pass ? "PASS" : "FAIL") << "  " << r.group << "  rel_err "
                      << r.max_rel_err << " over " << r.coords << " coords\n";
            all_pass &= r.pass;
        }
    }
    std::cout << (all_pass ? "gradcheck: all parameter groups pass\n"
                           : "gradcheck: FAILURES present\n");
    return all_pass ? 0 : 1;
#endif
}

int cmd_list_models() {
    for (ModelKind kind : all_model_kinds()) {
        ModelConfig cfg = ModelConfig::defaults(kind);
        const auto rf = receptive_field(cfg);
        std::cout << kind_name(kind) << "\n  params: " << param_count(cfg) << "\n  receptive field: "
                  << (rf ? std::to_string(*rf) + " samples" : std::string("unbounded (recurrent)"))
                  << "\n  defaults: " << cfg.to_json().dump() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"springverb: black-box neural modeling of spring reverb audio effects"};
    app.require_subcommand(1);

    TrainCli tc;
    auto* train_cmd = app.add_subcommand("train", "train a model on a paired dry/wet corpus");
    train_cmd->add_option("--config", tc.config_path, "training config JSON");
    train_cmd->add_option("--dry-dir", tc.dry_dir, "directory of dry .wav files");
    train_cmd->add_option("--wet-dir", tc.wet_dir, "directory of wet .wav files");
    train_cmd->add_option("--manifest", tc.manifest_path, "existing manifest JSON");
    train_cmd->add_option("--model", tc.model_name, "tcn | wavenet | gcn | lstm | gru");
    train_cmd->add_option("--sample-rate", tc.sample_rate, "pipeline sample rate");
    train_cmd->add_option("--seed", tc.seed, "seed for splits, init and shuffling");
    train_cmd->add_option("--epochs", tc.epochs, "max epochs");
    train_cmd->add_option("--batch-size", tc.batch_size, "batch size override");
    train_cmd->add_option("--segment-len", tc.segment_len, "segment length in samples");
    train_cmd->add_option("--lr", tc.lr, "initial learning rate");
    train_cmd->add_option("--resume", tc.resume, "checkpoint to continue from");
    train_cmd->add_option("--out", tc.out_dir, "output directory");

    std::string ev_ckpt, ev_manifest, ev_split = "test", ev_out;
    std::int64_t ev_seed = -1;
    double ev_rtf_dur = 5.0;
    int ev_rtf_rep = 3;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint plus NB/DR baselines");
    eval_cmd->add_option("--checkpoint", ev_ckpt)->required();
    eval_cmd->add_option("--manifest", ev_manifest)->required();
    eval_cmd->add_option("--split", ev_split, "train | val | test");
    eval_cmd->add_option("--seed", ev_seed, "dummy regressor seed");
    eval_cmd->add_option("--out", ev_out, "report path prefix (.json/.txt)");
    eval_cmd->add_option("--rtf-duration-s", ev_rtf_dur);
    eval_cmd->add_option("--rtf-repeats", ev_rtf_rep);

    std::string pr_ckpt, pr_in, pr_out;
    bool pr_force = false;
    int pr_depth = 32;
    auto* proc_cmd = app.add_subcommand("process", "render a dry WAV through a trained model");
    proc_cmd->add_option("--checkpoint", pr_ckpt)->required();
    proc_cmd->add_option("--input", pr_in)->required();
    proc_cmd->add_option("--output", pr_out)->required();
    proc_cmd->add_flag("--force", pr_force, "ignore sample-rate mismatch");
    proc_cmd->add_option("--bit-depth", pr_depth, "16, 24 or 32 (float)");

    std::string bm_ckpt, bm_model;
    int bm_rate = 48000, bm_repeats = 5;
    double bm_dur = 5.0;
    auto* bench_cmd = app.add_subcommand("benchmark-rtf", "measure the real-time factor");
    bench_cmd->add_option("--checkpoint", bm_ckpt);
    bench_cmd->add_option("--model", bm_model, "benchmark a freshly built default model");
    bench_cmd->add_option("--sample-rate", bm_rate);
    bench_cmd->add_option("--duration-s", bm_dur);
    bench_cmd->add_option("--repeats", bm_repeats);

    std::string an_dry, an_wet, an_out;
    auto* an_cmd = app.add_subcommand("analyze-dataset", "corpus features: LEQ, YIN pitch, HFC");
    an_cmd->add_option("--dry-dir", an_dry)->required();
    an_cmd->add_option("--wet-dir", an_wet)->required();
    an_cmd->add_option("--out", an_out, "table path prefix (.json/.csv)");

    std::string gc_model;
    std::uint64_t gc_seed = 1;
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite differences vs tape gradients");
    gc_cmd->add_option("--model", gc_model, "one kind or 'all'");
    gc_cmd->add_option("--seed", gc_seed);

    auto* lm_cmd = app.add_subcommand("list-models", "model kinds and default configs");

    try {
        app.parse(argc, argv);
        if (train_cmd->parsed()) return cmd_train(tc);
        if (eval_cmd->parsed())
            return cmd_eval(ev_ckpt, ev_manifest, ev_split, ev_seed, ev_out, ev_rtf_dur, ev_rtf_rep);
        if (proc_cmd->parsed()) return cmd_process(pr_ckpt, pr_in, pr_out, pr_force, pr_depth);
        if (bench_cmd->parsed())
            return cmd_benchmark_rtf(bm_ckpt, bm_model, bm_rate, bm_dur, bm_repeats);
        if (an_cmd->parsed()) return cmd_analyze_dataset(an_dry, an_wet, an_out);
        if (gc_cmd->parsed()) return cmd_gradcheck(gc_model, gc_seed);
        if (lm_cmd->parsed()) return cmd_list_models();
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        app.exit(e);
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
