#include "springverb/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "springverb/kernels.hpp"
#include "springverb/rng.hpp"

namespace springverb {

real esr(std::span<const real> pred, std::span<const real> target) {
    if (pred.size() != target.size())
        throw ShapeError("esr: length mismatch " + std::to_string(pred.size()) + " vs " +
                         std::to_string(target.size()));
    real num = 0, den = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const real d = target[i] - pred[i];
        num += d * d;
        den += target[i] * target[i];
    }
    if (den == 0) throw std::invalid_argument("ESR undefined for silent target");
    return num / den;
}

real mrstft_metric(const Tensor& pred, const Tensor& target) {
    static const MrstftConfig cfg = MrstftConfig::defaults();
    return mrstft(pred.detached(), target.detached(), cfg).item();
}

RtfResult rtf(Model& model, real clip_len_s, int sample_rate, int repeats) {
    if (repeats < 3) throw std::invalid_argument("rtf requires repeats >= 3");
    const auto T = static_cast<std::int64_t>(clip_len_s * static_cast<real>(sample_rate));
    Rng rng(0x5eedULL);
    Tensor x = Tensor::zeros({static_cast<int>(T)});
    for (auto& v : x.mut_data()) v = rng.uniform(-static_cast<real>(0.5), static_cast<real>(0.5));

    model.process(x);  // warm-up, untimed
    std::vector<real> ratios;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        Tensor y = model.process(x);
        const auto t1 = std::chrono::steady_clock::now();
        (void)y;
        const real seconds = std::chrono::duration<real>(t1 - t0).count();
        ratios.push_back(seconds / clip_len_s);
    }
    std::sort(ratios.begin(), ratios.end());
    RtfResult res;
    res.repeats = repeats;
    res.min_v = ratios.front();
    res.max_v = ratios.back();
    res.median = ratios[ratios.size() / 2];
    if (ratios.size() % 2 == 0)
        res.median = (ratios[ratios.size() / 2 - 1] + ratios[ratios.size() / 2]) / 2;
    return res;
}

namespace {

struct PairMetrics {
    real esr_v = 0;
    real mr_v = 0;
};

EvalRow averaged(const std::string& name, const std::vector<PairMetrics>& per_item) {
    EvalRow row;
    row.model = name;
    real e = 0, m = 0;
    for (const auto& pm : per_item) {
        e += pm.esr_v;
        m += pm.mr_v;
    }
    row.esr = e / static_cast<real>(per_item.size());
    row.mrstft = m / static_cast<real>(per_item.size());
    return row;
}

std::vector<const ManifestEntry*> require_split(const DatasetManifest& manifest,
                                                const std::string& split) {
    auto items = manifest.split_entries(split);
    if (items.empty()) throw IoError("split '" + split + "' is empty");
    return items;
}

}  // namespace

EvalRow naive_baseline_metrics(const DatasetManifest& manifest, const std::string& split) {
    const auto items = require_split(manifest, split);
    std::vector<PairMetrics> per_item(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        SamplePair p = load_pair(*items[i]);
        per_item[i].esr_v = esr(p.dry.samples.data(), p.wet.samples.data());
        per_item[i].mr_v = mrstft_metric(p.dry.samples, p.wet.samples);
    }
    return averaged("NB", per_item);
}

EvalRow dummy_regressor_metrics(const DatasetManifest& manifest, const std::string& split,
                                std::uint64_t seed) {
    const auto items = require_split(manifest, split);
    std::vector<PairMetrics> per_item(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        SamplePair p = load_pair(*items[i]);
        Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
        Tensor noise = Tensor::zeros(p.wet.samples.shape());
        for (auto& v : noise.mut_data()) v = rng.uniform(-1, 1);
        per_item[i].esr_v = esr(noise.data(), p.wet.samples.data());
        per_item[i].mr_v = mrstft_metric(noise, p.wet.samples);
    }
    return averaged("DR", per_item);
}

EvalRow model_metrics(Model& model, const DatasetManifest& manifest, const std::string& split,
                      const std::string& row_name) {
    const auto items = require_split(manifest, split);
    std::vector<PairMetrics> per_item(items.size());
    const int workers = std::min<int>(worker_count(), static_cast<int>(items.size()));

    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            SamplePair p = load_pair(*items[i]);
            Tensor pred = model.process(p.dry.samples);
            per_item[i].esr_v = esr(pred.data(), p.wet.samples.data());
            per_item[i].mr_v = mrstft_metric(pred, p.wet.samples);
        }
    };
    if (workers <= 1) {
        run_range(0, items.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (items.size() + static_cast<std::size_t>(workers) - 1) /
                                  static_cast<std::size_t>(workers);
        for (int w = 0; w < workers; ++w) {
            const std::size_t lo = static_cast<std::size_t>(w) * chunk;
            const std::size_t hi = std::min(items.size(), lo + chunk);
            if (lo < hi) pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return averaged(row_name, per_item);
}

std::string hardware_descriptor() {
    std::string cpu = "unknown-cpu";
    std::ifstream f("/proc/cpuinfo");
    std::string line;
    while (std::getline(f, line)) {
        const auto pos = line.find("model name");
        if (pos != std::string::npos) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                cpu = line.substr(colon + 1);
                while (!cpu.empty() && cpu.front() == ' ') cpu.erase(cpu.begin());
            }
            break;
        }
    }
    return cpu + " / kernels=" + kernels().name + " / " + kScalarName;
}

std::string report_table(const EvalReport& report) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "Model" << std::right << std::setw(10) << "ESR"
       << std::setw(10) << "MR" << std::setw(10) << "RTF" << "\n";
    for (const auto& row : report.rows) {
        os << std::left << std::setw(12) << row.model << std::right << std::fixed
           << std::setprecision(4) << std::setw(10) << row.esr << std::setw(10) << row.mrstft;
        if (row.rtf)
            os << std::setprecision(3) << std::setw(10) << *row.rtf;
        else
            os << std::setw(10) << "-";
        os << "\n";
    }
    return os.str();
}

nlohmann::json report_json(const EvalReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json r{{"model", row.model}, {"esr", row.esr}, {"mrstft", row.mrstft}};
        if (row.rtf)
            r["rtf"] = *row.rtf;
        else
            r["rtf"] = nullptr;
        rows.push_back(r);
    }
    return {{"version", 1},
            {"split", report.split},
            {"test_items", report.test_items},
            {"hardware", report.hardware},
            {"seed", report.seed},
            {"rows", rows},
            {"run_config", report.run_config}};
}

}  // namespace springverb
