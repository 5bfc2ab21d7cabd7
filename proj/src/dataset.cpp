#include "springverb/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "springverb/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace springverb {

namespace {

std::map<std::string, std::string> scan_wavs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::map<std::string, std::string> by_stem;  // sorted by stem
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext != ".wav") continue;
        by_stem[e.path().stem().string()] = e.path().string();
    }
    return by_stem;
}

}  // namespace

DatasetManifest DatasetManifest::build(const std::string& dry_dir, const std::string& wet_dir,
                                       std::uint64_t seed, const std::string& cond_source,
                                       int cond_dim) {
    const auto dry = scan_wavs(dry_dir);
    const auto wet = scan_wavs(wet_dir);
    if (dry.empty()) throw IoError("no .wav files in " + dry_dir);

    std::vector<std::string> orphans;
    for (const auto& [stem, _] : dry)
        if (!wet.count(stem)) orphans.push_back("dry-only: " + stem);
    for (const auto& [stem, _] : wet)
        if (!dry.count(stem)) orphans.push_back("wet-only: " + stem);
    if (!orphans.empty()) {
        std::ostringstream os;
        os << "unmatched dry/wet files:";
        for (const auto& o : orphans) os << " " << o;
        throw IoError(os.str());
    }

    json cond_map;
    if (!cond_source.empty()) {
        std::ifstream f(cond_source);
        if (!f) throw IoError("cannot open cond source " + cond_source);
        f >> cond_map;
    }

    DatasetManifest m;
    m.seed = seed;
    int rate = 0;
    for (const auto& [stem, dry_path] : dry) {  // stem-sorted order
        const WavInfo di = wav_info(dry_path);
        const WavInfo wi = wav_info(wet.at(stem));
        if (rate == 0) rate = di.sample_rate;
        if (di.sample_rate != rate || wi.sample_rate != rate)
            throw IoError("mixed sample rates in corpus: " + std::to_string(rate) + " vs " +
                          dry_path + "/" + wet.at(stem));
        ManifestEntry e;
        e.dry = dry_path;
        e.wet = wet.at(stem);
        if (cond_map.contains(stem)) {
            for (const auto& v : cond_map[stem]) e.cond.push_back(v.get<real>());
        } else {
            e.cond.assign(static_cast<std::size_t>(cond_dim), real{0});
        }
        m.entries.push_back(std::move(e));
    }
    m.sample_rate = rate;
    for (std::size_t i = 1; i < m.entries.size(); ++i)
        if (m.entries[i].cond.size() != m.entries[0].cond.size())
            throw IoError("conditioning vectors must share one dataset-wide length");

    // deterministic shuffle, then 60/20/20 (train = floor(.6n), val = floor(.2n))
    const std::size_t n = m.entries.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n_train = n * 6 / 10;
    const std::size_t n_val = n * 2 / 10;
    for (std::size_t i = 0; i < n; ++i) {
        auto& e = m.entries[order[i]];
        e.split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    }
    return m;
}

void DatasetManifest::save(const std::string& path) const {
    json j;
    j["version"] = version;
    j["sample_rate"] = sample_rate;
    j["seed"] = seed;
    j["entries"] = json::array();
    for (const auto& e : entries)
        j["entries"].push_back({{"dry", e.dry}, {"wet", e.wet}, {"cond", e.cond}, {"split", e.split}});
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write manifest " + path);
    f << j.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest " + path);
    json j;
    f >> j;
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    m.sample_rate = j.at("sample_rate").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& je : j.at("entries")) {
        ManifestEntry e;
        e.dry = je.at("dry").get<std::string>();
        e.wet = je.at("wet").get<std::string>();
        e.split = je.at("split").get<std::string>();
        for (const auto& v : je.at("cond")) e.cond.push_back(v.get<real>());
        m.entries.push_back(std::move(e));
    }
    return m;
}

std::vector<const ManifestEntry*> DatasetManifest::split_entries(const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.split == split) out.push_back(&e);
    return out;
}

int DatasetManifest::cond_dim() const {
    return entries.empty() ? 0 : static_cast<int>(entries[0].cond.size());
}

SamplePair load_pair(const ManifestEntry& entry) {
    SamplePair p;
    p.dry = read_wav(entry.dry);
    p.wet = read_wav(entry.wet);
    p.cond = entry.cond;
    if (p.dry.sample_rate != p.wet.sample_rate)
        throw IoError("sample rate mismatch between " + entry.dry + " and " + entry.wet);
    const std::int64_t nd = p.dry.samples.numel();
    const std::int64_t nw = p.wet.samples.numel();
    if (nd != nw) {
        const std::int64_t n = std::max(nd, nw);
        p.pad_applied = n - std::min(nd, nw);
        auto pad = [n](AudioClip& c) {
            std::vector<real> v(c.samples.data().begin(), c.samples.data().end());
            v.resize(static_cast<std::size_t>(n), real{0});
            c.samples = Tensor::from({static_cast<int>(n)}, std::move(v));
        };
        if (nd < nw)
            pad(p.dry);
        else
            pad(p.wet);
    }
    return p;
}

SegmentStream::SegmentStream(const DatasetManifest& manifest, const std::string& split,
                             int segment_len, int batch_size, std::uint64_t seed)
    : segment_len_(segment_len), batch_size_(batch_size), seed_(seed) {
    if (segment_len <= 0 || batch_size <= 0)
        throw ShapeError("segment_len and batch_size must be positive");
    const auto items = manifest.split_entries(split);
    if (items.empty()) throw IoError("split '" + split + "' is empty");

    std::int64_t shortest = -1;
    for (const auto* e : items) {
        SamplePair p = load_pair(*e);
        const std::int64_t T = p.dry.samples.numel();
        if (shortest < 0 || T < shortest) shortest = T;
        const int clip_index = static_cast<int>(dry_.size());
        dry_.push_back(p.dry.samples);
        wet_.push_back(p.wet.samples);
        cond_.push_back(p.cond);
        for (std::int64_t s = 0; s < T; s += segment_len)
            segments_.push_back({clip_index, s});
    }
    if (shortest < segment_len)
        throw ShapeError("segment_len " + std::to_string(segment_len) +
                         " exceeds shortest clip length " + std::to_string(shortest));
}

int SegmentStream::batch_count() const {
    return (segment_count() + batch_size_ - 1) / batch_size_;
}

std::vector<Batch> SegmentStream::epoch(int epoch_index) const {
    std::vector<std::size_t> order(segments_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (epoch_index >= 0) {
        Rng rng(seed_ * 0x9e3779b9ULL + static_cast<std::uint64_t>(epoch_index) + 1);
        rng.shuffle(order);
    }

    const int C = cond_.empty() ? 0 : static_cast<int>(cond_[0].size());
    std::vector<Batch> batches;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size_)) {
        const int bsz = static_cast<int>(std::min<std::size_t>(batch_size_, order.size() - at));
        Tensor dry = Tensor::zeros({bsz, 1, segment_len_});
        Tensor wet = Tensor::zeros({bsz, 1, segment_len_});
        Tensor cond = Tensor::zeros({bsz, std::max(C, 1)});
        auto pd = dry.mut_data();
        auto pw = wet.mut_data();
        auto pc = cond.mut_data();
        for (int b = 0; b < bsz; ++b) {
            const auto& seg = segments_[order[at + static_cast<std::size_t>(b)]];
            const auto src_d = dry_[static_cast<std::size_t>(seg.clip)].data();
            const auto src_w = wet_[static_cast<std::size_t>(seg.clip)].data();
            const std::int64_t avail =
                std::min<std::int64_t>(segment_len_, static_cast<std::int64_t>(src_d.size()) - seg.start);
            for (std::int64_t i = 0; i < avail; ++i) {
                pd[static_cast<std::size_t>(b) * segment_len_ + static_cast<std::size_t>(i)] =
                    src_d[static_cast<std::size_t>(seg.start + i)];
                pw[static_cast<std::size_t>(b) * segment_len_ + static_cast<std::size_t>(i)] =
                    src_w[static_cast<std::size_t>(seg.start + i)];
            }
            for (int c = 0; c < C; ++c)
                pc[static_cast<std::size_t>(b) * std::max(C, 1) + static_cast<std::size_t>(c)] =
                    cond_[static_cast<std::size_t>(seg.clip)][static_cast<std::size_t>(c)];
        }
        batches.push_back({std::move(dry), std::move(wet), std::move(cond), bsz});
    }
    return batches;
}

}  // namespace springverb
