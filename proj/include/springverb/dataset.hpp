#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "springverb/tensor.hpp"
#include "springverb/wav.hpp"

namespace springverb {

struct ManifestEntry {
    std::string dry;
    std::string wet;
    std::vector<real> cond;
    std::string split;  // train | val | test
};

/// Paired dry/wet corpus with a deterministic 60/20/20 split. The split is a
/// pure function of the name-sorted file list and the seed.
struct DatasetManifest {
    int version = 1;
    int sample_rate = 0;
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> entries;

    /// Pairs *.wav files by filename stem. cond_source, when given, is a JSON
    /// file mapping stem -> conditioning vector; entries default to a
    /// dataset-wide all-zero vector of length cond_dim otherwise.
    static DatasetManifest build(const std::string& dry_dir, const std::string& wet_dir,
                                 std::uint64_t seed, const std::string& cond_source = "",
                                 int cond_dim = 2);

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);

    std::vector<const ManifestEntry*> split_entries(const std::string& split) const;
    int cond_dim() const;
};

struct SamplePair {
    AudioClip dry;
    AudioClip wet;
    std::vector<real> cond;
    std::int64_t pad_applied = 0;  // zeros appended to the shorter clip
};

/// Loads both clips, checks rates and pads the shorter one at the tail.
SamplePair load_pair(const ManifestEntry& entry);

/// One training batch: dry/wet [B x 1 x L], cond [B x C].
struct Batch {
    Tensor dry;
    Tensor wet;
    Tensor cond;
    int items = 0;
};

/// Deterministic segment batching. Clips are chunked into consecutive
/// non-overlapping segments of segment_len (final ragged segment zero
/// padded); each epoch covers every segment once in an order shuffled from
/// (seed, epoch).
class SegmentStream {
public:
    SegmentStream(const DatasetManifest& manifest, const std::string& split, int segment_len,
                  int batch_size, std::uint64_t seed);

    int segment_count() const { return static_cast<int>(segments_.size()); }
    int batch_count() const;

    /// Batches for one epoch; epoch < 0 keeps manifest order (validation).
    std::vector<Batch> epoch(int epoch_index) const;

private:
    struct SegmentRef {
        int clip = 0;
        std::int64_t start = 0;
    };
    std::vector<Tensor> dry_, wet_;        // loaded once, [T]
    std::vector<std::vector<real>> cond_;
    std::vector<SegmentRef> segments_;
    int segment_len_;
    int batch_size_;
    std::uint64_t seed_;
};

}  // namespace springverb
