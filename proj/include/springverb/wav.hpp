#pragma once

#include <cstdint>
#include <string>

#include "springverb/tensor.hpp"

namespace springverb {

/// Mono audio at a known rate. Multichannel sources are downmixed by
/// averaging on load; source_channels records the pre-downmix count.
struct AudioClip {
    Tensor samples;  // [T], nominal [-1, 1]
    int sample_rate = 0;
    int source_channels = 1;
};

struct WavInfo {
    int sample_rate = 0;
    int channels = 0;
    int bit_depth = 0;
    bool float_format = false;
    std::int64_t frames = 0;
};

/// Header-only probe (fmt + data sizes), no sample decoding.
WavInfo wav_info(const std::string& path);

/// Reads RIFF/WAVE with PCM 16-bit, PCM 24-bit or IEEE float 32-bit samples.
/// Integer samples scale by 1/32768 resp. 1/8388608; channels average to mono.
AudioClip read_wav(const std::string& path);

struct WriteStats {
    std::int64_t clipped = 0;  // samples clamped into [-1, 1]
};

/// bit_depth: 16, 24 (PCM) or 32 (IEEE float). Samples outside [-1, 1] are
/// clamped and counted.
WriteStats write_wav(const AudioClip& clip, const std::string& path, int bit_depth);

}  // namespace springverb
