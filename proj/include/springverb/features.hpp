#pragma once

#include <optional>

#include "springverb/wav.hpp"

namespace springverb {

/// Equivalent sound level: 10 log10(mean(x^2) + 1e-12) dB.
real leq_db(const Tensor& samples);

struct YinParams {
    int frame = 2048;
    int hop = 512;
    real threshold = static_cast<real>(0.1);
    real fmin = 40;
    real fmax = 2000;
    real unvoiced_cutoff = static_cast<real>(0.5);
};

/// YIN pitch: cumulative-mean-normalized difference per frame, absolute
/// threshold with parabolic interpolation, mean over voiced frames. Absent
/// when no frame is voiced or the clip is shorter than one frame.
std::optional<real> yin_pitch(const Tensor& samples, int sample_rate, const YinParams& p = {});

/// High-frequency content: mean over Hann-windowed frames of
/// sum_k k * |X_k|^2 over the half spectrum.
real hfc(const Tensor& samples, int frame = 1024, int hop = 512);

struct FeatureRow {
    real leq_db = 0;
    std::optional<real> pitch_hz;
    real hfc = 0;
};

FeatureRow analyze_clip(const AudioClip& clip);

}  // namespace springverb
