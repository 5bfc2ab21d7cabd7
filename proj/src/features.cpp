#include "springverb/features.hpp"

#include <algorithm>
#include <cmath>

#include "springverb/fft.hpp"
#include "springverb/kernels.hpp"

namespace springverb {

real leq_db(const Tensor& samples) {
    const auto x = samples.data();
    if (x.empty()) throw ShapeError("leq of an empty clip");
    const real ms = kernels().dot(x.data(), x.data(), x.size()) / static_cast<real>(x.size());
    return 10 * std::log10(ms + static_cast<real>(1e-12));
}

std::optional<real> yin_pitch(const Tensor& samples, int sample_rate, const YinParams& p) {
    const auto x = samples.data();
    const std::int64_t T = static_cast<std::int64_t>(x.size());
    if (T < p.frame) return std::nullopt;

    const int W = p.frame / 2;  // integration window and max lag
    const int tau_min = std::max(2, static_cast<int>(static_cast<real>(sample_rate) / p.fmax));
    const int tau_max = std::min(W - 1, static_cast<int>(static_cast<real>(sample_rate) / p.fmin) + 1);
    if (tau_max <= tau_min) return std::nullopt;

    std::vector<real> d(static_cast<std::size_t>(tau_max) + 1);
    std::vector<real> cmndf(static_cast<std::size_t>(tau_max) + 1);
    real pitch_sum = 0;
    int voiced = 0;

    for (std::int64_t start = 0; start + p.frame <= T; start += p.hop) {
        const real* f = x.data() + start;
        d[0] = 0;
        real running = 0;
        for (int tau = 1; tau <= tau_max; ++tau) {
            real acc = 0;
            for (int j = 0; j < W; ++j) {
                const real diff = f[j] - f[j + tau];
                acc += diff * diff;
            }
            d[static_cast<std::size_t>(tau)] = acc;
            running += acc;
            cmndf[static_cast<std::size_t>(tau)] =
                running > 0 ? acc * static_cast<real>(tau) / running : 1;
        }

        int tau_est = -1;
        for (int tau = tau_min; tau <= tau_max; ++tau) {
            if (cmndf[static_cast<std::size_t>(tau)] < p.threshold) {
                // follow the local valley before interpolating
                while (tau + 1 <= tau_max &&
                       cmndf[static_cast<std::size_t>(tau + 1)] < cmndf[static_cast<std::size_t>(tau)])
                    ++tau;
                tau_est = tau;
                break;
            }
        }
        if (tau_est < 0) {
            tau_est = tau_min;
            for (int tau = tau_min + 1; tau <= tau_max; ++tau)
                if (cmndf[static_cast<std::size_t>(tau)] < cmndf[static_cast<std::size_t>(tau_est)])
                    tau_est = tau;
        }
        if (cmndf[static_cast<std::size_t>(tau_est)] >= p.unvoiced_cutoff) continue;

        real tau_refined = static_cast<real>(tau_est);
        if (tau_est > tau_min && tau_est < tau_max) {
            const real a = cmndf[static_cast<std::size_t>(tau_est - 1)];
            const real b = cmndf[static_cast<std::size_t>(tau_est)];
            const real c = cmndf[static_cast<std::size_t>(tau_est + 1)];
            const real den = a + c - 2 * b;
            if (den != 0) tau_refined += (a - c) / (2 * den);
        }
        pitch_sum += static_cast<real>(sample_rate) / tau_refined;
        ++voiced;
    }
    if (voiced == 0) return std::nullopt;
    return pitch_sum / static_cast<real>(voiced);
}

real hfc(const Tensor& samples, int frame, int hop) {
    const auto x = samples.data();
    const std::int64_t T = static_cast<std::int64_t>(x.size());
    if (T < frame) return 0;

    std::vector<real> window(static_cast<std::size_t>(frame));
    for (int i = 0; i < frame; ++i)
        window[static_cast<std::size_t>(i)] =
            static_cast<real>(0.5) -
            static_cast<real>(0.5) *
                std::cos(2 * static_cast<real>(M_PI) * static_cast<real>(i) / static_cast<real>(frame));

    std::vector<cplx> buf(static_cast<std::size_t>(frame));
    real total = 0;
    int frames = 0;
    for (std::int64_t start = 0; start + frame <= T; start += hop) {
        for (int i = 0; i < frame; ++i)
            buf[static_cast<std::size_t>(i)] =
                window[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(start + i)];
        fft_inplace(buf, false);
        real acc = 0;
        for (int k = 0; k <= frame / 2; ++k)
            acc += static_cast<real>(k) * std::norm(buf[static_cast<std::size_t>(k)]);
        total += acc;
        ++frames;
    }
    return frames ? total / static_cast<real>(frames) : 0;
}

FeatureRow analyze_clip(const AudioClip& clip) {
    FeatureRow row;
    row.leq_db = leq_db(clip.samples);
    row.pitch_hz = yin_pitch(clip.samples, clip.sample_rate);
    row.hfc = hfc(clip.samples);
    return row;
}

}  // namespace springverb
