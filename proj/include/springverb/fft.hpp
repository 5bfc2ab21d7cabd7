#pragma once

#include <complex>
#include <vector>

#include "springverb/tensor.hpp"

namespace springverb {

using cplx = std::complex<real>;

/// Iterative radix-2 FFT. Forward transform is unscaled; the inverse scales
/// by 1/N. Length must be a power of two.
void fft_inplace(std::vector<cplx>& x, bool inverse);

/// Magnitude floor shared by the STFT gradient path and the log-magnitude
/// loss.
inline constexpr real kMagFloor = static_cast<real>(1e-7);

struct StftConfig {
    int fft_size = 0;
    int hop = 0;
    int win_length = 0;
    std::vector<real> window;  // periodic Hann, length win_length

    /// Validates 0 < hop <= win_length <= fft_size and fft_size a power of
    /// two, then precomputes the window.
    static StftConfig make(int fft_size, int hop, int win_length);

    int bins() const { return fft_size / 2 + 1; }
    /// 1 + floor((T - win_length)/hop); throws when T < win_length.
    int frames_for(std::int64_t T) const;
};

/// |STFT| of a 1-D signal as [frames x bins]. Frames start at sample 0 (no
/// centering padding); the windowed frame sits centered in the fft buffer
/// when win_length < fft_size. Differentiable w.r.t. x with |X| clamped
/// below at kMagFloor in the gradient.
Tensor stft_magnitude(const Tensor& x, const StftConfig& cfg);

}  // namespace springverb
