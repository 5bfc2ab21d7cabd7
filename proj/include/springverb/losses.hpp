#pragma once

#include "springverb/fft.hpp"
#include "springverb/tensor.hpp"

namespace springverb {

/// Multi-resolution STFT loss configuration. Defaults follow the common
/// convention: fft {512, 1024, 2048}, hop = fft/4, win = fft, alpha = 1.
struct MrstftConfig {
    std::vector<StftConfig> resolutions;
    real alpha = 1;

    static MrstftConfig defaults();
    int min_signal_len() const;  // largest win_length across resolutions
};

/// Mean over elements of 0.5 d^2/beta (|d| < beta) else |d| - 0.5 beta,
/// d = pred - target.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, real beta = 1);

/// ||Y - Yhat||_F / max(||Y||_F, 1e-7); target magnitude treated as given.
Tensor spectral_convergence(const Tensor& pred_mag, const Tensor& target_mag);

/// mean |log(max(|Y|, 1e-7)) - log(max(|Yhat|, 1e-7))|
Tensor log_magnitude(const Tensor& pred_mag, const Tensor& target_mag);

/// sum over resolutions of (l_SC + alpha * l_SM) on 1-D signals.
Tensor mrstft(const Tensor& pred, const Tensor& target, const MrstftConfig& cfg);

/// smooth_l1 + mrstft on 1-D signals.
Tensor combined_loss(const Tensor& pred, const Tensor& target, const MrstftConfig& cfg);

/// Batched [B x 1 x L] variant: smooth_l1 over the whole tensor plus the
/// per-item mean of mrstft.
Tensor combined_loss_batch(const Tensor& pred, const Tensor& target, const MrstftConfig& cfg);

}  // namespace springverb
