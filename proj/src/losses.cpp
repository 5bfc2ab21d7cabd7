#include "springverb/losses.hpp"

#include <cmath>

#include "springverb/kernels.hpp"
#include "op_support.hpp"

namespace springverb {

MrstftConfig MrstftConfig::defaults() {
    MrstftConfig cfg;
    for (int fft : {512, 1024, 2048}) cfg.resolutions.push_back(StftConfig::make(fft, fft / 4, fft));
    cfg.alpha = 1;
    return cfg;
}

int MrstftConfig::min_signal_len() const {
    int m = 0;
    for (const auto& r : resolutions) m = std::max(m, r.win_length);
    return m;
}

Tensor smooth_l1(const Tensor& pred, const Tensor& target, real beta) {
    if (pred.shape() != target.shape())
        throw ShapeError("smooth_l1 shape mismatch: " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    const auto pp = pred.data();
    const auto pt = target.data();
    const std::size_t n = pp.size();
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const real d = pp[i] - pt[i];
        const real ad = std::fabs(d);
        acc += ad < beta ? static_cast<real>(0.5) * d * d / beta : ad - static_cast<real>(0.5) * beta;
    }
    Tensor out = Tensor::scalar_value(acc / static_cast<real>(n));

    Tape* tape = detail::joint_tape({&pred, &target});
    if (!tape) return out;
    const Tensor pv = pred.detached(), tv = target.detached();
    const int pn = pred.node(), tn = target.node();
    return tape->emit(std::move(out), [pv, tv, pn, tn, beta](Tape& t, int self) {
        const real g = t.grad_buf(self)[0];
        const auto pp2 = pv.data();
        const auto pt2 = tv.data();
        const std::size_t n2 = pp2.size();
        const real inv = g / static_cast<real>(n2);
        for (std::size_t i = 0; i < n2; ++i) {
            const real d = pp2[i] - pt2[i];
            const real dd = std::fabs(d) < beta ? d / beta : (d > 0 ? real{1} : real{-1});
            if (pn >= 0) t.grad_buf(pn)[i] += inv * dd;
            if (tn >= 0) t.grad_buf(tn)[i] -= inv * dd;
        }
    });
}

Tensor spectral_convergence(const Tensor& pred_mag, const Tensor& target_mag) {
    if (pred_mag.shape() != target_mag.shape())
        throw ShapeError("spectral_convergence shape mismatch: " + shape_str(pred_mag.shape()) +
                         " vs " + shape_str(target_mag.shape()));
    const auto pt = target_mag.data();
    const real target_norm =
        std::sqrt(kernels().dot(pt.data(), pt.data(), pt.size()));
    const real den = target_norm < kMagFloor ? kMagFloor : target_norm;
    Tensor diff_norm = sqrt(sum(square(sub(pred_mag, target_mag))));
    return scale(diff_norm, 1 / den);
}

Tensor log_magnitude(const Tensor& pred_mag, const Tensor& target_mag) {
    if (pred_mag.shape() != target_mag.shape())
        throw ShapeError("log_magnitude shape mismatch: " + shape_str(pred_mag.shape()) + " vs " +
                         shape_str(target_mag.shape()));
    Tensor lp = log(clamp_min(pred_mag, kMagFloor));
    Tensor lt = log(clamp_min(target_mag, kMagFloor));
    return mean(abs(sub(lp, lt)));
}

Tensor mrstft(const Tensor& pred, const Tensor& target, const MrstftConfig& cfg) {
    if (cfg.resolutions.empty()) throw ShapeError("mrstft needs at least one resolution");
    if (pred.numel() < cfg.min_signal_len())
        throw ShapeError("mrstft: signal of " + std::to_string(pred.numel()) +
                         " samples is shorter than the largest window (" +
                         std::to_string(cfg.min_signal_len()) + ")");
    Tensor total;
    for (const auto& res : cfg.resolutions) {
        Tensor pm = stft_magnitude(pred, res);
        Tensor tm = stft_magnitude(target, res);
        Tensor term = add(spectral_convergence(pm, tm), scale(log_magnitude(pm, tm), cfg.alpha));
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

Tensor combined_loss(const Tensor& pred, const Tensor& target, const MrstftConfig& cfg) {
    return add(smooth_l1(pred, target), mrstft(pred, target, cfg));
}

Tensor combined_loss_batch(const Tensor& pred, const Tensor& target, const MrstftConfig& cfg) {
    if (pred.rank() != 3 || pred.shape() != target.shape())
        throw ShapeError("combined_loss_batch expects matching [Bx1xL] tensors");
    const int B = pred.dim(0);
    const int L = pred.dim(2);
    Tensor spectral;
    for (int b = 0; b < B; ++b) {
        Tensor pb = reshape(narrow(pred, 0, b, 1), {L});
        Tensor tb = reshape(narrow(target, 0, b, 1), {L});
        Tensor term = mrstft(pb, tb, cfg);
        spectral = spectral.defined() ? add(spectral, term) : term;
    }
    return add(smooth_l1(pred, target), scale(spectral, 1 / static_cast<real>(B)));
}

}  // namespace springverb
