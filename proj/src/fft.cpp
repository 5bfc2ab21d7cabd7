#include "springverb/fft.hpp"

#include <cmath>
#include <numbers>

#include "op_support.hpp"

namespace springverb {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void fft_inplace(std::vector<cplx>& x, bool inverse) {
    const std::size_t n = x.size();
    if (!is_pow2(static_cast<int>(n)))
        throw ShapeError("fft length must be a power of two, got " + std::to_string(n));
    if (n == 1) return;

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }

    const real sign = inverse ? 1 : -1;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const real ang = sign * 2 * std::numbers::pi_v<real> / static_cast<real>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = x[i + j];
                const cplx v = x[i + j + len / 2] * w;
                x[i + j] = u + v;
                x[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const real inv = 1 / static_cast<real>(n);
        for (auto& v : x) v *= inv;
    }
}

StftConfig StftConfig::make(int fft_size, int hop, int win_length) {
    if (!is_pow2(fft_size))
        throw ShapeError("stft fft_size must be a power of two, got " + std::to_string(fft_size));
    if (hop <= 0 || win_length <= 0 || hop > win_length || win_length > fft_size)
        throw ShapeError("stft requires 0 < hop <= win_length <= fft_size");
    StftConfig cfg;
    cfg.fft_size = fft_size;
    cfg.hop = hop;
    cfg.win_length = win_length;
    cfg.window.resize(static_cast<std::size_t>(win_length));
    for (int i = 0; i < win_length; ++i)
        cfg.window[static_cast<std::size_t>(i)] =
            static_cast<real>(0.5) -
            static_cast<real>(0.5) *
                std::cos(2 * std::numbers::pi_v<real> * static_cast<real>(i) / static_cast<real>(win_length));
    return cfg;
}

int StftConfig::frames_for(std::int64_t T) const {
    if (T < win_length)
        throw ShapeError("signal of length " + std::to_string(T) + " is shorter than win_length " +
                         std::to_string(win_length));
    return static_cast<int>(1 + (T - win_length) / hop);
}

Tensor stft_magnitude(const Tensor& x, const StftConfig& cfg) {
    if (x.rank() != 1) throw ShapeError("stft_magnitude expects a 1-D signal, got " + shape_str(x.shape()));
    const std::int64_t T = x.numel();
    const int frames = cfg.frames_for(T);
    const int N = cfg.fft_size;
    const int bins = cfg.bins();
    const int offset = (N - cfg.win_length) / 2;

    Tensor out = Tensor::zeros({frames, bins});
    auto po = out.mut_data();
    const auto px = x.data();
    auto spectra = std::make_shared<std::vector<cplx>>(static_cast<std::size_t>(frames) * bins);
    std::vector<cplx> buf(static_cast<std::size_t>(N));

    for (int f = 0; f < frames; ++f) {
        std::fill(buf.begin(), buf.end(), cplx{});
        const std::size_t start = static_cast<std::size_t>(f) * cfg.hop;
        for (int i = 0; i < cfg.win_length; ++i)
            buf[static_cast<std::size_t>(offset + i)] =
                cfg.window[static_cast<std::size_t>(i)] * px[start + static_cast<std::size_t>(i)];
        fft_inplace(buf, false);
        for (int k = 0; k < bins; ++k) {
            (*spectra)[static_cast<std::size_t>(f) * bins + k] = buf[static_cast<std::size_t>(k)];
            po[static_cast<std::size_t>(f) * bins + k] = std::abs(buf[static_cast<std::size_t>(k)]);
        }
    }

    Tape* tape = detail::joint_tape({&x});
    if (!tape) return out;

    const Tensor ov = out.detached();
    const int xn = x.node();
    const int hop = cfg.hop, win = cfg.win_length;
    auto window = std::make_shared<std::vector<real>>(cfg.window);
    return tape->emit(std::move(out), [ov, xn, spectra, window, frames, bins, N, hop, win,
                                       offset](Tape& t, int self) {
        if (xn < 0) return;
        const auto g = t.grad_buf(self);
        auto gx = t.grad_buf(xn);
        const auto mag = ov.data();
        std::vector<cplx> d(static_cast<std::size_t>(N));
        for (int f = 0; f < frames; ++f) {
            // d(|X_k|)/ds_n = Re(X_k e^{i 2pi kn/N}) / |X_k|; evaluate all n at
            // once through one inverse transform of the symmetrized spectrum,
            // halving interior bins so each contributes exactly once.
            for (int k = 0; k < bins; ++k) {
                const std::size_t fk = static_cast<std::size_t>(f) * bins + k;
                const real m = mag[fk] < kMagFloor ? kMagFloor : mag[fk];
                cplx c = (*spectra)[fk] * (g[fk] / m);
                if (k != 0 && k != N / 2) c *= static_cast<real>(0.5);
                d[static_cast<std::size_t>(k)] = c;
                if (k != 0 && k != N / 2) d[static_cast<std::size_t>(N - k)] = std::conj(c);
            }
            fft_inplace(d, true);
            const std::size_t start = static_cast<std::size_t>(f) * hop;
            for (int i = 0; i < win; ++i)
                gx[start + static_cast<std::size_t>(i)] +=
                    (*window)[static_cast<std::size_t>(i)] * static_cast<real>(N) *
                    d[static_cast<std::size_t>(offset + i)].real();
        }
    });
}

}  // namespace springverb
