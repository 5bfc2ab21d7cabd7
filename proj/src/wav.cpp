#include "springverb/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace springverb {

namespace {

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
};

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

struct WavChunks {
    FmtChunk fmt;
    std::vector<unsigned char> data;
    bool have_fmt = false;
    bool have_data = false;
};

WavChunks parse_wav(const std::string& path, bool want_data) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw IoError(path + ": malformed header (not RIFF/WAVE)");

    WavChunks out;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        char id[5] = {};
        std::memcpy(id, bytes.data() + pos, 4);
        const std::uint32_t size = read_u32(bytes.data() + pos + 4);
        pos += 8;
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16 || pos + 16 > bytes.size())
                throw IoError(path + ": malformed fmt chunk");
            out.fmt.format = read_u16(bytes.data() + pos);
            out.fmt.channels = read_u16(bytes.data() + pos + 2);
            out.fmt.sample_rate = read_u32(bytes.data() + pos + 4);
            out.fmt.bits = read_u16(bytes.data() + pos + 14);
            out.have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            if (pos + size > bytes.size())
                throw IoError(path + ": truncated data chunk (header claims " +
                              std::to_string(size) + " bytes, file has " +
                              std::to_string(bytes.size() - pos) + ")");
            if (want_data)
                out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                bytes.begin() + static_cast<std::ptrdiff_t>(pos + size));
            else
                out.data.resize(size);  // only the size matters for probing
            out.have_data = true;
        }
        pos += size + (size & 1);  // chunks are word-aligned
    }
    if (!out.have_fmt) throw IoError(path + ": missing fmt chunk");
    if (!out.have_data) throw IoError(path + ": missing data chunk");
    if (out.fmt.channels == 0) throw IoError(path + ": fmt chunk declares zero channels");

    const bool pcm16 = out.fmt.format == 1 && out.fmt.bits == 16;
    const bool pcm24 = out.fmt.format == 1 && out.fmt.bits == 24;
    const bool f32 = out.fmt.format == 3 && out.fmt.bits == 32;
    if (!pcm16 && !pcm24 && !f32)
        throw IoError(path + ": unsupported codec (format tag " + std::to_string(out.fmt.format) +
                      ", " + std::to_string(out.fmt.bits) + " bits); expected PCM 16/24-bit or float 32-bit");
    return out;
}

}  // namespace

WavInfo wav_info(const std::string& path) {
    const WavChunks c = parse_wav(path, false);
    WavInfo info;
    info.sample_rate = static_cast<int>(c.fmt.sample_rate);
    info.channels = c.fmt.channels;
    info.bit_depth = c.fmt.bits;
    info.float_format = c.fmt.format == 3;
    const int bytes_per_frame = c.fmt.channels * (c.fmt.bits / 8);
    info.frames = bytes_per_frame ? static_cast<std::int64_t>(c.data.size()) / bytes_per_frame : 0;
    return info;
}

AudioClip read_wav(const std::string& path) {
    const WavChunks c = parse_wav(path, true);
    const int ch = c.fmt.channels;
    const int bps = c.fmt.bits / 8;
    const std::int64_t frames = static_cast<std::int64_t>(c.data.size()) / (ch * bps);

    std::vector<real> mono(static_cast<std::size_t>(frames), real{0});
    const unsigned char* p = c.data.data();
    for (std::int64_t i = 0; i < frames; ++i) {
        real acc = 0;
        for (int j = 0; j < ch; ++j) {
            const unsigned char* s = p + (i * ch + j) * bps;
            real v = 0;
            if (c.fmt.format == 3) {
                float fv;
                std::memcpy(&fv, s, 4);
                v = static_cast<real>(fv);
            } else if (c.fmt.bits == 16) {
                const std::int16_t iv = static_cast<std::int16_t>(s[0] | (s[1] << 8));
                v = static_cast<real>(iv) / static_cast<real>(32768);
            } else {  // 24-bit
                std::int32_t iv = s[0] | (s[1] << 8) | (s[2] << 16);
                if (iv & 0x800000) iv |= static_cast<std::int32_t>(0xff000000);
                v = static_cast<real>(iv) / static_cast<real>(8388608);
            }
            acc += v;
        }
        mono[static_cast<std::size_t>(i)] = acc / static_cast<real>(ch);
    }

    AudioClip clip;
    clip.samples = Tensor::from({static_cast<int>(frames)}, std::move(mono));
    clip.sample_rate = static_cast<int>(c.fmt.sample_rate);
    clip.source_channels = ch;
    return clip;
}

WriteStats write_wav(const AudioClip& clip, const std::string& path, int bit_depth) {
    if (bit_depth != 16 && bit_depth != 24 && bit_depth != 32)
        throw IoError("write_wav: bit depth must be 16, 24 or 32(float), got " +
                      std::to_string(bit_depth));
    const auto x = clip.samples.data();
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    const bool is_float = bit_depth == 32;
    const int bps = bit_depth / 8;

    WriteStats stats;
    std::vector<unsigned char> payload(static_cast<std::size_t>(n * bps));
    for (std::int64_t i = 0; i < n; ++i) {
        real v = x[static_cast<std::size_t>(i)];
        if (v > 1) {
            v = 1;
            ++stats.clipped;
        } else if (v < -1) {
            v = -1;
            ++stats.clipped;
        }
        unsigned char* out = payload.data() + i * bps;
        if (is_float) {
            const float fv = static_cast<float>(v);
            std::memcpy(out, &fv, 4);
        } else if (bit_depth == 16) {
            std::int32_t q = static_cast<std::int32_t>(std::lrint(v * 32768.0));
            if (q > 32767) q = 32767;
            if (q < -32768) q = -32768;
            out[0] = static_cast<unsigned char>(q & 0xff);
            out[1] = static_cast<unsigned char>((q >> 8) & 0xff);
        } else {
            std::int64_t q = static_cast<std::int64_t>(std::llrint(v * 8388608.0));
            if (q > 8388607) q = 8388607;
            if (q < -8388608) q = -8388608;
            out[0] = static_cast<unsigned char>(q & 0xff);
            out[1] = static_cast<unsigned char>((q >> 8) & 0xff);
            out[2] = static_cast<unsigned char>((q >> 16) & 0xff);
        }
    }

    auto put_u32 = [](std::vector<unsigned char>& v, std::uint32_t x32) {
        v.push_back(static_cast<unsigned char>(x32 & 0xff));
        v.push_back(static_cast<unsigned char>((x32 >> 8) & 0xff));
        v.push_back(static_cast<unsigned char>((x32 >> 16) & 0xff));
        v.push_back(static_cast<unsigned char>((x32 >> 24) & 0xff));
    };
    auto put_u16 = [](std::vector<unsigned char>& v, std::uint16_t x16) {
        v.push_back(static_cast<unsigned char>(x16 & 0xff));
        v.push_back(static_cast<unsigned char>((x16 >> 8) & 0xff));
    };
    auto put_tag = [](std::vector<unsigned char>& v, const char* tag) {
        v.insert(v.end(), tag, tag + 4);
    };

    std::vector<unsigned char> out;
    const std::uint32_t fmt_size = is_float ? 18 : 16;
    const std::uint32_t fact_size = is_float ? 8 + 4 : 0;
    const std::uint32_t data_size = static_cast<std::uint32_t>(payload.size());
    const std::uint32_t riff_size = 4 + (8 + fmt_size) + fact_size + (8 + data_size) + (data_size & 1);

    put_tag(out, "RIFF");
    put_u32(out, riff_size);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, fmt_size);
    put_u16(out, is_float ? 3 : 1);
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate * bps));
    put_u16(out, static_cast<std::uint16_t>(bps));
    put_u16(out, static_cast<std::uint16_t>(bit_depth));
    if (is_float) {
        put_u16(out, 0);  // cbSize
        put_tag(out, "fact");
        put_u32(out, 4);
        put_u32(out, static_cast<std::uint32_t>(n));
    }
    put_tag(out, "data");
    put_u32(out, data_size);
    out.insert(out.end(), payload.begin(), payload.end());
    if (data_size & 1) out.push_back(0);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for " + path);
    return stats;
}

}  // namespace springverb
