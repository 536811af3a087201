#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gsrm/error.hpp"
#include "gsrm/stats.hpp"

namespace gsrm {

// Maps an instant in the processed timeline back to the source recording.
// Intervals are sorted, non-overlapping, and cover the processed clip.
struct RemapInterval {
    double processed_start_s = 0.0;
    double processed_end_s = 0.0;
    double original_start_s = 0.0;
};

struct AudioClip {
    std::vector<float> samples; // mono, unit-normalized
    int sample_rate_hz = 0;
    int source_channel = 0;
    std::vector<RemapInterval> remap;

    double duration_s() const {
        return sample_rate_hz > 0 ? double(samples.size()) / double(sample_rate_hz) : 0.0;
    }
};

// Decoded WAV before channel selection.
struct WavData {
    std::vector<std::vector<float>> channels;
    int sample_rate_hz = 0;
};

struct VadConfig {
    double frame_s = 0.025;          // analysis window for the level statistics
    double hop_s = 0.010;            // hop, and the speech/silence decision granularity
    double silence_floor_db = 30.0;  // dB below the clip's 95th-percentile frame level
    double merge_threshold_s = 1.0;  // gaps shorter than this are preserved verbatim
    double long_silence_cap_s = 1.0; // gaps at or above merge_threshold_s shrink to this
    double absolute_floor_db = -70.0; // dBFS; tiles below this are never speech
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

inline std::uint16_t read_u16le(const unsigned char* p) {
    return std::uint16_t(p[0] | p[1] << 8);
}

inline double rms_db(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += double(x[i]) * double(x[i]);
    const double rms = n > 0 ? std::sqrt(acc / double(n)) : 0.0;
    return 20.0 * std::log10(rms + 1e-10);
}

inline std::vector<RemapInterval> identity_remap(double duration_s) {
    if (duration_s <= 0.0) return {};
    return {RemapInterval{0.0, duration_s, 0.0}};
}

} // namespace detail

// Reads a RIFF/WAVE file: PCM 16-bit or IEEE float 32-bit, 1 or 2 channels.
// 16-bit samples are normalized by 1/32768; float samples are clamped to [-1, 1].
inline WavData load_wav_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("load_wav: cannot open '" + path + "'");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 12) fail("load_wav: '" + path + "' truncated RIFF header");
    if (std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
        fail("load_wav: '" + path + "' is not a RIFF/WAVE file");

    int audio_format = -1, num_channels = 0, bits = 0, sample_rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const char* id = reinterpret_cast<const char*>(buf.data() + pos);
        const std::uint32_t size = detail::read_u32le(buf.data() + pos + 4);
        pos += 8;
        if (pos + size > buf.size()) fail("load_wav: '" + path + "' truncated chunk");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) fail("load_wav: '" + path + "' malformed fmt chunk");
            audio_format = detail::read_u16le(buf.data() + pos);
            num_channels = detail::read_u16le(buf.data() + pos + 2);
            sample_rate = int(detail::read_u32le(buf.data() + pos + 4));
            bits = detail::read_u16le(buf.data() + pos + 14);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = buf.data() + pos;
            data_size = size;
        }
        pos += size + (size & 1); // chunks are word-aligned
    }

    if (audio_format < 0) fail("load_wav: '" + path + "' has no fmt chunk");
    if (!data) fail("load_wav: '" + path + "' has no data chunk");
    if (num_channels < 1 || num_channels > 2)
        fail("load_wav: '" + path + "' has " + std::to_string(num_channels) +
             " channels; only 1-2 supported");
    if (sample_rate <= 0) fail("load_wav: '" + path + "' has invalid sample rate");

    const bool pcm16 = audio_format == 1 && bits == 16;
    const bool float32 = audio_format == 3 && bits == 32;
    if (!pcm16 && !float32)
        fail("load_wav: '" + path + "' unsupported codec (format " + std::to_string(audio_format) +
             ", " + std::to_string(bits) + "-bit); need PCM16 or float32");

    const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
    const std::size_t frame_bytes = bytes_per_sample * std::size_t(num_channels);
    const std::size_t n_frames = data_size / frame_bytes;
    if (n_frames == 0) fail("load_wav: '" + path + "' contains zero-length audio");

    WavData wav;
    wav.sample_rate_hz = sample_rate;
    wav.channels.assign(std::size_t(num_channels), std::vector<float>(n_frames));
    for (std::size_t i = 0; i < n_frames; ++i) {
        for (int c = 0; c < num_channels; ++c) {
            const unsigned char* p = data + i * frame_bytes + std::size_t(c) * bytes_per_sample;
            float v;
            if (pcm16) {
                const std::int16_t s = std::int16_t(detail::read_u16le(p));
                v = float(s) / 32768.0f;
            } else {
                std::uint32_t u = detail::read_u32le(p);
                float f;
                std::memcpy(&f, &u, 4);
                v = std::clamp(f, -1.0f, 1.0f);
            }
            wav.channels[std::size_t(c)][i] = v;
        }
    }
    return wav;
}

inline AudioClip select_channel(const WavData& wav, int index) {
    if (index < 0 || std::size_t(index) >= wav.channels.size())
        fail("select_channel: index " + std::to_string(index) + " out of range for " +
             std::to_string(wav.channels.size()) + "-channel audio");
    AudioClip clip;
    clip.samples = wav.channels[std::size_t(index)];
    clip.sample_rate_hz = wav.sample_rate_hz;
    clip.source_channel = index;
    clip.remap = detail::identity_remap(clip.duration_s());
    return clip;
}

// On an already-mono clip only index 0 is valid and the call is the identity.
inline AudioClip select_channel(const AudioClip& clip, int index) {
    if (index != 0)
        fail("select_channel: index " + std::to_string(index) + " out of range for mono clip");
    return clip;
}

// Convenience single-step load; multi-channel files must go through
// load_wav_raw + select_channel instead.
inline AudioClip load_wav(const std::string& path) {
    const WavData wav = load_wav_raw(path);
    if (wav.channels.size() != 1)
        fail("load_wav: '" + path + "' has " + std::to_string(wav.channels.size()) +
             " channels; pick one with select_channel");
    return select_channel(wav, 0);
}

// Band-limited windowed-sinc resampler (>= 64 taps, Hann window, phase table).
// Resampling to the clip's own rate returns the input bit-identically.
inline AudioClip resample(const AudioClip& clip, int target_rate_hz) {
    if (clip.sample_rate_hz < 8000)
        fail("resample: sample rate " + std::to_string(clip.sample_rate_hz) + " below 8 kHz");
    if (target_rate_hz <= 0) fail("resample: invalid target rate");
    if (clip.sample_rate_hz == target_rate_hz) return clip;

    const int in_rate = clip.sample_rate_hz;
    const int g = int(std::gcd(in_rate, target_rate_hz));
    const std::int64_t num = in_rate / g;   // input samples per output step, as num/den
    const std::int64_t den = target_rate_hz / g;

    const double ratio = double(target_rate_hz) / double(in_rate);
    const double rolloff = 0.945;
    const double fc = std::min(1.0, ratio) * rolloff; // in units of input Nyquist
    const int half = ratio >= 1.0 ? 32 : int(std::ceil(32.0 / ratio));

    const auto kernel = [&](double x) -> double {
        const double u = x / double(half);
        if (u <= -1.0 || u >= 1.0) return 0.0;
        const double w = 0.5 * (1.0 + std::cos(3.14159265358979323846 * u));
        const double a = 3.14159265358979323846 * fc * x;
        const double s = std::abs(a) < 1e-12 ? 1.0 : std::sin(a) / a;
        return fc * s * w;
    };

    // One filter row per fractional phase p/den, normalized to unit DC gain.
    const int n_taps = 2 * half + 1;
    std::vector<double> table(std::size_t(den) * std::size_t(n_taps));
    for (std::int64_t p = 0; p < den; ++p) {
        const double frac = double(p) / double(den);
        double sum = 0.0;
        for (int j = -half; j <= half; ++j) {
            const double v = kernel(double(j) - frac);
            table[std::size_t(p) * std::size_t(n_taps) + std::size_t(j + half)] = v;
            sum += v;
        }
        if (sum != 0.0)
            for (int j = 0; j < n_taps; ++j)
                table[std::size_t(p) * std::size_t(n_taps) + std::size_t(j)] /= sum;
    }

    const std::int64_t in_n = std::int64_t(clip.samples.size());
    const std::int64_t out_n =
        std::int64_t(std::llround(double(in_n) * double(target_rate_hz) / double(in_rate)));

    AudioClip out;
    out.sample_rate_hz = target_rate_hz;
    out.source_channel = clip.source_channel;
    out.remap = clip.remap; // time axis is unchanged
    out.samples.resize(std::size_t(out_n));
    for (std::int64_t n = 0; n < out_n; ++n) {
        const std::int64_t steps = n * num;
        const std::int64_t q = steps / den;
        const std::int64_t p = steps % den;
        const double* row = table.data() + std::size_t(p) * std::size_t(n_taps);
        double acc = 0.0;
        for (int j = -half; j <= half; ++j) {
            const std::int64_t k = q + j;
            if (k < 0 || k >= in_n) continue;
            acc += double(clip.samples[std::size_t(k)]) * row[std::size_t(j + half)];
        }
        out.samples[std::size_t(n)] = float(acc);
    }
    return out;
}

inline AudioClip resample_24k(const AudioClip& clip) { return resample(clip, 24000); }

namespace detail {

// Splits a kept span of the current timeline across the clip's remap
// intervals so each emitted interval maps to one contiguous source range.
inline void append_remapped(std::vector<RemapInterval>& out, const AudioClip& clip,
                            double cur_start_s, double cur_end_s, double& acc_s) {
    for (const RemapInterval& iv : clip.remap) {
        const double a = std::max(cur_start_s, iv.processed_start_s);
        const double b = std::min(cur_end_s, iv.processed_end_s);
        if (b - a <= 1e-12) continue;
        RemapInterval r;
        r.processed_start_s = acc_s;
        r.processed_end_s = acc_s + (b - a);
        r.original_start_s = iv.original_start_s + (a - iv.processed_start_s);
        // Coalesce with the previous interval when contiguous in both timelines.
        if (!out.empty() && std::abs(out.back().processed_end_s - r.processed_start_s) < 1e-9 &&
            std::abs((out.back().original_start_s +
                      (out.back().processed_end_s - out.back().processed_start_s)) -
                     r.original_start_s) < 1e-9) {
            out.back().processed_end_s = r.processed_end_s;
        } else {
            out.push_back(r);
        }
        acc_s += b - a;
    }
}

} // namespace detail

// Energy VAD. Frame levels (frame_s windows at hop_s) set the reference: the
// threshold sits silence_floor_db below their 95th percentile. Speech/silence
// is then decided per hop-length tile on the tile's own RMS, so edit points
// land within one hop of the construction. Only gaps >= merge_threshold_s are
// edited; they shrink to long_silence_cap_s. Everything else is copied
// verbatim, so speech samples are never dropped.
inline AudioClip trim_silence(const AudioClip& clip, const VadConfig& cfg) {
    if (clip.samples.empty()) fail("trim_silence: empty clip");
    if (cfg.frame_s <= cfg.hop_s) fail("trim_silence: frame_s must exceed hop_s");
    const int sr = clip.sample_rate_hz;
    const std::size_t n = clip.samples.size();
    const std::size_t frame_n = std::max<std::size_t>(1, std::size_t(std::lround(cfg.frame_s * sr)));
    const std::size_t hop_n = std::max<std::size_t>(1, std::size_t(std::lround(cfg.hop_s * sr)));

    // Reference level from overlapped frames.
    std::vector<double> frame_dbs;
    for (std::size_t start = 0; start + frame_n <= n; start += hop_n)
        frame_dbs.push_back(detail::rms_db(clip.samples.data() + start, frame_n));
    if (frame_dbs.empty()) frame_dbs.push_back(detail::rms_db(clip.samples.data(), n));
    const double p95 = stats::quantile_type7(frame_dbs, 0.95);
    const double threshold_db = std::max(p95 - cfg.silence_floor_db, cfg.absolute_floor_db);

    // Per-tile decisions.
    const std::size_t n_tiles = (n + hop_n - 1) / hop_n;
    std::vector<char> speech(n_tiles, 0);
    bool any = false;
    for (std::size_t t = 0; t < n_tiles; ++t) {
        const std::size_t a = t * hop_n;
        const std::size_t b = std::min(n, a + hop_n);
        const double db = detail::rms_db(clip.samples.data() + a, b - a);
        speech[t] = db >= threshold_db ? 1 : 0;
        any = any || speech[t];
    }
    if (!any) fail("trim_silence: clip contains no speech frames (all below floor)");

    // Speech regions in samples, tile-aligned.
    struct Region {
        std::size_t start, end;
    };
    std::vector<Region> regions;
    for (std::size_t t = 0; t < n_tiles;) {
        if (!speech[t]) {
            ++t;
            continue;
        }
        std::size_t u = t;
        while (u < n_tiles && speech[u]) ++u;
        regions.push_back({t * hop_n, std::min(n, u * hop_n)});
        t = u;
    }

    const std::size_t merge_n = std::size_t(std::lround(cfg.merge_threshold_s * sr));
    const std::size_t cap_n = std::size_t(std::lround(cfg.long_silence_cap_s * sr));

    // Kept spans of the current timeline, in order.
    std::vector<Region> kept;
    const Region& first = regions.front();
    if (first.start > 0) {
        if (first.start >= merge_n)
            kept.push_back({first.start - std::min(cap_n, first.start), first.start});
        else
            kept.push_back({0, first.start});
    }
    for (std::size_t i = 0; i < regions.size(); ++i) {
        kept.push_back(regions[i]);
        if (i + 1 < regions.size()) {
            const std::size_t gap = regions[i + 1].start - regions[i].end;
            const std::size_t keep = gap >= merge_n ? std::min(gap, cap_n) : gap;
            if (keep > 0) kept.push_back({regions[i].end, regions[i].end + keep});
        }
    }
    const Region& last = regions.back();
    if (last.end < n) {
        const std::size_t gap = n - last.end;
        const std::size_t keep = gap >= merge_n ? std::min(gap, cap_n) : gap;
        if (keep > 0) kept.push_back({last.end, last.end + keep});
    }

    AudioClip out;
    out.sample_rate_hz = sr;
    out.source_channel = clip.source_channel;
    double acc_s = 0.0;
    for (const Region& r : kept) {
        out.samples.insert(out.samples.end(), clip.samples.begin() + std::ptrdiff_t(r.start),
                           clip.samples.begin() + std::ptrdiff_t(r.end));
        detail::append_remapped(out.remap, clip, double(r.start) / sr, double(r.end) / sr, acc_s);
    }
    return out;
}

// Processed-timeline instant -> source-recording instant.
inline double to_original_time(const AudioClip& clip, double t_s) {
    for (const RemapInterval& iv : clip.remap) {
        const bool is_last = &iv == &clip.remap.back();
        if (t_s >= iv.processed_start_s &&
            (t_s < iv.processed_end_s || (is_last && t_s <= iv.processed_end_s + 1e-9)))
            return iv.original_start_s + (t_s - iv.processed_start_s);
    }
    fail("to_original_time: instant " + std::to_string(t_s) + " outside processed timeline");
}

// Source-recording instant -> processed-timeline instant; removed regions
// have no image.
inline std::optional<double> to_processed_time(const AudioClip& clip, double orig_s) {
    for (const RemapInterval& iv : clip.remap) {
        const double len = iv.processed_end_s - iv.processed_start_s;
        if (orig_s >= iv.original_start_s && orig_s < iv.original_start_s + len)
            return iv.processed_start_s + (orig_s - iv.original_start_s);
    }
    return std::nullopt;
}

} // namespace gsrm
