#include "spedit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "spedit/errors.hpp"

namespace spedit {

namespace {

template <typename T>
T read_le(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

AudioClip read_wav(const std::string& path, int target_rate) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingAudioError(path);

    char tag[4];
    f.read(tag, 4);
    if (std::memcmp(tag, "RIFF", 4) != 0) throw SchemaError(path + ": not a RIFF file");
    read_le<uint32_t>(f);
    f.read(tag, 4);
    if (std::memcmp(tag, "WAVE", 4) != 0) throw SchemaError(path + ": not a WAVE file");

    uint16_t channels = 0, bits = 0;
    uint32_t rate = 0;
    std::vector<int16_t> raw;
    bool got_fmt = false, got_data = false;
    while (f.read(tag, 4)) {
        uint32_t chunk_size = read_le<uint32_t>(f);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            uint16_t fmt = read_le<uint16_t>(f);
            channels = read_le<uint16_t>(f);
            rate = read_le<uint32_t>(f);
            read_le<uint32_t>(f);
            read_le<uint16_t>(f);
            bits = read_le<uint16_t>(f);
            if (fmt != 1 || bits != 16)
                throw SchemaError(path + ": only 16-bit PCM supported");
            if (chunk_size > 16) f.seekg(chunk_size - 16, std::ios::cur);
            got_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            raw.resize(chunk_size / 2);
            f.read(reinterpret_cast<char*>(raw.data()), chunk_size);
            got_data = true;
        } else {
            f.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    if (!got_fmt || !got_data) throw SchemaError(path + ": missing fmt/data chunk");
    if (channels == 0) throw SchemaError(path + ": zero channels");

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.samples.reserve(raw.size() / channels);
    for (std::size_t i = 0; i + channels <= raw.size(); i += channels) {
        double acc = 0.0;
        for (uint16_t c = 0; c < channels; ++c)
            acc += std::clamp(raw[i + c] / 32767.0, -1.0, 1.0);
        clip.samples.push_back(acc / channels);
    }

    if (clip.sample_rate != target_rate) {
        std::size_t out_len = static_cast<std::size_t>(std::llround(
            static_cast<double>(clip.samples.size()) * target_rate / clip.sample_rate));
        clip.samples = resample_linear(clip.samples, out_len);
        clip.sample_rate = target_rate;
    }
    return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);

    uint32_t data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
    f.write("RIFF", 4);
    write_le<uint32_t>(f, 36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    write_le<uint32_t>(f, 16);
    write_le<uint16_t>(f, 1);   // PCM
    write_le<uint16_t>(f, 1);   // mono
    write_le<uint32_t>(f, static_cast<uint32_t>(clip.sample_rate));
    write_le<uint32_t>(f, static_cast<uint32_t>(clip.sample_rate * 2));
    write_le<uint16_t>(f, 2);
    write_le<uint16_t>(f, 16);
    f.write("data", 4);
    write_le<uint32_t>(f, data_bytes);
    for (double s : clip.samples) {
        double clamped = std::clamp(s, -1.0, 1.0);
        write_le<int16_t>(f, static_cast<int16_t>(std::lround(clamped * 32767.0)));
    }
    if (!f) throw IoError("write failed: " + path);
}

std::vector<double> resample_linear(const std::vector<double>& in, std::size_t out_len) {
    std::vector<double> out(out_len);
    if (in.empty() || out_len == 0) return out;
    if (out_len == in.size()) return in;
    double scale = static_cast<double>(in.size() - 1) / std::max<std::size_t>(out_len - 1, 1);
    for (std::size_t i = 0; i < out_len; ++i) {
        double pos = i * scale;
        std::size_t lo = std::min(static_cast<std::size_t>(pos), in.size() - 1);
        std::size_t hi = std::min(lo + 1, in.size() - 1);
        double frac = pos - lo;
        out[i] = in[lo] * (1.0 - frac) + in[hi] * frac;
    }
    return out;
}

std::pair<std::size_t, std::size_t> interval_to_samples(const TimeInterval& iv, int sample_rate) {
    // Small epsilon so boundaries that are exact sample multiples survive
    // floating-point round-trips through seconds.
    auto first = static_cast<std::size_t>(std::floor(iv.start_s * sample_rate + 1e-6));
    auto last = static_cast<std::size_t>(std::floor(iv.end_s * sample_rate + 1e-6));
    return {first, last};
}

AudioClip extract_and_concat(const AudioClip& clip, const std::vector<TimeInterval>& keep) {
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    std::size_t prev_end = 0;
    bool first = true;
    for (const auto& iv : keep) {
        if (iv.start_s < 0 || iv.end_s < iv.start_s)
            throw RangeError("malformed keep interval");
        auto [lo, hi] = interval_to_samples(iv, clip.sample_rate);
        if (hi > clip.samples.size()) throw RangeError("keep interval beyond clip end");
        if (!first && lo < prev_end) throw RangeError("keep intervals overlap or unordered");
        out.samples.insert(out.samples.end(), clip.samples.begin() + lo, clip.samples.begin() + hi);
        prev_end = hi;
        first = false;
    }
    return out;
}

std::vector<TimeInterval> complement_intervals(const std::vector<TimeInterval>& remove,
                                               double total_duration_s) {
    std::vector<TimeInterval> keep;
    double cursor = 0.0;
    for (const auto& iv : remove) {
        if (iv.start_s > cursor) keep.push_back({cursor, iv.start_s});
        cursor = std::max(cursor, iv.end_s);
    }
    if (cursor < total_duration_s) keep.push_back({cursor, total_duration_s});
    return keep;
}

}  // namespace spedit
