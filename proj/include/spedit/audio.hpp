#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace spedit {

constexpr int kDefaultSampleRate = 16000;

// A half-open time interval in seconds.
struct TimeInterval {
    double start_s = 0.0;
    double end_s = 0.0;

    double duration() const { return end_s - start_s; }
};

struct AudioClip {
    std::vector<double> samples;  // amplitudes in [-1, 1]
    int sample_rate = kDefaultSampleRate;

    std::size_t size() const { return samples.size(); }
    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// Reads a 16-bit PCM WAV file. Multi-channel input is mixed down to mono;
// sample rate conversion (linear) is applied when the file rate differs from
// target_rate.
AudioClip read_wav(const std::string& path, int target_rate = kDefaultSampleRate);

// Writes mono 16-bit PCM.
void write_wav(const std::string& path, const AudioClip& clip);

// Linear-interpolation resampling to an exact output length.
std::vector<double> resample_linear(const std::vector<double>& in, std::size_t out_len);

// Converts a time interval to a half-open sample range [first, last) by
// flooring both endpoints. Complementary intervals therefore partition the
// sample axis exactly.
std::pair<std::size_t, std::size_t> interval_to_samples(const TimeInterval& iv, int sample_rate);

// Concatenates the sample ranges of keep_intervals. Intervals must be
// ordered, disjoint, and inside the clip.
AudioClip extract_and_concat(const AudioClip& clip, const std::vector<TimeInterval>& keep);

// Complement of `remove` within [0, clip duration]; used to delete segments.
std::vector<TimeInterval> complement_intervals(const std::vector<TimeInterval>& remove,
                                               double total_duration_s);

}  // namespace spedit
