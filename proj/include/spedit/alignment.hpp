#pragma once

#include <string>
#include <vector>

#include "spedit/audio.hpp"

namespace spedit {

// A waveform plus its transcript and word-level time intervals.
struct AlignedUtterance {
    std::string id;
    AudioClip audio;
    std::vector<std::string> words;
    std::vector<TimeInterval> intervals;  // one per word, strictly monotone

    double duration_s() const { return audio.duration_s(); }
    std::size_t word_count() const { return words.size(); }
};

std::string join_words(const std::vector<std::string>& words);
std::vector<std::string> split_words(const std::string& text);

// Throws a named validation error (CountMismatchError, IntervalOverlapError,
// RangeError) if the utterance violates its invariants.
void validate_utterance(const AlignedUtterance& u);

// Loads an alignment JSON ({"audio","text","words":[{"w","start","end"},...]})
// and the referenced WAV, resampled to target_rate.
AlignedUtterance load_alignment(const std::string& path, int target_rate = kDefaultSampleRate);

// Writes the alignment JSON; `audio_rel` is the path stored in the "audio"
// field (relative to the JSON's directory).
void save_alignment(const std::string& path, const AlignedUtterance& u,
                    const std::string& audio_rel);

struct SyntheticCorpusConfig {
    int n_utts = 10;
    int min_words = 3;
    int max_words = 8;
    double word_dur_s = 0.5;
    // One pure-tone frequency per vocabulary word; all distinct, below Nyquist.
    std::vector<double> vocab_freqs_hz = {
        500, 750, 1000, 1250, 1500, 1750, 2000, 2250, 2500, 2750, 3000, 3250};
    double amplitude = 0.3;
    int sample_rate = kDefaultSampleRate;
};

// Vocabulary word label for index k ("w0", "w1", ...).
std::string synthetic_word_label(int k);

// Deterministic toy corpus: every word is a fixed-duration pure tone with a
// unique frequency, so alignments are exact by construction.
std::vector<AlignedUtterance> generate_synthetic_corpus(const SyntheticCorpusConfig& cfg,
                                                        uint64_t seed);

}  // namespace spedit
