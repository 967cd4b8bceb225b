#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spedit/audio.hpp"

namespace spedit {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct MelConfig {
    int n_fft = 512;
    int win_samples = 400;  // 25 ms @ 16 kHz
    int hop_samples = 160;  // 10 ms @ 16 kHz
    int n_bins = 80;
    double fmin_hz = 0.0;
    double fmax_hz = 8000.0;
    double log_floor = 1e-5;  // energies clamped here before the natural log

    int frame_rate_hz(int sample_rate) const { return sample_rate / hop_samples; }
    // T = 1 + floor((N - win) / hop); clips shorter than one window are an error.
    std::size_t frame_count(std::size_t n_samples) const;
    std::string config_id() const;
};

struct MelSpectrogram {
    Mat frames;  // T x B log-mel energies
    int frame_rate_hz = 100;
    std::string config_id;

    std::size_t frame_count() const { return static_cast<std::size_t>(frames.rows()); }
    int bin_count() const { return static_cast<int>(frames.cols()); }
};

struct SemanticTokenSeq {
    std::vector<int> ids;
    int token_rate_hz = 50;

    std::size_t size() const { return ids.size(); }
};

struct SpeakerEmbedding {
    Vec v;  // unit Euclidean norm
};

struct TextTokenSeq {
    std::vector<int> ids;
};

struct Codebook {
    Mat centroids;  // V_s x B
    uint64_t seed = 0;
    int iterations = 0;
    std::vector<double> inertia_log;  // quantization error per k-means iteration

    int size() const { return static_cast<int>(centroids.rows()); }
};

// Triangular mel filterbank, n_bins x (n_fft/2 + 1).
Mat mel_filterbank(const MelConfig& cfg, int sample_rate);

MelSpectrogram mel(const AudioClip& clip, const MelConfig& cfg = {});

// Seeded Lloyd k-means over mel frames; initial centroids are distinct random
// frames. Deterministic under seed.
Codebook fit_codebook(const std::vector<MelSpectrogram>& mels, int v_s, uint64_t seed,
                      int iterations = 30);

// Averages each block of `downsample` frames and assigns the nearest centroid
// (Euclidean; ties to the lowest index). The trailing partial block, if any,
// is averaged over its remaining frames.
SemanticTokenSeq tokenize_speech(const MelSpectrogram& m, const Codebook& cb, int downsample = 2);

// Nearest centroid per frame (no downsampling); used by diagnostics.
std::vector<int> quantize_frames(const MelSpectrogram& m, const Codebook& cb);

// Unit-normalized time-mean of the log-mel frames.
SpeakerEmbedding speaker_embed(const MelSpectrogram& m);

double cosine(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

// Character vocabulary: letters, digits, space, apostrophe, UNK.
constexpr int kTextUnkId = 38;
constexpr int kTextVocabSize = 39;

TextTokenSeq encode_text(const std::string& text);
std::string decode_text(const TextTokenSeq& seq);
// Lowercases and maps out-of-vocabulary characters to UNK-representable form.
std::string normalize_text(const std::string& text);

void save_codebook(const std::string& path, const Codebook& cb);
Codebook load_codebook(const std::string& path);

}  // namespace spedit
