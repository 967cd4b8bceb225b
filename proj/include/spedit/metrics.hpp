#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spedit/features.hpp"
#include "spedit/postprocess.hpp"

namespace spedit {

// K = 10 sqrt(2) / ln 10, the mel-cepstral distortion scale factor.
double mcd_scale_factor();

// Word error rate in percent. Texts are normalized (lowercase, punctuation
// stripped, whitespace collapsed). An empty reference with a non-empty
// hypothesis scores 100 * |hyp| by convention.
double wer(const std::string& ref_text, const std::string& hyp_text);

// Orthonormal DCT-II of each log-mel frame; coefficients 1..C when c0 is
// excluded (the default), 0..C-1 otherwise.
Mat mfcc(const MelSpectrogram& m, int n_coeffs = 13, bool exclude_c0 = true);

// Inverse of the orthonormal DCT-II truncation (for diagnostics/tests):
// reconstructs T x B log-mels from coefficients 0..C-1.
Mat idct_frames(const Mat& coeffs, int n_bins);

// MCD in dB over a boundary-anchored DTW alignment of the MFCC sequences;
// step set {(1,0),(0,1),(1,1)}, ties resolved toward the diagonal.
double mcd_dtw(const MelSpectrogram& ref, const MelSpectrogram& hyp);

double spk_sim(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

// Mean absolute per-utterance difference between two {"id","score"} JSONL
// score files; throws on id mismatch.
double mae_mos(const std::string& gen_scores_path, const std::string& gt_scores_path);
double mae_mos_maps(const std::map<std::string, double>& gen,
                    const std::map<std::string, double>& gt);
std::map<std::string, double> read_score_file(const std::string& path);

// Duration-weighted mean of per-region-pair MCDs (each pair DTW-aligned
// independently); weights are reference-side region durations.
double region_mcd(const AudioClip& ref_wav, const AudioClip& hyp_wav,
                  const RegionPairList& regions, const MelConfig& mel_cfg = {});

struct UttEval {
    std::string id;
    double wer = 0.0;
    double spk_sim = 0.0;
    double mcd = 0.0;
    std::optional<double> region_mcd;
};

struct EvalReport {
    std::vector<UttEval> utts;
    double mean_wer = 0.0;
    double mean_spk_sim = 0.0;
    double mean_mcd = 0.0;
    std::optional<double> mean_region_mcd;
    std::map<std::string, double> mae_mos;  // per external predictor name
    int count = 0;

    std::string to_json() const;
    std::string to_table() const;
};

}  // namespace spedit
