#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spedit/dataset.hpp"
#include "spedit/flow.hpp"
#include "spedit/lm.hpp"
#include "spedit/metrics.hpp"

namespace spedit {

struct FeaturizerConfig {
    MelConfig mel;
    int v_s = 64;
    int downsample = 2;
    int codebook_iters = 30;
};

struct FeaturizedPair {
    ManifestEntry entry;
    MelSpectrogram orig_mel, tgt_mel;
    PairFeatures lm;  // speaker from the target side (training convention)
};

// Codebook fit over the target-side mels of the manifest.
Codebook fit_corpus_codebook(const std::vector<ManifestEntry>& entries,
                             const std::string& root_dir, const FeaturizerConfig& cfg,
                             uint64_t seed);

std::vector<FeaturizedPair> featurize_manifest(const std::vector<ManifestEntry>& entries,
                                               const std::string& root_dir, const Codebook& cb,
                                               const FeaturizerConfig& cfg);

std::vector<LMTrainExample> to_lm_examples(const std::vector<FeaturizedPair>& pairs,
                                           const VocabLayout& layout);

// Robustness augmentation: extra training sequences whose text carries a
// decoy sentence prefix (the target text with a few random word edits, words
// drawn from the corpus vocabulary) while both speech sides stay unchanged.
// The decoy provides no valid alignment signal, so the model learns to read
// the trailing text — the invariance one-shot prompts (original ++ target
// text) rely on.
std::vector<LMTrainExample> augment_text_prefix(const std::vector<FeaturizedPair>& pairs,
                                                const VocabLayout& layout, int copies,
                                                uint64_t seed);

// Computes mel normalization stats into cfg and builds normalized flow
// examples.
std::vector<FlowExample> to_flow_examples(const std::vector<FeaturizedPair>& pairs,
                                          FlowConfig& cfg);

struct EditRequest {
    std::string original_wav;
    std::optional<std::string> original_text;
    std::string target_text;
    InferenceMode mode = InferenceMode::ZeroShot;
    DecodeStrategy strategy;
    int max_new = 1024;
    uint64_t seed = 0;
};

struct EditResult {
    SemanticTokenSeq decoded_tokens;
    bool saw_end = false;
    MelSpectrogram edited_mel;  // Y region, denormalized log-mels
};

EditResult run_edit(const EditRequest& req, EditorLM& lm, FlowModel& flow, const Codebook& cb,
                    const FeaturizerConfig& feat_cfg);

// Simple binary mel container.
void save_mel(const std::string& path, const MelSpectrogram& m);
MelSpectrogram load_mel(const std::string& path);

struct EvalPairSpec {
    std::string id;
    std::string ref_wav, ref_text;
    std::string hyp_wav, hyp_text;
    // Needed for --replace / region MCD:
    std::string orig_wav, orig_ali, tgt_ali;
};

std::vector<EvalPairSpec> read_eval_pairs(const std::string& path);

struct EvalOptions {
    bool replace = false;
    double fade_ms = 20.0;
    MelConfig mel;
    std::map<std::string, std::pair<std::string, std::string>> score_files;  // name -> (gen, gt)
};

EvalReport evaluate_pairs(const std::vector<EvalPairSpec>& pairs, const std::string& root_dir,
                          const EvalOptions& opts);

struct AblationRow {
    std::string method;
    EvalReport report;
};

// Comparison table over system variants. MOS-predictor columns read from the
// report's external score maps and print NA when a predictor was not run.
std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace spedit
