#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spedit/nn.hpp"
#include "spedit/sequencer.hpp"

namespace spedit {

struct LMConfig {
    int layers = 4;
    int width = 128;
    int heads = 4;
    int ff_width = 512;
    int max_len = 2048;
    int max_text_pos = 512;    // per-segment position table sizes
    int max_speech_pos = 1024;
    int spk_dim = 80;
    VocabLayout vocab;
    uint64_t seed = 0;

    void validate() const;
};

// Decoder-only transformer over the unified vocabulary. Pre-LN blocks with
// learned token, segment-type, and per-segment position embeddings; the
// speaker vector is projected into model width at its slot. The output head
// is zero-initialized, so the untrained model is exactly uniform.
class EditorLM {
public:
    explicit EditorLM(const LMConfig& cfg);

    const LMConfig& config() const { return cfg_; }
    std::vector<nn::Parameter*> parameters();
    std::size_t parameter_count();

    // Graph-building forward; returns raw logits (T x V).
    nn::Tensor forward(const TokenSequence& seq, const SpeakerEmbedding& spk);
    // Per-position next-token log-probabilities (row t predicts position t+1).
    nn::Mat forward_logprobs(const TokenSequence& seq, const SpeakerEmbedding& spk);
    // Graph-building training loss for one example (Y+1 supervised positions).
    nn::Tensor loss(const LMTrainExample& ex);

private:
    LMConfig cfg_;
    std::vector<nn::Parameter> params_;
    nn::Parameter& p(const std::string& name);
};

// -(1/(Y+1)) * sum of masked next-token log-probabilities; logprobs row t
// scores the token at position t+1.
double lm_loss_value(const nn::Mat& logprobs, const LMTrainExample& ex);

// Fraction of supervised positions whose teacher-forced argmax matches.
double masked_accuracy(const nn::Mat& logprobs, const LMTrainExample& ex);

struct DecodeStrategy {
    enum class Kind { Greedy, TopK };
    Kind kind = Kind::TopK;
    int k = 10;
    double temperature = 1.0;

    static DecodeStrategy greedy() { return {Kind::Greedy, 0, 1.0}; }
};

struct DecodeResult {
    SemanticTokenSeq tokens;
    bool saw_end = false;  // false when max_new was exhausted without the end marker
};

// Autoregressive decoding from the prompt; sampling restricted to semantic
// ids plus the end marker.
DecodeResult decode(const InferencePrompt& prompt, EditorLM& lm, const DecodeStrategy& strategy,
                    int max_new, uint64_t seed);

struct TrainHyper {
    double lr = 1e-3;
    int warmup_steps = 50;
    int epochs = 300;
    int batch = 4;
    double stop_accuracy = 1.01;  // > 1 disables early stopping
    int stop_extra_epochs = 0;    // extra epochs after the accuracy target is hit
};

struct TrainLogRow {
    int step;
    double loss;
    double lr;
};

struct LMTrainResult {
    int steps = 0;
    int epochs_run = 0;
    double final_masked_accuracy = 0.0;
    std::vector<TrainLogRow> log;
};

// Adam training over the examples, deterministic under seed. The model is
// updated in place.
LMTrainResult train_lm(EditorLM& lm, const std::vector<LMTrainExample>& examples,
                       const TrainHyper& hyper, uint64_t seed);

void save_lm_checkpoint(const std::string& path, EditorLM& lm, int step);
// Constructs the model from the checkpoint's embedded config.
EditorLM load_lm_checkpoint(const std::string& path);

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log);

}  // namespace spedit
