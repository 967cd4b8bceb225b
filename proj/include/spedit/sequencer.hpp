#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spedit/features.hpp"

namespace spedit {

// Unified id space: [specials | text ids | semantic-token ids].
struct VocabLayout {
    int v_s = 64;  // semantic codebook size

    static constexpr int kStart = 0;    // sequence start marker
    static constexpr int kTurn = 1;     // conditioning/generation boundary
    static constexpr int kEnd = 2;      // end-of-sequence marker
    static constexpr int kSpkSlot = 3;  // placeholder id at the speaker position

    static constexpr int text_offset() { return 4; }
    int sem_offset() const { return text_offset() + kTextVocabSize; }
    int size() const { return sem_offset() + v_s; }

    int text_id(int char_id) const { return text_offset() + char_id; }
    int sem_id(int token) const { return sem_offset() + token; }
    bool is_sem(int id) const { return id >= sem_offset() && id < size(); }
    int sem_token(int id) const { return id - sem_offset(); }

    bool operator==(const VocabLayout&) const = default;
};

enum class Segment : int {
    MarkerStart = 0,
    Speaker = 1,
    Text = 2,
    OrigSpeech = 3,
    MarkerTurn = 4,
    TgtSpeech = 5,
    MarkerEnd = 6,
};

// A sequence in the unified id space with per-position segment labels and
// within-segment positions. Text positions count backwards from the segment
// end so the target text occupies the same position ids whether or not an
// original-text prefix is present.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<Segment> segments;
    std::vector<int> positions;

    std::size_t size() const { return ids.size(); }
};

struct LMTrainExample {
    TokenSequence seq;
    std::vector<char> loss_mask;  // marks positions whose ids are supervised
    SpeakerEmbedding speaker;
    int text_len = 0;       // U
    int orig_tokens = 0;    // X
    int target_tokens = 0;  // Y
};

enum class InferenceMode { ZeroShot, OneShot };

struct InferencePrompt {
    TokenSequence seq;  // ends with the turn marker
    SpeakerEmbedding speaker;
    InferenceMode mode = InferenceMode::ZeroShot;
};

struct PairFeatures {
    SpeakerEmbedding speaker;
    TextTokenSeq target_text;
    SemanticTokenSeq orig_tokens;
    SemanticTokenSeq target_tokens;
};

// Training format: [start, speaker, target text, original speech tokens,
// turn, target speech tokens, end]; the original text is never part of it.
LMTrainExample build_training_sequence(const PairFeatures& feats, const VocabLayout& layout);

// Inference prefix: one-shot concatenates original and target text; zero-shot
// carries the target text only.
InferencePrompt build_inference_prompt(const std::optional<std::string>& original_text,
                                       const std::string& target_text,
                                       const SemanticTokenSeq& orig_tokens,
                                       const SpeakerEmbedding& speaker, InferenceMode mode,
                                       const VocabLayout& layout);

std::string serialize_example(const LMTrainExample& ex);
LMTrainExample deserialize_example(const std::string& text);

}  // namespace spedit
