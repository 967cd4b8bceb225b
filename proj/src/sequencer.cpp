#include "spedit/sequencer.hpp"

#include <json.hpp>

#include "spedit/errors.hpp"

namespace spedit {

namespace {

void push(TokenSequence& seq, int id, Segment seg, int pos) {
    seq.ids.push_back(id);
    seq.segments.push_back(seg);
    seq.positions.push_back(pos);
}

// Shared prefix [start, speaker, text..., orig speech..., turn].
TokenSequence build_prefix(const std::vector<int>& text_char_ids,
                           const SemanticTokenSeq& orig_tokens, const VocabLayout& layout) {
    TokenSequence seq;
    push(seq, VocabLayout::kStart, Segment::MarkerStart, 0);
    push(seq, VocabLayout::kSpkSlot, Segment::Speaker, 0);
    const int u = static_cast<int>(text_char_ids.size());
    for (int i = 0; i < u; ++i)
        push(seq, layout.text_id(text_char_ids[i]), Segment::Text, u - 1 - i);
    for (std::size_t i = 0; i < orig_tokens.ids.size(); ++i) {
        if (orig_tokens.ids[i] < 0 || orig_tokens.ids[i] >= layout.v_s)
            throw RangeError("semantic token outside codebook");
        push(seq, layout.sem_id(orig_tokens.ids[i]), Segment::OrigSpeech, static_cast<int>(i));
    }
    push(seq, VocabLayout::kTurn, Segment::MarkerTurn, 0);
    return seq;
}

}  // namespace

LMTrainExample build_training_sequence(const PairFeatures& feats, const VocabLayout& layout) {
    if (feats.orig_tokens.ids.empty() || feats.target_tokens.ids.empty())
        throw RangeError("training sequence requires non-empty speech token sequences");

    LMTrainExample ex;
    ex.seq = build_prefix(feats.target_text.ids, feats.orig_tokens, layout);
    for (std::size_t i = 0; i < feats.target_tokens.ids.size(); ++i) {
        if (feats.target_tokens.ids[i] < 0 || feats.target_tokens.ids[i] >= layout.v_s)
            throw RangeError("semantic token outside codebook");
        push(ex.seq, layout.sem_id(feats.target_tokens.ids[i]), Segment::TgtSpeech,
             static_cast<int>(i));
    }
    push(ex.seq, VocabLayout::kEnd, Segment::MarkerEnd, 0);

    ex.loss_mask.assign(ex.seq.size(), 0);
    for (std::size_t t = 0; t < ex.seq.size(); ++t)
        if (ex.seq.segments[t] == Segment::TgtSpeech || ex.seq.segments[t] == Segment::MarkerEnd)
            ex.loss_mask[t] = 1;

    ex.speaker = feats.speaker;
    ex.text_len = static_cast<int>(feats.target_text.ids.size());
    ex.orig_tokens = static_cast<int>(feats.orig_tokens.ids.size());
    ex.target_tokens = static_cast<int>(feats.target_tokens.ids.size());
    return ex;
}

InferencePrompt build_inference_prompt(const std::optional<std::string>& original_text,
                                       const std::string& target_text,
                                       const SemanticTokenSeq& orig_tokens,
                                       const SpeakerEmbedding& speaker, InferenceMode mode,
                                       const VocabLayout& layout) {
    if (mode == InferenceMode::OneShot && !original_text.has_value())
        throw ConfigError("one-shot inference requires the original text");

    std::vector<int> text_ids;
    if (mode == InferenceMode::OneShot) {
        // One-shot: the unified text is original ++ target with no separator;
        // the original speech tokens sit in their usual slot before the turn
        // marker as pre-generated context.
        auto orig = encode_text(*original_text);
        auto tgt = encode_text(target_text);
        text_ids = orig.ids;
        text_ids.insert(text_ids.end(), tgt.ids.begin(), tgt.ids.end());
    } else {
        text_ids = encode_text(target_text).ids;
    }

    InferencePrompt prompt;
    prompt.seq = build_prefix(text_ids, orig_tokens, layout);
    prompt.speaker = speaker;
    prompt.mode = mode;
    return prompt;
}

std::string serialize_example(const LMTrainExample& ex) {
    nlohmann::json j;
    j["format"] = "spedit-example-v1";
    j["ids"] = ex.seq.ids;
    j["segments"] = nlohmann::json::array();
    for (auto s : ex.seq.segments) j["segments"].push_back(static_cast<int>(s));
    j["positions"] = ex.seq.positions;
    j["loss_mask"] = nlohmann::json::array();
    for (char m : ex.loss_mask) j["loss_mask"].push_back(static_cast<int>(m));
    j["speaker"] = std::vector<double>(ex.speaker.v.data(), ex.speaker.v.data() + ex.speaker.v.size());
    j["text_len"] = ex.text_len;
    j["orig_tokens"] = ex.orig_tokens;
    j["target_tokens"] = ex.target_tokens;
    return j.dump();
}

LMTrainExample deserialize_example(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "spedit-example-v1")
        throw SchemaError("unknown example format");
    LMTrainExample ex;
    ex.seq.ids = j["ids"].get<std::vector<int>>();
    for (const auto& s : j["segments"]) ex.seq.segments.push_back(Segment(s.get<int>()));
    ex.seq.positions = j["positions"].get<std::vector<int>>();
    for (const auto& m : j["loss_mask"]) ex.loss_mask.push_back(static_cast<char>(m.get<int>()));
    auto v = j["speaker"].get<std::vector<double>>();
    ex.speaker.v = Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
    ex.text_len = j["text_len"].get<int>();
    ex.orig_tokens = j["orig_tokens"].get<int>();
    ex.target_tokens = j["target_tokens"].get<int>();
    return ex;
}

}  // namespace spedit
