#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spedit/errors.hpp"
#include "spedit/sequencer.hpp"

using namespace spedit;

namespace {

PairFeatures toy_features() {
    PairFeatures f;
    f.speaker.v = Vec::Ones(4) / 2.0;
    f.target_text = encode_text("a c");
    f.orig_tokens = {{5, 6, 7}, 50};
    f.target_tokens = {{5, 9, 7, 8}, 50};
    return f;
}

}  // namespace

TEST_CASE("vocab layout partitions ids") {
    VocabLayout layout;
    layout.v_s = 64;
    CHECK(layout.text_offset() == 4);
    CHECK(layout.sem_offset() == 4 + kTextVocabSize);
    CHECK(layout.size() == 4 + kTextVocabSize + 64);
    CHECK(layout.is_sem(layout.sem_id(0)));
    CHECK(layout.is_sem(layout.sem_id(63)));
    CHECK(!layout.is_sem(layout.text_id(0)));
    CHECK(!layout.is_sem(VocabLayout::kEnd));
    CHECK(layout.sem_token(layout.sem_id(17)) == 17);
}

TEST_CASE("training sequence layout: markers, segments, counted loss positions") {
    VocabLayout layout;
    layout.v_s = 16;
    PairFeatures f = toy_features();
    LMTrainExample ex = build_training_sequence(f, layout);

    // [start, spk, 3 text chars, 3 orig tokens, turn, 4 tgt tokens, end]
    std::size_t expect = 1 + 1 + 3 + 3 + 1 + 4 + 1;
    REQUIRE(ex.seq.size() == expect);
    CHECK(ex.seq.ids.front() == VocabLayout::kStart);
    CHECK(ex.seq.ids[1] == VocabLayout::kSpkSlot);
    CHECK(ex.seq.ids[2 + 3 + 3] == VocabLayout::kTurn);
    CHECK(ex.seq.ids.back() == VocabLayout::kEnd);
    CHECK(ex.seq.segments[2] == Segment::Text);
    CHECK(ex.seq.segments[5] == Segment::OrigSpeech);
    CHECK(ex.seq.segments[expect - 2] == Segment::TgtSpeech);

    // Supervision covers the target speech tokens plus the end marker: Y + 1.
    int supervised = 0;
    for (char m : ex.loss_mask) supervised += m;
    CHECK(supervised == ex.target_tokens + 1);
    for (std::size_t t = 0; t < ex.seq.size(); ++t) {
        bool is_tgt = ex.seq.segments[t] == Segment::TgtSpeech ||
                      ex.seq.segments[t] == Segment::MarkerEnd;
        CHECK(static_cast<bool>(ex.loss_mask[t]) == is_tgt);
    }
    CHECK(ex.text_len == 3);
    CHECK(ex.orig_tokens == 3);
    CHECK(ex.target_tokens == 4);
}

TEST_CASE("text positions count backwards from the segment end") {
    VocabLayout layout;
    layout.v_s = 16;
    LMTrainExample ex = build_training_sequence(toy_features(), layout);
    // Text "a c" = 3 chars at sequence offsets 2..4 with positions 2,1,0.
    CHECK(ex.seq.positions[2] == 2);
    CHECK(ex.seq.positions[3] == 1);
    CHECK(ex.seq.positions[4] == 0);
    // Speech positions count forward.
    CHECK(ex.seq.positions[5] == 0);
    CHECK(ex.seq.positions[6] == 1);
}

TEST_CASE("one-shot prompt concatenates texts without a separator") {
    VocabLayout layout;
    layout.v_s = 16;
    SemanticTokenSeq mu_x{{1, 2}, 50};
    SpeakerEmbedding spk{Vec::Ones(4) / 2.0};

    InferencePrompt zero = build_inference_prompt(std::nullopt, "a c", mu_x, spk,
                                                  InferenceMode::ZeroShot, layout);
    InferencePrompt one = build_inference_prompt(std::string("a b"), "a c", mu_x, spk,
                                                 InferenceMode::OneShot, layout);
    // tokens("a b") ++ tokens("a c"): 6 text ids, no separator.
    auto text_ids_of = [&](const InferencePrompt& p) {
        std::vector<int> out;
        for (std::size_t t = 0; t < p.seq.size(); ++t)
            if (p.seq.segments[t] == Segment::Text) out.push_back(p.seq.ids[t]);
        return out;
    };
    auto z = text_ids_of(zero), o = text_ids_of(one);
    REQUIRE(z.size() == 3);
    REQUIRE(o.size() == 6);
    std::vector<int> expected = {layout.text_id(encode_text("a b").ids[0]),
                                 layout.text_id(encode_text("a b").ids[1]),
                                 layout.text_id(encode_text("a b").ids[2])};
    CHECK(std::vector<int>(o.begin(), o.begin() + 3) == expected);
    CHECK(std::vector<int>(o.begin() + 3, o.end()) == z);
    CHECK(zero.seq.ids.back() == VocabLayout::kTurn);
    CHECK(one.seq.ids.back() == VocabLayout::kTurn);
}

TEST_CASE("target text occupies identical position ids in both modes") {
    VocabLayout layout;
    layout.v_s = 16;
    SemanticTokenSeq mu_x{{1, 2}, 50};
    SpeakerEmbedding spk{Vec::Ones(4) / 2.0};
    InferencePrompt zero = build_inference_prompt(std::nullopt, "a c", mu_x, spk,
                                                  InferenceMode::ZeroShot, layout);
    InferencePrompt one = build_inference_prompt(std::string("xy q"), "a c", mu_x, spk,
                                                 InferenceMode::OneShot, layout);
    auto tail_positions = [&](const InferencePrompt& p, int n) {
        std::vector<int> pos;
        for (std::size_t t = 0; t < p.seq.size(); ++t)
            if (p.seq.segments[t] == Segment::Text) pos.push_back(p.seq.positions[t]);
        return std::vector<int>(pos.end() - n, pos.end());
    };
    CHECK(tail_positions(zero, 3) == tail_positions(one, 3));
    CHECK(tail_positions(zero, 3) == std::vector<int>{2, 1, 0});
}

TEST_CASE("one-shot without original text is rejected") {
    VocabLayout layout;
    SemanticTokenSeq mu_x{{1}, 50};
    SpeakerEmbedding spk{Vec::Ones(4) / 2.0};
    CHECK_THROWS_AS(build_inference_prompt(std::nullopt, "a", mu_x, spk, InferenceMode::OneShot,
                                           layout),
                    ConfigError);
}

TEST_CASE("out-of-range semantic tokens are rejected") {
    VocabLayout layout;
    layout.v_s = 4;
    PairFeatures f = toy_features();  // token id 9 exceeds v_s = 4
    CHECK_THROWS_AS(build_training_sequence(f, layout), RangeError);
}

TEST_CASE("example serialization round-trips") {
    VocabLayout layout;
    layout.v_s = 16;
    LMTrainExample ex = build_training_sequence(toy_features(), layout);
    LMTrainExample back = deserialize_example(serialize_example(ex));
    CHECK(back.seq.ids == ex.seq.ids);
    CHECK(back.seq.segments == ex.seq.segments);
    CHECK(back.seq.positions == ex.seq.positions);
    CHECK(back.loss_mask == ex.loss_mask);
    CHECK(back.speaker.v == ex.speaker.v);
    CHECK(back.text_len == ex.text_len);
    CHECK_THROWS_AS(deserialize_example("{\"format\":\"other\"}"), SchemaError);
}
