#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "spedit/dataset.hpp"
#include "spedit/errors.hpp"

using namespace spedit;
namespace fs = std::filesystem;

namespace {

// Brute-force reference edit distance (unit costs, substitution allowed).
int levenshtein_words(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return d[a.size()][b.size()];
}

std::vector<std::string> random_words(std::mt19937_64& rng, int max_len, int vocab) {
    std::uniform_int_distribution<int> len(0, max_len), w(0, vocab - 1);
    std::vector<std::string> out;
    int n = len(rng);
    for (int i = 0; i < n; ++i) out.push_back("w" + std::to_string(w(rng)));
    return out;
}

AlignedUtterance toy_utterance(int n_words) {
    SyntheticCorpusConfig cfg;
    cfg.n_utts = 1;
    cfg.min_words = n_words;
    cfg.max_words = n_words;
    return generate_synthetic_corpus(cfg, 99)[0];
}

}  // namespace

TEST_CASE("edit script cost matches the brute-force minimum on random pairs") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        auto a = random_words(rng, 6, 4);
        auto b = random_words(rng, 6, 4);
        EditScript s = compute_edit_script(a, b);
        CHECK(s.cost() == levenshtein_words(a, b));
        CHECK(replay_script(s, a, b) == b);
    }
}

TEST_CASE("edit script hand oracles") {
    // identical sequences -> all Keep, cost 0.
    EditScript s = compute_edit_script({"a", "b"}, {"a", "b"});
    CHECK(s.cost() == 0);
    CHECK(s.is_identity());
    REQUIRE(s.ops.size() == 2);
    CHECK(s.ops[0] == EditOp{EditOpType::Keep, 0, 0});

    // single substitution in the middle.
    s = compute_edit_script({"a", "b", "c"}, {"a", "x", "c"});
    CHECK(s.cost() == 1);
    REQUIRE(s.ops.size() == 3);
    CHECK(s.ops[1] == EditOp{EditOpType::Substitute, 1, 1});
    CHECK(s.edit_run_count() == 1);

    // pure insertion between kept words.
    s = compute_edit_script({"a", "c"}, {"a", "b", "c"});
    CHECK(s.cost() == 1);
    CHECK(s.ops[1] == EditOp{EditOpType::Insert, -1, 1});

    // deletion of a prefix word.
    s = compute_edit_script({"x", "a"}, {"a"});
    CHECK(s.cost() == 1);
    CHECK(s.ops[0].type == EditOpType::Delete);

    // Two separated edits -> two runs.
    s = compute_edit_script({"a", "b", "c", "d", "e"}, {"a", "x", "c", "y", "e"});
    CHECK(s.edit_run_count() == 2);
}

TEST_CASE("invert_script swaps roles exactly") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_words(rng, 6, 4);
        auto b = random_words(rng, 6, 4);
        EditScript s = compute_edit_script(a, b);
        EditScript inv = invert_script(s);
        CHECK(inv.cost() == s.cost());
        CHECK(replay_script(inv, b, a) == a);
    }
}

TEST_CASE("script_to_spans maps runs onto original time") {
    AlignedUtterance u = toy_utterance(5);
    // Substitute word 2: span carries that word's interval.
    auto tgt = u.words;
    tgt[2] = "zz";
    EditScript s = compute_edit_script(u.words, tgt);
    EditSpanList spans = script_to_spans(s, u);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].orig_words == WordRange{2, 3});
    CHECK(spans[0].tgt_words == WordRange{2, 3});
    CHECK(spans[0].orig_time.start_s == doctest::Approx(u.intervals[2].start_s));
    CHECK(spans[0].orig_time.end_s == doctest::Approx(u.intervals[2].end_s));

    // Pure insertion after word 1: zero-length interval between words 1 and 2.
    tgt = u.words;
    tgt.insert(tgt.begin() + 2, "zz");
    s = compute_edit_script(u.words, tgt);
    spans = script_to_spans(s, u);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].orig_words.empty());
    CHECK(spans[0].orig_time.duration() == doctest::Approx(0.0));
    CHECK(spans[0].orig_time.start_s >= u.intervals[1].end_s - 1e-12);
    CHECK(spans[0].orig_time.start_s <= u.intervals[2].start_s + 1e-12);
}

TEST_CASE("sample_spans respects margins, gaps, and span sizes") {
    AlignedUtterance u = toy_utterance(10);
    SpanSamplerConfig cfg;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        auto spans = sample_spans(u, 2, cfg, seed);
        REQUIRE(spans.size() == 2);
        CHECK(spans[0].begin >= cfg.min_margin_words);
        CHECK(spans[1].end <= static_cast<int>(u.word_count()) - cfg.min_margin_words);
        CHECK(spans[1].begin - spans[0].end >= cfg.min_gap_words);
        for (const auto& s : spans) {
            CHECK(s.size() >= cfg.min_span_words);
            CHECK(s.size() <= cfg.max_span_words);
        }
    }
    // A 3-word utterance cannot host 2 spans with margins and a gap.
    CHECK_THROWS_AS(sample_spans(toy_utterance(3), 2, cfg, 0), InfeasibleError);
}

TEST_CASE("remove_word_ranges shifts alignments sample-exactly") {
    AlignedUtterance u = toy_utterance(6);
    auto cut = remove_word_ranges(u, {{2, 4}});
    REQUIRE(cut.word_count() == 4);
    CHECK(cut.words == std::vector<std::string>{u.words[0], u.words[1], u.words[4], u.words[5]});
    CHECK_NOTHROW(validate_utterance(cut));
    // Audio shrinks by exactly the removed sample count.
    auto [lo, hi] = interval_to_samples({u.intervals[2].start_s, u.intervals[3].end_s},
                                        u.audio.sample_rate);
    CHECK(cut.audio.samples.size() == u.audio.samples.size() - (hi - lo));
    // The surviving tail audio is bitwise-identical to the original tail.
    auto [tlo, thi] = interval_to_samples(cut.intervals[2], cut.audio.sample_rate);
    auto [olo, ohi] = interval_to_samples(u.intervals[4], u.audio.sample_rate);
    REQUIRE(thi - tlo == ohi - olo);
    for (std::size_t k = 0; k < thi - tlo; ++k)
        CHECK(cut.audio.samples[tlo + k] == u.audio.samples[olo + k]);
}

TEST_CASE("insertion/deletion pairs are exact duals") {
    AlignedUtterance u = toy_utterance(7);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto spans = sample_spans(u, 1, {}, seed);
        EditPair ins = build_insertion_pair(u, spans, seed);
        EditPair del = build_deletion_pair(u, spans, seed);
        CHECK(ins.task == EditTask::Insert);
        CHECK(del.task == EditTask::Delete);
        CHECK(ins.original.audio.samples == del.target.audio.samples);
        CHECK(ins.target.audio.samples == del.original.audio.samples);
        CHECK(ins.original.words == del.target.words);
        CHECK(ins.target.words == del.original.words);
        CHECK_NOTHROW(validate_pair(ins));
        CHECK_NOTHROW(validate_pair(del));
    }
}

TEST_CASE("substitution and multi-edit pairs validate and replay") {
    AlignedUtterance u = toy_utterance(9);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto spans = sample_spans(u, 1, {.min_span_words = 2, .max_span_words = 4}, seed);
        EditPair sub = build_substitution_pair(u, spans[0], seed);
        CHECK(sub.task == EditTask::Substitute);
        CHECK_NOTHROW(validate_pair(sub));
        CHECK(replay_script(sub.script, sub.original.words, sub.target.words) ==
              sub.target.words);

        auto spans2 = sample_spans(u, 2, {.min_span_words = 2, .max_span_words = 3}, seed);
        EditPair multi = build_multiedit_pair(u, spans2, seed);
        CHECK(multi.task == EditTask::Multi);
        CHECK(multi.script.edit_run_count() >= 2);
        CHECK_NOTHROW(validate_pair(multi));
    }
}

TEST_CASE("build_manifest writes a readable, deterministic manifest") {
    SyntheticCorpusConfig ccfg;
    ccfg.n_utts = 8;
    ccfg.min_words = 5;
    ccfg.max_words = 7;
    auto corpus = generate_synthetic_corpus(ccfg, 7);
    std::map<EditTask, double> mix = {{EditTask::Insert, 0.25},
                                      {EditTask::Delete, 0.25},
                                      {EditTask::Substitute, 0.25},
                                      {EditTask::Multi, 0.25}};
    auto dir1 = (fs::temp_directory_path() / "spedit_ds1").string();
    auto dir2 = (fs::temp_directory_path() / "spedit_ds2").string();
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    SpanSamplerConfig scfg;
    scfg.max_span_words = 2;
    auto sum1 = build_manifest(corpus, mix, scfg, 31, dir1);
    auto sum2 = build_manifest(corpus, mix, scfg, 31, dir2);
    CHECK(sum1.total + sum1.skipped == 8);
    CHECK(sum1.task_counts == sum2.task_counts);

    auto entries = read_manifest(sum1.manifest_path);
    REQUIRE(static_cast<int>(entries.size()) == sum1.total);
    for (const auto& e : entries) {
        CHECK(!e.id.empty());
        CHECK(fs::exists(fs::path(dir1) / e.orig_wav));
        CHECK(fs::exists(fs::path(dir1) / e.tgt_wav));
        // Transcripts replay through a fresh edit script computation.
        auto ow = split_words(e.orig_text);
        auto tw = split_words(e.tgt_text);
        EditScript s = compute_edit_script(ow, tw);
        CHECK(replay_script(s, ow, tw) == tw);
        CHECK(!s.is_identity());
    }

    // Byte-identical manifests across reruns with the same seed.
    std::ifstream f1(sum1.manifest_path), f2(sum2.manifest_path);
    std::string m1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string m2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(m1 == m2);
}

TEST_CASE("task names round-trip") {
    for (EditTask t : {EditTask::Insert, EditTask::Delete, EditTask::Substitute, EditTask::Multi})
        CHECK(task_from_name(task_name(t)) == t);
    CHECK_THROWS_AS(task_from_name("bogus"), ConfigError);
}
