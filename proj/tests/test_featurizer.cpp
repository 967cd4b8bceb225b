#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <set>

#include "spedit/alignment.hpp"
#include "spedit/errors.hpp"
#include "spedit/features.hpp"

using namespace spedit;
namespace fs = std::filesystem;

namespace {

AudioClip tone(double freq_hz, double dur_s, double amp = 0.3, int rate = 16000) {
    AudioClip c;
    c.sample_rate = rate;
    std::size_t n = static_cast<std::size_t>(dur_s * rate);
    for (std::size_t i = 0; i < n; ++i)
        c.samples.push_back(amp * std::sin(2.0 * std::numbers::pi * freq_hz * i / rate));
    return c;
}

}  // namespace

TEST_CASE("frame count formula") {
    MelConfig cfg;
    // T = 1 + floor((N - win) / hop), win 400 hop 160.
    CHECK(cfg.frame_count(400) == 1);
    CHECK(cfg.frame_count(559) == 1);
    CHECK(cfg.frame_count(560) == 2);
    CHECK(cfg.frame_count(16000) == 98);
    CHECK_THROWS_AS(cfg.frame_count(399), RangeError);
}

TEST_CASE("mel spectrogram shape, finiteness, floor") {
    AudioClip c = tone(1000.0, 0.5);
    MelConfig cfg;
    MelSpectrogram m = mel(c, cfg);
    CHECK(m.frame_count() == cfg.frame_count(c.samples.size()));
    CHECK(m.bin_count() == 80);
    CHECK(m.frame_rate_hz == 100);
    CHECK(m.frames.allFinite());
    // Natural-log floor: no value below ln(1e-5).
    CHECK(m.frames.minCoeff() >= std::log(1e-5) - 1e-12);
    CHECK(m.config_id == cfg.config_id());
}

TEST_CASE("pure tones peak in distinct, frequency-ordered mel bins") {
    MelConfig cfg;
    std::vector<int> peaks;
    for (double f : {500.0, 1500.0, 3000.0}) {
        MelSpectrogram m = mel(tone(f, 0.3), cfg);
        Eigen::VectorXd mean = m.frames.colwise().mean();
        int arg = 0;
        mean.maxCoeff(&arg);
        peaks.push_back(arg);
    }
    CHECK(peaks[0] < peaks[1]);
    CHECK(peaks[1] < peaks[2]);
}

TEST_CASE("silence maps to the log floor exactly") {
    AudioClip c;
    c.samples.assign(16000, 0.0);
    MelSpectrogram m = mel(c);
    CHECK(m.frames.maxCoeff() == doctest::Approx(std::log(1e-5)));
    CHECK(m.frames.minCoeff() == doctest::Approx(std::log(1e-5)));
}

TEST_CASE("mel filterbank rows are nonnegative and cover the band") {
    MelConfig cfg;
    Mat fb = mel_filterbank(cfg, 16000);
    CHECK(fb.rows() == 80);
    CHECK(fb.cols() == 257);
    CHECK(fb.minCoeff() >= 0.0);
    for (int b = 0; b < fb.rows(); ++b) CHECK(fb.row(b).sum() > 0.0);
}

TEST_CASE("codebook fit is deterministic and its inertia never increases") {
    std::vector<MelSpectrogram> mels;
    for (double f : {500.0, 1000.0, 1500.0, 2000.0}) mels.push_back(mel(tone(f, 0.25)));
    Codebook cb1 = fit_codebook(mels, 8, 123, 20);
    Codebook cb2 = fit_codebook(mels, 8, 123, 20);
    CHECK(cb1.centroids == cb2.centroids);
    CHECK(cb1.size() == 8);
    for (std::size_t i = 1; i < cb1.inertia_log.size(); ++i)
        CHECK(cb1.inertia_log[i] <= cb1.inertia_log[i - 1] + 1e-9);
}

TEST_CASE("tokenize_speech emits ceil(T / r) tokens in range") {
    std::vector<MelSpectrogram> mels = {mel(tone(700.0, 0.4))};
    Codebook cb = fit_codebook(mels, 4, 9, 10);
    for (int r : {1, 2, 3}) {
        SemanticTokenSeq seq = tokenize_speech(mels[0], cb, r);
        std::size_t T = mels[0].frame_count();
        CHECK(seq.size() == (T + r - 1) / r);
        CHECK(seq.token_rate_hz == mels[0].frame_rate_hz / r);
        for (int id : seq.ids) {
            CHECK(id >= 0);
            CHECK(id < cb.size());
        }
    }
}

TEST_CASE("distinct tones quantize to distinct stable tokens") {
    // Codebook large enough for the tone set: each tone's frames should fall
    // into one cluster, and clusters should not collide across tones.
    std::vector<double> freqs = {500.0, 1250.0, 2000.0, 2750.0};
    std::vector<MelSpectrogram> mels;
    for (double f : freqs) mels.push_back(mel(tone(f, 0.3)));
    Codebook cb = fit_codebook(mels, 8, 77, 30);
    std::set<int> dominant;
    for (const auto& m : mels) {
        auto ids = quantize_frames(m, cb);
        std::map<int, int> hist;
        for (int id : ids) ++hist[id];
        auto best = std::max_element(hist.begin(), hist.end(),
                                     [](auto& a, auto& b) { return a.second < b.second; });
        CHECK(best->second >= static_cast<int>(ids.size() * 95 / 100));
        dominant.insert(best->first);
    }
    CHECK(dominant.size() == freqs.size());
}

TEST_CASE("speaker embedding is unit norm; cosine identities") {
    MelSpectrogram m = mel(tone(900.0, 0.3));
    SpeakerEmbedding e = speaker_embed(m);
    CHECK(e.v.norm() == doctest::Approx(1.0));
    CHECK(cosine(e, e) == doctest::Approx(1.0));
    SpeakerEmbedding neg{-e.v};
    CHECK(cosine(e, neg) == doctest::Approx(-1.0));
}

TEST_CASE("text normalization and round-trip") {
    CHECK(normalize_text("  Hello,  WORLD!! ") == "hello world");
    CHECK(normalize_text("don't") == "don't");
    TextTokenSeq seq = encode_text("abc z 019'");
    CHECK(decode_text(seq) == "abc z 019'");
    // All ids inside the declared vocabulary.
    for (int id : seq.ids) {
        CHECK(id >= 0);
        CHECK(id < kTextVocabSize);
    }
}

TEST_CASE("out-of-vocabulary characters map to the UNK id") {
    TextTokenSeq seq = encode_text("a\xC3\xA9b");  // a, e-acute, b
    bool has_unk = false;
    for (int id : seq.ids) has_unk |= (id == kTextUnkId);
    CHECK(has_unk);
}

TEST_CASE("codebook JSON round-trip") {
    std::vector<MelSpectrogram> mels = {mel(tone(600.0, 0.25)), mel(tone(1800.0, 0.25))};
    Codebook cb = fit_codebook(mels, 4, 55, 15);
    auto p = (fs::temp_directory_path() / "spedit_cb.json").string();
    save_codebook(p, cb);
    Codebook back = load_codebook(p);
    CHECK(back.centroids == cb.centroids);
    CHECK(back.seed == cb.seed);
    CHECK(back.iterations == cb.iterations);
}
