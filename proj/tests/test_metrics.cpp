#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "spedit/errors.hpp"
#include "spedit/metrics.hpp"

using namespace spedit;
namespace fs = std::filesystem;

namespace {

// Reference WER via plain edit-distance DP over word vectors.
double wer_oracle(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    std::vector<std::vector<int>> d(ref.size() + 1, std::vector<int>(hyp.size() + 1));
    for (std::size_t i = 0; i <= ref.size(); ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= hyp.size(); ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= ref.size(); ++i)
        for (std::size_t j = 1; j <= hyp.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)});
    if (ref.empty()) return 100.0 * hyp.size();
    return 100.0 * d[ref.size()][hyp.size()] / ref.size();
}

std::string join(const std::vector<std::string>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? " " : "") + w[i];
    return s;
}

MelSpectrogram mel_of(const Mat& frames) {
    MelSpectrogram m;
    m.frames = frames;
    return m;
}

void write_scores(const std::string& path, const std::map<std::string, double>& scores) {
    std::ofstream f(path);
    for (const auto& [id, s] : scores) f << "{\"id\":\"" << id << "\",\"score\":" << s << "}\n";
}

}  // namespace

TEST_CASE("wer hand oracles") {
    CHECK(wer("a b c", "a b c") == doctest::Approx(0.0));
    // one substitution over three reference words.
    CHECK(wer("a b c", "a x c") == doctest::Approx(100.0 / 3));
    // deletion and insertion each cost one op.
    CHECK(wer("a b c", "a c") == doctest::Approx(100.0 / 3));
    CHECK(wer("a b", "a x b y") == doctest::Approx(100.0));
    // Normalization: case and punctuation are ignored.
    CHECK(wer("Hello, World!", "hello world") == doctest::Approx(0.0));
    // Empty reference convention.
    CHECK(wer("", "a b") == doctest::Approx(200.0));
    CHECK(wer("", "") == doctest::Approx(0.0));
}

TEST_CASE("wer matches the DP oracle on random word pairs") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> len(0, 8), wd(0, 3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> ref, hyp;
        int nr = len(rng), nh = len(rng);
        for (int i = 0; i < nr; ++i) ref.push_back("w" + std::to_string(wd(rng)));
        for (int i = 0; i < nh; ++i) hyp.push_back("w" + std::to_string(wd(rng)));
        CHECK(wer(join(ref), join(hyp)) == doctest::Approx(wer_oracle(ref, hyp)));
    }
}

TEST_CASE("mcd scale factor closed form") {
    CHECK(mcd_scale_factor() == doctest::Approx(10.0 * std::sqrt(2.0) / std::log(10.0)));
}

TEST_CASE("mfcc truncation round-trips through the inverse DCT") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    Mat frames(6, 16);
    for (Eigen::Index t = 0; t < 6; ++t)
        for (Eigen::Index b = 0; b < 16; ++b) frames(t, b) = g(rng);
    // Full coefficient set (including c0) reconstructs exactly: the DCT is
    // orthonormal.
    Mat coeffs = mfcc(mel_of(frames), 16, /*exclude_c0=*/false);
    Mat back = idct_frames(coeffs, 16);
    CHECK((back - frames).cwiseAbs().maxCoeff() < 1e-9);
    // Excluding c0 drops exactly one coefficient per frame.
    Mat no_c0 = mfcc(mel_of(frames), 13, /*exclude_c0=*/true);
    CHECK(no_c0.cols() == 13);
    Mat with_c0 = mfcc(mel_of(frames), 14, /*exclude_c0=*/false);
    CHECK((no_c0 - with_c0.rightCols(13)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mcd identities and closed forms") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    Mat frames(10, 80);
    for (Eigen::Index t = 0; t < 10; ++t)
        for (Eigen::Index b = 0; b < 80; ++b) frames(t, b) = g(rng);
    MelSpectrogram m = mel_of(frames);
    // Identical inputs -> 0.
    CHECK(mcd_dtw(m, m) == doctest::Approx(0.0));

    // Duplicating every frame leaves the DTW distance at 0.
    Mat dup(20, 80);
    for (Eigen::Index t = 0; t < 10; ++t) {
        dup.row(2 * t) = frames.row(t);
        dup.row(2 * t + 1) = frames.row(t);
    }
    CHECK(mcd_dtw(m, mel_of(dup)) == doctest::Approx(0.0));

    // single frames differing only in one cepstral coefficient by
    // delta: distance is K * |delta|. Build the frame difference in mel space
    // from the inverse DCT of a delta at coefficient 1.
    Mat c = Mat::Zero(1, 80);
    c(0, 1) = 0.375;
    Mat diff = idct_frames(c, 80);
    MelSpectrogram a = mel_of(Mat::Zero(1, 80));
    MelSpectrogram b = mel_of(diff);
    CHECK(std::abs(mcd_dtw(a, b) - mcd_scale_factor() * 0.375) < 1e-9);
}

TEST_CASE("mcd is symmetric and positive on different signals") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    Mat x(8, 80), y(12, 80);
    for (Eigen::Index t = 0; t < 8; ++t)
        for (Eigen::Index b = 0; b < 80; ++b) x(t, b) = g(rng);
    for (Eigen::Index t = 0; t < 12; ++t)
        for (Eigen::Index b = 0; b < 80; ++b) y(t, b) = g(rng);
    double ab = mcd_dtw(mel_of(x), mel_of(y));
    double ba = mcd_dtw(mel_of(y), mel_of(x));
    CHECK(ab > 0.0);
    CHECK(ab == doctest::Approx(ba));
}

TEST_CASE("spk_sim equals the embedding cosine") {
    SpeakerEmbedding a{Vec::Ones(8).normalized()};
    Vec w = Vec::Ones(8);
    w(0) = -1.0;
    SpeakerEmbedding b{w.normalized()};
    CHECK(spk_sim(a, a) == doctest::Approx(1.0));
    CHECK(spk_sim(a, b) == doctest::Approx(a.v.dot(b.v)));
}

TEST_CASE("mae_mos reads score files and validates ids") {
    auto dir = fs::temp_directory_path() / "spedit_scores";
    fs::create_directories(dir);
    write_scores((dir / "gen.jsonl").string(), {{"u1", 3.5}, {"u2", 4.0}});
    write_scores((dir / "gt.jsonl").string(), {{"u1", 4.0}, {"u2", 3.0}});
    // (0.5 + 1.0) / 2.
    CHECK(mae_mos((dir / "gen.jsonl").string(), (dir / "gt.jsonl").string()) ==
          doctest::Approx(0.75));
    write_scores((dir / "bad.jsonl").string(), {{"u1", 4.0}, {"u3", 3.0}});
    CHECK_THROWS_AS(mae_mos((dir / "gen.jsonl").string(), (dir / "bad.jsonl").string()),
                    CountMismatchError);
}

TEST_CASE("EvalReport serializes means and per-utterance rows") {
    EvalReport rep;
    rep.utts = {{"u1", 10.0, 0.9, 4.0, std::nullopt}, {"u2", 0.0, 1.0, 2.0, 0.5}};
    rep.mean_wer = 5.0;
    rep.mean_spk_sim = 0.95;
    rep.mean_mcd = 3.0;
    rep.mae_mos["MOSNet"] = 0.25;
    rep.count = 2;
    std::string j = rep.to_json();
    CHECK(j.find("\"wer\": 5.0") != std::string::npos);
    CHECK(j.find("mae_mos_MOSNet") != std::string::npos);
    std::string table = rep.to_table();
    CHECK(table.find("WER") != std::string::npos);
    CHECK(table.find("MAE_MOSNet") != std::string::npos);
}
