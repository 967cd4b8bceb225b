#include "spedit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "spedit/errors.hpp"

namespace spedit {

double mcd_scale_factor() { return 10.0 * std::sqrt(2.0) / std::log(10.0); }

double wer(const std::string& ref_text, const std::string& hyp_text) {
    auto ref = split_words(normalize_text(ref_text));
    auto hyp = split_words(normalize_text(hyp_text));
    if (ref.empty()) return 100.0 * static_cast<double>(hyp.size());

    const std::size_t n = ref.size(), m = hyp.size();
    std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                                d[i - 1][j] + 1, d[i][j - 1] + 1});
    return 100.0 * d[n][m] / static_cast<double>(n);
}

Mat mfcc(const MelSpectrogram& m, int n_coeffs, bool exclude_c0) {
    const int bins = m.bin_count();
    const int lo = exclude_c0 ? 1 : 0;
    if (n_coeffs < 1 || lo + n_coeffs > bins) throw RangeError("coefficient count out of range");

    // Orthonormal DCT-II basis rows.
    Mat basis(n_coeffs, bins);
    for (int k = 0; k < n_coeffs; ++k) {
        int order = lo + k;
        double norm = std::sqrt((order == 0 ? 1.0 : 2.0) / bins);
        for (int b = 0; b < bins; ++b)
            basis(k, b) = norm * std::cos(M_PI * order * (b + 0.5) / bins);
    }
    // Per-frame products keep each frame's cepstrum independent of how many
    // frames share the matrix (a blocked GEMM rounds differently by shape),
    // so identical frames always yield bitwise-identical coefficients.
    Mat out(m.frames.rows(), n_coeffs);
    for (Eigen::Index t = 0; t < m.frames.rows(); ++t)
        out.row(t) = m.frames.row(t) * basis.transpose();
    return out;
}

Mat idct_frames(const Mat& coeffs, int n_bins) {
    const int n_coeffs = static_cast<int>(coeffs.cols());
    Mat basis(n_coeffs, n_bins);
    for (int k = 0; k < n_coeffs; ++k) {
        double norm = std::sqrt((k == 0 ? 1.0 : 2.0) / n_bins);
        for (int b = 0; b < n_bins; ++b)
            basis(k, b) = norm * std::cos(M_PI * k * (b + 0.5) / n_bins);
    }
    return coeffs * basis;
}

namespace {

double mcd_dtw_mfcc(const Mat& c_ref, const Mat& c_hyp) {
    const auto n = c_ref.rows(), m = c_hyp.rows();
    if (n == 0 || m == 0) throw RangeError("empty input to DTW");

    Mat local(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            local(i, j) = (c_ref.row(i) - c_hyp.row(j)).norm();

    const double inf = std::numeric_limits<double>::infinity();
    Mat acc = Mat::Constant(n, m, inf);
    // 0 = diagonal, 1 = from above (ref advance), 2 = from left (hyp advance)
    std::vector<std::vector<int8_t>> from(n, std::vector<int8_t>(m, 0));
    acc(0, 0) = local(0, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == 0 && j == 0) continue;
            double best = inf;
            int8_t dir = 0;
            if (i > 0 && j > 0 && acc(i - 1, j - 1) <= best) {
                best = acc(i - 1, j - 1);
                dir = 0;
            }
            if (i > 0 && acc(i - 1, j) < best) {
                best = acc(i - 1, j);
                dir = 1;
            }
            if (j > 0 && acc(i, j - 1) < best) {
                best = acc(i, j - 1);
                dir = 2;
            }
            acc(i, j) = best + local(i, j);
            from[i][j] = dir;
        }
    }

    // Backtrack to average the local cost over the optimal path.
    Eigen::Index i = n - 1, j = m - 1;
    double sum = 0.0;
    std::size_t steps = 0;
    while (true) {
        sum += local(i, j);
        ++steps;
        if (i == 0 && j == 0) break;
        switch (i == 0 ? 2 : (j == 0 ? 1 : from[i][j])) {
            case 0: --i; --j; break;
            case 1: --i; break;
            default: --j; break;
        }
    }
    return mcd_scale_factor() * sum / static_cast<double>(steps);
}

}  // namespace

double mcd_dtw(const MelSpectrogram& ref, const MelSpectrogram& hyp) {
    if (ref.frame_count() == 0 || hyp.frame_count() == 0)
        throw RangeError("empty spectrogram in MCD");
    return mcd_dtw_mfcc(mfcc(ref), mfcc(hyp));
}

double spk_sim(const SpeakerEmbedding& a, const SpeakerEmbedding& b) { return cosine(a, b); }

std::map<std::string, double> read_score_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open score file: " + path);
    std::map<std::string, double> scores;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        scores[j.at("id").get<std::string>()] = j.at("score").get<double>();
    }
    return scores;
}

double mae_mos_maps(const std::map<std::string, double>& gen,
                    const std::map<std::string, double>& gt) {
    if (gen.size() != gt.size() || gen.empty())
        throw CountMismatchError("score files disagree on utterance set");
    double sum = 0.0;
    for (const auto& [id, score] : gen) {
        auto it = gt.find(id);
        if (it == gt.end()) throw CountMismatchError("utterance id missing: " + id);
        sum += std::abs(score - it->second);
    }
    return sum / static_cast<double>(gen.size());
}

double mae_mos(const std::string& gen_scores_path, const std::string& gt_scores_path) {
    return mae_mos_maps(read_score_file(gen_scores_path), read_score_file(gt_scores_path));
}

double region_mcd(const AudioClip& ref_wav, const AudioClip& hyp_wav,
                  const RegionPairList& regions, const MelConfig& mel_cfg) {
    if (regions.empty()) throw RangeError("empty region list");
    double weighted = 0.0, total_dur = 0.0;
    for (const auto& r : regions) {
        AudioClip ref_seg = extract_and_concat(ref_wav, {r.orig});
        AudioClip hyp_seg = extract_and_concat(hyp_wav, {r.tgt});
        double d = mcd_dtw(mel(ref_seg, mel_cfg), mel(hyp_seg, mel_cfg));
        double w = r.orig.duration();
        weighted += w * d;
        total_dur += w;
    }
    if (total_dur <= 0) throw RangeError("regions have zero total duration");
    return weighted / total_dur;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["count"] = count;
    j["mean"] = {{"wer", mean_wer}, {"spk_sim", mean_spk_sim}, {"mcd", mean_mcd}};
    if (mean_region_mcd) j["mean"]["region_mcd"] = *mean_region_mcd;
    for (const auto& [name, v] : mae_mos) j["mean"]["mae_mos_" + name] = v;
    j["utts"] = nlohmann::json::array();
    for (const auto& u : utts) {
        nlohmann::json ju = {{"id", u.id}, {"wer", u.wer}, {"spk_sim", u.spk_sim},
                             {"mcd", u.mcd}};
        if (u.region_mcd) ju["region_mcd"] = *u.region_mcd;
        j["utts"].push_back(ju);
    }
    return j.dump(2);
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "utterances: " << count << "\n";
    os << "WER (%)   : " << mean_wer << "\n";
    os << "SpkSIM    : " << mean_spk_sim << "\n";
    os << "MCD (dB)  : " << mean_mcd << "\n";
    if (mean_region_mcd) os << "regionMCD : " << *mean_region_mcd << "\n";
    for (const auto& [name, v] : mae_mos) os << "MAE_" << name << " : " << v << "\n";
    return os.str();
}

}  // namespace spedit
