#include "spedit/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <fstream>
#include <random>

#include <json.hpp>

#include "spedit/errors.hpp"

namespace spedit {

namespace {

// In-place iterative radix-2 FFT; n must be a power of two.
void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * M_PI / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

std::size_t MelConfig::frame_count(std::size_t n_samples) const {
    if (n_samples < static_cast<std::size_t>(win_samples))
        throw RangeError("clip shorter than one analysis window");
    return 1 + (n_samples - win_samples) / hop_samples;
}

std::string MelConfig::config_id() const {
    return "mel_fft" + std::to_string(n_fft) + "_win" + std::to_string(win_samples) + "_hop" +
           std::to_string(hop_samples) + "_b" + std::to_string(n_bins);
}

Mat mel_filterbank(const MelConfig& cfg, int sample_rate) {
    const int n_freq = cfg.n_fft / 2 + 1;
    double mel_lo = hz_to_mel(cfg.fmin_hz);
    double mel_hi = hz_to_mel(std::min(cfg.fmax_hz, sample_rate / 2.0));
    std::vector<double> edges(cfg.n_bins + 2);
    for (int b = 0; b < cfg.n_bins + 2; ++b)
        edges[b] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * b / (cfg.n_bins + 1));

    Mat fb = Mat::Zero(cfg.n_bins, n_freq);
    for (int b = 0; b < cfg.n_bins; ++b) {
        double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
        for (int f = 0; f < n_freq; ++f) {
            double hz = static_cast<double>(f) * sample_rate / cfg.n_fft;
            if (hz <= lo || hz >= hi) continue;
            fb(b, f) = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
        }
    }
    return fb;
}

MelSpectrogram mel(const AudioClip& clip, const MelConfig& cfg) {
    if (clip.samples.empty()) throw RangeError("empty clip");
    const std::size_t n_frames = cfg.frame_count(clip.samples.size());
    const int n_freq = cfg.n_fft / 2 + 1;
    const Mat fb = mel_filterbank(cfg, clip.sample_rate);

    std::vector<double> window(cfg.win_samples);
    for (int i = 0; i < cfg.win_samples; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (cfg.win_samples - 1));

    MelSpectrogram out;
    out.frames = Mat(n_frames, cfg.n_bins);
    out.frame_rate_hz = cfg.frame_rate_hz(clip.sample_rate);
    out.config_id = cfg.config_id();

    std::vector<std::complex<double>> buf(cfg.n_fft);
    Eigen::VectorXd power(n_freq);
    for (std::size_t t = 0; t < n_frames; ++t) {
        std::size_t off = t * cfg.hop_samples;
        for (int i = 0; i < cfg.n_fft; ++i)
            buf[i] = i < cfg.win_samples ? clip.samples[off + i] * window[i] : 0.0;
        fft(buf);
        for (int f = 0; f < n_freq; ++f) power[f] = std::norm(buf[f]);
        Eigen::VectorXd energies = fb * power;
        for (int b = 0; b < cfg.n_bins; ++b)
            out.frames(t, b) = std::log(std::max(energies[b], cfg.log_floor));
    }
    return out;
}

Codebook fit_codebook(const std::vector<MelSpectrogram>& mels, int v_s, uint64_t seed,
                      int iterations) {
    std::size_t total = 0;
    int bins = mels.empty() ? 0 : mels.front().bin_count();
    for (const auto& m : mels) {
        if (m.bin_count() != bins) throw ShapeError("mel bin counts differ");
        total += m.frame_count();
    }
    if (total < static_cast<std::size_t>(v_s))
        throw RangeError("fewer frames than codebook entries");

    Mat frames(total, bins);
    std::size_t row = 0;
    for (const auto& m : mels) {
        frames.middleRows(row, m.frame_count()) = m.frames;
        row += m.frame_count();
    }

    // Seeded init from distinct random frames. Highly repetitive inputs can
    // carry fewer distinct frames than centroids; once the redraw budget is
    // spent, candidates get a small deterministic jitter so init terminates.
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    std::normal_distribution<double> jitter(0.0, 1e-3);
    Codebook cb;
    cb.seed = seed;
    cb.centroids = Mat(v_s, bins);
    int attempts_left = 64 * v_s;
    for (int c = 0; c < v_s;) {
        Eigen::RowVectorXd cand = frames.row(pick(rng));
        if (attempts_left-- <= 0)
            for (int b = 0; b < bins; ++b) cand(b) += jitter(rng);
        bool dup = false;
        for (int k = 0; k < c && !dup; ++k)
            if ((cb.centroids.row(k) - cand).squaredNorm() < 1e-18) dup = true;
        if (!dup) cb.centroids.row(c++) = cand;
    }

    std::vector<int> assign(total, 0);
    for (int it = 0; it < iterations; ++it) {
        double inertia = 0.0;
        for (std::size_t f = 0; f < total; ++f) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (int c = 0; c < v_s; ++c) {
                double d = (frames.row(f) - cb.centroids.row(c)).squaredNorm();
                if (d < best) best = d, best_c = c;
            }
            assign[f] = best_c;
            inertia += best;
        }
        cb.inertia_log.push_back(inertia);

        Mat sums = Mat::Zero(v_s, bins);
        std::vector<int> counts(v_s, 0);
        for (std::size_t f = 0; f < total; ++f) {
            sums.row(assign[f]) += frames.row(f);
            ++counts[assign[f]];
        }
        for (int c = 0; c < v_s; ++c)
            if (counts[c] > 0) cb.centroids.row(c) = sums.row(c) / counts[c];
        cb.iterations = it + 1;
    }
    return cb;
}

namespace {

int nearest_centroid(const Eigen::RowVectorXd& x, const Codebook& cb) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (int c = 0; c < cb.size(); ++c) {
        double d = (x - cb.centroids.row(c)).squaredNorm();
        if (d < best) best = d, best_c = c;  // strict: ties keep the lowest index
    }
    return best_c;
}

}  // namespace

SemanticTokenSeq tokenize_speech(const MelSpectrogram& m, const Codebook& cb, int downsample) {
    if (m.bin_count() != static_cast<int>(cb.centroids.cols()))
        throw ShapeError("mel/codebook bin counts differ");
    if (downsample < 1) throw ConfigError("downsample factor must be >= 1");
    SemanticTokenSeq seq;
    seq.token_rate_hz = m.frame_rate_hz / downsample;
    const std::size_t t_frames = m.frame_count();
    for (std::size_t t = 0; t < t_frames; t += downsample) {
        std::size_t block = std::min<std::size_t>(downsample, t_frames - t);
        Eigen::RowVectorXd avg = m.frames.middleRows(t, block).colwise().mean();
        seq.ids.push_back(nearest_centroid(avg, cb));
    }
    return seq;
}

std::vector<int> quantize_frames(const MelSpectrogram& m, const Codebook& cb) {
    std::vector<int> ids(m.frame_count());
    for (std::size_t t = 0; t < m.frame_count(); ++t)
        ids[t] = nearest_centroid(m.frames.row(t), cb);
    return ids;
}

SpeakerEmbedding speaker_embed(const MelSpectrogram& m) {
    if (m.frame_count() == 0) throw RangeError("empty spectrogram");
    Vec mean = m.frames.colwise().mean().transpose();
    double norm = mean.norm();
    if (norm == 0.0) throw RangeError("degenerate zero embedding");
    return {mean / norm};
}

double cosine(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
    if (a.v.size() != b.v.size()) throw ShapeError("embedding dimensions differ");
    return a.v.dot(b.v);
}

std::string normalize_text(const std::string& text) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : text) {
        char lc = static_cast<char>(std::tolower(c));
        bool in_vocab = (lc >= 'a' && lc <= 'z') || (lc >= '0' && lc <= '9') || lc == '\'';
        if (std::isspace(c)) {
            pending_space = true;
        } else if (in_vocab) {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += lc;
        } else if (std::ispunct(c)) {
            // stripped
        } else {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += '\x01';  // placeholder for UNK
        }
    }
    return out;
}

TextTokenSeq encode_text(const std::string& text) {
    TextTokenSeq seq;
    for (char c : normalize_text(text)) {
        if (c >= 'a' && c <= 'z') seq.ids.push_back(c - 'a');
        else if (c >= '0' && c <= '9') seq.ids.push_back(26 + (c - '0'));
        else if (c == ' ') seq.ids.push_back(36);
        else if (c == '\'') seq.ids.push_back(37);
        else seq.ids.push_back(kTextUnkId);
    }
    return seq;
}

std::string decode_text(const TextTokenSeq& seq) {
    std::string out;
    for (int id : seq.ids) {
        if (id >= 0 && id < 26) out += static_cast<char>('a' + id);
        else if (id >= 26 && id < 36) out += static_cast<char>('0' + (id - 26));
        else if (id == 36) out += ' ';
        else if (id == 37) out += '\'';
        else out += '\x01';
    }
    return out;
}

void save_codebook(const std::string& path, const Codebook& cb) {
    nlohmann::json j;
    j["format"] = "spedit-codebook-v1";
    j["seed"] = cb.seed;
    j["iterations"] = cb.iterations;
    j["bins"] = cb.centroids.cols();
    j["centroids"] = nlohmann::json::array();
    for (int c = 0; c < cb.size(); ++c) {
        nlohmann::json row = nlohmann::json::array();
        for (int b = 0; b < cb.centroids.cols(); ++b) row.push_back(cb.centroids(c, b));
        j["centroids"].push_back(row);
    }
    std::ofstream f(path);
    if (!f) throw IoError("cannot write codebook: " + path);
    f << j.dump() << "\n";
}

Codebook load_codebook(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open codebook: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    if (j.value("format", "") != "spedit-codebook-v1")
        throw SchemaError(path + ": unknown codebook format");
    Codebook cb;
    cb.seed = j["seed"].get<uint64_t>();
    cb.iterations = j["iterations"].get<int>();
    int bins = j["bins"].get<int>();
    const auto& rows = j["centroids"];
    cb.centroids = Mat(rows.size(), bins);
    for (std::size_t c = 0; c < rows.size(); ++c)
        for (int b = 0; b < bins; ++b) cb.centroids(c, b) = rows[c][b].get<double>();
    return cb;
}

}  // namespace spedit
