#include "spedit/alignment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "spedit/errors.hpp"

namespace spedit {

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n') {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

void validate_utterance(const AlignedUtterance& u) {
    if (u.words.size() != u.intervals.size())
        throw CountMismatchError(u.id + ": " + std::to_string(u.words.size()) + " words vs " +
                                 std::to_string(u.intervals.size()) + " intervals");
    double dur = u.duration_s();
    const double eps = 0.5 / u.audio.sample_rate;  // rounding slack of half a sample
    for (std::size_t i = 0; i < u.intervals.size(); ++i) {
        const auto& iv = u.intervals[i];
        if (!(iv.start_s < iv.end_s))
            throw IntervalOverlapError(u.id + ": word " + std::to_string(i) +
                                       " has non-positive duration");
        if (iv.start_s < -eps || iv.end_s > dur + eps)
            throw RangeError(u.id + ": word " + std::to_string(i) + " outside [0, duration]");
        if (i > 0 && u.intervals[i - 1].end_s > iv.start_s + eps)
            throw IntervalOverlapError(u.id + ": words " + std::to_string(i - 1) + " and " +
                                       std::to_string(i) + " overlap");
    }
    for (double s : u.audio.samples)
        if (!std::isfinite(s)) throw RangeError(u.id + ": non-finite audio sample");
}

AlignedUtterance load_alignment(const std::string& path, int target_rate) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open alignment file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    if (!j.contains("audio") || !j.contains("words") || !j["words"].is_array())
        throw SchemaError(path + ": requires \"audio\" and \"words\" fields");

    AlignedUtterance u;
    u.id = std::filesystem::path(path).stem().string();
    for (const auto& w : j["words"]) {
        if (!w.contains("w") || !w.contains("start") || !w.contains("end"))
            throw SchemaError(path + ": word entry requires w/start/end");
        u.words.push_back(w["w"].get<std::string>());
        u.intervals.push_back({w["start"].get<double>(), w["end"].get<double>()});
    }
    auto wav_path = std::filesystem::path(path).parent_path() / j["audio"].get<std::string>();
    u.audio = read_wav(wav_path.string(), target_rate);
    validate_utterance(u);
    return u;
}

void save_alignment(const std::string& path, const AlignedUtterance& u,
                    const std::string& audio_rel) {
    nlohmann::json j;
    j["audio"] = audio_rel;
    std::string text;
    for (std::size_t i = 0; i < u.words.size(); ++i) {
        if (i) text += ' ';
        text += u.words[i];
    }
    j["text"] = text;
    j["words"] = nlohmann::json::array();
    for (std::size_t i = 0; i < u.words.size(); ++i)
        j["words"].push_back({{"w", u.words[i]},
                              {"start", u.intervals[i].start_s},
                              {"end", u.intervals[i].end_s}});
    std::ofstream f(path);
    if (!f) throw IoError("cannot write alignment file: " + path);
    f << j.dump(2) << "\n";
}

std::string synthetic_word_label(int k) { return "w" + std::to_string(k); }

std::vector<AlignedUtterance> generate_synthetic_corpus(const SyntheticCorpusConfig& cfg,
                                                        uint64_t seed) {
    if (cfg.n_utts <= 0 || cfg.min_words <= 0 || cfg.max_words < cfg.min_words ||
        cfg.word_dur_s <= 0)
        throw ConfigError("synthetic corpus config has empty ranges");
    double nyquist = cfg.sample_rate / 2.0;
    for (std::size_t i = 0; i < cfg.vocab_freqs_hz.size(); ++i) {
        if (cfg.vocab_freqs_hz[i] <= 0 || cfg.vocab_freqs_hz[i] >= nyquist)
            throw ConfigError("vocabulary frequency outside (0, Nyquist)");
        for (std::size_t k = 0; k < i; ++k)
            if (cfg.vocab_freqs_hz[i] == cfg.vocab_freqs_hz[k])
                throw ConfigError("vocabulary frequencies must be distinct");
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> n_words_dist(cfg.min_words, cfg.max_words);
    std::uniform_int_distribution<int> word_dist(0,
                                                 static_cast<int>(cfg.vocab_freqs_hz.size()) - 1);

    std::vector<AlignedUtterance> corpus;
    int word_samples = static_cast<int>(std::lround(cfg.word_dur_s * cfg.sample_rate));
    for (int n = 0; n < cfg.n_utts; ++n) {
        AlignedUtterance u;
        u.id = "utt" + std::to_string(n);
        u.audio.sample_rate = cfg.sample_rate;
        int n_words = n_words_dist(rng);
        for (int w = 0; w < n_words; ++w) {
            int k = word_dist(rng);
            double freq = cfg.vocab_freqs_hz[k];
            u.words.push_back(synthetic_word_label(k));
            std::size_t offset = u.audio.samples.size();
            for (int s = 0; s < word_samples; ++s) {
                double t = static_cast<double>(s) / cfg.sample_rate;
                u.audio.samples.push_back(cfg.amplitude * std::sin(2.0 * M_PI * freq * t));
            }
            u.intervals.push_back({static_cast<double>(offset) / cfg.sample_rate,
                                   static_cast<double>(offset + word_samples) / cfg.sample_rate});
        }
        validate_utterance(u);
        corpus.push_back(std::move(u));
    }
    return corpus;
}

}  // namespace spedit
