#include "spedit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "spedit/errors.hpp"

namespace spedit {

namespace fs = std::filesystem;

std::string task_name(EditTask t) {
    switch (t) {
        case EditTask::Insert: return "insert";
        case EditTask::Delete: return "delete";
        case EditTask::Substitute: return "substitute";
        case EditTask::Multi: return "multi";
    }
    return "?";
}

EditTask task_from_name(const std::string& name) {
    if (name == "insert") return EditTask::Insert;
    if (name == "delete") return EditTask::Delete;
    if (name == "substitute") return EditTask::Substitute;
    if (name == "multi") return EditTask::Multi;
    throw ConfigError("unknown task name: " + name);
}

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    // splitmix64 step
    uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void finalize_pair(EditPair& pair) {
    pair.script = compute_edit_script(pair.original.words, pair.target.words);
    pair.spans = script_to_spans(pair.script, pair.original);
    validate_pair(pair);
}

}  // namespace

std::vector<WordRange> sample_spans(const AlignedUtterance& u, int k,
                                    const SpanSamplerConfig& config, uint64_t seed) {
    if (config.min_spans < 1 || config.max_spans < config.min_spans ||
        config.min_span_words < 1 || config.max_span_words < config.min_span_words ||
        config.min_margin_words < 0 || config.min_gap_words < 0)
        throw ConfigError("span sampler ranges must be non-empty and positive");
    const int n = static_cast<int>(u.word_count());
    if (k < 1) throw InfeasibleError("need at least one span");

    const int need = 2 * config.min_margin_words + k * config.min_span_words +
                     (k - 1) * config.min_gap_words;
    if (need > n)
        throw InfeasibleError("utterance with " + std::to_string(n) + " words cannot host " +
                              std::to_string(k) + " spans");

    std::mt19937_64 rng(seed);
    const int budget = n - 2 * config.min_margin_words - (k - 1) * config.min_gap_words;

    // Sequentially clamped lengths, then slack distributed before each span.
    std::vector<int> lengths(k);
    int used = 0;
    for (int i = 0; i < k; ++i) {
        int left_for_rest = (k - 1 - i) * config.min_span_words;
        int hi = std::min(config.max_span_words, budget - used - left_for_rest);
        lengths[i] = std::uniform_int_distribution<int>(config.min_span_words, hi)(rng);
        used += lengths[i];
    }
    int slack = budget - used;

    std::vector<WordRange> spans(k);
    int cursor = config.min_margin_words;
    for (int i = 0; i < k; ++i) {
        int shift = std::uniform_int_distribution<int>(0, slack)(rng);
        slack -= shift;
        cursor += shift;
        spans[i] = {cursor, cursor + lengths[i]};
        cursor += lengths[i] + config.min_gap_words;
    }
    return spans;
}

AlignedUtterance remove_word_ranges(const AlignedUtterance& u,
                                    const std::vector<WordRange>& ranges) {
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        if (ranges[i].empty() || ranges[i].begin < 0 ||
            ranges[i].end > static_cast<int>(u.word_count()))
            throw RangeError("word range outside utterance");
        if (i > 0 && ranges[i - 1].end > ranges[i].begin)
            throw RangeError("word ranges overlap or unordered");
    }

    std::vector<TimeInterval> removed;
    for (const auto& r : ranges)
        removed.push_back({u.intervals[r.begin].start_s, u.intervals[r.end - 1].end_s});

    AlignedUtterance out;
    out.id = u.id;
    out.audio = extract_and_concat(u.audio, complement_intervals(removed, u.duration_s()));

    const int sr = u.audio.sample_rate;
    std::size_t next_range = 0;
    std::size_t removed_samples = 0;
    for (std::size_t w = 0; w < u.word_count(); ++w) {
        while (next_range < ranges.size() &&
               static_cast<int>(w) >= ranges[next_range].end) {
            auto [lo, hi] = interval_to_samples(removed[next_range], sr);
            removed_samples += hi - lo;
            ++next_range;
        }
        if (next_range < ranges.size() && static_cast<int>(w) >= ranges[next_range].begin)
            continue;  // word is deleted
        auto [lo, hi] = interval_to_samples(u.intervals[w], sr);
        out.words.push_back(u.words[w]);
        out.intervals.push_back({static_cast<double>(lo - removed_samples) / sr,
                                 static_cast<double>(hi - removed_samples) / sr});
    }
    validate_utterance(out);
    return out;
}

EditPair build_insertion_pair(const AlignedUtterance& u, const std::vector<WordRange>& spans,
                              uint64_t seed) {
    if (spans.empty()) throw InfeasibleError("insertion pair requires at least one span");
    EditPair pair;
    pair.task = EditTask::Insert;
    pair.target = u;
    pair.original = remove_word_ranges(u, spans);
    pair.src_utt = u.id;
    pair.seed = seed;
    finalize_pair(pair);
    return pair;
}

EditPair build_deletion_pair(const AlignedUtterance& u, const std::vector<WordRange>& spans,
                             uint64_t seed) {
    EditPair pair = build_insertion_pair(u, spans, seed);
    std::swap(pair.original, pair.target);
    pair.task = EditTask::Delete;
    finalize_pair(pair);
    return pair;
}

namespace {

EditPair build_split_pair(const AlignedUtterance& u, const std::vector<WordRange>& spans,
                          EditTask task, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<WordRange> removed_from_target, removed_from_original;
    for (const auto& span : spans) {
        if (span.size() < 2)
            throw InfeasibleError("substitution span must cover at least 2 words");
        // Pick a split whose head and tail fragments differ as word sequences;
        // equal fragments would collapse the substitution into an identity.
        int n_splits = span.size() - 1;
        int first = std::uniform_int_distribution<int>(0, n_splits - 1)(rng);
        int split = -1;
        for (int off = 0; off < n_splits; ++off) {
            int cand = span.begin + 1 + (first + off) % n_splits;
            std::vector<std::string> head(u.words.begin() + span.begin, u.words.begin() + cand);
            std::vector<std::string> tail(u.words.begin() + cand, u.words.begin() + span.end);
            if (head != tail) {
                split = cand;
                break;
            }
        }
        if (split < 0)
            throw InfeasibleError("span '" + join_words({u.words.begin() + span.begin,
                                                         u.words.begin() + span.end}) +
                                  "' has no non-degenerate split");
        removed_from_target.push_back({split, span.end});    // target keeps the head
        removed_from_original.push_back({span.begin, split});  // original keeps the tail
    }
    EditPair pair;
    pair.task = task;
    pair.target = remove_word_ranges(u, removed_from_target);
    pair.original = remove_word_ranges(u, removed_from_original);
    pair.src_utt = u.id;
    pair.seed = seed;
    try {
        finalize_pair(pair);
    } catch (const RangeError& e) {
        // Repeated words can make the minimal script merge or drop runs;
        // that is a property of the sampled spans, so the caller may skip.
        throw InfeasibleError(std::string("degenerate split pair: ") + e.what());
    }
    return pair;
}

}  // namespace

EditPair build_substitution_pair(const AlignedUtterance& u, const WordRange& span,
                                 uint64_t seed) {
    return build_split_pair(u, {span}, EditTask::Substitute, seed);
}

EditPair build_multiedit_pair(const AlignedUtterance& u, const std::vector<WordRange>& spans,
                              uint64_t seed) {
    if (spans.size() < 2) throw InfeasibleError("multi-edit requires >= 2 spans");
    return build_split_pair(u, spans, EditTask::Multi, seed);
}

void validate_pair(const EditPair& pair) {
    if (pair.original.audio.samples.empty() || pair.target.audio.samples.empty())
        throw RangeError("edit pair has empty audio");
    auto replayed = replay_script(pair.script, pair.original.words, pair.target.words);
    if (replayed != pair.target.words)
        throw RangeError("edit script replay does not reproduce target text");
    int runs = pair.script.edit_run_count();
    if (runs < 1) throw RangeError("edit pair has an identity script");
    switch (pair.task) {
        case EditTask::Insert:
            for (const auto& op : pair.script.ops)
                if (op.type == EditOpType::Delete || op.type == EditOpType::Substitute)
                    throw RangeError("insert pair script contains non-insert edits");
            break;
        case EditTask::Delete:
            for (const auto& op : pair.script.ops)
                if (op.type == EditOpType::Insert || op.type == EditOpType::Substitute)
                    throw RangeError("delete pair script contains non-delete edits");
            break;
        case EditTask::Substitute:
            break;
        case EditTask::Multi:
            if (runs < 2) throw RangeError("multi pair has fewer than 2 edit runs");
            break;
    }
}

ManifestSummary build_manifest(const std::vector<AlignedUtterance>& corpus,
                               const std::map<EditTask, double>& mix,
                               const SpanSamplerConfig& config, uint64_t seed,
                               const std::string& out_dir) {
    if (corpus.empty()) throw ConfigError("empty corpus");
    double psum = 0;
    for (const auto& [t, p] : mix) psum += p;
    if (std::abs(psum - 1.0) > 1e-9) throw ConfigError("task proportions must sum to 1");

    const int n = static_cast<int>(corpus.size());
    // Largest-remainder task allocation, then a seeded shuffle.
    std::vector<EditTask> assignment;
    {
        std::vector<std::pair<EditTask, double>> rema;
        int assigned = 0;
        for (const auto& [t, p] : mix) {
            int c = static_cast<int>(std::floor(p * n));
            for (int i = 0; i < c; ++i) assignment.push_back(t);
            assigned += c;
            rema.push_back({t, p * n - c});
        }
        std::stable_sort(rema.begin(), rema.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        for (int i = 0; assigned < n; ++i, ++assigned)
            assignment.push_back(rema[i % rema.size()].first);
        std::mt19937_64 shuffle_rng(mix_seed(seed, 0xA55));
        std::shuffle(assignment.begin(), assignment.end(), shuffle_rng);
    }

    fs::create_directories(fs::path(out_dir) / "audio");
    ManifestSummary summary;
    std::string manifest_text;

    for (int i = 0; i < n; ++i) {
        const auto& u = corpus[i];
        EditTask task = assignment[i];
        uint64_t pair_seed = mix_seed(seed, static_cast<uint64_t>(i) + 1);
        std::mt19937_64 rng(pair_seed);

        SpanSamplerConfig cfg = config;
        if (task == EditTask::Substitute || task == EditTask::Multi) {
            cfg.min_span_words = std::max(2, cfg.min_span_words);
            cfg.max_span_words = std::max(cfg.max_span_words, cfg.min_span_words);
        }

        EditPair pair;
        try {
            int k = 1;
            switch (task) {
                case EditTask::Insert:
                case EditTask::Delete:
                    k = std::uniform_int_distribution<int>(cfg.min_spans, cfg.max_spans)(rng);
                    break;
                case EditTask::Substitute:
                    k = 1;
                    break;
                case EditTask::Multi:
                    k = std::uniform_int_distribution<int>(std::max(2, cfg.min_spans),
                                                           std::max(2, cfg.max_spans))(rng);
                    break;
            }
            auto spans = sample_spans(u, k, cfg, mix_seed(pair_seed, 2));
            uint64_t build_seed = mix_seed(pair_seed, 3);
            switch (task) {
                case EditTask::Insert: pair = build_insertion_pair(u, spans, build_seed); break;
                case EditTask::Delete: pair = build_deletion_pair(u, spans, build_seed); break;
                case EditTask::Substitute:
                    pair = build_substitution_pair(u, spans[0], build_seed);
                    break;
                case EditTask::Multi: pair = build_multiedit_pair(u, spans, build_seed); break;
            }
        } catch (const InfeasibleError&) {
            ++summary.skipped;
            continue;
        }
        pair.id = u.id + "_" + task_name(task);

        std::string orig_wav = "audio/" + pair.id + "_orig.wav";
        std::string tgt_wav = "audio/" + pair.id + "_tgt.wav";
        write_wav((fs::path(out_dir) / orig_wav).string(), pair.original.audio);
        write_wav((fs::path(out_dir) / tgt_wav).string(), pair.target.audio);
        save_alignment((fs::path(out_dir) / ("audio/" + pair.id + "_orig.ali.json")).string(),
                       pair.original, pair.id + "_orig.wav");
        save_alignment((fs::path(out_dir) / ("audio/" + pair.id + "_tgt.ali.json")).string(),
                       pair.target, pair.id + "_tgt.wav");

        nlohmann::json line;
        line["id"] = pair.id;
        line["task"] = task_name(task);
        line["orig_wav"] = orig_wav;
        line["orig_text"] = join_words(pair.original.words);
        line["tgt_wav"] = tgt_wav;
        line["tgt_text"] = join_words(pair.target.words);
        line["spans"] = nlohmann::json::array();
        for (const auto& s : pair.spans)
            line["spans"].push_back({s.tgt_words.begin, s.tgt_words.end});
        line["src_utt"] = pair.src_utt;
        line["seed"] = pair.seed;
        manifest_text += line.dump() + "\n";

        ++summary.task_counts[task_name(task)];
        ++summary.total;
    }

    summary.manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
    std::ofstream mf(summary.manifest_path);
    if (!mf) throw IoError("cannot write manifest: " + summary.manifest_path);
    mf << manifest_text;
    return summary;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest: " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(path + ": " + e.what());
        }
        ManifestEntry e;
        e.id = j.at("id").get<std::string>();
        e.task = task_from_name(j.at("task").get<std::string>());
        e.orig_wav = j.at("orig_wav").get<std::string>();
        e.orig_text = j.at("orig_text").get<std::string>();
        e.tgt_wav = j.at("tgt_wav").get<std::string>();
        e.tgt_text = j.at("tgt_text").get<std::string>();
        for (const auto& s : j.at("spans"))
            e.tgt_spans.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
        e.src_utt = j.at("src_utt").get<std::string>();
        e.seed = j.at("seed").get<uint64_t>();
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace spedit
