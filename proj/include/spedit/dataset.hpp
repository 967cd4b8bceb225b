#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spedit/alignment.hpp"
#include "spedit/edit_script.hpp"

namespace spedit {

enum class EditTask { Insert, Delete, Substitute, Multi };

std::string task_name(EditTask t);
EditTask task_from_name(const std::string& name);

struct EditPair {
    std::string id;
    EditTask task;
    AlignedUtterance original;
    AlignedUtterance target;
    EditScript script;   // original -> target
    EditSpanList spans;  // merged non-Keep runs of `script`
    std::string src_utt;
    uint64_t seed = 0;
};

struct SpanSamplerConfig {
    int min_spans = 1;
    int max_spans = 3;
    int min_span_words = 1;
    int max_span_words = 5;
    int min_margin_words = 1;  // words preserved at each utterance edge
    int min_gap_words = 1;     // minimum words between spans
};

// k disjoint word ranges under the sampler constraints, deterministic under
// seed. Throws InfeasibleError when the utterance cannot host k spans.
std::vector<WordRange> sample_spans(const AlignedUtterance& u, int k,
                                    const SpanSamplerConfig& config, uint64_t seed);

// Removes the given word ranges (and their time intervals) from an utterance,
// shifting the remaining word alignments sample-exactly.
AlignedUtterance remove_word_ranges(const AlignedUtterance& u,
                                    const std::vector<WordRange>& ranges);

EditPair build_insertion_pair(const AlignedUtterance& u, const std::vector<WordRange>& spans,
                              uint64_t seed);
EditPair build_deletion_pair(const AlignedUtterance& u, const std::vector<WordRange>& spans,
                             uint64_t seed);
// `span` must cover >= 2 words; the split point is drawn uniformly from the
// interior word boundaries.
EditPair build_substitution_pair(const AlignedUtterance& u, const WordRange& span, uint64_t seed);
// Per-span substitution construction applied to >= 2 disjoint spans.
EditPair build_multiedit_pair(const AlignedUtterance& u, const std::vector<WordRange>& spans,
                              uint64_t seed);

// Throws if the pair violates its invariants (script replay, task label,
// non-empty audio).
void validate_pair(const EditPair& pair);

struct ManifestSummary {
    std::map<std::string, int> task_counts;
    int skipped = 0;
    int total = 0;
    std::string manifest_path;
};

// Builds pairs from the corpus per the task mix, writes WAVs plus alignment
// sidecars under out_dir/audio and a JSONL manifest at out_dir/manifest.jsonl.
ManifestSummary build_manifest(const std::vector<AlignedUtterance>& corpus,
                               const std::map<EditTask, double>& mix,
                               const SpanSamplerConfig& config, uint64_t seed,
                               const std::string& out_dir);

struct ManifestEntry {
    std::string id;
    EditTask task;
    std::string orig_wav;
    std::string orig_text;
    std::string tgt_wav;
    std::string tgt_text;
    std::vector<WordRange> tgt_spans;
    std::string src_utt;
    uint64_t seed = 0;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace spedit
