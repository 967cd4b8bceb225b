#pragma once

#include <string>
#include <vector>

#include "spedit/alignment.hpp"

namespace spedit {

enum class EditOpType { Keep, Delete, Insert, Substitute };

struct EditOp {
    EditOpType type;
    int i = -1;  // original-word index (Keep/Delete/Substitute)
    int j = -1;  // target-word index (Keep/Insert/Substitute)

    bool operator==(const EditOp&) const = default;
};

struct EditScript {
    std::vector<EditOp> ops;

    int cost() const;
    bool is_identity() const;
    // Number of maximal non-Keep runs.
    int edit_run_count() const;
};

// Half-open word-index range.
struct WordRange {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
    bool empty() const { return begin >= end; }
    bool operator==(const WordRange&) const = default;
};

struct EditSpan {
    WordRange orig_words;
    WordRange tgt_words;
    TimeInterval orig_time;  // zero-length at the insertion point for pure insertions
};

using EditSpanList = std::vector<EditSpan>;

// Minimum-cost word-level edit script with unit insert/delete/substitute
// costs. Ties resolved by preferring Substitute over Delete+Insert, then
// Delete over Insert, walking from the front.
EditScript compute_edit_script(const std::vector<std::string>& original,
                               const std::vector<std::string>& target);

// Applies the script to `original`, drawing inserted/substituted content from
// `target` by index.
std::vector<std::string> replay_script(const EditScript& script,
                                       const std::vector<std::string>& original,
                                       const std::vector<std::string>& target);

// Swaps the roles of the two sides (Insert <-> Delete, indices exchanged).
EditScript invert_script(const EditScript& script);

// Merges maximal non-Keep runs into spans with original-side time intervals.
EditSpanList script_to_spans(const EditScript& script, const AlignedUtterance& u);

}  // namespace spedit
