#include "spedit/edit_script.hpp"

#include <algorithm>

#include "spedit/errors.hpp"

namespace spedit {

int EditScript::cost() const {
    int c = 0;
    for (const auto& op : ops)
        if (op.type != EditOpType::Keep) ++c;
    return c;
}

bool EditScript::is_identity() const { return cost() == 0; }

int EditScript::edit_run_count() const {
    int runs = 0;
    bool in_run = false;
    for (const auto& op : ops) {
        bool edit = op.type != EditOpType::Keep;
        if (edit && !in_run) ++runs;
        in_run = edit;
    }
    return runs;
}

EditScript compute_edit_script(const std::vector<std::string>& original,
                               const std::vector<std::string>& target) {
    const int n = static_cast<int>(original.size());
    const int m = static_cast<int>(target.size());

    // suffix[i][j] = min edit cost between original[i:] and target[j:]
    std::vector<std::vector<int>> suffix(n + 1, std::vector<int>(m + 1, 0));
    for (int i = 0; i <= n; ++i) suffix[i][m] = n - i;
    for (int j = 0; j <= m; ++j) suffix[n][j] = m - j;
    for (int i = n - 1; i >= 0; --i) {
        for (int j = m - 1; j >= 0; --j) {
            int best = 1 + std::min({suffix[i + 1][j + 1], suffix[i + 1][j], suffix[i][j + 1]});
            if (original[i] == target[j]) best = std::min(best, suffix[i + 1][j + 1]);
            suffix[i][j] = best;
        }
    }

    EditScript script;
    int i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && original[i] == target[j] &&
            suffix[i][j] == suffix[i + 1][j + 1]) {
            script.ops.push_back({EditOpType::Keep, i, j});
            ++i, ++j;
        } else if (i < n && j < m && suffix[i][j] == 1 + suffix[i + 1][j + 1]) {
            script.ops.push_back({EditOpType::Substitute, i, j});
            ++i, ++j;
        } else if (i < n && suffix[i][j] == 1 + suffix[i + 1][j]) {
            script.ops.push_back({EditOpType::Delete, i, -1});
            ++i;
        } else {
            script.ops.push_back({EditOpType::Insert, -1, j});
            ++j;
        }
    }
    return script;
}

std::vector<std::string> replay_script(const EditScript& script,
                                       const std::vector<std::string>& original,
                                       const std::vector<std::string>& target) {
    std::vector<std::string> out;
    int i = 0;
    for (const auto& op : script.ops) {
        switch (op.type) {
            case EditOpType::Keep:
                if (i != op.i || op.i >= static_cast<int>(original.size()))
                    throw RangeError("script does not traverse original in order");
                out.push_back(original[op.i]);
                ++i;
                break;
            case EditOpType::Delete:
                ++i;
                break;
            case EditOpType::Insert:
                if (op.j < 0 || op.j >= static_cast<int>(target.size()))
                    throw RangeError("insert index outside target");
                out.push_back(target[op.j]);
                break;
            case EditOpType::Substitute:
                if (op.j < 0 || op.j >= static_cast<int>(target.size()))
                    throw RangeError("substitute index outside target");
                out.push_back(target[op.j]);
                ++i;
                break;
        }
    }
    if (i != static_cast<int>(original.size()))
        throw RangeError("script does not consume the whole original sequence");
    return out;
}

EditScript invert_script(const EditScript& script) {
    EditScript inv;
    for (const auto& op : script.ops) {
        switch (op.type) {
            case EditOpType::Keep:
                inv.ops.push_back({EditOpType::Keep, op.j, op.i});
                break;
            case EditOpType::Delete:
                inv.ops.push_back({EditOpType::Insert, -1, op.i});
                break;
            case EditOpType::Insert:
                inv.ops.push_back({EditOpType::Delete, op.j, -1});
                break;
            case EditOpType::Substitute:
                inv.ops.push_back({EditOpType::Substitute, op.j, op.i});
                break;
        }
    }
    return inv;
}

EditSpanList script_to_spans(const EditScript& script, const AlignedUtterance& u) {
    // Verify the script's original side matches u.words.
    int orig_len = 0;
    for (const auto& op : script.ops)
        if (op.type != EditOpType::Insert) ++orig_len;
    if (orig_len != static_cast<int>(u.words.size()))
        throw CountMismatchError("script original side does not match utterance");

    EditSpanList spans;
    int i = 0, j = 0;
    std::size_t k = 0;
    while (k < script.ops.size()) {
        if (script.ops[k].type == EditOpType::Keep) {
            ++i, ++j, ++k;
            continue;
        }
        EditSpan span;
        span.orig_words.begin = i;
        span.tgt_words.begin = j;
        while (k < script.ops.size() && script.ops[k].type != EditOpType::Keep) {
            switch (script.ops[k].type) {
                case EditOpType::Delete: ++i; break;
                case EditOpType::Insert: ++j; break;
                default: ++i; ++j; break;
            }
            ++k;
        }
        span.orig_words.end = i;
        span.tgt_words.end = j;
        if (!span.orig_words.empty()) {
            span.orig_time = {u.intervals[span.orig_words.begin].start_s,
                              u.intervals[span.orig_words.end - 1].end_s};
        } else {
            // Pure insertion: midpoint of the inter-word gap, or the edge.
            double t;
            if (span.orig_words.begin == 0)
                t = u.words.empty() ? 0.0 : u.intervals.front().start_s;
            else if (span.orig_words.begin == static_cast<int>(u.words.size()))
                t = u.intervals.back().end_s;
            else
                t = 0.5 * (u.intervals[span.orig_words.begin - 1].end_s +
                           u.intervals[span.orig_words.begin].start_s);
            span.orig_time = {t, t};
        }
        spans.push_back(span);
    }
    return spans;
}

}  // namespace spedit
