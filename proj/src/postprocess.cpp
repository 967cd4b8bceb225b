#include "spedit/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include "spedit/errors.hpp"

namespace spedit {

RegionPairList map_unedited_regions(const AlignedUtterance& orig, const AlignedUtterance& tgt,
                                    const EditScript& script) {
    // Validate the script against both word sequences.
    auto replayed = replay_script(script, orig.words, tgt.words);
    if (replayed != tgt.words)
        throw CountMismatchError("script inconsistent with original/target transcripts");

    RegionPairList regions;
    int i = 0, j = 0;
    std::size_t k = 0;
    while (k < script.ops.size()) {
        if (script.ops[k].type != EditOpType::Keep) {
            switch (script.ops[k].type) {
                case EditOpType::Delete: ++i; break;
                case EditOpType::Insert: ++j; break;
                default: ++i; ++j; break;
            }
            ++k;
            continue;
        }
        int i0 = i, j0 = j;
        while (k < script.ops.size() && script.ops[k].type == EditOpType::Keep)
            ++i, ++j, ++k;
        RegionPair r;
        r.orig = {i0 == 0 ? 0.0 : orig.intervals[i0].start_s,
                  i == static_cast<int>(orig.word_count()) ? orig.duration_s()
                                                           : orig.intervals[i - 1].end_s};
        r.tgt = {j0 == 0 ? 0.0 : tgt.intervals[j0].start_s,
                 j == static_cast<int>(tgt.word_count()) ? tgt.duration_s()
                                                         : tgt.intervals[j - 1].end_s};
        regions.push_back(r);
    }
    return regions;
}

std::vector<double> crossfade(const std::vector<double>& a, const std::vector<double>& b,
                              std::size_t fade_len) {
    if (fade_len > a.size() || fade_len > b.size())
        throw RangeError("segments shorter than the fade length");
    std::vector<double> out;
    out.reserve(a.size() + b.size() - fade_len);
    out.insert(out.end(), a.begin(), a.end() - fade_len);
    for (std::size_t n = 0; n < fade_len; ++n) {
        double w = fade_len == 1 ? 1.0 : static_cast<double>(n) / (fade_len - 1);
        out.push_back((1.0 - w) * a[a.size() - fade_len + n] + w * b[n]);
    }
    out.insert(out.end(), b.begin() + fade_len, b.end());
    return out;
}

AudioClip replace_unedited(const AudioClip& tgt_wav, const AudioClip& orig_wav,
                           const RegionPairList& regions, const ReplaceOptions& opts) {
    AudioClip out = tgt_wav;
    const int sr = tgt_wav.sample_rate;
    const auto fade = static_cast<std::size_t>(std::lround(opts.fade_ms * sr / 1000.0));

    for (const auto& region : regions) {
        auto [olo, ohi] = interval_to_samples(region.orig, sr);
        auto [tlo, thi] = interval_to_samples(region.tgt, sr);
        if (ohi > orig_wav.samples.size() || thi > tgt_wav.samples.size() || olo > ohi ||
            tlo > thi)
            throw RangeError("region outside waveform bounds");
        if (thi == tlo) continue;

        std::vector<double> seg(orig_wav.samples.begin() + olo, orig_wav.samples.begin() + ohi);
        if (seg.size() != thi - tlo) seg = resample_linear(seg, thi - tlo);

        // Cross-fade only at boundaries interior to the signal; clamp to half
        // the region so the two ramps never overlap.
        std::size_t f = std::min(fade, seg.size() / 2);
        bool fade_in = tlo > 0, fade_out = thi < tgt_wav.samples.size();
        for (std::size_t n = 0; n < seg.size(); ++n) {
            double w = 1.0;
            if (fade_in && f > 1 && n < f) w = std::min(w, static_cast<double>(n) / (f - 1));
            if (fade_out && f > 1 && n >= seg.size() - f)
                w = std::min(w, static_cast<double>(seg.size() - 1 - n) / (f - 1));
            out.samples[tlo + n] = (1.0 - w) * out.samples[tlo + n] + w * seg[n];
        }
    }

    for (double s : out.samples)
        if (!std::isfinite(s) || std::abs(s) > 1.0 + 1e-9)
            throw RangeError("postprocessed output escapes [-1, 1]");
    return out;
}

}  // namespace spedit
