#pragma once

#include <vector>

#include "spedit/alignment.hpp"
#include "spedit/edit_script.hpp"

namespace spedit {

// One unedited word run: matching time intervals on the original and target
// sides.
struct RegionPair {
    TimeInterval orig;
    TimeInterval tgt;
};

using RegionPairList = std::vector<RegionPair>;

// Maps maximal Keep runs of the script onto time-interval pairs. Runs
// touching an utterance edge extend to time 0 / full duration.
RegionPairList map_unedited_regions(const AlignedUtterance& orig, const AlignedUtterance& tgt,
                                    const EditScript& script);

// Linear cross-fade: the last fade_len samples of `a` blend into the first
// fade_len samples of `b`; outside the overlap both segments pass through.
// fade_len == 1 is a hard switch to b.
std::vector<double> crossfade(const std::vector<double>& a, const std::vector<double>& b,
                              std::size_t fade_len);

struct ReplaceOptions {
    double fade_ms = 20.0;
};

// Replaces the target's unedited regions with the matching original segments
// on the target timeline (originals linearly resampled when the paired
// interval lengths differ), cross-fading at region boundaries interior to
// the signal. Output duration equals the target duration.
AudioClip replace_unedited(const AudioClip& tgt_wav, const AudioClip& orig_wav,
                           const RegionPairList& regions, const ReplaceOptions& opts = {});

}  // namespace spedit
