#pragma once

#include <stdexcept>
#include <string>

namespace spedit {

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error("schema error: " + msg) {}
};

struct IntervalOverlapError : std::runtime_error {
    explicit IntervalOverlapError(const std::string& msg)
        : std::runtime_error("interval overlap: " + msg) {}
};

struct CountMismatchError : std::runtime_error {
    explicit CountMismatchError(const std::string& msg)
        : std::runtime_error("count mismatch: " + msg) {}
};

struct MissingAudioError : std::runtime_error {
    explicit MissingAudioError(const std::string& msg)
        : std::runtime_error("missing audio: " + msg) {}
};

struct RangeError : std::runtime_error {
    explicit RangeError(const std::string& msg) : std::runtime_error("range error: " + msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// Signals "skip this utterance", e.g. when a span sampler cannot place the
// requested number of spans.
struct InfeasibleError : std::runtime_error {
    explicit InfeasibleError(const std::string& msg)
        : std::runtime_error("infeasible: " + msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

}  // namespace spedit
