#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "spedit/nn.hpp"

namespace spedit {

// Versioned container: magic line, JSON metadata, then the raw parameter
// blob (doubles, column-major, in list order). Shapes are checked on load.
void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<nn::Parameter*>& params);

// Returns the metadata; parameter values are loaded in place.
nlohmann::json load_checkpoint(const std::string& path, std::vector<nn::Parameter*>& params);

// Reads only the metadata block.
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace spedit
