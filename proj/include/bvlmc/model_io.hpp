#pragma once

#include <string>

#include <json.hpp>

#include "bvlmc/core.hpp"

namespace bvlmc {

// Model JSON:
//   { "p": int, "d": int,
//     "leaves": [ { "context": [int...],            most recent first
//                   "alpha": [float x (p-1)],
//                   "beta":  [ [[float x d] x h] x (p-1) ] } ] }
// Leaves are sorted lexicographically by context. Extra top-level keys are
// ignored by the parser, so fit reports can be read back as models.

nlohmann::json model_to_json(const ContextTree& tree);
ContextTree model_from_json(const nlohmann::json& j);

/// Canonical text form (2-space indented JSON, trailing newline).
std::string serialize(const ContextTree& tree);
ContextTree parse(const std::string& text);

ContextTree load_model(const std::string& path);
void save_model(const ContextTree& tree, const std::string& path);

}  // namespace bvlmc
