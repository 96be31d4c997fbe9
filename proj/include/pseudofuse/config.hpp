#pragma once

#include "pseudofuse/eval.hpp"
#include "pseudofuse/pipeline.hpp"
#include "pseudofuse/synth.hpp"

#include <string>

namespace pseudofuse {

/// Everything a config file can declare. Absent keys keep their defaults.
struct ConfigFile {
  PipelineConfig pipeline;
  EvalConfig eval;
  SynthConfig synth;
};

/// Parses the declarative key-value format (`section.key = value`, `#`
/// comments). Unknown keys and malformed values are rejected with the file
/// path and line number.
ConfigFile load_config_file(const std::string& path);

/// Parses config text (same format); `origin` names the source in errors.
ConfigFile parse_config_text(const std::string& text, const std::string& origin = "<config>");

/// Canonical serialization of every pipeline field, used for hashing and for
/// `pseudofuse config --dump`.
std::string describe_config(const PipelineConfig& cfg);

/// FNV-1a over the canonical serialization, as 16 hex characters.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace pseudofuse
