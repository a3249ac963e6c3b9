#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "mpe/model.hpp"

namespace mpe {

// Reads a UAI MARKOV or BAYES model. Tables are given in probability space and
// converted to natural log; zeros become kZeroLog.
GraphicalModel parse_uai(std::string_view text);

// Writes the model as a MARKOV file with probabilities printed at full precision.
std::string serialize_uai(const GraphicalModel& model);

// Reads a UAI .evid file: a count followed by that many (variable, value)
// pairs. The older form with a leading sample count of 1 is accepted too.
std::map<VarIndex, Value> parse_evidence(std::string_view text, const GraphicalModel& model);

std::string serialize_evidence(const std::map<VarIndex, Value>& evidence);

// FNV-1a 64 of serialize_uai(model), as 16 lowercase hex digits.
std::string model_hash(const GraphicalModel& model);

std::string read_text_file(const std::filesystem::path& path);
GraphicalModel load_uai(const std::filesystem::path& path);

}  // namespace mpe
