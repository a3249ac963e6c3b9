#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mpe/model.hpp"

namespace mpe {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;  // row-major

  std::size_t numel() const;
};

struct ScorerMeta {
  std::size_t d_model = 256;
  std::size_t n_heads = 4;
  std::size_t n_attn_layers = 2;
  std::size_t n_ffn_blocks = 10;
  std::size_t ffn_dim = 512;
  // token(var, val) = vocab_offsets[var] + val
  std::vector<std::size_t> vocab_offsets;
  std::size_t vocab_size = 0;
};

// Parameters of the attention neighbor scorer. Linear layers are stored as
// [in, out] and applied as y = x W + b.
struct ScorerWeights {
  ScorerMeta meta;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;

  // Checks every required tensor against meta; throws WeightFormatError naming
  // the first offender.
  void validate() const;
  // validate() plus agreement of the vocabulary with the model's domains.
  void validate_for(const GraphicalModel& model) const;

  std::size_t token(VarIndex var, Value val) const { return meta.vocab_offsets[var] + val; }
};

// Required tensor names and shapes implied by meta, in file order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_tensors(const ScorerMeta& meta);

// Meta with vocab offsets laid out contiguously over the model's domains.
ScorerMeta meta_for_model(const GraphicalModel& model, std::size_t d_model, std::size_t n_heads,
                          std::size_t n_attn_layers, std::size_t n_ffn_blocks, std::size_t ffn_dim);

// All tensors present and zero-filled.
ScorerWeights zero_weights(const ScorerMeta& meta);

// Binary container; layout documented in docs/weight_format.md.
std::string encode_weights(const ScorerWeights& w);
ScorerWeights decode_weights(std::string_view bytes);

void save_weights(const ScorerWeights& w, const std::filesystem::path& path);
ScorerWeights load_weights(const std::filesystem::path& path);

}  // namespace mpe
