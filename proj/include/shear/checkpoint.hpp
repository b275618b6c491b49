#pragma once

#include <string>
#include <utility>
#include <vector>

#include "shear/model.hpp"

namespace shear {

// Checkpoint layout: a little-endian u32 byte length, a text manifest of
// exactly that length (config, per-block flags, pruning audit lines, tensor
// directory), then the raw little-endian float32 payload in directory order.
// The writer is fully deterministic, so save(load(x)) reproduces x byte for
// byte. float config fields are written as hexfloats to keep the text exact.
void save_checkpoint(const ModelWeights& model, const std::string& path);
ModelWeights load_checkpoint(const std::string& path);

// In-memory encoding of the same byte stream; save_checkpoint writes exactly
// these bytes.
std::vector<unsigned char> encode_checkpoint(const ModelWeights& model);
ModelWeights decode_checkpoint(const std::vector<unsigned char>& bytes);

// The tensors of a model in directory order under their manifest names
// (token_embedding, final_norm, lm_head, block.N.attn_norm, block.N.wq, ...).
// Removed attentions contribute no entries.
std::vector<std::pair<std::string, const Tensor*>> named_tensors(const ModelWeights& model);
std::vector<std::pair<std::string, Tensor*>> named_tensors(ModelWeights& model);

} // namespace shear
