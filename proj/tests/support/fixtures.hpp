#pragma once

// Shared test fixtures: the standard toy model, a small GQA model, and the
// hand-built fixture models with exactly known behavior.

#include <cstdint>
#include <vector>

#include "shear/corpus.hpp"
#include "shear/model.hpp"
#include "shear/width_pruning.hpp"

namespace shear::testsupport {

ModelConfig make_config(int32_t num_blocks, int32_t d_model, int32_t d_int, int32_t n_heads,
                        int32_t n_kv_heads, int32_t vocab_size, int32_t max_seq_len,
                        float rope_theta = 10000.0f, float norm_eps = 1e-5f);

// B=4, d_model=64, d_int=172, 4 heads, vocab 256, seeded with 0. Cached.
const ModelConfig& toy_config();
const ModelWeights& toy_model();

// B=2, d_model=16, d_int=12, 4 heads over 2 kv heads, vocab 32. Cached.
const ModelConfig& small_config();
const ModelWeights& small_model();

// Any seeded corpus of uniform random tokens for a model.
TokenCorpus tokens_for(const ModelWeights& model, int64_t n_sequences, int32_t seq_len,
                       uint64_t seed);

// lm_head is all zeros, so every logit row is uniform: perplexity == vocab.
ModelWeights uniform_logit_model(int32_t vocab_size);

// Deterministic chain model: on the sequence 0,1,2,...,vocab-1 every scored
// position puts a ~200-nat margin on the correct next token.
ModelWeights one_hot_chain_model();
std::vector<uint32_t> one_hot_chain_sequence();

// Single FFN neuron whose activations on the two-token calibration sequence
// are exactly 3 and 4 (see the matching corpus below).
ModelWeights hand_score_model();
TokenCorpus hand_score_corpus();

// The original model with the dropped neurons' activations pinned to zero by
// zeroing their gate and up rows: the masked-activation side of the
// mask-equivalence property.
ModelWeights zero_masked_model(const ModelWeights& model, const NeuronMask& mask);

// The same mask applied by actual slicing.
ModelWeights sliced_model(const ModelWeights& model, const NeuronMask& mask);

// Random strictly-increasing kept set of size k drawn from [0, d_int).
std::vector<int32_t> random_kept(int32_t d_int, int32_t k, uint64_t seed);

} // namespace shear::testsupport
