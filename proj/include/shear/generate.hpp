#pragma once

#include <cstdint>

#include "shear/corpus.hpp"
#include "shear/model.hpp"

namespace shear {

// Dense model with uniform weights in [-1/sqrt(d_model), 1/sqrt(d_model)),
// embeddings in [-1, 1), and all-ones norm vectors. Identical bytes for
// identical (config, seed) on every platform.
ModelWeights random_model(const ModelConfig& config, uint64_t seed);

// Autoregressive samples drawn from the model itself: first token uniform,
// every following token from the model's next-token distribution. A corpus
// sampled this way makes the generating model the best possible predictor of
// its own sequences, which is what pruning-degradation checks need.
TokenCorpus sample_corpus(const ModelWeights& model, int64_t n_sequences, int32_t seq_len,
                          uint64_t seed);

// Uniform random token ids; no relation to any model.
TokenCorpus random_corpus(int32_t vocab_size, int64_t n_sequences, int32_t seq_len,
                          uint64_t seed);

} // namespace shear
