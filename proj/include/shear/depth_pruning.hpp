#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "shear/corpus.hpp"
#include "shear/model.hpp"

namespace shear {

struct RemovalStep {
    int32_t block = -1;
    double perplexity = 0.0;
};

struct DepthPruneState {
    std::vector<int32_t> remaining_attention_blocks;
    std::vector<RemovalStep> removed_order;
    int32_t step = 0;
};

// Calibration perplexity of the model with one attention temporarily
// disabled. The model is untouched; the flag flip lives only in this call.
double evaluate_candidate(const ModelWeights& model, const TokenCorpus& calib,
                          int32_t block_index);

// Removes n_remove attentions one at a time, each time the candidate whose
// removal gives the lowest calibration perplexity (ties go to the lowest
// block index). Removed blocks drop their projection weights entirely. The
// input model is not modified.
std::pair<ModelWeights, DepthPruneState> greedy_remove_attentions(const ModelWeights& model,
                                                                  const TokenCorpus& calib,
                                                                  int32_t n_remove);

} // namespace shear
