#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "shear/corpus.hpp"
#include "shear/model.hpp"

namespace shear {

enum class NormKind { L2, L1 };

// Per-neuron importance: mean over calibration sequences of the chosen norm,
// taken over the tokens, of the gated FFN activation feeding the down
// projection.
struct ImportanceScores {
    std::vector<std::vector<double>> per_block;
    NormKind norm_kind = NormKind::L2;
};

// Surviving intermediate-neuron indices per block, strictly increasing.
struct NeuronMask {
    std::vector<std::vector<int32_t>> kept_per_block;
};

// Surviving hidden dimensions at the FFN boundary, per block (the
// dimension-based pruning variant).
struct InvertedMasks {
    std::vector<std::vector<int32_t>> in_dims_per_block;
    std::vector<std::vector<int32_t>> out_dims_per_block;
};

ImportanceScores score_neurons(const ModelWeights& model, const TokenCorpus& calib,
                               NormKind norm_kind);

// Indices of the k largest scores per block, ties broken toward the lower
// index, output ascending.
NeuronMask select_top_k(const ImportanceScores& scores, const std::vector<int32_t>& k_per_block);

// Keeps the listed gate/up rows, then the matching down columns (in that
// order, so every surviving weight stays on a live input-to-output path).
BlockWeights slice_ffn(const BlockWeights& block, const std::vector<int32_t>& kept_indices);

// Dimension-based variant: keeps gate/up columns per in_dims and down rows
// per out_dims. Dropped hidden dimensions read as zero entering the FFN and
// produce nothing leaving it.
BlockWeights slice_ffn_inverted(const BlockWeights& block, const std::vector<int32_t>& in_dims,
                                const std::vector<int32_t>& out_dims, int32_t d_model);

// One-shot stage 1: score on the dense model, keep the top k neurons of
// every FFN, slice. The input model is not modified.
std::pair<ModelWeights, NeuronMask> apply_stage1(const ModelWeights& model,
                                                 const TokenCorpus& calib, int32_t k_per_block,
                                                 NormKind norm_kind);

// Importance of each hidden dimension at the FFN input and output (mean norm
// of that dimension's activations across calibration sequences).
std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>>
score_hidden_dims(const ModelWeights& model, const TokenCorpus& calib, NormKind norm_kind);

// One-shot stage 1, dimension-based: keep k_dim hidden dimensions on each
// side of every FFN.
std::pair<ModelWeights, InvertedMasks> apply_stage1_inverted(const ModelWeights& model,
                                                             const TokenCorpus& calib,
                                                             int32_t k_dim, NormKind norm_kind);

} // namespace shear
