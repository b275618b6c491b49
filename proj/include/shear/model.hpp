#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shear/corpus.hpp"
#include "shear/tensor.hpp"

namespace shear {

struct ModelConfig {
    int32_t num_blocks = 0;
    int32_t d_model = 0;
    std::vector<int32_t> d_int_per_block;
    int32_t n_heads = 0;
    int32_t n_kv_heads = 0;
    int32_t head_dim = 0;
    int32_t vocab_size = 0;
    int32_t max_seq_len = 0;
    float rope_theta = 10000.0f;
    float norm_eps = 1e-5f;

    int32_t kv_dim() const { return n_kv_heads * head_dim; }
    void validate() const;
};

// Weights of one transformer block. Attention projections are stored
// input-major ([d_model × out]); the FFN projections keep the layer
// orientation ([d_int × d_model] for gate/up, [d_model × d_int] for down) so
// that pruning a neuron removes a gate/up row and the matching down column.
//
// ffn_in_dims / ffn_out_dims are only populated by the dimension-based
// pruning variant: they list the hidden dimensions that survive at the FFN
// boundary; dropped dimensions read as zero on entry and write nothing on
// exit. Empty means the full hidden width.
struct BlockWeights {
    Tensor wq, wk, wv, wo;
    Tensor w_gate, w_up, w_down;
    Tensor attn_norm, ffn_norm;
    bool attention_present = true;

    std::vector<int32_t> ffn_in_dims;
    std::vector<int32_t> ffn_out_dims;

    // Audit trail of neuron pruning: surviving intermediate indices relative
    // to the original width. Empty when the block was never neuron-pruned.
    std::vector<int32_t> kept_neurons;
    int32_t original_d_int = -1;

    int32_t d_int() const { return static_cast<int32_t>(w_gate.dim(0)); }
    int64_t attn_param_count() const;
    int64_t ffn_param_count() const;
};

struct ModelWeights {
    ModelConfig config;
    Tensor token_embedding; // [vocab × d_model]
    Tensor final_norm;      // [d_model]
    Tensor lm_head;         // [vocab × d_model]
    std::vector<BlockWeights> blocks;

    void validate() const;
};

struct EvalReport {
    double perplexity = 0.0;
    double mean_nll = 0.0; // nats per scored token
    int64_t tokens_scored = 0;
    int64_t sequences = 0;
};

struct ParamCounts {
    std::vector<int64_t> attn_per_block;
    std::vector<int64_t> ffn_per_block;
    int64_t total = 0;
};

// Optional per-block activation capture for importance scoring.
struct ForwardCapture {
    bool want_ffn_hidden = false; // gated product entering the down projection
    bool want_ffn_io = false;     // post-norm FFN input and pre-residual output
    std::vector<Tensor> ffn_hidden; // [T × d_int_b]
    std::vector<Tensor> ffn_input;  // [T × d_model]
    std::vector<Tensor> ffn_output; // [T × d_model]
};

// Full-sequence causal forward pass to logits [T × vocab].
// disable_attention, when >= 0, skips that block's attention branch for this
// call only; it is how depth-pruning candidates are probed without touching
// the weights.
Tensor forward_logits(const ModelWeights& model, std::span<const uint32_t> tokens,
                      ForwardCapture* capture = nullptr, int32_t disable_attention = -1);

// Next-token cross entropy over positions 1..T-1 of every sequence,
// exponentiated. Per-sequence sums reduce in corpus index order regardless
// of thread schedule.
EvalReport evaluate_perplexity(const ModelWeights& model, const TokenCorpus& corpus,
                               int32_t disable_attention = -1);

// Block parameter counts. Embeddings, lm_head, and norm vectors are not
// counted: only attention and FFN weight matrices are prunable, and sparsity
// is measured against that pool.
ParamCounts count_block_parameters(const ModelWeights& model);

} // namespace shear
