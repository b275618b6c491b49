#include "fixtures.hpp"

#include <algorithm>
#include <numeric>

#include "shear/generate.hpp"
#include "shear/rng.hpp"

namespace shear::testsupport {

ModelConfig make_config(int32_t num_blocks, int32_t d_model, int32_t d_int, int32_t n_heads,
                        int32_t n_kv_heads, int32_t vocab_size, int32_t max_seq_len,
                        float rope_theta, float norm_eps) {
    ModelConfig cfg;
    cfg.num_blocks = num_blocks;
    cfg.d_model = d_model;
    cfg.d_int_per_block.assign(static_cast<size_t>(num_blocks), d_int);
    cfg.n_heads = n_heads;
    cfg.n_kv_heads = n_kv_heads;
    cfg.head_dim = d_model / n_heads;
    cfg.vocab_size = vocab_size;
    cfg.max_seq_len = max_seq_len;
    cfg.rope_theta = rope_theta;
    cfg.norm_eps = norm_eps;
    return cfg;
}

const ModelConfig& toy_config() {
    static const ModelConfig cfg = make_config(4, 64, 172, 4, 4, 256, 128);
    return cfg;
}

const ModelWeights& toy_model() {
    static const ModelWeights model = random_model(toy_config(), 0);
    return model;
}

const ModelConfig& small_config() {
    static const ModelConfig cfg = make_config(2, 16, 12, 4, 2, 32, 32);
    return cfg;
}

const ModelWeights& small_model() {
    static const ModelWeights model = random_model(small_config(), 7);
    return model;
}

TokenCorpus tokens_for(const ModelWeights& model, int64_t n_sequences, int32_t seq_len,
                       uint64_t seed) {
    return random_corpus(model.config.vocab_size, n_sequences, seq_len, seed);
}

ModelWeights uniform_logit_model(int32_t vocab_size) {
    ModelConfig cfg = make_config(1, 4, 2, 1, 1, vocab_size, 64);
    ModelWeights model = random_model(cfg, 11);
    for (int64_t i = 0; i < model.lm_head.size(); ++i) {
        model.lm_head.at(i) = 0.0f;
    }
    return model;
}

ModelWeights one_hot_chain_model() {
    const int32_t v = 16;
    ModelConfig cfg = make_config(1, v, 1, 1, 1, v, 64);
    ModelWeights model;
    model.config = cfg;
    model.token_embedding = Tensor({v, v});
    for (int32_t i = 0; i < v; ++i) {
        model.token_embedding.at(i * v + i) = 1.0f;
    }
    model.final_norm = Tensor({v});
    for (int32_t i = 0; i < v; ++i) {
        model.final_norm.at(i) = 1.0f;
    }
    // Row w reads dimension w-1, so token t scores token t+1.
    model.lm_head = Tensor({v, v});
    for (int32_t w = 1; w < v; ++w) {
        model.lm_head.at(w * v + (w - 1)) = 50.0f;
    }
    BlockWeights blk;
    blk.attention_present = false;
    blk.ffn_norm = model.final_norm;
    blk.w_gate = Tensor({1, v});
    blk.w_up = Tensor({1, v});
    blk.w_down = Tensor({v, 1});
    model.blocks.push_back(std::move(blk));
    model.validate();
    return model;
}

std::vector<uint32_t> one_hot_chain_sequence() {
    std::vector<uint32_t> seq(16);
    std::iota(seq.begin(), seq.end(), 0u);
    return seq;
}

ModelWeights hand_score_model() {
    // Both tokens push the gate projection to exactly 32, where sigmoid
    // saturates to 1.0f, so the neuron activation is 32 times the up
    // projection: 32 · 3/32 = 3 and 32 · 4/32 = 4, all exact dyadics.
    ModelConfig cfg = make_config(1, 2, 1, 1, 1, 2, 8, 10000.0f, /*norm_eps=*/0.0f);
    ModelWeights model;
    model.config = cfg;
    model.token_embedding = Tensor::from_data({2, 2}, {1.0f, 1.0f, 2.0f, -2.0f});
    model.final_norm = Tensor::from_data({2}, {1.0f, 1.0f});
    model.lm_head = Tensor({2, 2});
    BlockWeights blk;
    blk.attention_present = false;
    blk.ffn_norm = Tensor::from_data({2}, {1.0f, 1.0f});
    blk.w_gate = Tensor::from_data({1, 2}, {32.0f, 0.0f});
    blk.w_up = Tensor::from_data({1, 2}, {7.0f / 64.0f, -1.0f / 64.0f});
    blk.w_down = Tensor({2, 1});
    model.blocks.push_back(std::move(blk));
    model.validate();
    return model;
}

TokenCorpus hand_score_corpus() {
    TokenCorpus corpus;
    corpus.seq_len = 2;
    corpus.vocab_size = 2;
    corpus.sequences = {{0u, 1u}};
    return corpus;
}

ModelWeights zero_masked_model(const ModelWeights& model, const NeuronMask& mask) {
    ModelWeights out = model;
    for (size_t b = 0; b < out.blocks.size(); ++b) {
        BlockWeights& blk = out.blocks[b];
        const auto& kept = mask.kept_per_block[b];
        const int64_t d_int = blk.d_int();
        const int64_t in_w = blk.w_gate.dim(1);
        std::vector<bool> keep(static_cast<size_t>(d_int), false);
        for (int32_t idx : kept) {
            keep[static_cast<size_t>(idx)] = true;
        }
        for (int64_t j = 0; j < d_int; ++j) {
            if (keep[static_cast<size_t>(j)]) {
                continue;
            }
            for (int64_t c = 0; c < in_w; ++c) {
                blk.w_gate.at(j * in_w + c) = 0.0f;
                blk.w_up.at(j * in_w + c) = 0.0f;
            }
        }
    }
    return out;
}

ModelWeights sliced_model(const ModelWeights& model, const NeuronMask& mask) {
    ModelWeights out = model;
    for (size_t b = 0; b < out.blocks.size(); ++b) {
        out.blocks[b] = slice_ffn(model.blocks[b], mask.kept_per_block[b]);
        out.config.d_int_per_block[b] = out.blocks[b].d_int();
    }
    out.validate();
    return out;
}

std::vector<int32_t> random_kept(int32_t d_int, int32_t k, uint64_t seed) {
    std::vector<int32_t> all(static_cast<size_t>(d_int));
    std::iota(all.begin(), all.end(), 0);
    SplitMix64 rng(seed);
    for (int32_t i = 0; i < k; ++i) {
        int32_t j = i + static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(d_int - i)));
        std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(j)]);
    }
    all.resize(static_cast<size_t>(k));
    std::sort(all.begin(), all.end());
    return all;
}

} // namespace shear::testsupport
