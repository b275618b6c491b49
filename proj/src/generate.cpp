#include "shear/generate.hpp"

#include <cmath>

#include "shear/error.hpp"
#include "shear/rng.hpp"

namespace shear {

namespace {

Tensor random_tensor(std::vector<int64_t> shape, float scale, SplitMix64& rng) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) {
        t.at(i) = rng.next_symmetric(scale);
    }
    return t;
}

Tensor ones(int64_t n) {
    Tensor t({n});
    for (int64_t i = 0; i < n; ++i) {
        t.at(i) = 1.0f;
    }
    return t;
}

} // namespace

ModelWeights random_model(const ModelConfig& config, uint64_t seed) {
    config.validate();
    SplitMix64 rng(seed);
    const float w_scale = 2.0f / std::sqrt(static_cast<float>(config.d_model));
    const int64_t dm = config.d_model;
    const int64_t kv = config.kv_dim();

    ModelWeights model;
    model.config = config;
    model.token_embedding = random_tensor({config.vocab_size, dm}, 1.0f, rng);
    model.final_norm = ones(dm);
    model.lm_head = random_tensor({config.vocab_size, dm}, w_scale, rng);
    model.blocks.reserve(static_cast<size_t>(config.num_blocks));
    for (int32_t b = 0; b < config.num_blocks; ++b) {
        const int64_t d_int = config.d_int_per_block[static_cast<size_t>(b)];
        BlockWeights blk;
        blk.attn_norm = ones(dm);
        blk.wq = random_tensor({dm, dm}, w_scale, rng);
        blk.wk = random_tensor({dm, kv}, w_scale, rng);
        blk.wv = random_tensor({dm, kv}, w_scale, rng);
        blk.wo = random_tensor({dm, dm}, w_scale, rng);
        blk.ffn_norm = ones(dm);
        blk.w_gate = random_tensor({d_int, dm}, w_scale, rng);
        blk.w_up = random_tensor({d_int, dm}, w_scale, rng);
        blk.w_down = random_tensor({dm, d_int}, w_scale, rng);
        model.blocks.push_back(std::move(blk));
    }
    model.validate();
    return model;
}

TokenCorpus sample_corpus(const ModelWeights& model, int64_t n_sequences, int32_t seq_len,
                          uint64_t seed) {
    if (seq_len < 1 || seq_len > model.config.max_seq_len) {
        throw ValidationError("seq_len must be in [1, max_seq_len]");
    }
    const int32_t vocab = model.config.vocab_size;
    SplitMix64 rng(seed);
    TokenCorpus corpus;
    corpus.seq_len = seq_len;
    corpus.vocab_size = vocab;
    corpus.sequences.reserve(static_cast<size_t>(n_sequences));
    std::vector<float> probs(static_cast<size_t>(vocab));
    for (int64_t s = 0; s < n_sequences; ++s) {
        std::vector<uint32_t> seq;
        seq.reserve(static_cast<size_t>(seq_len));
        seq.push_back(static_cast<uint32_t>(rng.next_below(static_cast<uint64_t>(vocab))));
        for (int32_t t = 1; t < seq_len; ++t) {
            Tensor logits = forward_logits(model, seq);
            softmax_row(logits.row(t - 1), probs);
            double u = rng.next_double();
            double cum = 0.0;
            uint32_t pick = static_cast<uint32_t>(vocab - 1);
            for (int32_t j = 0; j < vocab; ++j) {
                cum += static_cast<double>(probs[static_cast<size_t>(j)]);
                if (u < cum) {
                    pick = static_cast<uint32_t>(j);
                    break;
                }
            }
            seq.push_back(pick);
        }
        corpus.sequences.push_back(std::move(seq));
    }
    return corpus;
}

TokenCorpus random_corpus(int32_t vocab_size, int64_t n_sequences, int32_t seq_len,
                          uint64_t seed) {
    if (vocab_size < 1 || seq_len < 1 || n_sequences < 0) {
        throw ValidationError("random_corpus arguments out of range");
    }
    SplitMix64 rng(seed);
    TokenCorpus corpus;
    corpus.seq_len = seq_len;
    corpus.vocab_size = vocab_size;
    corpus.sequences.reserve(static_cast<size_t>(n_sequences));
    for (int64_t s = 0; s < n_sequences; ++s) {
        std::vector<uint32_t> seq(static_cast<size_t>(seq_len));
        for (int32_t t = 0; t < seq_len; ++t) {
            seq[static_cast<size_t>(t)] =
                static_cast<uint32_t>(rng.next_below(static_cast<uint64_t>(vocab_size)));
        }
        corpus.sequences.push_back(std::move(seq));
    }
    return corpus;
}

} // namespace shear
