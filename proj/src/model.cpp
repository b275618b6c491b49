#include "shear/model.hpp"

#include <cmath>
#include <string>

#include "shear/error.hpp"
#include "shear/threading.hpp"

namespace shear {

void ModelConfig::validate() const {
    if (num_blocks < 1) {
        throw ValidationError("num_blocks must be >= 1");
    }
    if (static_cast<int32_t>(d_int_per_block.size()) != num_blocks) {
        throw ValidationError("d_int_per_block length must equal num_blocks");
    }
    for (int32_t d : d_int_per_block) {
        if (d < 0) {
            throw ValidationError("d_int must be >= 0");
        }
    }
    if (n_heads < 1 || n_kv_heads < 1 || n_heads % n_kv_heads != 0) {
        throw ValidationError("n_heads must be a positive multiple of n_kv_heads");
    }
    if (head_dim < 1 || n_heads * head_dim != d_model) {
        throw ValidationError("n_heads * head_dim must equal d_model");
    }
    if (vocab_size < 1 || max_seq_len < 1) {
        throw ValidationError("vocab_size and max_seq_len must be >= 1");
    }
}

namespace {

void expect_shape(const Tensor& t, int64_t r, int64_t c, const char* name) {
    if (t.rank() != 2 || t.dim(0) != r || t.dim(1) != c) {
        throw ValidationError(std::string(name) + " has unexpected shape");
    }
}

void expect_row(const Tensor& t, int64_t n, const char* name) {
    if (t.rank() != 1 || t.dim(0) != n) {
        throw ValidationError(std::string(name) + " has unexpected length");
    }
}

void check_dim_list(const std::vector<int32_t>& dims, int32_t bound, const char* name) {
    int32_t prev = -1;
    for (int32_t d : dims) {
        if (d <= prev || d >= bound) {
            throw ValidationError(std::string(name) +
                                  " must be strictly increasing and < " + std::to_string(bound));
        }
        prev = d;
    }
}

} // namespace

int64_t BlockWeights::attn_param_count() const {
    return wq.size() + wk.size() + wv.size() + wo.size();
}

int64_t BlockWeights::ffn_param_count() const {
    return w_gate.size() + w_up.size() + w_down.size();
}

void ModelWeights::validate() const {
    config.validate();
    if (static_cast<int32_t>(blocks.size()) != config.num_blocks) {
        throw ValidationError("blocks length must equal num_blocks");
    }
    expect_shape(token_embedding, config.vocab_size, config.d_model, "token_embedding");
    expect_shape(lm_head, config.vocab_size, config.d_model, "lm_head");
    expect_row(final_norm, config.d_model, "final_norm");
    for (int32_t b = 0; b < config.num_blocks; ++b) {
        const BlockWeights& blk = blocks[static_cast<size_t>(b)];
        const int32_t d_int = config.d_int_per_block[static_cast<size_t>(b)];
        if (blk.attention_present) {
            expect_shape(blk.wq, config.d_model, config.d_model, "wq");
            expect_shape(blk.wk, config.d_model, config.kv_dim(), "wk");
            expect_shape(blk.wv, config.d_model, config.kv_dim(), "wv");
            expect_shape(blk.wo, config.d_model, config.d_model, "wo");
            expect_row(blk.attn_norm, config.d_model, "attn_norm");
        } else if (blk.attn_param_count() != 0) {
            throw ValidationError("removed attention must have zero-sized projections");
        }
        expect_row(blk.ffn_norm, config.d_model, "ffn_norm");
        const int64_t in_w = blk.ffn_in_dims.empty()
                                 ? config.d_model
                                 : static_cast<int64_t>(blk.ffn_in_dims.size());
        const int64_t out_w = blk.ffn_out_dims.empty()
                                  ? config.d_model
                                  : static_cast<int64_t>(blk.ffn_out_dims.size());
        expect_shape(blk.w_gate, d_int, in_w, "w_gate");
        expect_shape(blk.w_up, d_int, in_w, "w_up");
        expect_shape(blk.w_down, out_w, d_int, "w_down");
        check_dim_list(blk.ffn_in_dims, config.d_model, "ffn_in_dims");
        check_dim_list(blk.ffn_out_dims, config.d_model, "ffn_out_dims");
        if (!blk.kept_neurons.empty()) {
            if (blk.original_d_int < d_int) {
                throw ValidationError("original_d_int must be >= current d_int");
            }
            if (static_cast<int32_t>(blk.kept_neurons.size()) != d_int) {
                throw ValidationError("kept_neurons length must equal current d_int");
            }
            check_dim_list(blk.kept_neurons, blk.original_d_int, "kept_neurons");
        }
    }
}

namespace {

// Gathers the listed columns of a [T × d_model] tensor.
Tensor gather_columns(const Tensor& x, const std::vector<int32_t>& dims) {
    const int64_t t_len = x.dim(0);
    const int64_t n = static_cast<int64_t>(dims.size());
    Tensor out({t_len, n});
    for (int64_t t = 0; t < t_len; ++t) {
        auto src = x.row(t);
        auto dst = out.row(t);
        for (int64_t i = 0; i < n; ++i) {
            dst[static_cast<size_t>(i)] = src[static_cast<size_t>(dims[static_cast<size_t>(i)])];
        }
    }
    return out;
}

// Scatters a [T × |dims|] tensor into a zero-filled [T × width] tensor.
Tensor scatter_columns(const Tensor& x, const std::vector<int32_t>& dims, int64_t width) {
    const int64_t t_len = x.dim(0);
    Tensor out({t_len, width});
    for (int64_t t = 0; t < t_len; ++t) {
        auto src = x.row(t);
        auto dst = out.row(t);
        for (size_t i = 0; i < dims.size(); ++i) {
            dst[static_cast<size_t>(dims[i])] = src[i];
        }
    }
    return out;
}

Tensor norm_rows(const Tensor& x, const Tensor& weight, float eps) {
    Tensor out(x.shape());
    for (int64_t t = 0; t < x.dim(0); ++t) {
        rms_norm_row(x.row(t), weight.data(), eps, out.row(t));
    }
    return out;
}

void add_rows(Tensor& x, const Tensor& delta) {
    for (int64_t i = 0; i < x.size(); ++i) {
        x.at(i) += delta.at(i);
    }
}

// Causal multi-head attention with rotary embeddings and kv-head grouping.
Tensor attention(const ModelConfig& cfg, const BlockWeights& blk, const Tensor& x_normed) {
    const int64_t t_len = x_normed.dim(0);
    const int32_t hd = cfg.head_dim;
    const int32_t group = cfg.n_heads / cfg.n_kv_heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(hd));

    Tensor q = matmul(x_normed, blk.wq); // [T × d_model]
    Tensor k = matmul(x_normed, blk.wk); // [T × kv_dim]
    Tensor v = matmul(x_normed, blk.wv); // [T × kv_dim]

    std::vector<int64_t> positions(static_cast<size_t>(t_len));
    for (int64_t t = 0; t < t_len; ++t) {
        positions[static_cast<size_t>(t)] = t;
    }

    auto rotate_heads = [&](Tensor& mat, int32_t n_heads) {
        for (int32_t h = 0; h < n_heads; ++h) {
            Tensor head({t_len, hd});
            for (int64_t t = 0; t < t_len; ++t) {
                auto src = mat.row(t);
                auto dst = head.row(t);
                for (int32_t d = 0; d < hd; ++d) {
                    dst[static_cast<size_t>(d)] = src[static_cast<size_t>(h * hd + d)];
                }
            }
            Tensor rotated = rope_apply(head, cfg.rope_theta, positions);
            for (int64_t t = 0; t < t_len; ++t) {
                auto src = rotated.row(t);
                auto dst = mat.row(t);
                for (int32_t d = 0; d < hd; ++d) {
                    dst[static_cast<size_t>(h * hd + d)] = src[static_cast<size_t>(d)];
                }
            }
        }
    };
    rotate_heads(q, cfg.n_heads);
    rotate_heads(k, cfg.n_kv_heads);

    // Softmax runs over each query's causal prefix only; the [T × T] score
    // matrix with masked entries is never materialized.
    Tensor mixed({t_len, cfg.d_model});
    std::vector<float> scores(static_cast<size_t>(t_len));
    std::vector<float> probs(static_cast<size_t>(t_len));
    for (int32_t h = 0; h < cfg.n_heads; ++h) {
        const int32_t kv_h = h / group;
        for (int64_t i = 0; i < t_len; ++i) {
            auto q_row = q.row(i);
            for (int64_t j = 0; j <= i; ++j) {
                auto k_row = k.row(j);
                double dot = 0.0;
                for (int32_t d = 0; d < hd; ++d) {
                    dot += static_cast<double>(q_row[static_cast<size_t>(h * hd + d)]) *
                           static_cast<double>(k_row[static_cast<size_t>(kv_h * hd + d)]);
                }
                scores[static_cast<size_t>(j)] = static_cast<float>(dot * inv_sqrt_dk);
            }
            softmax_row(std::span<const float>(scores.data(), static_cast<size_t>(i + 1)),
                        std::span<float>(probs.data(), static_cast<size_t>(i + 1)));
            auto dst = mixed.row(i);
            for (int32_t d = 0; d < hd; ++d) {
                double acc = 0.0;
                for (int64_t j = 0; j <= i; ++j) {
                    acc += static_cast<double>(probs[static_cast<size_t>(j)]) *
                           static_cast<double>(v.row(j)[static_cast<size_t>(kv_h * hd + d)]);
                }
                dst[static_cast<size_t>(h * hd + d)] = static_cast<float>(acc);
            }
        }
    }
    return matmul(mixed, blk.wo);
}

Tensor ffn(const BlockWeights& blk, const Tensor& x_normed, int64_t d_model, Tensor* hidden_out) {
    const Tensor* input = &x_normed;
    Tensor gathered;
    if (!blk.ffn_in_dims.empty()) {
        gathered = gather_columns(x_normed, blk.ffn_in_dims);
        input = &gathered;
    }
    Tensor gate = matmul_nt(*input, blk.w_gate); // [T × d_int]
    Tensor up = matmul_nt(*input, blk.w_up);
    Tensor hidden = silu(gate);
    for (int64_t i = 0; i < hidden.size(); ++i) {
        hidden.at(i) *= up.at(i);
    }
    if (hidden_out != nullptr) {
        *hidden_out = hidden;
    }
    Tensor down = matmul_nt(hidden, blk.w_down);
    if (!blk.ffn_out_dims.empty()) {
        return scatter_columns(down, blk.ffn_out_dims, d_model);
    }
    return down;
}

} // namespace

Tensor forward_logits(const ModelWeights& model, std::span<const uint32_t> tokens,
                      ForwardCapture* capture, int32_t disable_attention) {
    const ModelConfig& cfg = model.config;
    const int64_t t_len = static_cast<int64_t>(tokens.size());
    if (t_len < 1) {
        throw ValidationError("forward_logits requires at least one token");
    }
    if (t_len > cfg.max_seq_len) {
        throw ValidationError("sequence length " + std::to_string(t_len) +
                              " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    }
    for (uint32_t id : tokens) {
        if (id >= static_cast<uint32_t>(cfg.vocab_size)) {
            throw ValidationError("token id " + std::to_string(id) + " out of range");
        }
    }

    if (capture != nullptr) {
        capture->ffn_hidden.clear();
        capture->ffn_input.clear();
        capture->ffn_output.clear();
    }

    Tensor x({t_len, cfg.d_model});
    for (int64_t t = 0; t < t_len; ++t) {
        auto src = model.token_embedding.row(tokens[static_cast<size_t>(t)]);
        auto dst = x.row(t);
        for (int32_t d = 0; d < cfg.d_model; ++d) {
            dst[static_cast<size_t>(d)] = src[static_cast<size_t>(d)];
        }
    }

    for (int32_t b = 0; b < cfg.num_blocks; ++b) {
        const BlockWeights& blk = model.blocks[static_cast<size_t>(b)];
        // A removed attention skips the whole branch, pre-norm included.
        if (blk.attention_present && b != disable_attention) {
            Tensor xn = norm_rows(x, blk.attn_norm, cfg.norm_eps);
            Tensor attn_out = attention(cfg, blk, xn);
            add_rows(x, attn_out);
        }
        Tensor xn = norm_rows(x, blk.ffn_norm, cfg.norm_eps);
        if (capture != nullptr && capture->want_ffn_io) {
            capture->ffn_input.push_back(xn);
        }
        Tensor hidden;
        Tensor ffn_out = ffn(blk, xn, cfg.d_model,
                             (capture != nullptr && capture->want_ffn_hidden) ? &hidden : nullptr);
        if (capture != nullptr && capture->want_ffn_hidden) {
            capture->ffn_hidden.push_back(std::move(hidden));
        }
        if (capture != nullptr && capture->want_ffn_io) {
            capture->ffn_output.push_back(ffn_out);
        }
        add_rows(x, ffn_out);
    }

    Tensor xf = norm_rows(x, model.final_norm, cfg.norm_eps);
    return matmul_nt(xf, model.lm_head);
}

EvalReport evaluate_perplexity(const ModelWeights& model, const TokenCorpus& corpus,
                               int32_t disable_attention) {
    if (corpus.sequences.empty()) {
        throw ValidationError("perplexity requires a non-empty corpus");
    }
    if (corpus.seq_len < 2) {
        throw ValidationError("perplexity requires sequences of length >= 2");
    }

    const int64_t n_seq = corpus.num_sequences();
    std::vector<double> per_seq_nll(static_cast<size_t>(n_seq), 0.0);
    parallel_for_index(n_seq, [&](int64_t s) {
        const auto& seq = corpus.sequences[static_cast<size_t>(s)];
        Tensor logits = forward_logits(model, seq, nullptr, disable_attention);
        const int64_t vocab = logits.dim(1);
        double nll = 0.0;
        for (int64_t t = 1; t < static_cast<int64_t>(seq.size()); ++t) {
            auto row = logits.row(t - 1);
            double max_v = row[0];
            for (float v : row) {
                max_v = v > max_v ? static_cast<double>(v) : max_v;
            }
            double sum_exp = 0.0;
            for (int64_t j = 0; j < vocab; ++j) {
                sum_exp += std::exp(static_cast<double>(row[static_cast<size_t>(j)]) - max_v);
            }
            double lse = max_v + std::log(sum_exp);
            nll += lse - static_cast<double>(row[seq[static_cast<size_t>(t)]]);
        }
        per_seq_nll[static_cast<size_t>(s)] = nll;
    });

    double total_nll = 0.0;
    for (int64_t s = 0; s < n_seq; ++s) {
        total_nll += per_seq_nll[static_cast<size_t>(s)];
    }
    EvalReport report;
    report.sequences = n_seq;
    report.tokens_scored = n_seq * (corpus.seq_len - 1);
    report.mean_nll = total_nll / static_cast<double>(report.tokens_scored);
    report.perplexity = std::exp(report.mean_nll);
    return report;
}

ParamCounts count_block_parameters(const ModelWeights& model) {
    ParamCounts counts;
    counts.attn_per_block.reserve(model.blocks.size());
    counts.ffn_per_block.reserve(model.blocks.size());
    for (const BlockWeights& blk : model.blocks) {
        int64_t attn = blk.attention_present ? blk.attn_param_count() : 0;
        int64_t ffn = blk.ffn_param_count();
        counts.attn_per_block.push_back(attn);
        counts.ffn_per_block.push_back(ffn);
        counts.total += attn + ffn;
    }
    return counts;
}

} // namespace shear
