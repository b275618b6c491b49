#include "shear/width_pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "shear/error.hpp"
#include "shear/threading.hpp"

namespace shear {

namespace {

double row_norm(const Tensor& activations, int64_t column, NormKind norm_kind) {
    const int64_t t_len = activations.dim(0);
    const int64_t width = activations.dim(1);
    double acc = 0.0;
    for (int64_t t = 0; t < t_len; ++t) {
        double v = activations.at(t * width + column);
        acc += norm_kind == NormKind::L2 ? v * v : std::fabs(v);
    }
    return norm_kind == NormKind::L2 ? std::sqrt(acc) : acc;
}

void check_strictly_increasing(const std::vector<int32_t>& indices, int32_t bound,
                               const char* what) {
    int32_t prev = -1;
    for (int32_t idx : indices) {
        if (idx <= prev || idx >= bound) {
            throw ValidationError(std::string(what) +
                                  " indices must be strictly increasing and < " +
                                  std::to_string(bound));
        }
        prev = idx;
    }
}

std::vector<int32_t> top_k_indices(const std::vector<double>& scores, int32_t k,
                                   const char* what) {
    const int32_t n = static_cast<int32_t>(scores.size());
    if (k < 0 || k > n) {
        throw ValidationError(std::string(what) + ": k = " + std::to_string(k) +
                              " out of range [0, " + std::to_string(n) + "]");
    }
    std::vector<int32_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        double sa = scores[static_cast<size_t>(a)];
        double sb = scores[static_cast<size_t>(b)];
        if (sa != sb) {
            return sa > sb;
        }
        return a < b; // equal scores keep the lower index
    });
    order.resize(static_cast<size_t>(k));
    std::sort(order.begin(), order.end());
    return order;
}

// Mean over sequences of a per-sequence statistic, reduced in corpus order.
template <typename PerSequence>
std::vector<std::vector<double>> mean_over_sequences(const ModelWeights& model,
                                                     const TokenCorpus& calib,
                                                     const std::vector<int64_t>& widths,
                                                     bool want_hidden, bool want_io,
                                                     PerSequence per_sequence) {
    if (calib.sequences.empty()) {
        throw ValidationError("importance scoring requires a non-empty calibration set");
    }
    const int64_t n_seq = calib.num_sequences();
    const size_t n_blocks = model.blocks.size();

    std::vector<std::vector<std::vector<double>>> slots(static_cast<size_t>(n_seq));
    parallel_for_index(n_seq, [&](int64_t s) {
        ForwardCapture capture;
        capture.want_ffn_hidden = want_hidden;
        capture.want_ffn_io = want_io;
        forward_logits(model, calib.sequences[static_cast<size_t>(s)], &capture);
        std::vector<std::vector<double>> per_block(n_blocks);
        for (size_t b = 0; b < n_blocks; ++b) {
            per_block[b].resize(static_cast<size_t>(widths[b]));
            per_sequence(capture, b, per_block[b]);
        }
        slots[static_cast<size_t>(s)] = std::move(per_block);
    });

    std::vector<std::vector<double>> scores(n_blocks);
    for (size_t b = 0; b < n_blocks; ++b) {
        scores[b].assign(static_cast<size_t>(widths[b]), 0.0);
    }
    for (int64_t s = 0; s < n_seq; ++s) {
        for (size_t b = 0; b < n_blocks; ++b) {
            for (size_t j = 0; j < scores[b].size(); ++j) {
                scores[b][j] += slots[static_cast<size_t>(s)][b][j];
            }
        }
    }
    for (auto& block_scores : scores) {
        for (double& v : block_scores) {
            v /= static_cast<double>(n_seq);
        }
    }
    return scores;
}

} // namespace

ImportanceScores score_neurons(const ModelWeights& model, const TokenCorpus& calib,
                               NormKind norm_kind) {
    std::vector<int64_t> widths;
    widths.reserve(model.blocks.size());
    for (const BlockWeights& blk : model.blocks) {
        widths.push_back(blk.d_int());
    }
    ImportanceScores scores;
    scores.norm_kind = norm_kind;
    scores.per_block = mean_over_sequences(
        model, calib, widths, /*want_hidden=*/true, /*want_io=*/false,
        [&](const ForwardCapture& capture, size_t b, std::vector<double>& out) {
            const Tensor& z = capture.ffn_hidden[b];
            for (size_t j = 0; j < out.size(); ++j) {
                out[j] = row_norm(z, static_cast<int64_t>(j), norm_kind);
            }
        });
    return scores;
}

NeuronMask select_top_k(const ImportanceScores& scores, const std::vector<int32_t>& k_per_block) {
    if (k_per_block.size() != scores.per_block.size()) {
        throw ValidationError("k_per_block length must equal the number of blocks");
    }
    NeuronMask mask;
    mask.kept_per_block.reserve(scores.per_block.size());
    for (size_t b = 0; b < scores.per_block.size(); ++b) {
        mask.kept_per_block.push_back(
            top_k_indices(scores.per_block[b], k_per_block[b], "select_top_k"));
    }
    return mask;
}

BlockWeights slice_ffn(const BlockWeights& block, const std::vector<int32_t>& kept_indices) {
    const int32_t d_int = block.d_int();
    check_strictly_increasing(kept_indices, d_int, "slice_ffn");
    const int64_t k = static_cast<int64_t>(kept_indices.size());
    const int64_t in_w = block.w_gate.dim(1);
    const int64_t out_w = block.w_down.dim(0);

    BlockWeights out = block;

    // Gate/up rows first, then the matching down columns.
    Tensor gate({k, in_w});
    Tensor up({k, in_w});
    for (int64_t i = 0; i < k; ++i) {
        const int64_t src = kept_indices[static_cast<size_t>(i)];
        for (int64_t c = 0; c < in_w; ++c) {
            gate.at(i * in_w + c) = block.w_gate.at(src * in_w + c);
            up.at(i * in_w + c) = block.w_up.at(src * in_w + c);
        }
    }
    out.w_gate = std::move(gate);
    out.w_up = std::move(up);

    Tensor down({out_w, k});
    for (int64_t r = 0; r < out_w; ++r) {
        for (int64_t i = 0; i < k; ++i) {
            down.at(r * k + i) =
                block.w_down.at(r * d_int + kept_indices[static_cast<size_t>(i)]);
        }
    }
    out.w_down = std::move(down);

    if (block.kept_neurons.empty()) {
        out.original_d_int = d_int;
        out.kept_neurons = kept_indices;
    } else {
        out.kept_neurons.clear();
        for (int32_t idx : kept_indices) {
            out.kept_neurons.push_back(block.kept_neurons[static_cast<size_t>(idx)]);
        }
    }
    return out;
}

BlockWeights slice_ffn_inverted(const BlockWeights& block, const std::vector<int32_t>& in_dims,
                                const std::vector<int32_t>& out_dims, int32_t d_model) {
    const int32_t cur_in = static_cast<int32_t>(block.w_gate.dim(1));
    const int32_t cur_out = static_cast<int32_t>(block.w_down.dim(0));
    check_strictly_increasing(in_dims, cur_in, "slice_ffn_inverted in_dims");
    check_strictly_increasing(out_dims, cur_out, "slice_ffn_inverted out_dims");
    const int64_t d_int = block.d_int();

    BlockWeights out = block;
    const int64_t n_in = static_cast<int64_t>(in_dims.size());
    Tensor gate({d_int, n_in});
    Tensor up({d_int, n_in});
    for (int64_t r = 0; r < d_int; ++r) {
        for (int64_t i = 0; i < n_in; ++i) {
            const int64_t src = in_dims[static_cast<size_t>(i)];
            gate.at(r * n_in + i) = block.w_gate.at(r * cur_in + src);
            up.at(r * n_in + i) = block.w_up.at(r * cur_in + src);
        }
    }
    out.w_gate = std::move(gate);
    out.w_up = std::move(up);

    const int64_t n_out = static_cast<int64_t>(out_dims.size());
    Tensor down({n_out, d_int});
    for (int64_t i = 0; i < n_out; ++i) {
        const int64_t src = out_dims[static_cast<size_t>(i)];
        for (int64_t c = 0; c < d_int; ++c) {
            down.at(i * d_int + c) = block.w_down.at(src * d_int + c);
        }
    }
    out.w_down = std::move(down);

    // Record hidden-dimension survivors relative to the residual stream.
    out.ffn_in_dims.clear();
    for (int32_t idx : in_dims) {
        out.ffn_in_dims.push_back(block.ffn_in_dims.empty()
                                      ? idx
                                      : block.ffn_in_dims[static_cast<size_t>(idx)]);
    }
    out.ffn_out_dims.clear();
    for (int32_t idx : out_dims) {
        out.ffn_out_dims.push_back(block.ffn_out_dims.empty()
                                       ? idx
                                       : block.ffn_out_dims[static_cast<size_t>(idx)]);
    }
    check_strictly_increasing(out.ffn_in_dims, d_model, "composed ffn_in_dims");
    check_strictly_increasing(out.ffn_out_dims, d_model, "composed ffn_out_dims");
    return out;
}

std::pair<ModelWeights, NeuronMask> apply_stage1(const ModelWeights& model,
                                                 const TokenCorpus& calib, int32_t k_per_block,
                                                 NormKind norm_kind) {
    ImportanceScores scores = score_neurons(model, calib, norm_kind);
    std::vector<int32_t> ks(model.blocks.size(), k_per_block);
    NeuronMask mask = select_top_k(scores, ks);

    ModelWeights pruned = model;
    for (size_t b = 0; b < pruned.blocks.size(); ++b) {
        pruned.blocks[b] = slice_ffn(model.blocks[b], mask.kept_per_block[b]);
        pruned.config.d_int_per_block[b] = pruned.blocks[b].d_int();
    }
    pruned.validate();
    return {std::move(pruned), std::move(mask)};
}

std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>>
score_hidden_dims(const ModelWeights& model, const TokenCorpus& calib, NormKind norm_kind) {
    // Both sides share one capture pass; the input scores are stacked on top
    // of the output scores in each width-2·d_model slot.
    std::vector<int64_t> widths(model.blocks.size(), 2 * model.config.d_model);
    auto stacked = mean_over_sequences(
        model, calib, widths, /*want_hidden=*/false, /*want_io=*/true,
        [&](const ForwardCapture& capture, size_t b, std::vector<double>& out) {
            const size_t dm = out.size() / 2;
            for (size_t k = 0; k < dm; ++k) {
                out[k] = row_norm(capture.ffn_input[b], static_cast<int64_t>(k), norm_kind);
                out[dm + k] = row_norm(capture.ffn_output[b], static_cast<int64_t>(k), norm_kind);
            }
        });
    std::vector<std::vector<double>> in_scores(stacked.size());
    std::vector<std::vector<double>> out_scores(stacked.size());
    const size_t dm = static_cast<size_t>(model.config.d_model);
    for (size_t b = 0; b < stacked.size(); ++b) {
        in_scores[b].assign(stacked[b].begin(), stacked[b].begin() + static_cast<long>(dm));
        out_scores[b].assign(stacked[b].begin() + static_cast<long>(dm), stacked[b].end());
    }
    return {std::move(in_scores), std::move(out_scores)};
}

std::pair<ModelWeights, InvertedMasks> apply_stage1_inverted(const ModelWeights& model,
                                                             const TokenCorpus& calib,
                                                             int32_t k_dim, NormKind norm_kind) {
    auto [in_scores, out_scores] = score_hidden_dims(model, calib, norm_kind);
    InvertedMasks masks;
    masks.in_dims_per_block.reserve(model.blocks.size());
    masks.out_dims_per_block.reserve(model.blocks.size());
    for (size_t b = 0; b < model.blocks.size(); ++b) {
        masks.in_dims_per_block.push_back(
            top_k_indices(in_scores[b], k_dim, "apply_stage1_inverted"));
        masks.out_dims_per_block.push_back(
            top_k_indices(out_scores[b], k_dim, "apply_stage1_inverted"));
    }

    ModelWeights pruned = model;
    for (size_t b = 0; b < pruned.blocks.size(); ++b) {
        pruned.blocks[b] = slice_ffn_inverted(model.blocks[b], masks.in_dims_per_block[b],
                                              masks.out_dims_per_block[b], model.config.d_model);
    }
    pruned.validate();
    return {std::move(pruned), std::move(masks)};
}

} // namespace shear
