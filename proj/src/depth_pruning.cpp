#include "shear/depth_pruning.hpp"

#include <string>

#include "shear/error.hpp"
#include "shear/threading.hpp"

namespace shear {

namespace {

void require_attention(const ModelWeights& model, int32_t block_index) {
    if (block_index < 0 || block_index >= model.config.num_blocks) {
        throw ValidationError("block index " + std::to_string(block_index) + " out of range");
    }
    if (!model.blocks[static_cast<size_t>(block_index)].attention_present) {
        throw ValidationError("attention of block " + std::to_string(block_index) +
                              " is already removed");
    }
}

} // namespace

double evaluate_candidate(const ModelWeights& model, const TokenCorpus& calib,
                          int32_t block_index) {
    require_attention(model, block_index);
    return evaluate_perplexity(model, calib, block_index).perplexity;
}

std::pair<ModelWeights, DepthPruneState> greedy_remove_attentions(const ModelWeights& model,
                                                                  const TokenCorpus& calib,
                                                                  int32_t n_remove) {
    int32_t present = 0;
    for (const BlockWeights& blk : model.blocks) {
        present += blk.attention_present ? 1 : 0;
    }
    if (n_remove < 0 || n_remove > present) {
        throw ValidationError("n_remove = " + std::to_string(n_remove) + " exceeds the " +
                              std::to_string(present) + " attentions present");
    }
    if (n_remove > 0 && calib.sequences.empty()) {
        throw ValidationError("greedy attention removal requires a non-empty calibration set");
    }

    // Removal is a flag flip during the search; the weights come off at the
    // end, once the removal set is final.
    ModelWeights work = model;
    DepthPruneState state;
    state.step = n_remove;

    for (int32_t step = 0; step < n_remove; ++step) {
        std::vector<int32_t> candidates;
        for (int32_t b = 0; b < work.config.num_blocks; ++b) {
            if (work.blocks[static_cast<size_t>(b)].attention_present) {
                candidates.push_back(b);
            }
        }
        std::vector<double> ppl(candidates.size(), 0.0);
        parallel_for_index(static_cast<int64_t>(candidates.size()), [&](int64_t i) {
            ppl[static_cast<size_t>(i)] =
                evaluate_candidate(work, calib, candidates[static_cast<size_t>(i)]);
        });
        // Strict minimum; scanning in ascending block order makes ties go to
        // the lowest index.
        size_t best = 0;
        for (size_t i = 1; i < candidates.size(); ++i) {
            if (ppl[i] < ppl[best]) {
                best = i;
            }
        }
        work.blocks[static_cast<size_t>(candidates[best])].attention_present = false;
        state.removed_order.push_back({candidates[best], ppl[best]});
    }

    for (int32_t b = 0; b < work.config.num_blocks; ++b) {
        BlockWeights& blk = work.blocks[static_cast<size_t>(b)];
        if (blk.attention_present) {
            state.remaining_attention_blocks.push_back(b);
        } else {
            blk.wq = Tensor();
            blk.wk = Tensor();
            blk.wv = Tensor();
            blk.wo = Tensor();
            blk.attn_norm = Tensor();
        }
    }
    work.validate();
    return {std::move(work), std::move(state)};
}

} // namespace shear
