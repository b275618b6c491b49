#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shear/model.hpp"

namespace shear {

// Which structures absorb the sparsity budget.
enum class StageSelection { Stage1Only, Stage2Only, Both };

struct PruningPlan {
    double target_sparsity = 0.0;
    double alpha = 1.5;
    int32_t n_attn_to_remove = 0;
    int32_t neurons_to_prune_per_block = 0;
    int32_t k_per_block = 0;
    int64_t predicted_pruned_params = 0;
    double achieved_sparsity = 0.0;

    // Accounting context the plan was derived from.
    StageSelection stages = StageSelection::Both;
    int32_t num_blocks = 0;
    int32_t d_model = 0;
    int32_t d_int = 0;
    int64_t attn_params_per_block = 0;
    int64_t ffn_params_per_block = 0;
    int64_t total_block_params = 0;

    // Largest |achieved - target| the integer plan may leave behind.
    double granularity_bound() const;
};

// round(B · s^(ffn_params / (alpha · attn_params))), rounding half away from
// zero. Nondecreasing in s; a larger ffn/attn ratio lowers it for s < 1.
int32_t attn_count(int32_t num_blocks, double sparsity, int64_t ffn_params, int64_t attn_params,
                   double alpha);

// Splits a target sparsity into whole attentions plus a uniform per-block
// neuron count. Requires a uniform-width model with every attention present.
// Throws InfeasiblePlanError when the budget exceeds what the prunable
// structures can supply; the message names the maximum reachable sparsity.
PruningPlan make_plan(const ModelWeights& model, double sparsity, double alpha,
                      StageSelection stages = StageSelection::Both);

struct VerifyReport {
    bool pass = false;
    double achieved_sparsity = 0.0;
    double granularity_bound = 0.0;
    std::vector<int32_t> removed_attention_blocks;
    std::vector<int32_t> per_block_d_int;
    std::vector<std::string> diagnostics;
};

// Recounts parameters of the pruned model against the plan: per-block FFN
// deltas, number of removed attentions, and the achieved sparsity within the
// granularity bound. expected_ffn_delta_per_block overrides the neuron-based
// expectation (used by the dimension-based stage-1 variant); pass -1 for the
// default.
VerifyReport verify_plan(const ModelWeights& before, const ModelWeights& after,
                         const PruningPlan& plan, int64_t expected_ffn_delta_per_block = -1);

} // namespace shear
