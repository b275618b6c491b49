#include "shear/budget.hpp"

#include <cmath>
#include <cstdio>

#include "shear/error.hpp"

namespace shear {

namespace {

int64_t round_half_away(double v) {
    return static_cast<int64_t>(std::llround(v));
}

std::string format_ratio(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// Parameter shape of an unpruned, uniform-width model.
struct UniformCounts {
    int32_t num_blocks = 0;
    int32_t d_model = 0;
    int32_t d_int = 0;
    int64_t attn = 0;
    int64_t ffn = 0;
    int64_t total = 0;
};

UniformCounts uniform_counts(const ModelWeights& model) {
    model.validate();
    UniformCounts c;
    c.num_blocks = model.config.num_blocks;
    c.d_model = model.config.d_model;
    c.d_int = model.config.d_int_per_block[0];
    for (int32_t b = 0; b < c.num_blocks; ++b) {
        const BlockWeights& blk = model.blocks[static_cast<size_t>(b)];
        if (model.config.d_int_per_block[static_cast<size_t>(b)] != c.d_int) {
            throw ValidationError("planning requires a uniform intermediate width");
        }
        if (!blk.attention_present) {
            throw ValidationError("planning requires every attention to be present");
        }
        if (!blk.ffn_in_dims.empty() || !blk.ffn_out_dims.empty()) {
            throw ValidationError("planning requires full-width FFN boundaries");
        }
    }
    const BlockWeights& first = model.blocks[0];
    c.attn = first.attn_param_count();
    c.ffn = first.ffn_param_count();
    c.total = static_cast<int64_t>(c.num_blocks) * (c.attn + c.ffn);
    return c;
}

} // namespace

double PruningPlan::granularity_bound() const {
    return (static_cast<double>(num_blocks) * 3.0 * static_cast<double>(d_model) +
            static_cast<double>(attn_params_per_block)) /
           static_cast<double>(total_block_params);
}

int32_t attn_count(int32_t num_blocks, double sparsity, int64_t ffn_params, int64_t attn_params,
                   double alpha) {
    if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
        throw ValidationError("sparsity must be in [0, 1]");
    }
    if (!(alpha > 0.0)) {
        throw ValidationError("alpha must be > 0");
    }
    if (attn_params <= 0 || ffn_params < 0 || num_blocks < 1) {
        throw ValidationError("attn_count requires positive attention parameters and blocks");
    }
    if (sparsity == 0.0) {
        return 0;
    }
    double exponent = static_cast<double>(ffn_params) /
                      (alpha * static_cast<double>(attn_params));
    double raw = static_cast<double>(num_blocks) * std::pow(sparsity, exponent);
    return static_cast<int32_t>(round_half_away(raw));
}

PruningPlan make_plan(const ModelWeights& model, double sparsity, double alpha,
                      StageSelection stages) {
    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
        throw ValidationError("target sparsity must be in [0, 1)");
    }
    if (!(alpha > 0.0)) {
        throw ValidationError("alpha must be > 0");
    }
    const UniformCounts c = uniform_counts(model);
    const int64_t neuron_cost = 3LL * c.d_model; // one gate row, one up row, one down column
    const int64_t target = round_half_away(sparsity * static_cast<double>(c.total));

    PruningPlan plan;
    plan.target_sparsity = sparsity;
    plan.alpha = alpha;
    plan.stages = stages;
    plan.num_blocks = c.num_blocks;
    plan.d_model = c.d_model;
    plan.d_int = c.d_int;
    plan.attn_params_per_block = c.attn;
    plan.ffn_params_per_block = c.ffn;
    plan.total_block_params = c.total;

    int64_t n_attn = 0;
    int64_t neurons = 0;
    if (stages == StageSelection::Stage2Only) {
        n_attn = round_half_away(static_cast<double>(target) / static_cast<double>(c.attn));
        if (n_attn > c.num_blocks) {
            double max_s = static_cast<double>(c.num_blocks * c.attn) /
                           static_cast<double>(c.total);
            throw InfeasiblePlanError(
                "sparsity " + format_ratio(sparsity) +
                " is not reachable with attention removal alone; the theoretical maximum is " +
                format_ratio(max_s));
        }
    } else {
        if (stages == StageSelection::Both) {
            n_attn = attn_count(c.num_blocks, sparsity, c.ffn, c.attn, alpha);
            while (n_attn * c.attn > target) {
                --n_attn;
            }
        }
        int64_t residual = target - n_attn * c.attn;
        neurons = round_half_away(static_cast<double>(residual) /
                                  static_cast<double>(c.num_blocks * neuron_cost));
        if (neurons > c.d_int) {
            double max_s = static_cast<double>(n_attn * c.attn +
                                               static_cast<int64_t>(c.num_blocks) * c.ffn) /
                           static_cast<double>(c.total);
            throw InfeasiblePlanError(
                "sparsity " + format_ratio(sparsity) + " needs " + std::to_string(neurons) +
                " neurons per block but only " + std::to_string(c.d_int) +
                " exist; the theoretical maximum with " + std::to_string(n_attn) +
                " attention removals is " + format_ratio(max_s));
        }
    }

    plan.n_attn_to_remove = static_cast<int32_t>(n_attn);
    plan.neurons_to_prune_per_block = static_cast<int32_t>(neurons);
    plan.k_per_block = c.d_int - static_cast<int32_t>(neurons);
    plan.predicted_pruned_params =
        n_attn * c.attn + static_cast<int64_t>(c.num_blocks) * neurons * neuron_cost;
    plan.achieved_sparsity = static_cast<double>(plan.predicted_pruned_params) /
                             static_cast<double>(c.total);
    return plan;
}

VerifyReport verify_plan(const ModelWeights& before, const ModelWeights& after,
                         const PruningPlan& plan, int64_t expected_ffn_delta_per_block) {
    before.validate();
    after.validate();
    VerifyReport report;
    report.granularity_bound = plan.granularity_bound();

    if (before.config.num_blocks != after.config.num_blocks) {
        report.diagnostics.push_back("block count changed from " +
                                     std::to_string(before.config.num_blocks) + " to " +
                                     std::to_string(after.config.num_blocks));
        return report;
    }

    const ParamCounts counts_before = count_block_parameters(before);
    const ParamCounts counts_after = count_block_parameters(after);
    const int64_t expected_ffn_delta = expected_ffn_delta_per_block >= 0
                                           ? expected_ffn_delta_per_block
                                           : static_cast<int64_t>(plan.neurons_to_prune_per_block) *
                                                 3 * plan.d_model;

    for (int32_t b = 0; b < before.config.num_blocks; ++b) {
        const bool was = before.blocks[static_cast<size_t>(b)].attention_present;
        const bool is = after.blocks[static_cast<size_t>(b)].attention_present;
        if (was && !is) {
            report.removed_attention_blocks.push_back(b);
        } else if (!was && is) {
            report.diagnostics.push_back("block " + std::to_string(b) +
                                         ": attention reappeared after pruning");
        }
        const int64_t delta = counts_before.ffn_per_block[static_cast<size_t>(b)] -
                              counts_after.ffn_per_block[static_cast<size_t>(b)];
        if (delta != expected_ffn_delta) {
            report.diagnostics.push_back(
                "block " + std::to_string(b) + ": ffn parameter delta " + std::to_string(delta) +
                " != expected " + std::to_string(expected_ffn_delta) + " (off by " +
                std::to_string(delta - expected_ffn_delta) + ")");
        }
        report.per_block_d_int.push_back(after.config.d_int_per_block[static_cast<size_t>(b)]);
    }

    if (static_cast<int32_t>(report.removed_attention_blocks.size()) != plan.n_attn_to_remove) {
        std::string blocks;
        for (int32_t b : report.removed_attention_blocks) {
            blocks += (blocks.empty() ? "" : ",") + std::to_string(b);
        }
        report.diagnostics.push_back(
            "attention removals [" + blocks + "] count " +
            std::to_string(report.removed_attention_blocks.size()) + " != planned " +
            std::to_string(plan.n_attn_to_remove));
    }

    report.achieved_sparsity =
        static_cast<double>(counts_before.total - counts_after.total) /
        static_cast<double>(counts_before.total);
    if (std::fabs(report.achieved_sparsity - plan.achieved_sparsity) >
        report.granularity_bound) {
        report.diagnostics.push_back("achieved sparsity " +
                                     format_ratio(report.achieved_sparsity) +
                                     " differs from planned " +
                                     format_ratio(plan.achieved_sparsity) +
                                     " by more than the granularity bound " +
                                     format_ratio(report.granularity_bound));
    }

    report.pass = report.diagnostics.empty();
    return report;
}

} // namespace shear
