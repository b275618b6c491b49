#include "shear/pipeline.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "shear/checkpoint.hpp"
#include "shear/error.hpp"
#include "shear/threading.hpp"

namespace shear {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt_float_compact(float v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

std::string join_ints(const std::vector<int32_t>& values) {
    std::string out;
    for (int32_t v : values) {
        out += (out.empty() ? "" : ",") + std::to_string(v);
    }
    return out;
}

bool stage1_enabled(StageSelection stages) {
    return stages == StageSelection::Both || stages == StageSelection::Stage1Only;
}

bool stage2_enabled(StageSelection stages) {
    return stages == StageSelection::Both || stages == StageSelection::Stage2Only;
}

ordered_json plan_to_json(const PruningPlan& plan) {
    ordered_json j;
    j["target_sparsity"] = plan.target_sparsity;
    j["alpha"] = plan.alpha;
    j["n_attn_to_remove"] = plan.n_attn_to_remove;
    j["neurons_to_prune_per_block"] = plan.neurons_to_prune_per_block;
    j["k_per_block"] = plan.k_per_block;
    j["predicted_pruned_params"] = plan.predicted_pruned_params;
    j["achieved_sparsity"] = plan.achieved_sparsity;
    j["stages"] = to_string(plan.stages);
    j["num_blocks"] = plan.num_blocks;
    j["d_model"] = plan.d_model;
    j["d_int"] = plan.d_int;
    j["attn_params_per_block"] = plan.attn_params_per_block;
    j["ffn_params_per_block"] = plan.ffn_params_per_block;
    j["total_block_params"] = plan.total_block_params;
    j["granularity_bound"] = plan.granularity_bound();
    return j;
}

ordered_json eval_to_json(const EvalReport& report, const std::string& corpus_path) {
    ordered_json j;
    j["corpus"] = corpus_path;
    j["sequences"] = report.sequences;
    j["tokens_scored"] = report.tokens_scored;
    j["mean_nll"] = report.mean_nll;
    j["perplexity"] = report.perplexity;
    return j;
}

ordered_json verify_to_json(const VerifyReport& verify) {
    ordered_json j;
    j["pass"] = verify.pass;
    j["achieved_sparsity"] = verify.achieved_sparsity;
    j["granularity_bound"] = verify.granularity_bound;
    j["removed_attention_blocks"] = verify.removed_attention_blocks;
    j["per_block_d_int"] = verify.per_block_d_int;
    j["diagnostics"] = verify.diagnostics;
    return j;
}

} // namespace

const char* to_string(NormKind kind) {
    return kind == NormKind::L2 ? "l2" : "l1";
}

const char* to_string(Stage1Mode mode) {
    return mode == Stage1Mode::Neurons ? "neurons" : "inverted";
}

const char* to_string(StageSelection stages) {
    switch (stages) {
    case StageSelection::Stage1Only:
        return "1";
    case StageSelection::Stage2Only:
        return "2";
    default:
        return "both";
    }
}

NormKind norm_kind_from_string(const std::string& s) {
    if (s == "l2") {
        return NormKind::L2;
    }
    if (s == "l1") {
        return NormKind::L1;
    }
    throw ValidationError("norm_kind must be 'l2' or 'l1', got '" + s + "'");
}

Stage1Mode stage1_mode_from_string(const std::string& s) {
    if (s == "neurons") {
        return Stage1Mode::Neurons;
    }
    if (s == "inverted") {
        return Stage1Mode::Inverted;
    }
    throw ValidationError("stage1_mode must be 'neurons' or 'inverted', got '" + s + "'");
}

StageSelection stages_from_string(const std::string& s) {
    if (s == "1") {
        return StageSelection::Stage1Only;
    }
    if (s == "2") {
        return StageSelection::Stage2Only;
    }
    if (s == "both") {
        return StageSelection::Both;
    }
    throw ValidationError("stages must be '1', '2' or 'both', got '" + s + "'");
}

void RunConfig::validate() const {
    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
        throw ValidationError("sparsity must be in [0, 1)");
    }
    if (!(alpha > 0.0)) {
        throw ValidationError("alpha must be > 0");
    }
    if (stage1_enabled(stages) && calib_samples_stage1 < 1) {
        throw ValidationError("calib_samples_stage1 must be >= 1 when stage 1 runs");
    }
    if (stage2_enabled(stages) && calib_samples_stage2 < 1) {
        throw ValidationError("calib_samples_stage2 must be >= 1 when stage 2 runs");
    }
    if (seq_len < 0) {
        throw ValidationError("seq_len must be >= 0");
    }
    if (threads < 1) {
        throw ValidationError("threads must be >= 1");
    }
}

std::pair<ModelWeights, PruneOutcome> prune_model(const ModelWeights& model,
                                                  const TokenCorpus& calib,
                                                  const RunConfig& config) {
    config.validate();
    set_max_threads(config.threads);

    PruneOutcome outcome;
    outcome.stage1_mode = config.stage1_mode;
    outcome.calib_sequences = calib.num_sequences();
    outcome.calib_seq_len = calib.seq_len;
    outcome.plan = make_plan(model, config.sparsity, config.alpha, config.stages);
    outcome.pre_calib = evaluate_perplexity(model, calib);

    ModelWeights current = model;
    if (stage1_enabled(config.stages) && outcome.plan.neurons_to_prune_per_block > 0) {
        TokenCorpus stage1_calib =
            sample_calibration(calib, config.calib_samples_stage1, config.seed);
        if (config.stage1_mode == Stage1Mode::Neurons) {
            auto [pruned, mask] = apply_stage1(current, stage1_calib, outcome.plan.k_per_block,
                                               config.norm_kind);
            current = std::move(pruned);
        } else {
            // Same parameter budget, spent on hidden dimensions: removing one
            // dimension costs 3·d_int weights versus 3·d_model per neuron.
            const int32_t dims = static_cast<int32_t>(std::llround(
                static_cast<double>(outcome.plan.neurons_to_prune_per_block) *
                static_cast<double>(outcome.plan.d_model) /
                static_cast<double>(outcome.plan.d_int)));
            outcome.inverted_dims_pruned_per_block = dims;
            if (dims > 0) {
                auto [pruned, masks] = apply_stage1_inverted(
                    current, stage1_calib, outcome.plan.d_model - dims, config.norm_kind);
                current = std::move(pruned);
            }
        }
        outcome.stage1_applied = true;
    }

    if (stage2_enabled(config.stages) && outcome.plan.n_attn_to_remove > 0) {
        TokenCorpus stage2_calib =
            sample_calibration(calib, config.calib_samples_stage2, config.seed);
        auto [pruned, state] =
            greedy_remove_attentions(current, stage2_calib, outcome.plan.n_attn_to_remove);
        current = std::move(pruned);
        outcome.removal_trajectory = std::move(state.removed_order);
        outcome.stage2_applied = true;
    }

    outcome.post_calib = evaluate_perplexity(current, calib);
    int64_t expected_ffn_delta = -1;
    if (outcome.stage1_applied && config.stage1_mode == Stage1Mode::Inverted) {
        expected_ffn_delta = 3LL * outcome.inverted_dims_pruned_per_block * outcome.plan.d_int;
    }
    outcome.verification = verify_plan(model, current, outcome.plan, expected_ffn_delta);
    return {std::move(current), std::move(outcome)};
}

PruneOutcome run_prune(const RunConfig& config) {
    config.validate();
    if (config.model_path.empty() || config.calib_path.empty() || config.out_path.empty()) {
        throw ValidationError("prune requires model_path, calib_path and out_path");
    }
    ModelWeights model = load_checkpoint(config.model_path);
    const int32_t seq_len = config.seq_len > 0 ? config.seq_len : model.config.max_seq_len;
    TokenCorpus calib = load_corpus(config.calib_path, seq_len);
    auto [pruned, outcome] = prune_model(model, calib, config);
    save_checkpoint(pruned, config.out_path);
    return outcome;
}

std::string render_plan_text(const PruningPlan& plan) {
    std::string out;
    out += "target_sparsity=" + fmt_double(plan.target_sparsity) + '\n';
    out += "alpha=" + fmt_double(plan.alpha) + '\n';
    out += "n_attn_to_remove=" + std::to_string(plan.n_attn_to_remove) + '\n';
    out += "neurons_to_prune_per_block=" + std::to_string(plan.neurons_to_prune_per_block) + '\n';
    out += "k_per_block=" + std::to_string(plan.k_per_block) + '\n';
    out += "predicted_pruned_params=" + std::to_string(plan.predicted_pruned_params) + '\n';
    out += "achieved_sparsity=" + fmt_double(plan.achieved_sparsity) + '\n';
    out += "stages=" + std::string(to_string(plan.stages)) + '\n';
    out += "num_blocks=" + std::to_string(plan.num_blocks) + '\n';
    out += "d_model=" + std::to_string(plan.d_model) + '\n';
    out += "d_int=" + std::to_string(plan.d_int) + '\n';
    out += "attn_params_per_block=" + std::to_string(plan.attn_params_per_block) + '\n';
    out += "ffn_params_per_block=" + std::to_string(plan.ffn_params_per_block) + '\n';
    out += "total_block_params=" + std::to_string(plan.total_block_params) + '\n';
    out += "granularity_bound=" + fmt_double(plan.granularity_bound()) + '\n';
    return out;
}

std::string render_eval_text(const EvalReport& report, const std::string& corpus_path) {
    std::string out;
    out += "corpus=" + corpus_path + '\n';
    out += "sequences=" + std::to_string(report.sequences) + '\n';
    out += "tokens_scored=" + std::to_string(report.tokens_scored) + '\n';
    out += "mean_nll=" + fmt_double(report.mean_nll) + '\n';
    out += "perplexity=" + fmt_double(report.perplexity) + '\n';
    return out;
}

std::string render_prune_text(const PruneOutcome& outcome, const RunConfig& config) {
    std::string out = render_plan_text(outcome.plan);
    out += "seed=" + std::to_string(config.seed) + '\n';
    out += "norm_kind=" + std::string(to_string(config.norm_kind)) + '\n';
    out += "stage1_mode=" + std::string(to_string(config.stage1_mode)) + '\n';
    out += "calib_sequences=" + std::to_string(outcome.calib_sequences) + '\n';
    out += "calib_seq_len=" + std::to_string(outcome.calib_seq_len) + '\n';
    out += "calib_samples_stage1=" + std::to_string(config.calib_samples_stage1) + '\n';
    out += "calib_samples_stage2=" + std::to_string(config.calib_samples_stage2) + '\n';
    out += "pre_perplexity=" + fmt_double(outcome.pre_calib.perplexity) + '\n';
    out += "pre_mean_nll=" + fmt_double(outcome.pre_calib.mean_nll) + '\n';
    out += "stage1_applied=" + std::string(outcome.stage1_applied ? "1" : "0") + '\n';
    if (outcome.stage1_applied && config.stage1_mode == Stage1Mode::Inverted) {
        out += "inverted_dims_pruned_per_block=" +
               std::to_string(outcome.inverted_dims_pruned_per_block) + '\n';
    }
    out += "stage2_applied=" + std::string(outcome.stage2_applied ? "1" : "0") + '\n';
    for (size_t i = 0; i < outcome.removal_trajectory.size(); ++i) {
        const RemovalStep& step = outcome.removal_trajectory[i];
        out += "removal_step=" + std::to_string(i + 1) + " block=" + std::to_string(step.block) +
               " perplexity=" + fmt_double(step.perplexity) + '\n';
    }
    out += "post_perplexity=" + fmt_double(outcome.post_calib.perplexity) + '\n';
    out += "post_mean_nll=" + fmt_double(outcome.post_calib.mean_nll) + '\n';
    out += "verify=" + std::string(outcome.verification.pass ? "pass" : "fail") + '\n';
    for (const std::string& diag : outcome.verification.diagnostics) {
        out += "verify_diagnostic=" + diag + '\n';
    }
    out += "verify_achieved_sparsity=" + fmt_double(outcome.verification.achieved_sparsity) + '\n';
    out += "removed_attention_blocks=" +
           join_ints(outcome.verification.removed_attention_blocks) + '\n';
    out += "per_block_d_int=" + join_ints(outcome.verification.per_block_d_int) + '\n';
    if (!config.out_path.empty()) {
        out += "out_path=" + config.out_path + '\n';
    }
    return out;
}

std::string render_inspect_text(const ModelWeights& model, const std::string& path) {
    const ModelConfig& cfg = model.config;
    const ParamCounts counts = count_block_parameters(model);
    std::string out;
    out += "checkpoint=" + path + '\n';
    out += "num_blocks=" + std::to_string(cfg.num_blocks) + '\n';
    out += "d_model=" + std::to_string(cfg.d_model) + '\n';
    out += "n_heads=" + std::to_string(cfg.n_heads) + '\n';
    out += "n_kv_heads=" + std::to_string(cfg.n_kv_heads) + '\n';
    out += "head_dim=" + std::to_string(cfg.head_dim) + '\n';
    out += "vocab_size=" + std::to_string(cfg.vocab_size) + '\n';
    out += "max_seq_len=" + std::to_string(cfg.max_seq_len) + '\n';
    out += "rope_theta=" + fmt_float_compact(cfg.rope_theta) + '\n';
    out += "norm_eps=" + fmt_float_compact(cfg.norm_eps) + '\n';
    out += "d_int_per_block=" + join_ints(cfg.d_int_per_block) + '\n';

    std::vector<int32_t> removed;
    for (int32_t b = 0; b < cfg.num_blocks; ++b) {
        if (!model.blocks[static_cast<size_t>(b)].attention_present) {
            removed.push_back(b);
        }
    }
    out += "removed_attention_blocks=" + join_ints(removed) + '\n';
    out += "total_block_params=" + std::to_string(counts.total) + '\n';
    for (int32_t b = 0; b < cfg.num_blocks; ++b) {
        const BlockWeights& blk = model.blocks[static_cast<size_t>(b)];
        out += "block=" + std::to_string(b) +
               " attention=" + (blk.attention_present ? "1" : "0") +
               " d_int=" + std::to_string(blk.d_int()) +
               " attn_params=" + std::to_string(counts.attn_per_block[static_cast<size_t>(b)]) +
               " ffn_params=" + std::to_string(counts.ffn_per_block[static_cast<size_t>(b)]);
        if (!blk.kept_neurons.empty()) {
            out += " original_d_int=" + std::to_string(blk.original_d_int);
        }
        if (!blk.ffn_in_dims.empty()) {
            out += " ffn_in_width=" + std::to_string(blk.ffn_in_dims.size());
        }
        if (!blk.ffn_out_dims.empty()) {
            out += " ffn_out_width=" + std::to_string(blk.ffn_out_dims.size());
        }
        out += '\n';
    }
    return out;
}

std::string render_plan_json(const PruningPlan& plan) {
    return plan_to_json(plan).dump();
}

std::string render_eval_json(const EvalReport& report, const std::string& corpus_path) {
    return eval_to_json(report, corpus_path).dump();
}

std::string render_prune_json(const PruneOutcome& outcome, const RunConfig& config) {
    ordered_json j;
    j["plan"] = plan_to_json(outcome.plan);
    j["seed"] = config.seed;
    j["norm_kind"] = to_string(config.norm_kind);
    j["stage1_mode"] = to_string(config.stage1_mode);
    j["calib_sequences"] = outcome.calib_sequences;
    j["calib_seq_len"] = outcome.calib_seq_len;
    j["calib_samples_stage1"] = config.calib_samples_stage1;
    j["calib_samples_stage2"] = config.calib_samples_stage2;
    j["pre"] = eval_to_json(outcome.pre_calib, config.calib_path);
    j["stage1_applied"] = outcome.stage1_applied;
    if (outcome.stage1_applied && config.stage1_mode == Stage1Mode::Inverted) {
        j["inverted_dims_pruned_per_block"] = outcome.inverted_dims_pruned_per_block;
    }
    j["stage2_applied"] = outcome.stage2_applied;
    ordered_json steps = ordered_json::array();
    for (const RemovalStep& step : outcome.removal_trajectory) {
        ordered_json s;
        s["block"] = step.block;
        s["perplexity"] = step.perplexity;
        steps.push_back(s);
    }
    j["removal_trajectory"] = steps;
    j["post"] = eval_to_json(outcome.post_calib, config.calib_path);
    j["verify"] = verify_to_json(outcome.verification);
    j["out_path"] = config.out_path;
    return j.dump();
}

std::string render_inspect_json(const ModelWeights& model, const std::string& path) {
    const ModelConfig& cfg = model.config;
    const ParamCounts counts = count_block_parameters(model);
    ordered_json j;
    j["checkpoint"] = path;
    j["num_blocks"] = cfg.num_blocks;
    j["d_model"] = cfg.d_model;
    j["n_heads"] = cfg.n_heads;
    j["n_kv_heads"] = cfg.n_kv_heads;
    j["head_dim"] = cfg.head_dim;
    j["vocab_size"] = cfg.vocab_size;
    j["max_seq_len"] = cfg.max_seq_len;
    j["rope_theta"] = cfg.rope_theta;
    j["norm_eps"] = cfg.norm_eps;
    j["d_int_per_block"] = cfg.d_int_per_block;
    std::vector<int32_t> removed;
    for (int32_t b = 0; b < cfg.num_blocks; ++b) {
        if (!model.blocks[static_cast<size_t>(b)].attention_present) {
            removed.push_back(b);
        }
    }
    j["removed_attention_blocks"] = removed;
    j["attn_params_per_block"] = counts.attn_per_block;
    j["ffn_params_per_block"] = counts.ffn_per_block;
    j["total_block_params"] = counts.total;
    return j.dump();
}

} // namespace shear
