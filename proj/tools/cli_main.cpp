// Command-line frontend: plan / prune / eval / inspect.
// Exit codes: 0 success, 1 I/O or validation error, 2 infeasible plan.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shear/checkpoint.hpp"
#include "shear/error.hpp"
#include "shear/pipeline.hpp"
#include "shear/threading.hpp"

namespace {

struct CliOptions {
    shear::RunConfig config;
    std::string norm_kind = "l2";
    std::string stage1_mode = "neurons";
    std::string stages = "both";
    bool json = false;
};

void add_common_flags(CLI::App* cmd, CliOptions& opts) {
    cmd->add_option("--seq-len", opts.config.seq_len,
                    "Sequence length used to window corpora (default: model max_seq_len)");
    cmd->add_option("--threads", opts.config.threads, "Worker thread cap");
    cmd->add_flag("--json", opts.json, "Append a machine-readable JSON report line");
}

void finish_config(CliOptions& opts) {
    opts.config.norm_kind = shear::norm_kind_from_string(opts.norm_kind);
    opts.config.stage1_mode = shear::stage1_mode_from_string(opts.stage1_mode);
    opts.config.stages = shear::stages_from_string(opts.stages);
}

int run(int argc, char** argv) {
    CLI::App app{"Two-stage structured pruning for small decoder-only transformers"};
    app.require_subcommand(1);

    CliOptions opts;

    CLI::App* plan = app.add_subcommand("plan", "Derive a pruning plan for a target sparsity");
    plan->add_option("--model-path", opts.config.model_path, "Model checkpoint")->required();
    plan->add_option("--sparsity", opts.config.sparsity, "Target sparsity in [0, 1)")->required();
    plan->add_option("--alpha", opts.config.alpha, "Sparsity balance exponent divisor");
    plan->add_option("--stages", opts.stages, "Budget split: 1, 2 or both");
    plan->add_flag("--json", opts.json, "Append a machine-readable JSON report line");

    CLI::App* prune = app.add_subcommand("prune", "Run the pruning pipeline and save the result");
    prune->add_option("--model-path", opts.config.model_path, "Model checkpoint")->required();
    prune->add_option("--calib-path", opts.config.calib_path, "Calibration corpus")->required();
    prune->add_option("--out-path", opts.config.out_path, "Pruned checkpoint destination")
        ->required();
    prune->add_option("--sparsity", opts.config.sparsity, "Target sparsity in [0, 1)")
        ->required();
    prune->add_option("--alpha", opts.config.alpha, "Sparsity balance exponent divisor");
    prune->add_option("--calib-samples-stage1", opts.config.calib_samples_stage1,
                      "Calibration sequences sampled for neuron scoring");
    prune->add_option("--calib-samples-stage2", opts.config.calib_samples_stage2,
                      "Calibration sequences sampled for attention removal");
    prune->add_option("--norm-kind", opts.norm_kind, "Importance norm: l2 or l1");
    prune->add_option("--stage1-mode", opts.stage1_mode, "Stage 1 variant: neurons or inverted");
    prune->add_option("--stages", opts.stages, "Stages to run: 1, 2 or both");
    prune->add_option("--seed", opts.config.seed, "Calibration sampling seed");
    add_common_flags(prune, opts);

    CLI::App* eval = app.add_subcommand("eval", "Evaluate perplexity on one or more corpora");
    eval->add_option("--model-path", opts.config.model_path, "Model checkpoint")->required();
    eval->add_option("--eval-paths", opts.config.eval_paths, "Evaluation corpora")->required();
    add_common_flags(eval, opts);

    CLI::App* inspect = app.add_subcommand("inspect", "Print architecture and parameter summary");
    inspect->add_option("--model-path", opts.config.model_path, "Model checkpoint")->required();
    inspect->add_flag("--json", opts.json, "Append a machine-readable JSON report line");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        finish_config(opts);
        shear::set_max_threads(opts.config.threads);

        if (plan->parsed()) {
            shear::ModelWeights model = shear::load_checkpoint(opts.config.model_path);
            shear::PruningPlan p =
                shear::make_plan(model, opts.config.sparsity, opts.config.alpha,
                                 opts.config.stages);
            std::cout << shear::render_plan_text(p);
            if (opts.json) {
                std::cout << "json_report=" << shear::render_plan_json(p) << '\n';
            }
        } else if (prune->parsed()) {
            shear::PruneOutcome outcome = shear::run_prune(opts.config);
            std::cout << shear::render_prune_text(outcome, opts.config);
            if (opts.json) {
                std::cout << "json_report=" << shear::render_prune_json(outcome, opts.config)
                          << '\n';
            }
        } else if (eval->parsed()) {
            shear::ModelWeights model = shear::load_checkpoint(opts.config.model_path);
            const int32_t seq_len = opts.config.seq_len > 0 ? opts.config.seq_len
                                                            : model.config.max_seq_len;
            bool first = true;
            for (const std::string& path : opts.config.eval_paths) {
                shear::TokenCorpus corpus = shear::load_corpus(path, seq_len);
                shear::EvalReport report = shear::evaluate_perplexity(model, corpus);
                if (!first) {
                    std::cout << '\n';
                }
                first = false;
                std::cout << shear::render_eval_text(report, path);
                if (opts.json) {
                    std::cout << "json_report=" << shear::render_eval_json(report, path) << '\n';
                }
            }
        } else if (inspect->parsed()) {
            shear::ModelWeights model = shear::load_checkpoint(opts.config.model_path);
            std::cout << shear::render_inspect_text(model, opts.config.model_path);
            if (opts.json) {
                std::cout << "json_report="
                          << shear::render_inspect_json(model, opts.config.model_path) << '\n';
            }
        }
        return 0;
    } catch (const shear::InfeasiblePlanError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    return run(argc, argv);
}
