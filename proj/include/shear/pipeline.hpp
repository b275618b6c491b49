#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shear/budget.hpp"
#include "shear/corpus.hpp"
#include "shear/depth_pruning.hpp"
#include "shear/model.hpp"
#include "shear/width_pruning.hpp"

namespace shear {

enum class Stage1Mode { Neurons, Inverted };

struct RunConfig {
    std::string model_path;
    std::string calib_path;
    std::vector<std::string> eval_paths;
    double sparsity = 0.0;
    double alpha = 1.5;
    int32_t calib_samples_stage1 = 32;
    int32_t calib_samples_stage2 = 1;
    NormKind norm_kind = NormKind::L2;
    Stage1Mode stage1_mode = Stage1Mode::Neurons;
    StageSelection stages = StageSelection::Both;
    uint64_t seed = 0;
    std::string out_path;
    int32_t seq_len = 0; // 0: use the model's max_seq_len when windowing corpora
    int32_t threads = 1;

    void validate() const;
};

struct PruneOutcome {
    PruningPlan plan;
    bool stage1_applied = false;
    bool stage2_applied = false;
    Stage1Mode stage1_mode = Stage1Mode::Neurons;
    int32_t inverted_dims_pruned_per_block = 0; // dimension-based variant only
    std::vector<RemovalStep> removal_trajectory;
    EvalReport pre_calib;
    EvalReport post_calib;
    VerifyReport verification;
    int64_t calib_sequences = 0;
    int32_t calib_seq_len = 0;
};

// Plan, stage 1 on calib_samples_stage1 sampled sequences, stage 2 on
// calib_samples_stage2 sampled sequences, verify. Pure: the input model is
// untouched and the outcome carries everything the report needs.
std::pair<ModelWeights, PruneOutcome> prune_model(const ModelWeights& model,
                                                  const TokenCorpus& calib,
                                                  const RunConfig& config);

// File-level wrapper: load model and corpus, prune, save the checkpoint.
PruneOutcome run_prune(const RunConfig& config);

// Report rendering, line-oriented key=value. The key order is fixed.
std::string render_plan_text(const PruningPlan& plan);
std::string render_eval_text(const EvalReport& report, const std::string& corpus_path);
std::string render_prune_text(const PruneOutcome& outcome, const RunConfig& config);
std::string render_inspect_text(const ModelWeights& model, const std::string& path);

// Machine-readable variants of the same reports (one JSON object each).
std::string render_plan_json(const PruningPlan& plan);
std::string render_eval_json(const EvalReport& report, const std::string& corpus_path);
std::string render_prune_json(const PruneOutcome& outcome, const RunConfig& config);
std::string render_inspect_json(const ModelWeights& model, const std::string& path);

const char* to_string(NormKind kind);
const char* to_string(Stage1Mode mode);
const char* to_string(StageSelection stages);
NormKind norm_kind_from_string(const std::string& s);
Stage1Mode stage1_mode_from_string(const std::string& s);
StageSelection stages_from_string(const std::string& s);

} // namespace shear
