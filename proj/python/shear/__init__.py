"""Two-stage structured pruning for small decoder-only transformers.

The heavy lifting lives in the compiled extension; this package re-exports
its surface: model/corpus types, the forward pass and perplexity evaluation,
neuron scoring and slicing (stage 1), greedy attention removal (stage 2),
sparsity budgeting, and the end-to-end pruning pipeline.
"""

from shear._core import (
    EvalReport,
    ImportanceScores,
    InvertedMasks,
    ModelConfig,
    ModelWeights,
    NeuronMask,
    NormKind,
    ParamCounts,
    PruneOutcome,
    PruningPlan,
    RemovalStep,
    DepthPruneState,
    RunConfig,
    Stage1Mode,
    StageSelection,
    TokenCorpus,
    VerifyReport,
    InfeasiblePlanError,
    IoError,
    ValidationError,
    apply_stage1,
    apply_stage1_inverted,
    attn_count,
    count_block_parameters,
    evaluate_candidate,
    evaluate_perplexity,
    forward_logits,
    greedy_remove_attentions,
    load_checkpoint,
    load_corpus,
    make_plan,
    prune_model,
    random_corpus,
    random_model,
    render_plan_text,
    render_prune_text,
    run_prune,
    sample_calibration,
    sample_corpus,
    save_checkpoint,
    save_corpus,
    score_neurons,
    select_top_k,
    set_max_threads,
    verify_plan,
)

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "ImportanceScores",
    "InvertedMasks",
    "ModelConfig",
    "ModelWeights",
    "NeuronMask",
    "NormKind",
    "ParamCounts",
    "PruneOutcome",
    "PruningPlan",
    "RemovalStep",
    "DepthPruneState",
    "RunConfig",
    "Stage1Mode",
    "StageSelection",
    "TokenCorpus",
    "VerifyReport",
    "InfeasiblePlanError",
    "IoError",
    "ValidationError",
    "apply_stage1",
    "apply_stage1_inverted",
    "attn_count",
    "count_block_parameters",
    "evaluate_candidate",
    "evaluate_perplexity",
    "forward_logits",
    "greedy_remove_attentions",
    "load_checkpoint",
    "load_corpus",
    "make_plan",
    "prune_model",
    "random_corpus",
    "random_model",
    "render_plan_text",
    "render_prune_text",
    "run_prune",
    "sample_calibration",
    "sample_corpus",
    "save_checkpoint",
    "save_corpus",
    "score_neurons",
    "select_top_k",
    "set_max_threads",
    "verify_plan",
]
