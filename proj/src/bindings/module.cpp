#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "shear/budget.hpp"
#include "shear/checkpoint.hpp"
#include "shear/corpus.hpp"
#include "shear/depth_pruning.hpp"
#include "shear/error.hpp"
#include "shear/generate.hpp"
#include "shear/model.hpp"
#include "shear/pipeline.hpp"
#include "shear/threading.hpp"
#include "shear/width_pruning.hpp"

namespace py = pybind11;
using namespace shear;

namespace {

py::array_t<float> tensor_to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<float> out(shape);
    std::memcpy(out.mutable_data(), t.data().data(), static_cast<size_t>(t.size()) * 4);
    return out;
}

Tensor numpy_to_tensor(const py::array& arr) {
    py::array_t<float, py::array::c_style | py::array::forcecast> a(arr);
    std::vector<int64_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) {
        shape[static_cast<size_t>(i)] = a.shape(i);
    }
    std::vector<float> data(static_cast<size_t>(a.size()));
    std::memcpy(data.data(), a.data(), data.size() * 4);
    return Tensor::from_data(std::move(shape), std::move(data));
}

py::array_t<float> model_get_tensor(const ModelWeights& model, const std::string& name) {
    for (const auto& [n, t] : named_tensors(model)) {
        if (n == name) {
            return tensor_to_numpy(*t);
        }
    }
    throw ValidationError("no tensor named '" + name + "'");
}

void model_set_tensor(ModelWeights& model, const std::string& name, const py::array& arr) {
    for (auto& [n, t] : named_tensors(model)) {
        if (n == name) {
            Tensor replacement = numpy_to_tensor(arr);
            if (replacement.shape() != t->shape()) {
                throw ValidationError("shape mismatch for tensor '" + name + "'");
            }
            *t = std::move(replacement);
            return;
        }
    }
    throw ValidationError("no tensor named '" + name + "'");
}

std::vector<std::string> model_tensor_names(const ModelWeights& model) {
    std::vector<std::string> names;
    for (const auto& [n, t] : named_tensors(model)) {
        names.push_back(n);
    }
    return names;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Two-stage structured pruning engine for small decoder-only transformers";

    py::register_exception<InfeasiblePlanError>(m, "InfeasiblePlanError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    py::enum_<NormKind>(m, "NormKind")
        .value("L2", NormKind::L2)
        .value("L1", NormKind::L1);
    py::enum_<Stage1Mode>(m, "Stage1Mode")
        .value("NEURONS", Stage1Mode::Neurons)
        .value("INVERTED", Stage1Mode::Inverted);
    py::enum_<StageSelection>(m, "StageSelection")
        .value("STAGE1_ONLY", StageSelection::Stage1Only)
        .value("STAGE2_ONLY", StageSelection::Stage2Only)
        .value("BOTH", StageSelection::Both);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init([](int32_t num_blocks, int32_t d_model, int32_t d_int, int32_t n_heads,
                         int32_t n_kv_heads, int32_t vocab_size, int32_t max_seq_len,
                         float rope_theta, float norm_eps) {
                 ModelConfig cfg;
                 cfg.num_blocks = num_blocks;
                 cfg.d_model = d_model;
                 cfg.d_int_per_block.assign(static_cast<size_t>(num_blocks), d_int);
                 cfg.n_heads = n_heads;
                 cfg.n_kv_heads = n_kv_heads;
                 cfg.head_dim = n_heads > 0 ? d_model / n_heads : 0;
                 cfg.vocab_size = vocab_size;
                 cfg.max_seq_len = max_seq_len;
                 cfg.rope_theta = rope_theta;
                 cfg.norm_eps = norm_eps;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("num_blocks"), py::arg("d_model"), py::arg("d_int"), py::arg("n_heads"),
             py::arg("n_kv_heads"), py::arg("vocab_size"), py::arg("max_seq_len"),
             py::arg("rope_theta") = 10000.0f, py::arg("norm_eps") = 1e-5f)
        .def_readonly("num_blocks", &ModelConfig::num_blocks)
        .def_readonly("d_model", &ModelConfig::d_model)
        .def_readonly("d_int_per_block", &ModelConfig::d_int_per_block)
        .def_readonly("n_heads", &ModelConfig::n_heads)
        .def_readonly("n_kv_heads", &ModelConfig::n_kv_heads)
        .def_readonly("head_dim", &ModelConfig::head_dim)
        .def_readonly("vocab_size", &ModelConfig::vocab_size)
        .def_readonly("max_seq_len", &ModelConfig::max_seq_len)
        .def_readonly("rope_theta", &ModelConfig::rope_theta)
        .def_readonly("norm_eps", &ModelConfig::norm_eps);

    py::class_<ModelWeights>(m, "ModelWeights")
        .def_readonly("config", &ModelWeights::config)
        .def("tensor_names", &model_tensor_names)
        .def("get_tensor", &model_get_tensor, py::arg("name"))
        .def("set_tensor", &model_set_tensor, py::arg("name"), py::arg("array"))
        .def("attention_present",
             [](const ModelWeights& model) {
                 std::vector<bool> flags;
                 for (const auto& blk : model.blocks) {
                     flags.push_back(blk.attention_present);
                 }
                 return flags;
             })
        .def("kept_neurons",
             [](const ModelWeights& model, int32_t block) {
                 return model.blocks.at(static_cast<size_t>(block)).kept_neurons;
             },
             py::arg("block"))
        .def("validate", &ModelWeights::validate);

    py::class_<TokenCorpus>(m, "TokenCorpus")
        .def(py::init([](std::vector<std::vector<uint32_t>> sequences, int32_t seq_len,
                         int32_t vocab_size) {
                 TokenCorpus corpus;
                 corpus.seq_len = seq_len;
                 corpus.vocab_size = vocab_size;
                 corpus.sequences = std::move(sequences);
                 corpus.validate();
                 return corpus;
             }),
             py::arg("sequences"), py::arg("seq_len"), py::arg("vocab_size"))
        .def_readonly("seq_len", &TokenCorpus::seq_len)
        .def_readonly("vocab_size", &TokenCorpus::vocab_size)
        .def_readonly("sequences", &TokenCorpus::sequences)
        .def("__len__", [](const TokenCorpus& c) { return c.sequences.size(); });

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("perplexity", &EvalReport::perplexity)
        .def_readonly("mean_nll", &EvalReport::mean_nll)
        .def_readonly("tokens_scored", &EvalReport::tokens_scored)
        .def_readonly("sequences", &EvalReport::sequences)
        .def("__repr__", [](const EvalReport& r) {
            return "EvalReport(perplexity=" + std::to_string(r.perplexity) +
                   ", tokens_scored=" + std::to_string(r.tokens_scored) + ")";
        });

    py::class_<ParamCounts>(m, "ParamCounts")
        .def_readonly("attn_per_block", &ParamCounts::attn_per_block)
        .def_readonly("ffn_per_block", &ParamCounts::ffn_per_block)
        .def_readonly("total", &ParamCounts::total);

    py::class_<ImportanceScores>(m, "ImportanceScores")
        .def_readonly("per_block", &ImportanceScores::per_block)
        .def_readonly("norm_kind", &ImportanceScores::norm_kind);

    py::class_<NeuronMask>(m, "NeuronMask")
        .def_readonly("kept_per_block", &NeuronMask::kept_per_block);

    py::class_<InvertedMasks>(m, "InvertedMasks")
        .def_readonly("in_dims_per_block", &InvertedMasks::in_dims_per_block)
        .def_readonly("out_dims_per_block", &InvertedMasks::out_dims_per_block);

    py::class_<RemovalStep>(m, "RemovalStep")
        .def_readonly("block", &RemovalStep::block)
        .def_readonly("perplexity", &RemovalStep::perplexity);

    py::class_<DepthPruneState>(m, "DepthPruneState")
        .def_readonly("remaining_attention_blocks", &DepthPruneState::remaining_attention_blocks)
        .def_readonly("removed_order", &DepthPruneState::removed_order)
        .def_readonly("step", &DepthPruneState::step);

    py::class_<PruningPlan>(m, "PruningPlan")
        .def_readonly("target_sparsity", &PruningPlan::target_sparsity)
        .def_readonly("alpha", &PruningPlan::alpha)
        .def_readonly("n_attn_to_remove", &PruningPlan::n_attn_to_remove)
        .def_readonly("neurons_to_prune_per_block", &PruningPlan::neurons_to_prune_per_block)
        .def_readonly("k_per_block", &PruningPlan::k_per_block)
        .def_readonly("predicted_pruned_params", &PruningPlan::predicted_pruned_params)
        .def_readonly("achieved_sparsity", &PruningPlan::achieved_sparsity)
        .def_readonly("num_blocks", &PruningPlan::num_blocks)
        .def_readonly("d_model", &PruningPlan::d_model)
        .def_readonly("d_int", &PruningPlan::d_int)
        .def_readonly("attn_params_per_block", &PruningPlan::attn_params_per_block)
        .def_readonly("ffn_params_per_block", &PruningPlan::ffn_params_per_block)
        .def_readonly("total_block_params", &PruningPlan::total_block_params)
        .def("granularity_bound", &PruningPlan::granularity_bound);

    py::class_<VerifyReport>(m, "VerifyReport")
        .def_readonly("pass_", &VerifyReport::pass)
        .def_property_readonly("ok", [](const VerifyReport& r) { return r.pass; })
        .def_readonly("achieved_sparsity", &VerifyReport::achieved_sparsity)
        .def_readonly("granularity_bound", &VerifyReport::granularity_bound)
        .def_readonly("removed_attention_blocks", &VerifyReport::removed_attention_blocks)
        .def_readonly("per_block_d_int", &VerifyReport::per_block_d_int)
        .def_readonly("diagnostics", &VerifyReport::diagnostics);

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("model_path", &RunConfig::model_path)
        .def_readwrite("calib_path", &RunConfig::calib_path)
        .def_readwrite("eval_paths", &RunConfig::eval_paths)
        .def_readwrite("sparsity", &RunConfig::sparsity)
        .def_readwrite("alpha", &RunConfig::alpha)
        .def_readwrite("calib_samples_stage1", &RunConfig::calib_samples_stage1)
        .def_readwrite("calib_samples_stage2", &RunConfig::calib_samples_stage2)
        .def_readwrite("norm_kind", &RunConfig::norm_kind)
        .def_readwrite("stage1_mode", &RunConfig::stage1_mode)
        .def_readwrite("stages", &RunConfig::stages)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("out_path", &RunConfig::out_path)
        .def_readwrite("seq_len", &RunConfig::seq_len)
        .def_readwrite("threads", &RunConfig::threads);

    py::class_<PruneOutcome>(m, "PruneOutcome")
        .def_readonly("plan", &PruneOutcome::plan)
        .def_readonly("stage1_applied", &PruneOutcome::stage1_applied)
        .def_readonly("stage2_applied", &PruneOutcome::stage2_applied)
        .def_readonly("inverted_dims_pruned_per_block",
                      &PruneOutcome::inverted_dims_pruned_per_block)
        .def_readonly("removal_trajectory", &PruneOutcome::removal_trajectory)
        .def_readonly("pre_calib", &PruneOutcome::pre_calib)
        .def_readonly("post_calib", &PruneOutcome::post_calib)
        .def_readonly("verification", &PruneOutcome::verification);

    // Kernels and engine.
    m.def("forward_logits",
          [](const ModelWeights& model, const std::vector<uint32_t>& tokens) {
              return tensor_to_numpy(forward_logits(model, tokens));
          },
          py::arg("model"), py::arg("tokens"));
    m.def("evaluate_perplexity",
          [](const ModelWeights& model, const TokenCorpus& corpus) {
              return evaluate_perplexity(model, corpus);
          },
          py::arg("model"), py::arg("corpus"));
    m.def("count_block_parameters", &count_block_parameters, py::arg("model"));

    // Stage 1.
    m.def("score_neurons", &score_neurons, py::arg("model"), py::arg("calib"),
          py::arg("norm_kind") = NormKind::L2);
    m.def("select_top_k",
          [](const ImportanceScores& scores, const std::vector<int32_t>& k_per_block) {
              return select_top_k(scores, k_per_block);
          },
          py::arg("scores"), py::arg("k_per_block"));
    m.def("apply_stage1", &apply_stage1, py::arg("model"), py::arg("calib"),
          py::arg("k_per_block"), py::arg("norm_kind") = NormKind::L2);
    m.def("apply_stage1_inverted", &apply_stage1_inverted, py::arg("model"), py::arg("calib"),
          py::arg("k_dim"), py::arg("norm_kind") = NormKind::L2);

    // Stage 2.
    m.def("evaluate_candidate", &evaluate_candidate, py::arg("model"), py::arg("calib"),
          py::arg("block_index"));
    m.def("greedy_remove_attentions", &greedy_remove_attentions, py::arg("model"),
          py::arg("calib"), py::arg("n_remove"));

    // Budget.
    m.def("attn_count", &attn_count, py::arg("num_blocks"), py::arg("sparsity"),
          py::arg("ffn_params"), py::arg("attn_params"), py::arg("alpha") = 1.5);
    m.def("make_plan", &make_plan, py::arg("model"), py::arg("sparsity"),
          py::arg("alpha") = 1.5, py::arg("stages") = StageSelection::Both);
    m.def("verify_plan", &verify_plan, py::arg("before"), py::arg("after"), py::arg("plan"),
          py::arg("expected_ffn_delta_per_block") = -1);

    // Pipeline.
    m.def("prune_model", &prune_model, py::arg("model"), py::arg("calib"), py::arg("config"));
    m.def("run_prune", &run_prune, py::arg("config"));
    m.def("render_plan_text", &render_plan_text, py::arg("plan"));
    m.def("render_prune_text", &render_prune_text, py::arg("outcome"), py::arg("config"));

    // I/O.
    m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("save_corpus", &save_corpus, py::arg("corpus"), py::arg("path"));
    m.def("load_corpus", &load_corpus, py::arg("path"), py::arg("seq_len"));
    m.def("sample_calibration", &sample_calibration, py::arg("corpus"), py::arg("n"),
          py::arg("seed") = 0);

    // Generators.
    m.def("random_model", &random_model, py::arg("config"), py::arg("seed") = 0);
    m.def("sample_corpus", &sample_corpus, py::arg("model"), py::arg("n_sequences"),
          py::arg("seq_len"), py::arg("seed") = 0);
    m.def("random_corpus", &random_corpus, py::arg("vocab_size"), py::arg("n_sequences"),
          py::arg("seq_len"), py::arg("seed") = 0);

    m.def("set_max_threads", &set_max_threads, py::arg("n"));
}
