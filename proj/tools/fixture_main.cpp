// Writes a small random model plus calibration/evaluation corpora sampled
// from it, so the pruning CLI has something to chew on out of the box.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "shear/checkpoint.hpp"
#include "shear/corpus.hpp"
#include "shear/generate.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a toy model checkpoint and matching token corpora"};

    std::string out_dir = "fixtures";
    int32_t num_blocks = 4;
    int32_t d_model = 64;
    int32_t d_int = 172;
    int32_t n_heads = 4;
    int32_t n_kv_heads = 4;
    int32_t vocab_size = 256;
    int32_t max_seq_len = 128;
    int32_t seq_len = 128;
    int64_t calib_sequences = 8;
    int64_t eval_sequences = 8;
    uint64_t seed = 0;

    app.add_option("--out-dir", out_dir, "Output directory");
    app.add_option("--num-blocks", num_blocks, "Transformer blocks");
    app.add_option("--d-model", d_model, "Hidden width");
    app.add_option("--d-int", d_int, "FFN intermediate width");
    app.add_option("--n-heads", n_heads, "Attention heads");
    app.add_option("--n-kv-heads", n_kv_heads, "Key/value heads");
    app.add_option("--vocab-size", vocab_size, "Vocabulary size");
    app.add_option("--max-seq-len", max_seq_len, "Maximum sequence length");
    app.add_option("--seq-len", seq_len, "Corpus sequence length");
    app.add_option("--calib-sequences", calib_sequences, "Calibration sequences to sample");
    app.add_option("--eval-sequences", eval_sequences, "Evaluation sequences to sample");
    app.add_option("--seed", seed, "Seed for weights and sampling");

    CLI11_PARSE(app, argc, argv);

    try {
        shear::ModelConfig config;
        config.num_blocks = num_blocks;
        config.d_model = d_model;
        config.d_int_per_block.assign(static_cast<size_t>(num_blocks), d_int);
        config.n_heads = n_heads;
        config.n_kv_heads = n_kv_heads;
        config.head_dim = d_model / n_heads;
        config.vocab_size = vocab_size;
        config.max_seq_len = max_seq_len;

        std::filesystem::create_directories(out_dir);
        shear::ModelWeights model = shear::random_model(config, seed);
        const std::string model_path = out_dir + "/model.ckpt";
        shear::save_checkpoint(model, model_path);
        std::cout << "model=" << model_path << '\n';

        shear::TokenCorpus calib = shear::sample_corpus(model, calib_sequences, seq_len, seed + 1);
        const std::string calib_path = out_dir + "/calib.tokens";
        shear::save_corpus(calib, calib_path);
        std::cout << "calib=" << calib_path << '\n';

        shear::TokenCorpus eval = shear::sample_corpus(model, eval_sequences, seq_len, seed + 2);
        const std::string eval_path = out_dir + "/eval.tokens";
        shear::save_corpus(eval, eval_path);
        std::cout << "eval=" << eval_path << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
