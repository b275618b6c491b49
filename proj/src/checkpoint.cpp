#include "shear/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "shear/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload I/O assumes a little-endian host");

namespace shear {

namespace {

constexpr const char* kFormatName = "shearckpt";
constexpr int kFormatVersion = 1;
constexpr uint32_t kMaxManifestBytes = 1u << 24;

std::string format_hexfloat(float v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", static_cast<double>(v));
    return buf;
}

float parse_float_token(const std::string& tok) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
        throw IoError("bad float in checkpoint manifest: " + tok);
    }
    return static_cast<float>(v);
}

int64_t parse_int_token(const std::string& tok) {
    char* end = nullptr;
    long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') {
        throw IoError("bad integer in checkpoint manifest: " + tok);
    }
    return static_cast<int64_t>(v);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) {
        toks.push_back(t);
    }
    return toks;
}

// Reads manifest lines in the exact order the writer emits them.
class ManifestReader {
public:
    explicit ManifestReader(const std::string& text) : stream_(text) {}

    std::vector<std::string> next_line() {
        std::string line;
        while (std::getline(stream_, line)) {
            auto toks = split_line(line);
            if (!toks.empty()) {
                return toks;
            }
        }
        throw IoError("checkpoint manifest ended unexpectedly");
    }

    std::vector<std::string> peek_line() {
        auto pos = stream_.tellg();
        auto toks = next_line();
        stream_.clear();
        stream_.seekg(pos);
        return toks;
    }

private:
    std::istringstream stream_;
};

int64_t require_int_line(ManifestReader& reader, const std::string& key) {
    auto toks = reader.next_line();
    if (toks.size() != 2 || toks[0] != key) {
        throw IoError("checkpoint manifest expected '" + key + "' line");
    }
    return parse_int_token(toks[1]);
}

float require_float_line(ManifestReader& reader, const std::string& key) {
    auto toks = reader.next_line();
    if (toks.size() != 2 || toks[0] != key) {
        throw IoError("checkpoint manifest expected '" + key + "' line");
    }
    return parse_float_token(toks[1]);
}

void append_dims(std::string& line, const Tensor& t) {
    for (int64_t d : t.shape()) {
        line += ' ';
        line += std::to_string(d);
    }
}

} // namespace

std::vector<std::pair<std::string, const Tensor*>> named_tensors(const ModelWeights& model) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.emplace_back("token_embedding", &model.token_embedding);
    out.emplace_back("final_norm", &model.final_norm);
    out.emplace_back("lm_head", &model.lm_head);
    for (size_t b = 0; b < model.blocks.size(); ++b) {
        const BlockWeights& blk = model.blocks[b];
        std::string prefix = "block." + std::to_string(b) + ".";
        if (blk.attention_present) {
            out.emplace_back(prefix + "attn_norm", &blk.attn_norm);
            out.emplace_back(prefix + "wq", &blk.wq);
            out.emplace_back(prefix + "wk", &blk.wk);
            out.emplace_back(prefix + "wv", &blk.wv);
            out.emplace_back(prefix + "wo", &blk.wo);
        }
        out.emplace_back(prefix + "ffn_norm", &blk.ffn_norm);
        out.emplace_back(prefix + "w_gate", &blk.w_gate);
        out.emplace_back(prefix + "w_up", &blk.w_up);
        out.emplace_back(prefix + "w_down", &blk.w_down);
    }
    return out;
}

std::vector<std::pair<std::string, Tensor*>> named_tensors(ModelWeights& model) {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& [name, tensor] : named_tensors(static_cast<const ModelWeights&>(model))) {
        out.emplace_back(name, const_cast<Tensor*>(tensor));
    }
    return out;
}

std::vector<unsigned char> encode_checkpoint(const ModelWeights& model) {
    model.validate();
    const ModelConfig& cfg = model.config;

    std::string manifest;
    manifest += std::string(kFormatName) + ' ' + std::to_string(kFormatVersion) + '\n';
    manifest += "num_blocks " + std::to_string(cfg.num_blocks) + '\n';
    manifest += "d_model " + std::to_string(cfg.d_model) + '\n';
    manifest += "n_heads " + std::to_string(cfg.n_heads) + '\n';
    manifest += "n_kv_heads " + std::to_string(cfg.n_kv_heads) + '\n';
    manifest += "head_dim " + std::to_string(cfg.head_dim) + '\n';
    manifest += "vocab_size " + std::to_string(cfg.vocab_size) + '\n';
    manifest += "max_seq_len " + std::to_string(cfg.max_seq_len) + '\n';
    manifest += "rope_theta " + format_hexfloat(cfg.rope_theta) + '\n';
    manifest += "norm_eps " + format_hexfloat(cfg.norm_eps) + '\n';
    manifest += "d_int";
    for (int32_t d : cfg.d_int_per_block) {
        manifest += ' ';
        manifest += std::to_string(d);
    }
    manifest += '\n';
    manifest += "attention_present";
    for (const BlockWeights& blk : model.blocks) {
        manifest += blk.attention_present ? " 1" : " 0";
    }
    manifest += '\n';
    for (size_t b = 0; b < model.blocks.size(); ++b) {
        const BlockWeights& blk = model.blocks[b];
        if (!blk.kept_neurons.empty()) {
            manifest += "kept_neurons " + std::to_string(b) + ' ' +
                        std::to_string(blk.original_d_int);
            for (int32_t idx : blk.kept_neurons) {
                manifest += ' ';
                manifest += std::to_string(idx);
            }
            manifest += '\n';
        }
        if (!blk.ffn_in_dims.empty()) {
            manifest += "ffn_in_dims " + std::to_string(b);
            for (int32_t idx : blk.ffn_in_dims) {
                manifest += ' ';
                manifest += std::to_string(idx);
            }
            manifest += '\n';
        }
        if (!blk.ffn_out_dims.empty()) {
            manifest += "ffn_out_dims " + std::to_string(b);
            for (int32_t idx : blk.ffn_out_dims) {
                manifest += ' ';
                manifest += std::to_string(idx);
            }
            manifest += '\n';
        }
    }

    auto tensors = named_tensors(model);
    int64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        std::string line = "tensor " + name + ' ' + std::to_string(offset);
        append_dims(line, *tensor);
        manifest += line + '\n';
        offset += tensor->size() * 4;
    }
    manifest += "end\n";

    if (manifest.size() > kMaxManifestBytes) {
        throw IoError("checkpoint manifest too large");
    }

    std::vector<unsigned char> bytes;
    bytes.reserve(4 + manifest.size() + static_cast<size_t>(offset));
    uint32_t len = static_cast<uint32_t>(manifest.size());
    for (int i = 0; i < 4; ++i) {
        bytes.push_back(static_cast<unsigned char>((len >> (8 * i)) & 0xff));
    }
    bytes.insert(bytes.end(), manifest.begin(), manifest.end());
    for (const auto& [name, tensor] : tensors) {
        size_t old = bytes.size();
        bytes.resize(old + static_cast<size_t>(tensor->size()) * 4);
        std::memcpy(bytes.data() + old, tensor->data().data(),
                    static_cast<size_t>(tensor->size()) * 4);
    }
    return bytes;
}

ModelWeights decode_checkpoint(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 4) {
        throw IoError("checkpoint truncated (length prefix)");
    }
    uint32_t manifest_len = 0;
    for (int i = 0; i < 4; ++i) {
        manifest_len |= static_cast<uint32_t>(bytes[static_cast<size_t>(i)]) << (8 * i);
    }
    if (manifest_len > kMaxManifestBytes || bytes.size() < 4 + static_cast<size_t>(manifest_len)) {
        throw IoError("checkpoint truncated or not a checkpoint (bad manifest length)");
    }
    std::string manifest(reinterpret_cast<const char*>(bytes.data() + 4), manifest_len);
    ManifestReader reader(manifest);

    auto head = reader.next_line();
    if (head.size() != 2 || head[0] != kFormatName) {
        throw IoError("bad checkpoint magic");
    }
    if (parse_int_token(head[1]) != kFormatVersion) {
        throw IoError("unsupported checkpoint version " + head[1]);
    }

    ModelConfig cfg;
    cfg.num_blocks = static_cast<int32_t>(require_int_line(reader, "num_blocks"));
    cfg.d_model = static_cast<int32_t>(require_int_line(reader, "d_model"));
    cfg.n_heads = static_cast<int32_t>(require_int_line(reader, "n_heads"));
    cfg.n_kv_heads = static_cast<int32_t>(require_int_line(reader, "n_kv_heads"));
    cfg.head_dim = static_cast<int32_t>(require_int_line(reader, "head_dim"));
    cfg.vocab_size = static_cast<int32_t>(require_int_line(reader, "vocab_size"));
    cfg.max_seq_len = static_cast<int32_t>(require_int_line(reader, "max_seq_len"));
    cfg.rope_theta = require_float_line(reader, "rope_theta");
    cfg.norm_eps = require_float_line(reader, "norm_eps");

    auto d_int_line = reader.next_line();
    if (d_int_line.empty() || d_int_line[0] != "d_int" ||
        static_cast<int32_t>(d_int_line.size()) != cfg.num_blocks + 1) {
        throw IoError("checkpoint manifest expected 'd_int' with one entry per block");
    }
    for (int32_t b = 0; b < cfg.num_blocks; ++b) {
        cfg.d_int_per_block.push_back(
            static_cast<int32_t>(parse_int_token(d_int_line[static_cast<size_t>(b + 1)])));
    }
    cfg.validate();

    auto present_line = reader.next_line();
    if (present_line.empty() || present_line[0] != "attention_present" ||
        static_cast<int32_t>(present_line.size()) != cfg.num_blocks + 1) {
        throw IoError("checkpoint manifest expected 'attention_present' flags per block");
    }

    ModelWeights model;
    model.config = cfg;
    model.blocks.resize(static_cast<size_t>(cfg.num_blocks));
    for (int32_t b = 0; b < cfg.num_blocks; ++b) {
        const std::string& flag = present_line[static_cast<size_t>(b + 1)];
        if (flag != "0" && flag != "1") {
            throw IoError("attention_present flags must be 0 or 1");
        }
        model.blocks[static_cast<size_t>(b)].attention_present = flag == "1";
    }

    // Optional audit / dimension lines, then the tensor directory.
    auto parse_block_index = [&](const std::vector<std::string>& toks) {
        int64_t b = parse_int_token(toks[1]);
        if (b < 0 || b >= cfg.num_blocks) {
            throw IoError("block index out of range in checkpoint manifest");
        }
        return static_cast<size_t>(b);
    };
    for (;;) {
        auto toks = reader.peek_line();
        if (toks[0] == "kept_neurons") {
            reader.next_line();
            if (toks.size() < 3) {
                throw IoError("malformed kept_neurons line");
            }
            size_t b = parse_block_index(toks);
            BlockWeights& blk = model.blocks[b];
            blk.original_d_int = static_cast<int32_t>(parse_int_token(toks[2]));
            for (size_t i = 3; i < toks.size(); ++i) {
                blk.kept_neurons.push_back(static_cast<int32_t>(parse_int_token(toks[i])));
            }
        } else if (toks[0] == "ffn_in_dims" || toks[0] == "ffn_out_dims") {
            reader.next_line();
            if (toks.size() < 3) {
                throw IoError("malformed " + toks[0] + " line");
            }
            size_t b = parse_block_index(toks);
            auto& dims = toks[0] == "ffn_in_dims" ? model.blocks[b].ffn_in_dims
                                                  : model.blocks[b].ffn_out_dims;
            for (size_t i = 2; i < toks.size(); ++i) {
                dims.push_back(static_cast<int32_t>(parse_int_token(toks[i])));
            }
        } else {
            break;
        }
    }

    // Size the tensors from the parsed structure, then fill them from the
    // directory. Any mismatch between the two is an error.
    for (int32_t b = 0; b < cfg.num_blocks; ++b) {
        BlockWeights& blk = model.blocks[static_cast<size_t>(b)];
        const int64_t d_int = cfg.d_int_per_block[static_cast<size_t>(b)];
        const int64_t in_w = blk.ffn_in_dims.empty()
                                 ? cfg.d_model
                                 : static_cast<int64_t>(blk.ffn_in_dims.size());
        const int64_t out_w = blk.ffn_out_dims.empty()
                                  ? cfg.d_model
                                  : static_cast<int64_t>(blk.ffn_out_dims.size());
        if (blk.attention_present) {
            blk.attn_norm = Tensor({cfg.d_model});
            blk.wq = Tensor({cfg.d_model, cfg.d_model});
            blk.wk = Tensor({cfg.d_model, cfg.kv_dim()});
            blk.wv = Tensor({cfg.d_model, cfg.kv_dim()});
            blk.wo = Tensor({cfg.d_model, cfg.d_model});
        }
        blk.ffn_norm = Tensor({cfg.d_model});
        blk.w_gate = Tensor({d_int, in_w});
        blk.w_up = Tensor({d_int, in_w});
        blk.w_down = Tensor({out_w, d_int});
    }
    model.token_embedding = Tensor({cfg.vocab_size, cfg.d_model});
    model.final_norm = Tensor({cfg.d_model});
    model.lm_head = Tensor({cfg.vocab_size, cfg.d_model});

    auto expected = named_tensors(model);
    int64_t expected_offset = 0;
    const unsigned char* payload = bytes.data() + 4 + manifest_len;
    const int64_t payload_size = static_cast<int64_t>(bytes.size()) - 4 - manifest_len;
    for (auto& [name, tensor] : expected) {
        auto toks = reader.next_line();
        if (toks.size() < 3 || toks[0] != "tensor") {
            throw IoError("checkpoint manifest expected tensor entry for " + name);
        }
        if (toks[1] != name) {
            throw IoError("checkpoint tensor order mismatch: expected " + name + ", found " +
                          toks[1]);
        }
        int64_t offset = parse_int_token(toks[2]);
        if (offset != expected_offset) {
            throw IoError("checkpoint tensor offsets must be ascending and contiguous (" + name +
                          ")");
        }
        std::vector<int64_t> dims;
        for (size_t i = 3; i < toks.size(); ++i) {
            dims.push_back(parse_int_token(toks[i]));
        }
        if (dims != tensor->shape()) {
            throw IoError("checkpoint tensor shape mismatch for " + name);
        }
        int64_t nbytes = tensor->size() * 4;
        if (offset + nbytes > payload_size) {
            throw IoError("checkpoint truncated (payload for " + name + ")");
        }
        std::memcpy(tensor->data().data(), payload + offset, static_cast<size_t>(nbytes));
        expected_offset = offset + nbytes;
    }
    auto tail = reader.next_line();
    if (tail.size() != 1 || tail[0] != "end") {
        throw IoError("checkpoint manifest missing end marker");
    }
    if (expected_offset != payload_size) {
        throw IoError("checkpoint payload size mismatch");
    }

    model.validate();
    return model;
}

void save_checkpoint(const ModelWeights& model, const std::string& path) {
    auto bytes = encode_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open checkpoint for writing: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("short write while saving checkpoint: " + path);
    }
}

ModelWeights load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint: " + path);
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

} // namespace shear
