#include "shear/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "shear/error.hpp"
#include "shear/rng.hpp"

namespace shear {

namespace {

constexpr char kMagic[4] = {'T', 'C', 'R', 'P'};
constexpr uint32_t kVersion = 1;

uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void write_u32_le(std::ofstream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace

void TokenCorpus::validate() const {
    if (seq_len < 1) {
        throw ValidationError("corpus seq_len must be >= 1");
    }
    if (vocab_size < 1) {
        throw ValidationError("corpus vocab_size must be >= 1");
    }
    for (const auto& seq : sequences) {
        if (static_cast<int32_t>(seq.size()) != seq_len) {
            throw ValidationError("corpus sequence length differs from seq_len");
        }
        for (uint32_t id : seq) {
            if (id >= static_cast<uint32_t>(vocab_size)) {
                throw ValidationError("token id " + std::to_string(id) +
                                      " >= vocab_size " + std::to_string(vocab_size));
            }
        }
    }
}

TokenCorpus load_corpus(const std::string& path, int32_t seq_len) {
    if (seq_len < 1) {
        throw ValidationError("seq_len must be >= 1");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open corpus file: " + path);
    }
    unsigned char header[16];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
        throw IoError("corpus file truncated (header): " + path);
    }
    if (std::memcmp(header, kMagic, 4) != 0) {
        throw IoError("bad corpus magic in " + path);
    }
    uint32_t version = read_u32_le(header + 4);
    if (version != kVersion) {
        throw IoError("unsupported corpus version " + std::to_string(version));
    }
    uint32_t vocab_size = read_u32_le(header + 8);
    uint32_t token_count = read_u32_le(header + 12);

    std::vector<unsigned char> raw(static_cast<size_t>(token_count) * 4);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw IoError("corpus file truncated (tokens): " + path);
    }

    TokenCorpus corpus;
    corpus.seq_len = seq_len;
    corpus.vocab_size = static_cast<int32_t>(vocab_size);
    const uint32_t n_seqs = token_count / static_cast<uint32_t>(seq_len);
    corpus.sequences.reserve(n_seqs);
    for (uint32_t s = 0; s < n_seqs; ++s) {
        std::vector<uint32_t> seq(static_cast<size_t>(seq_len));
        for (int32_t t = 0; t < seq_len; ++t) {
            uint32_t id = read_u32_le(raw.data() +
                                      (static_cast<size_t>(s) * seq_len + t) * 4);
            if (id >= vocab_size) {
                throw IoError("corpus token id " + std::to_string(id) +
                              " >= vocab_size " + std::to_string(vocab_size));
            }
            seq[static_cast<size_t>(t)] = id;
        }
        corpus.sequences.push_back(std::move(seq));
    }
    return corpus;
}

void save_corpus(const TokenCorpus& corpus, const std::string& path) {
    corpus.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open corpus file for writing: " + path);
    }
    out.write(kMagic, 4);
    write_u32_le(out, kVersion);
    write_u32_le(out, static_cast<uint32_t>(corpus.vocab_size));
    uint64_t token_count =
        static_cast<uint64_t>(corpus.num_sequences()) * static_cast<uint64_t>(corpus.seq_len);
    if (token_count > 0xffffffffull) {
        throw IoError("corpus too large for the stream format");
    }
    write_u32_le(out, static_cast<uint32_t>(token_count));
    for (const auto& seq : corpus.sequences) {
        for (uint32_t id : seq) {
            write_u32_le(out, id);
        }
    }
    if (!out) {
        throw IoError("short write while saving corpus: " + path);
    }
}

TokenCorpus sample_calibration(const TokenCorpus& corpus, int64_t n, uint64_t seed) {
    const int64_t total = corpus.num_sequences();
    if (n < 0 || n > total) {
        throw ValidationError("sample size " + std::to_string(n) + " exceeds corpus size " +
                              std::to_string(total));
    }
    std::vector<int64_t> indices(static_cast<size_t>(total));
    std::iota(indices.begin(), indices.end(), 0);
    SplitMix64 rng(seed);
    for (int64_t i = 0; i < n; ++i) {
        int64_t j = i + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(total - i)));
        std::swap(indices[static_cast<size_t>(i)], indices[static_cast<size_t>(j)]);
    }
    indices.resize(static_cast<size_t>(n));
    std::sort(indices.begin(), indices.end());

    TokenCorpus out;
    out.seq_len = corpus.seq_len;
    out.vocab_size = corpus.vocab_size;
    out.sequences.reserve(static_cast<size_t>(n));
    for (int64_t idx : indices) {
        out.sequences.push_back(corpus.sequences[static_cast<size_t>(idx)]);
    }
    return out;
}

} // namespace shear
