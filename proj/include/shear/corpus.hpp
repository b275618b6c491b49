#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace shear {

// Pre-tokenized sequences of a fixed length. All ids are < vocab_size.
struct TokenCorpus {
    int32_t seq_len = 0;
    int32_t vocab_size = 0;
    std::vector<std::vector<uint32_t>> sequences;

    int64_t num_sequences() const { return static_cast<int64_t>(sequences.size()); }
    void validate() const;
};

// Token stream file: 16-byte header (magic "TCRP", u32 version, u32
// vocab_size, u32 token count), then little-endian u32 ids. Sequences are
// consecutive non-overlapping windows of seq_len tokens; a trailing
// remainder shorter than seq_len is discarded.
TokenCorpus load_corpus(const std::string& path, int32_t seq_len);

// Writes the concatenated sequences back as one stream.
void save_corpus(const TokenCorpus& corpus, const std::string& path);

// Deterministic sample of n sequences without replacement. Selected indices
// are emitted in ascending corpus order, so n == size returns the corpus
// unchanged.
TokenCorpus sample_calibration(const TokenCorpus& corpus, int64_t n, uint64_t seed);

} // namespace shear
