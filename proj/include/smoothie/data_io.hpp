#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smoothie/vocab.hpp"

namespace smoothie {

struct ParallelDataset {
    struct Pair {
        std::string source;  // may be empty (unconditional mode)
        std::string target;
    };
    std::vector<Pair> pairs;
    std::string split;
};

// One JSON object per line with string fields "source" (optional) and
// "target". Malformed lines are rejected with their line number.
ParallelDataset load_jsonl(const std::string& path);
void save_jsonl(const ParallelDataset& ds, const std::string& path);

enum class SyntheticTask { kCopy, kCipher };

// copy: target = source; cipher: target token = fixed seeded permutation of
// the source token. Tokens are drawn from "w0".."w{V-1}" word surface forms.
ParallelDataset make_synthetic(SyntheticTask task, std::size_t V,
                               std::size_t n_pairs, std::size_t len,
                               std::uint64_t seed);

struct Batch {
    std::vector<std::vector<TokenId>> source;  // batch x max_src
    std::vector<std::vector<TokenId>> target;  // batch x max_tgt
};

// Seeded per-epoch shuffle; every pair visited once per epoch; the final
// partial batch is kept.
std::vector<Batch> batches(const ParallelDataset& ds, const Vocabulary& vocab,
                           std::size_t batch_size, std::size_t max_src,
                           std::size_t max_tgt, std::uint64_t seed, int epoch);

}  // namespace smoothie
