#pragma once

#include <string>

#include "smoothie/matrix.hpp"
#include "smoothie/vocab.hpp"

namespace smoothie {

// Fixed V x d embedding matrix. Frozen during training; normalized once to
// zero mean / unit variance over all entries.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    explicit EmbeddingMatrix(Mat data) : data_(std::move(data)) {}

    // i.i.d. standard normal entries from the seeded RNG.
    static EmbeddingMatrix init_random(std::size_t V, std::size_t d,
                                       std::uint64_t seed);

    // (E - mean) / std with global scalar statistics. Throws on zero std.
    EmbeddingMatrix normalized() const;

    // Rows of E selected by id. Throws on out-of-range ids.
    Mat lookup(const std::vector<TokenId>& ids) const;

    // Binary format: uint64 V, uint64 d (little-endian), then V*d float32
    // row-major. Values round-trip bit-exactly once they are
    // float-representable (load always yields such a matrix).
    void save(const std::string& path) const;
    static EmbeddingMatrix load(const std::string& path);

    std::size_t V() const { return data_.rows(); }
    std::size_t d() const { return data_.cols(); }
    const Mat& mat() const { return data_; }

private:
    Mat data_;
};

}  // namespace smoothie
