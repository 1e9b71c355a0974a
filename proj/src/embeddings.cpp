#include "smoothie/embeddings.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "smoothie/rng.hpp"

namespace smoothie {

EmbeddingMatrix EmbeddingMatrix::init_random(std::size_t V, std::size_t d,
                                             std::uint64_t seed) {
    if (V < 2)
        throw std::invalid_argument(
            "init_random: V must be >= 2 (distance space degenerate)");
    if (d < 1) throw std::invalid_argument("init_random: d must be >= 1");
    Rng rng(seed);
    return EmbeddingMatrix(rng.normal_mat(V, d));
}

EmbeddingMatrix EmbeddingMatrix::normalized() const {
    const std::size_t n = data_.size();
    if (n < 2) throw std::invalid_argument("normalize: matrix too small");
    double mean = 0.0;
    for (double v : data_.vec()) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : data_.vec()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var == 0.0)
        throw std::invalid_argument("normalize: constant matrix (zero std)");
    const double inv_std = 1.0 / std::sqrt(var);
    Mat out(data_.rows(), data_.cols());
    for (std::size_t i = 0; i < n; ++i)
        out.data()[i] = (data_.data()[i] - mean) * inv_std;
    return EmbeddingMatrix(std::move(out));
}

Mat EmbeddingMatrix::lookup(const std::vector<TokenId>& ids) const {
    Mat out(ids.size(), data_.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const TokenId id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= data_.rows())
            throw std::out_of_range("lookup: token id out of range");
        std::memcpy(out.row(i), data_.row(static_cast<std::size_t>(id)),
                    data_.cols() * sizeof(double));
    }
    return out;
}

void EmbeddingMatrix::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const std::uint64_t header[2] = {data_.rows(), data_.cols()};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    for (double v : data_.vec()) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingMatrix EmbeddingMatrix::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t header[2];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) throw std::runtime_error("embedding file truncated header: " + path);
    const std::uint64_t V = header[0], d = header[1];
    if (V < 2 || d < 1)
        throw std::runtime_error("embedding file malformed header: " + path);
    Mat m(V, d);
    for (std::size_t i = 0; i < m.size(); ++i) {
        float f;
        in.read(reinterpret_cast<char*>(&f), sizeof(f));
        if (!in)
            throw std::runtime_error("embedding file truncated payload: " + path);
        m.data()[i] = static_cast<double>(f);
    }
    char extra;
    if (in.read(&extra, 1))
        throw std::runtime_error("embedding file has trailing bytes: " + path);
    return EmbeddingMatrix(std::move(m));
}

}  // namespace smoothie
