#include "smoothie/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "smoothie/rng.hpp"

namespace smoothie {

ParallelDataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    ParallelDataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed JSON: " + e.what());
        }
        if (!j.contains("target") || !j["target"].is_string())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": missing string field \"target\"");
        ParallelDataset::Pair p;
        p.target = j["target"].get<std::string>();
        if (p.target.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": empty target");
        if (j.contains("source")) {
            if (!j["source"].is_string())
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": \"source\" must be a string");
            p.source = j["source"].get<std::string>();
        }
        ds.pairs.push_back(std::move(p));
    }
    return ds;
}

void save_jsonl(const ParallelDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& p : ds.pairs) {
        nlohmann::json j;
        if (!p.source.empty()) j["source"] = p.source;
        j["target"] = p.target;
        out << j.dump() << '\n';
    }
}

ParallelDataset make_synthetic(SyntheticTask task, std::size_t V,
                               std::size_t n_pairs, std::size_t len,
                               std::uint64_t seed) {
    if (V < 8) throw std::invalid_argument("make_synthetic: V must be >= 8");
    if (len < 2) throw std::invalid_argument("make_synthetic: len must be >= 2");
    Rng rng(seed);
    std::vector<std::size_t> perm(V);
    std::iota(perm.begin(), perm.end(), 0);
    if (task == SyntheticTask::kCipher) {
        // Fisher-Yates with the seeded engine
        for (std::size_t i = V - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(i)));
            std::swap(perm[i], perm[j]);
        }
    }
    ParallelDataset ds;
    ds.pairs.reserve(n_pairs);
    for (std::size_t n = 0; n < n_pairs; ++n) {
        std::string src, tgt;
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t w = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(V) - 1));
            if (i) {
                src += ' ';
                tgt += ' ';
            }
            src += "w" + std::to_string(w);
            tgt += "w" + std::to_string(perm[w]);
        }
        ds.pairs.push_back({std::move(src), std::move(tgt)});
    }
    return ds;
}

std::vector<Batch> batches(const ParallelDataset& ds, const Vocabulary& vocab,
                           std::size_t batch_size, std::size_t max_src,
                           std::size_t max_tgt, std::uint64_t seed, int epoch) {
    if (batch_size < 1)
        throw std::invalid_argument("batches: batch_size must be >= 1");
    std::vector<std::size_t> order(ds.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1)));
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
    std::vector<Batch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        Batch b;
        const std::size_t end = std::min(start + batch_size, order.size());
        for (std::size_t i = start; i < end; ++i) {
            const auto& p = ds.pairs[order[i]];
            b.source.push_back(p.source.empty()
                                   ? std::vector<TokenId>{}
                                   : vocab.encode(p.source, max_src).ids);
            b.target.push_back(vocab.encode(p.target, max_tgt).ids);
        }
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace smoothie
