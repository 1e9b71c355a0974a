#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "smoothie/data_io.hpp"

using namespace smoothie;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("jsonl round trip, optional source field") {
    ParallelDataset ds;
    ds.pairs.push_back({"a b", "c d"});
    ds.pairs.push_back({"", "just a target"});
    const auto path = temp_path("smoothie_data_test.jsonl");
    save_jsonl(ds, path);
    const auto loaded = load_jsonl(path);
    REQUIRE(loaded.pairs.size() == 2);
    CHECK(loaded.pairs[0].source == "a b");
    CHECK(loaded.pairs[0].target == "c d");
    CHECK(loaded.pairs[1].source == "");
    CHECK(loaded.pairs[1].target == "just a target");
    std::remove(path.c_str());
}

TEST_CASE("malformed jsonl lines are rejected with their line number") {
    const auto path = temp_path("smoothie_data_bad.jsonl");
    {
        std::ofstream out(path);
        out << R"({"source": "x", "target": "y"})" << "\n";
        out << "{not json}\n";
    }
    try {
        load_jsonl(path);
        FAIL("expected a parse error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }

    {
        std::ofstream out(path);
        out << R"({"source": "x", "target": ""})" << "\n";
    }
    CHECK_THROWS(load_jsonl(path));

    {
        std::ofstream out(path);
        out << R"({"source": "x"})" << "\n";
    }
    CHECK_THROWS(load_jsonl(path));
    std::remove(path.c_str());

    CHECK_THROWS(load_jsonl(temp_path("smoothie_missing.jsonl")));
}

TEST_CASE("synthetic copy task duplicates the source") {
    const auto ds = make_synthetic(SyntheticTask::kCopy, 20, 50, 6, 5);
    REQUIRE(ds.pairs.size() == 50);
    for (const auto& p : ds.pairs) {
        CHECK(p.source == p.target);
        CHECK(Vocabulary::tokenize(p.source).size() == 6);
        for (const auto& tok : Vocabulary::tokenize(p.source)) {
            CHECK(tok.substr(0, 1) == "w");
            CHECK(std::stoul(tok.substr(1)) < 20);
        }
    }
}

TEST_CASE("synthetic cipher is a consistent bijection") {
    const auto ds = make_synthetic(SyntheticTask::kCipher, 16, 200, 5, 9);
    std::map<std::string, std::string> mapping;
    std::set<std::string> images;
    for (const auto& p : ds.pairs) {
        const auto src = Vocabulary::tokenize(p.source);
        const auto tgt = Vocabulary::tokenize(p.target);
        REQUIRE(src.size() == tgt.size());
        for (std::size_t i = 0; i < src.size(); ++i) {
            auto [it, inserted] = mapping.emplace(src[i], tgt[i]);
            if (!inserted) CHECK(it->second == tgt[i]);
        }
    }
    for (const auto& [from, to] : mapping) images.insert(to);
    CHECK(images.size() == mapping.size());  // injective

    // not the identity (astronomically unlikely for a random permutation)
    bool any_moved = false;
    for (const auto& [from, to] : mapping) any_moved |= (from != to);
    CHECK(any_moved);

    // same seed, same permutation; different seed, different pairs
    const auto same = make_synthetic(SyntheticTask::kCipher, 16, 200, 5, 9);
    CHECK(same.pairs[0].source == ds.pairs[0].source);
    CHECK(same.pairs[0].target == ds.pairs[0].target);
    const auto other = make_synthetic(SyntheticTask::kCipher, 16, 200, 5, 10);
    bool differs = false;
    for (std::size_t i = 0; i < 200; ++i)
        differs |= (other.pairs[i].source != ds.pairs[i].source);
    CHECK(differs);
}

TEST_CASE("make_synthetic validates its arguments") {
    CHECK_THROWS(make_synthetic(SyntheticTask::kCopy, 4, 10, 5, 0));
    CHECK_THROWS(make_synthetic(SyntheticTask::kCopy, 20, 10, 1, 0));
}

TEST_CASE("batches cover every pair once per epoch") {
    const auto ds = make_synthetic(SyntheticTask::kCopy, 12, 23, 4, 1);
    std::vector<std::string> corpus;
    for (const auto& p : ds.pairs) corpus.push_back(p.target);
    const auto vocab = Vocabulary::build(corpus, 64);

    const auto bs = batches(ds, vocab, 8, 6, 6, 7, 0);
    REQUIRE(bs.size() == 3);  // 8 + 8 + 7
    CHECK(bs[2].target.size() == 7);

    std::multiset<std::string> seen, expected;
    for (const auto& b : bs) {
        REQUIRE(b.source.size() == b.target.size());
        for (const auto& t : b.target) {
            CHECK(t.size() == 6);
            seen.insert(vocab.decode_text(t));
        }
        for (const auto& s : b.source) CHECK(s.size() == 6);
    }
    for (const auto& p : ds.pairs) expected.insert(p.target);
    CHECK(seen == expected);
}

TEST_CASE("batch shuffling is seeded and varies by epoch") {
    const auto ds = make_synthetic(SyntheticTask::kCopy, 12, 40, 4, 2);
    std::vector<std::string> corpus;
    for (const auto& p : ds.pairs) corpus.push_back(p.target);
    const auto vocab = Vocabulary::build(corpus, 64);

    const auto a = batches(ds, vocab, 8, 6, 6, 5, 0);
    const auto b = batches(ds, vocab, 8, 6, 6, 5, 0);
    CHECK(a[0].target == b[0].target);

    const auto c = batches(ds, vocab, 8, 6, 6, 5, 1);
    bool differs = false;
    for (std::size_t i = 0; i < a.size() && !differs; ++i)
        differs = (a[i].target != c[i].target);
    CHECK(differs);
}

TEST_CASE("empty sources become empty id rows") {
    ParallelDataset ds;
    ds.pairs.push_back({"", "w1 w2"});
    const auto vocab = Vocabulary::build({"w1 w2"}, 16);
    const auto bs = batches(ds, vocab, 4, 6, 6, 0, 0);
    REQUIRE(bs.size() == 1);
    CHECK(bs[0].source[0].empty());
    CHECK(bs[0].target[0].size() == 6);
}
