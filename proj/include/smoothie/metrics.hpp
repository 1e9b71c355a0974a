#pragma once

#include <string>
#include <vector>

namespace smoothie {

using Tokens = std::vector<std::string>;

struct EvalReport {
    double bleu = 0.0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double div1 = 0.0;
    double div4 = 0.0;
    double sari = 0.0;  // [0, 100]
    std::size_t n_examples = 0;

    std::string to_json() const;
    std::string to_csv_line() const;  // header + one data line
};

// Corpus BLEU, orders 1-4, uniform weights, brevity penalty. When a clipped
// precision is zero for n >= 2 it is smoothed to (clip+1)/(total+1).
double bleu(const std::vector<Tokens>& candidates,
            const std::vector<Tokens>& references);

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

PRF rouge_n(const Tokens& candidate, const Tokens& reference, int n);
double rouge_l(const Tokens& candidate, const Tokens& reference);  // LCS F1

// distinct n-grams / total n-grams over the whole corpus. Throws when every
// sequence is shorter than n.
double div_n(const std::vector<Tokens>& corpus, int n);

// Sentence-level SARI averaged over the corpus, in [0, 100]. For each order
// n in 1..4: keep and add contribute F1, delete contributes precision; a
// score with an empty obligation on both sides counts as 1.
double sari(const std::vector<Tokens>& sources,
            const std::vector<Tokens>& candidates,
            const std::vector<std::vector<Tokens>>& references);

// Full report over aligned corpora (sources may be empty for tasks without
// SARI; sari is then 0 and div/overlap metrics are still filled).
EvalReport evaluate(const std::vector<Tokens>& sources,
                    const std::vector<Tokens>& candidates,
                    const std::vector<Tokens>& references);

Tokens split_tokens(const std::string& text);

}  // namespace smoothie
