#include "smoothie/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace smoothie {

namespace {

using Counts = std::map<std::string, double>;

std::string join_gram(const Tokens& toks, std::size_t start, int n) {
    std::string g = toks[start];
    for (int k = 1; k < n; ++k) {
        g += '\x1f';
        g += toks[start + static_cast<std::size_t>(k)];
    }
    return g;
}

Counts ngram_counts(const Tokens& toks, int n) {
    Counts c;
    if (static_cast<int>(toks.size()) < n) return c;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i)
        c[join_gram(toks, i, n)] += 1.0;
    return c;
}

double safe_ratio(double num, double den) {
    // empty obligation on both sides counts as perfect
    if (den == 0.0) return num == 0.0 ? 1.0 : 0.0;
    return num / den;
}

double f1(double p, double r) {
    return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

Tokens split_tokens(const std::string& text) {
    Tokens out;
    std::istringstream iss(text);
    std::string tok;
    while (iss >> tok) out.push_back(std::move(tok));
    return out;
}

double bleu(const std::vector<Tokens>& candidates,
            const std::vector<Tokens>& references) {
    if (candidates.empty())
        throw std::invalid_argument("bleu: empty candidate list");
    if (candidates.size() != references.size())
        throw std::invalid_argument("bleu: candidate/reference count mismatch");

    double cand_len = 0.0, ref_len = 0.0;
    double log_prec = 0.0;
    for (int n = 1; n <= 4; ++n) {
        double clipped = 0.0, total = 0.0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const Counts cc = ngram_counts(candidates[i], n);
            const Counts rc = ngram_counts(references[i], n);
            for (const auto& [g, count] : cc) {
                total += count;
                auto it = rc.find(g);
                if (it != rc.end()) clipped += std::min(count, it->second);
            }
        }
        double p;
        if (total == 0.0) {
            p = (n == 1) ? 0.0 : 1.0;  // no candidate long enough for order n
        } else if (clipped == 0.0 && n >= 2) {
            p = (clipped + 1.0) / (total + 1.0);
        } else {
            p = clipped / total;
        }
        if (p == 0.0) return 0.0;
        log_prec += 0.25 * std::log(p);
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        cand_len += static_cast<double>(candidates[i].size());
        ref_len += static_cast<double>(references[i].size());
    }
    if (cand_len == 0.0) return 0.0;
    const double bp =
        cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
    return bp * std::exp(log_prec);
}

PRF rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
    if (n != 1 && n != 2)
        throw std::invalid_argument("rouge_n: n must be 1 or 2");
    if (reference.empty())
        throw std::invalid_argument("rouge_n: empty reference");
    const Counts cc = ngram_counts(candidate, n);
    const Counts rc = ngram_counts(reference, n);
    double overlap = 0.0, cand_total = 0.0, ref_total = 0.0;
    for (const auto& [g, count] : cc) {
        cand_total += count;
        auto it = rc.find(g);
        if (it != rc.end()) overlap += std::min(count, it->second);
    }
    for (const auto& [g, count] : rc) ref_total += count;
    PRF out;
    out.precision = cand_total > 0.0 ? overlap / cand_total : 0.0;
    out.recall = ref_total > 0.0 ? overlap / ref_total : 0.0;
    out.f1 = f1(out.precision, out.recall);
    return out;
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
    if (reference.empty())
        throw std::invalid_argument("rouge_l: empty reference");
    const std::size_t a = candidate.size(), b = reference.size();
    std::vector<std::size_t> prev(b + 1, 0), cur(b + 1, 0);
    for (std::size_t i = 1; i <= a; ++i) {
        for (std::size_t j = 1; j <= b; ++j) {
            if (candidate[i - 1] == reference[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const double lcs = static_cast<double>(prev[b]);
    const double p = a > 0 ? lcs / static_cast<double>(a) : 0.0;
    const double r = lcs / static_cast<double>(b);
    return f1(p, r);
}

double div_n(const std::vector<Tokens>& corpus, int n) {
    if (corpus.empty()) throw std::invalid_argument("div_n: empty corpus");
    Counts seen;
    double total = 0.0;
    for (const Tokens& toks : corpus)
        for (const auto& [g, count] : ngram_counts(toks, n)) {
            seen[g] += count;
            total += count;
        }
    if (total == 0.0)
        throw std::invalid_argument(
            "div_n: every sequence shorter than n tokens");
    return static_cast<double>(seen.size()) / total;
}

double sari(const std::vector<Tokens>& sources,
            const std::vector<Tokens>& candidates,
            const std::vector<std::vector<Tokens>>& references) {
    if (sources.size() != candidates.size() ||
        sources.size() != references.size())
        throw std::invalid_argument("sari: misaligned lists");
    if (sources.empty()) throw std::invalid_argument("sari: empty input");

    double total = 0.0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const double r = static_cast<double>(references[i].size());
        if (r == 0.0) throw std::invalid_argument("sari: no references");
        double sent = 0.0;
        for (int n = 1; n <= 4; ++n) {
            const Counts sc = ngram_counts(sources[i], n);
            const Counts cc = ngram_counts(candidates[i], n);
            Counts rc;  // fractional reference counts
            for (const Tokens& ref : references[i])
                for (const auto& [g, count] : ngram_counts(ref, n))
                    rc[g] += count / r;

            auto at = [](const Counts& c, const std::string& g) {
                auto it = c.find(g);
                return it == c.end() ? 0.0 : it->second;
            };
            std::map<std::string, char> grams;
            for (const auto& [g, c] : sc) grams.emplace(g, 0);
            for (const auto& [g, c] : cc) grams.emplace(g, 0);
            for (const auto& [g, c] : rc) grams.emplace(g, 0);

            double keep_num = 0.0, keep_c = 0.0, keep_r = 0.0;
            double add_num = 0.0, add_c = 0.0, add_r = 0.0;
            double del_num = 0.0, del_c = 0.0;
            for (const auto& [g, unused] : grams) {
                const double s = at(sc, g), c = at(cc, g), ref = at(rc, g);
                const double kc = std::min(s, c);
                const double kr = std::min(s, ref);
                keep_num += std::min(kc, kr);
                keep_c += kc;
                keep_r += kr;

                const double ac = std::max(c - s, 0.0);
                const double ar = std::max(ref - s, 0.0);
                add_num += std::min(ac, ar);
                add_c += ac;
                add_r += ar;

                const double dc = std::max(s - c, 0.0);
                const double dr = std::max(s - ref, 0.0);
                del_num += std::min(dc, dr);
                del_c += dc;
            }
            const double keep_f = f1(safe_ratio(keep_num, keep_c),
                                     safe_ratio(keep_num, keep_r));
            const double add_f = f1(safe_ratio(add_num, add_c),
                                    safe_ratio(add_num, add_r));
            const double del_p = safe_ratio(del_num, del_c);
            sent += (keep_f + add_f + del_p) / 3.0;
        }
        total += sent / 4.0;
    }
    return 100.0 * total / static_cast<double>(sources.size());
}

EvalReport evaluate(const std::vector<Tokens>& sources,
                    const std::vector<Tokens>& candidates,
                    const std::vector<Tokens>& references) {
    if (candidates.size() != references.size() || candidates.empty())
        throw std::invalid_argument("evaluate: misaligned corpora");
    EvalReport rep;
    rep.n_examples = candidates.size();
    rep.bleu = bleu(candidates, references);
    double r1 = 0.0, r2 = 0.0, rl = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        r1 += rouge_n(candidates[i], references[i], 1).f1;
        r2 += rouge_n(candidates[i], references[i], 2).f1;
        rl += rouge_l(candidates[i], references[i]);
    }
    const double n = static_cast<double>(candidates.size());
    rep.rouge1 = r1 / n;
    rep.rouge2 = r2 / n;
    rep.rougeL = rl / n;
    rep.div1 = div_n(candidates, 1);
    try {
        rep.div4 = div_n(candidates, 4);
    } catch (const std::invalid_argument&) {
        rep.div4 = 0.0;  // all candidates shorter than 4 tokens
    }
    if (!sources.empty()) {
        if (sources.size() != candidates.size())
            throw std::invalid_argument("evaluate: misaligned sources");
        std::vector<std::vector<Tokens>> refs;
        refs.reserve(references.size());
        for (const Tokens& ref : references) refs.push_back({ref});
        rep.sari = sari(sources, candidates, refs);
    }
    return rep;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["bleu"] = bleu;
    j["rouge1"] = rouge1;
    j["rouge2"] = rouge2;
    j["rougeL"] = rougeL;
    j["div1"] = div1;
    j["div4"] = div4;
    j["sari"] = sari;
    j["n_examples"] = n_examples;
    return j.dump();
}

std::string EvalReport::to_csv_line() const {
    std::ostringstream out;
    out << "bleu,rouge1,rouge2,rougeL,div1,div4,sari,n_examples\n"
        << bleu << ',' << rouge1 << ',' << rouge2 << ',' << rougeL << ','
        << div1 << ',' << div4 << ',' << sari << ',' << n_examples << '\n';
    return out.str();
}

}  // namespace smoothie
