#pragma once

#include "smoothie/embeddings.hpp"
#include "smoothie/matrix.hpp"
#include "smoothie/vocab.hpp"

namespace smoothie {

enum class LatentSpace { kSmoothie, kEmbedding, kSimplex };

enum class Metric { kEuclidean, kTrivial };

struct MetricKind {
    Metric kind = Metric::kEuclidean;
    double k = 5.0;  // simplex logit scale, used by trivial-metric comparisons
};

// m x V grid of negative half squared distances:
//   euclidean: D0[i][j] = -||E_{w_i} - E_j||^2 / 2
//   trivial:   D0[i][j] = 0 if j == w_i else -1
Mat compute_D0(const EmbeddingMatrix& E, const std::vector<TokenId>& target,
               const MetricKind& metric);

// Same grid built from arbitrary predicted embeddings instead of target rows.
Mat compute_D0_from_embeddings(const Mat& pred, const EmbeddingMatrix& E);

// k-logit grid: +k at the target id, -k elsewhere.
Mat simplex_latent(const std::vector<TokenId>& target, double k, std::size_t V);

// Row-wise softmax with max subtraction. Throws on non-finite input.
Mat softmax_rows(const Mat& grid);

// p * E, the model input.
Mat model_input(const Mat& probs, const EmbeddingMatrix& E);

// Per-row argmax id, ties broken by lowest id.
std::vector<TokenId> decode_argmax(const Mat& grid);

// Per-row nearest embedding id (embedding-space baseline decode).
std::vector<TokenId> decode_nearest(const Mat& emb_grid,
                                    const EmbeddingMatrix& E);

// max |softmax(phi*S0 + gamma*eps) - softmax(2k*phi*D0_trivial + gamma*eps)|
// over all entries, with the noise grid shared between the two sides.
double verify_simplex_equivalence(const std::vector<TokenId>& target, double k,
                                  double phi, double gamma, const Mat& noise,
                                  std::size_t V);

struct TheoremOffsetReport {
    double max_row_deviation;   // max deviation of A - B from its row mean
    double max_offset_mismatch; // max |row mean of (A - B) - (-0.5 * sum Var)|
};

// Checks that sum_w dist[w] * D0(E_w) differs from D0(sum_w dist[w] * E_w)
// by a constant equal to -0.5 * sum_k Var(u_k), u ~ embedding under dist.
TheoremOffsetReport verify_theorem_offset(const EmbeddingMatrix& E,
                                          const std::vector<double>& dist);

}  // namespace smoothie
