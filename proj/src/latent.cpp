#include "smoothie/latent.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "smoothie/kernels.hpp"

namespace smoothie {

Mat compute_D0(const EmbeddingMatrix& E, const std::vector<TokenId>& target,
               const MetricKind& metric) {
    const std::size_t V = E.V();
    Mat grid(target.size(), V);
    for (std::size_t i = 0; i < target.size(); ++i) {
        const TokenId id = target[i];
        if (id < 0 || static_cast<std::size_t>(id) >= V)
            throw std::out_of_range("compute_D0: token id out of range");
        if (metric.kind == Metric::kEuclidean) {
            kernels::neg_half_sqdist_row(E.mat().row(id), E.mat().data(), V,
                                         E.d(), grid.row(i));
        } else {
            for (std::size_t j = 0; j < V; ++j)
                grid(i, j) = (static_cast<TokenId>(j) == id) ? 0.0 : -1.0;
        }
    }
    return grid;
}

Mat compute_D0_from_embeddings(const Mat& pred, const EmbeddingMatrix& E) {
    if (pred.cols() != E.d())
        throw std::invalid_argument("compute_D0_from_embeddings: dim mismatch");
    Mat grid(pred.rows(), E.V());
    for (std::size_t i = 0; i < pred.rows(); ++i)
        kernels::neg_half_sqdist_row(pred.row(i), E.mat().data(), E.V(), E.d(),
                                     grid.row(i));
    return grid;
}

Mat simplex_latent(const std::vector<TokenId>& target, double k,
                   std::size_t V) {
    if (!(k > 0.0)) throw std::invalid_argument("simplex_latent: k must be > 0");
    Mat grid(target.size(), V, -k);
    for (std::size_t i = 0; i < target.size(); ++i) {
        const TokenId id = target[i];
        if (id < 0 || static_cast<std::size_t>(id) >= V)
            throw std::out_of_range("simplex_latent: token id out of range");
        grid(i, static_cast<std::size_t>(id)) = k;
    }
    return grid;
}

Mat softmax_rows(const Mat& grid) {
    if (!all_finite(grid))
        throw std::invalid_argument("softmax_rows: non-finite input");
    Mat out = grid;
    for (std::size_t i = 0; i < out.rows(); ++i)
        kernels::softmax_row(out.row(i), out.cols());
    return out;
}

Mat model_input(const Mat& probs, const EmbeddingMatrix& E) {
    if (probs.cols() != E.V())
        throw std::invalid_argument("model_input: shape mismatch");
    return matmul(probs, E.mat());
}

std::vector<TokenId> decode_argmax(const Mat& grid) {
    std::vector<TokenId> ids(grid.rows());
    for (std::size_t i = 0; i < grid.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < grid.cols(); ++j)
            if (grid(i, j) > grid(i, best)) best = j;
        ids[i] = static_cast<TokenId>(best);
    }
    return ids;
}

std::vector<TokenId> decode_nearest(const Mat& emb_grid,
                                    const EmbeddingMatrix& E) {
    return decode_argmax(compute_D0_from_embeddings(emb_grid, E));
}

double verify_simplex_equivalence(const std::vector<TokenId>& target, double k,
                                  double phi, double gamma, const Mat& noise,
                                  std::size_t V) {
    if (noise.rows() != target.size() || noise.cols() != V)
        throw std::invalid_argument("verify_simplex_equivalence: noise shape");
    const Mat s0 = simplex_latent(target, k, V);
    const Mat d0 = compute_D0(EmbeddingMatrix(Mat(V, 1)), target,
                              {Metric::kTrivial, k});

    Mat lhs(noise.rows(), V), rhs(noise.rows(), V);
    for (std::size_t i = 0; i < noise.rows(); ++i) {
        kernels::axpby(phi, s0.row(i), gamma, noise.row(i), lhs.row(i), V);
        kernels::axpby(2.0 * k * phi, d0.row(i), gamma, noise.row(i),
                       rhs.row(i), V);
    }
    return max_abs_diff(softmax_rows(lhs), softmax_rows(rhs));
}

TheoremOffsetReport verify_theorem_offset(const EmbeddingMatrix& E,
                                          const std::vector<double>& dist) {
    const std::size_t V = E.V();
    const std::size_t d = E.d();
    if (dist.size() != V)
        throw std::invalid_argument("verify_theorem_offset: dist size != V");
    double total = 0.0;
    for (double p : dist) {
        if (p < 0.0)
            throw std::invalid_argument("verify_theorem_offset: negative prob");
        total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw std::invalid_argument("verify_theorem_offset: dist must sum to 1");

    // A_j = sum_w dist[w] * (-0.5 ||E_w - E_j||^2)
    std::vector<double> A(V, 0.0);
    std::vector<double> row(V);
    for (std::size_t w = 0; w < V; ++w) {
        if (dist[w] == 0.0) continue;
        kernels::neg_half_sqdist_row(E.mat().row(w), E.mat().data(), V, d,
                                     row.data());
        kernels::axpy(dist[w], row.data(), A.data(), V);
    }

    // B_j = -0.5 ||u_bar - E_j||^2 with u_bar the mean embedding under dist
    std::vector<double> u_bar(d, 0.0);
    for (std::size_t w = 0; w < V; ++w)
        kernels::axpy(dist[w], E.mat().row(w), u_bar.data(), d);
    std::vector<double> B(V);
    kernels::neg_half_sqdist_row(u_bar.data(), E.mat().data(), V, d, B.data());

    double mean_diff = 0.0;
    for (std::size_t j = 0; j < V; ++j) mean_diff += A[j] - B[j];
    mean_diff /= static_cast<double>(V);

    double max_dev = 0.0;
    for (std::size_t j = 0; j < V; ++j)
        max_dev = std::max(max_dev, std::fabs((A[j] - B[j]) - mean_diff));

    // -0.5 * sum_k Var(u_k) = -0.5 * (E||u||^2 - ||u_bar||^2)
    double e_sq = 0.0;
    for (std::size_t w = 0; w < V; ++w)
        e_sq += dist[w] * kernels::dot(E.mat().row(w), E.mat().row(w), d);
    const double expected = -0.5 * (e_sq - kernels::dot(u_bar.data(),
                                                        u_bar.data(), d));

    return {max_dev, std::fabs(mean_diff - expected)};
}

}  // namespace smoothie
