#include "smoothie/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "smoothie/kernels.hpp"

namespace smoothie {

Mat Denoiser::predict_logits(const Mat& x, double t,
                             const std::vector<TokenId>& source,
                             const EmbeddingMatrix& E) const {
    return compute_D0_from_embeddings(predict(x, t, source), E);
}

BaselineSchedule BaselineSchedule::cosine(int T, double k) {
    if (T < 1) throw std::invalid_argument("BaselineSchedule: T must be >= 1");
    BaselineSchedule b;
    b.k = k;
    b.alphas_bar.resize(T);
    for (int t = 1; t <= T; ++t) {
        const double c = std::cos((static_cast<double>(t) / T) *
                                  std::numbers::pi / 2.0);
        b.alphas_bar[t - 1] = c * c;
    }
    return b;
}

double BaselineSchedule::at(int t) const {
    if (t == 0) return 1.0;
    if (t < 0 || static_cast<std::size_t>(t) > alphas_bar.size())
        throw std::invalid_argument("BaselineSchedule: t out of range");
    return alphas_bar[static_cast<std::size_t>(t) - 1];
}

Mat forward_sample(const Mat& D0, double t, const NoiseSchedule& s, Rng& rng) {
    if (t < 1.0 || t > static_cast<double>(s.T))
        throw std::invalid_argument("forward_sample: t outside [1, T]");
    const double sig = s.sigma(t);
    const double scale = 1.0 / (sig * sig);
    Mat out(D0.rows(), D0.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = scale * D0.data()[i] + s.delta * rng.normal();
    return out;
}

Mat reverse_step(const Mat& pred_emb, double t_next, const NoiseSchedule& s,
                 const EmbeddingMatrix& E, Rng& rng, double noise_std) {
    if (t_next < 0.0 || t_next >= static_cast<double>(s.T))
        throw std::invalid_argument("reverse_step: t_next outside [0, T)");
    Mat grid = compute_D0_from_embeddings(pred_emb, E);
    const double sig = s.sigma(t_next);
    const double scale = 1.0 / (sig * sig);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.data()[i] *= scale;
        if (noise_std > 0.0) grid.data()[i] += noise_std * rng.normal();
    }
    return grid;
}

namespace {

double mean_row_entropy(const Mat& probs) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i)
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            const double p = probs(i, j);
            if (p > 0.0) total -= p * std::log(p);
        }
    return probs.rows() ? total / static_cast<double>(probs.rows()) : 0.0;
}

}  // namespace

std::vector<TokenId> sample(const Denoiser& den,
                            const std::vector<TokenId>& source,
                            const NoiseSchedule& s, int steps,
                            const EmbeddingMatrix& E, std::size_t target_len,
                            Rng& rng, SampleTrace* trace) {
    if (steps < 1) throw std::invalid_argument("sample: steps must be >= 1");
    const std::vector<double> grid = s.timestep_grid(steps);

    // D_T ~ N(0, delta_tilde^2 I)
    Mat D(target_len, E.V());
    for (double& v : D.vec()) v = s.delta_tilde * rng.normal();

    for (std::size_t step = 0; step < grid.size(); ++step) {
        const double t = grid[step];
        const double t_next = (step + 1 < grid.size()) ? grid[step + 1] : 0.0;
        const bool last = step + 1 == grid.size();
        const Mat p = softmax_rows(D);
        const Mat pred = den.predict(model_input(p, E), t, source);
        D = reverse_step(pred, t_next, s, E, rng, last ? 0.0 : s.delta_tilde);
        if (trace) {
            SampleTrace::Step ts;
            ts.step = static_cast<int>(step);
            ts.t = t;
            ts.decoded = decode_argmax(D);
            ts.mean_entropy = mean_row_entropy(softmax_rows(D));
            trace->steps.push_back(std::move(ts));
        }
    }
    return decode_argmax(D);
}

Mat forward_sample_embedding(const Mat& x0, int t, const BaselineSchedule& b,
                             Rng& rng) {
    const double abar = b.at(t);
    if (t < 1) throw std::invalid_argument("forward_sample_embedding: t < 1");
    const double sa = std::sqrt(abar);
    const double sn = std::sqrt(1.0 - abar);
    Mat out(x0.rows(), x0.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = sa * x0.data()[i] + sn * rng.normal();
    return out;
}

Mat forward_sample_simplex(const Mat& S0, int t, const BaselineSchedule& b,
                           Rng& rng) {
    const double abar = b.at(t);
    if (t < 1) throw std::invalid_argument("forward_sample_simplex: t < 1");
    const double sa = std::sqrt(abar);
    const double sn = b.k * std::sqrt(1.0 - abar);
    Mat out(S0.rows(), S0.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = sa * S0.data()[i] + sn * rng.normal();
    return out;
}

std::vector<TokenId> sample_baseline(LatentSpace space, const Denoiser& den,
                                     const std::vector<TokenId>& source,
                                     const BaselineSchedule& b, int steps,
                                     const EmbeddingMatrix& E,
                                     std::size_t target_len, Rng& rng) {
    if (steps < 1)
        throw std::invalid_argument("sample_baseline: steps must be >= 1");
    if (space == LatentSpace::kSmoothie)
        throw std::invalid_argument("sample_baseline: use sample() for smoothie");
    const int T = static_cast<int>(b.alphas_bar.size());
    std::vector<int> grid;
    for (int i = steps; i >= 1; --i) {
        int t = static_cast<int>(
            std::llround(static_cast<double>(T) * i / steps));
        if (t < 1) t = 1;
        if (grid.empty() || grid.back() != t) grid.push_back(t);
    }

    const std::size_t m = target_len;

    if (space == LatentSpace::kEmbedding) {
        Mat x = Mat(m, E.d());
        for (double& v : x.vec()) v = rng.normal();
        for (std::size_t step = 0; step < grid.size(); ++step) {
            const int t = grid[step];
            const int t_next = (step + 1 < grid.size()) ? grid[step + 1] : 0;
            const bool last = step + 1 == grid.size();
            const Mat pred =
                den.predict(x, static_cast<double>(t), source);
            const double sa = std::sqrt(b.at(t_next));
            const double sn = last ? 0.0 : std::sqrt(1.0 - b.at(t_next));
            x = Mat(m, E.d());
            for (std::size_t i = 0; i < x.size(); ++i)
                x.data()[i] = sa * pred.data()[i] +
                              (sn > 0.0 ? sn * rng.normal() : 0.0);
        }
        return decode_nearest(x, E);
    }

    // simplex space
    Mat S(m, E.V());
    for (double& v : S.vec()) v = b.k * rng.normal();
    for (std::size_t step = 0; step < grid.size(); ++step) {
        const int t = grid[step];
        const int t_next = (step + 1 < grid.size()) ? grid[step + 1] : 0;
        const bool last = step + 1 == grid.size();
        const Mat p = softmax_rows(S);
        const Mat logits = den.predict_logits(model_input(p, E),
                                              static_cast<double>(t), source, E);
        // soft simplex estimate: 2k * softmax(logits) - k, exactly +-k for a
        // one-hot prediction
        const Mat probs = softmax_rows(logits);
        const double sa = std::sqrt(b.at(t_next));
        const double sn =
            last ? 0.0 : b.k * std::sqrt(1.0 - b.at(t_next));
        S = Mat(m, E.V());
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double s0 = 2.0 * b.k * probs.data()[i] - b.k;
            S.data()[i] = sa * s0 + (sn > 0.0 ? sn * rng.normal() : 0.0);
        }
    }
    return decode_argmax(S);
}

}  // namespace smoothie
