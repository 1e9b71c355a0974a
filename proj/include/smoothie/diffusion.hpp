#pragma once

#include <optional>
#include <vector>

#include "smoothie/latent.hpp"
#include "smoothie/rng.hpp"
#include "smoothie/schedule.hpp"

namespace smoothie {

// Minimal denoiser contract the samplers need: predict clean target
// embeddings (m x d) from the smoothed input, the timestep and the source.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Mat predict(const Mat& x, double t,
                        const std::vector<TokenId>& source) const = 0;

    // Token logits (m x V) for the simplex-space sampler. The default derives
    // them from the predicted embeddings via the distance grid; cross-entropy
    // trained denoisers override this with their own head.
    virtual Mat predict_logits(const Mat& x, double t,
                               const std::vector<TokenId>& source,
                               const EmbeddingMatrix& E) const;
};

// Test denoiser: returns the ground-truth target embeddings regardless of
// input, isolating the diffusion machinery from learning.
class OracleDenoiser final : public Denoiser {
public:
    OracleDenoiser(const EmbeddingMatrix& E, std::vector<TokenId> target)
        : emb_(E.lookup(target)) {}
    Mat predict(const Mat&, double, const std::vector<TokenId>&) const override {
        return emb_;
    }

private:
    Mat emb_;
};

// ddpm-style cumulative schedule for the embedding / simplex baselines
struct BaselineSchedule {
    std::vector<double> alphas_bar;  // length T, nonincreasing in (0, 1]
    double k = 5.0;

    static BaselineSchedule cosine(int T, double k = 5.0);
    double at(int t) const;  // alphas_bar[t - 1], t in [1, T]; t = 0 -> 1
};

struct SampleTrace {
    struct Step {
        int step;
        double t;
        std::vector<TokenId> decoded;
        double mean_entropy;
    };
    std::vector<Step> steps;
};

// D_t = D0 / sigma(t)^2 + delta * eps
Mat forward_sample(const Mat& D0, double t, const NoiseSchedule& s, Rng& rng);

// Rebuilds the distance grid from predicted embeddings, scales by
// 1/sigma(t_next)^2 and adds delta_tilde * eps (noise_std overridable so the
// final step can be noiseless).
Mat reverse_step(const Mat& pred_emb, double t_next, const NoiseSchedule& s,
                 const EmbeddingMatrix& E, Rng& rng, double noise_std);

// Full reverse loop: D_T ~ N(0, delta_tilde^2 I), then the update above over
// a descending timestep grid; the last step is noiseless and the final grid
// is decoded by per-row argmax.
std::vector<TokenId> sample(const Denoiser& den,
                            const std::vector<TokenId>& source,
                            const NoiseSchedule& s, int steps,
                            const EmbeddingMatrix& E, std::size_t target_len,
                            Rng& rng, SampleTrace* trace = nullptr);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
Mat forward_sample_embedding(const Mat& x0, int t, const BaselineSchedule& b,
                             Rng& rng);

// S_t = sqrt(abar_t) S0 + k sqrt(1 - abar_t) eps
Mat forward_sample_simplex(const Mat& S0, int t, const BaselineSchedule& b,
                           Rng& rng);

// Reverse loop in the baseline latent space. For the embedding space the
// denoiser prediction is used directly; for the simplex space the predicted
// embeddings are turned into k-scaled logits via the distance grid.
std::vector<TokenId> sample_baseline(LatentSpace space, const Denoiser& den,
                                     const std::vector<TokenId>& source,
                                     const BaselineSchedule& b, int steps,
                                     const EmbeddingMatrix& E,
                                     std::size_t target_len, Rng& rng);

}  // namespace smoothie
