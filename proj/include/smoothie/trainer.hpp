#pragma once

#include <string>
#include <utility>
#include <vector>

#include "smoothie/data_io.hpp"
#include "smoothie/denoiser.hpp"
#include "smoothie/diffusion.hpp"
#include "smoothie/schedule.hpp"

namespace smoothie {

struct TrainConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double weight_decay = 0.01;
    int warmup_steps = 5000;
    double grad_clip = 1.0;
    double ema_decay = 0.9999;
    std::size_t batch_size = 32;
    int total_steps = 5000;
    std::uint64_t seed = 0;
    int log_every = 50;

    void validate() const;
};

struct OptimizerState {
    ParamMap m;  // first moments
    ParamMap v;  // second moments
    std::int64_t step = 0;
};

// Mean squared error over all elements plus its gradient w.r.t. pred.
std::pair<double, Mat> loss_E(const Mat& pred, const Mat& target_emb);

// MSE over the m x V grid; used for the optimal-offset comparison, not for
// training.
double loss_D(const Mat& pred_D, const Mat& true_D0);

// Scales gradients in place so the global norm is at most `clip`; returns
// the pre-clip norm.
double clip_global_norm(ParamMap& grads, double clip);

// Bias-corrected AdamW step with linear warmup then constant lr.
void adamw_step(ParamMap& params, ParamMap& grads, OptimizerState& opt,
                const TrainConfig& cfg);

void ema_update(ParamMap& shadow, const ParamMap& params, double decay);

struct StepStats {
    double loss;
    double lr;
    double grad_norm;  // pre-clip
};

// One optimization step over a batch, per the training procedure of the
// selected latent space. Throws on NaN loss.
StepStats training_step(TrainableDenoiser& den, OptimizerState& opt,
                        ParamMap& ema, const Batch& batch,
                        const EmbeddingMatrix& E, const NoiseSchedule& sched,
                        const BaselineSchedule& bsched, LatentSpace space,
                        const TrainConfig& cfg, Rng& rng);

struct TrainResult {
    ParamMap ema;
    std::vector<StepStats> log;  // one entry per log_every steps
};

// Full loop: seeded per-epoch shuffle, total_steps steps, CSV metrics log
// (columns step, loss, lr, grad_norm) when log_path is nonempty.
TrainResult train(TrainableDenoiser& den, const TrainConfig& cfg,
                  const ParallelDataset& data, const Vocabulary& vocab,
                  const EmbeddingMatrix& E, const NoiseSchedule& sched,
                  const BaselineSchedule& bsched, LatentSpace space,
                  std::size_t max_src, std::size_t max_tgt,
                  const std::string& log_path = {});

}  // namespace smoothie
