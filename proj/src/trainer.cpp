#include "smoothie/trainer.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "smoothie/kernels.hpp"
#include "smoothie/latent.hpp"

namespace smoothie {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0))
        throw std::invalid_argument("train: beta1 must be in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0))
        throw std::invalid_argument("train: beta2 must be in (0, 1)");
    if (!(grad_clip > 0.0))
        throw std::invalid_argument("train: grad_clip must be positive");
    if (ema_decay < 0.0 || ema_decay >= 1.0)
        throw std::invalid_argument("train: ema_decay must be in [0, 1)");
    if (batch_size < 1)
        throw std::invalid_argument("train: batch_size must be >= 1");
    if (warmup_steps < 0)
        throw std::invalid_argument("train: warmup_steps must be >= 0");
    if (total_steps < 0)
        throw std::invalid_argument("train: total_steps must be >= 0");
}

std::pair<double, Mat> loss_E(const Mat& pred, const Mat& target_emb) {
    if (!pred.same_shape(target_emb))
        throw std::invalid_argument("loss_E: shape mismatch");
    const double n = static_cast<double>(pred.size());
    double loss = 0.0;
    Mat grad(pred.rows(), pred.cols());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - target_emb.data()[i];
        loss += d * d;
        grad.data()[i] = 2.0 * d / n;
    }
    return {loss / n, std::move(grad)};
}

double loss_D(const Mat& pred_D, const Mat& true_D0) {
    if (!pred_D.same_shape(true_D0))
        throw std::invalid_argument("loss_D: shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < pred_D.size(); ++i) {
        const double d = pred_D.data()[i] - true_D0.data()[i];
        loss += d * d;
    }
    return loss / static_cast<double>(pred_D.size());
}

double clip_global_norm(ParamMap& grads, double clip) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        sq += kernels::dot(g.data(), g.data(), g.size());
    const double norm = std::sqrt(sq);
    if (norm > clip && norm > 0.0) {
        const double scale = clip / norm;
        for (auto& [name, g] : grads)
            for (double& v : g.vec()) v *= scale;
    }
    return norm;
}

void adamw_step(ParamMap& params, ParamMap& grads, OptimizerState& opt,
                const TrainConfig& cfg) {
    constexpr double kEps = 1e-8;
    ++opt.step;
    const double warm =
        cfg.warmup_steps > 0
            ? std::min(1.0, static_cast<double>(opt.step) / cfg.warmup_steps)
            : 1.0;
    const double lr = cfg.lr * warm;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;  // unused tensor this step
        const Mat& g = git->second;
        Mat& m = opt.m.try_emplace(name, p.rows(), p.cols()).first->second;
        Mat& v = opt.v.try_emplace(name, p.rows(), p.cols()).first->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.data()[i] = cfg.beta1 * m.data()[i] +
                          (1.0 - cfg.beta1) * g.data()[i];
            v.data()[i] = cfg.beta2 * v.data()[i] +
                          (1.0 - cfg.beta2) * g.data()[i] * g.data()[i];
            const double mhat = m.data()[i] / bc1;
            const double vhat = v.data()[i] / bc2;
            p.data()[i] -= lr * (mhat / (std::sqrt(vhat) + kEps) +
                                 cfg.weight_decay * p.data()[i]);
        }
    }
}

void ema_update(ParamMap& shadow, const ParamMap& params, double decay) {
    for (const auto& [name, p] : params) {
        auto it = shadow.find(name);
        if (it == shadow.end()) {
            shadow.emplace(name, p);
            continue;
        }
        Mat& s = it->second;
        for (std::size_t i = 0; i < p.size(); ++i)
            s.data()[i] = decay * s.data()[i] + (1.0 - decay) * p.data()[i];
    }
}

StepStats training_step(TrainableDenoiser& den, OptimizerState& opt,
                        ParamMap& ema, const Batch& batch,
                        const EmbeddingMatrix& E, const NoiseSchedule& sched,
                        const BaselineSchedule& bsched, LatentSpace space,
                        const TrainConfig& cfg, Rng& rng) {
    if (batch.target.empty())
        throw std::invalid_argument("training_step: empty batch");
    ParamMap grads;
    double loss_sum = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.target.size());

    for (std::size_t e = 0; e < batch.target.size(); ++e) {
        const auto& target = batch.target[e];
        const auto& source = batch.source[e];
        double loss = 0.0;
        if (space == LatentSpace::kSmoothie) {
            const int t = static_cast<int>(rng.uniform_int(1, sched.T));
            const Mat D0 = compute_D0(E, target, {Metric::kEuclidean, 0.0});
            const Mat Dt = forward_sample(D0, t, sched, rng);
            const Mat x = model_input(softmax_rows(Dt), E);
            loss = den.loss_and_grads(x, t, source, E.lookup(target), grads);
        } else if (space == LatentSpace::kEmbedding) {
            const int T = static_cast<int>(bsched.alphas_bar.size());
            const int t = static_cast<int>(rng.uniform_int(1, T));
            const Mat x0 = E.lookup(target);
            const Mat xt = forward_sample_embedding(x0, t, bsched, rng);
            loss = den.loss_and_grads(xt, t, source, x0, grads);
        } else {
            const int T = static_cast<int>(bsched.alphas_bar.size());
            const int t = static_cast<int>(rng.uniform_int(1, T));
            const Mat S0 = simplex_latent(target, bsched.k, E.V());
            const Mat St = forward_sample_simplex(S0, t, bsched, rng);
            const Mat x = model_input(softmax_rows(St), E);
            loss = den.loss_and_grads_ce(x, t, source, target, grads);
        }
        loss_sum += loss;
    }
    for (auto& [name, g] : grads)
        for (double& v : g.vec()) v *= inv_b;
    const double loss = loss_sum * inv_b;
    if (!std::isfinite(loss))
        throw std::runtime_error("training_step: non-finite loss");

    const double norm = clip_global_norm(grads, cfg.grad_clip);
    adamw_step(den.params(), grads, opt, cfg);
    ema_update(ema, den.params(), cfg.ema_decay);

    const double warm =
        cfg.warmup_steps > 0
            ? std::min(1.0, static_cast<double>(opt.step) / cfg.warmup_steps)
            : 1.0;
    return {loss, cfg.lr * warm, norm};
}

TrainResult train(TrainableDenoiser& den, const TrainConfig& cfg,
                  const ParallelDataset& data, const Vocabulary& vocab,
                  const EmbeddingMatrix& E, const NoiseSchedule& sched,
                  const BaselineSchedule& bsched, LatentSpace space,
                  std::size_t max_src, std::size_t max_tgt,
                  const std::string& log_path) {
    cfg.validate();
    if (data.pairs.empty()) throw std::invalid_argument("train: empty dataset");

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw std::runtime_error("cannot open " + log_path);
        log << "step,loss,lr,grad_norm\n";
    }

    OptimizerState opt;
    ParamMap ema = den.params();
    Rng rng(cfg.seed);
    TrainResult result;
    int step = 0;
    for (int epoch = 0; step < cfg.total_steps; ++epoch) {
        const auto epoch_batches =
            batches(data, vocab, cfg.batch_size, max_src, max_tgt, cfg.seed,
                    epoch);
        for (const Batch& b : epoch_batches) {
            if (step >= cfg.total_steps) break;
            const StepStats stats = training_step(den, opt, ema, b, E, sched,
                                                  bsched, space, cfg, rng);
            ++step;
            if (cfg.log_every > 0 && step % cfg.log_every == 0) {
                result.log.push_back(stats);
                if (log)
                    log << step << ',' << stats.loss << ',' << stats.lr << ','
                        << stats.grad_norm << '\n';
            }
        }
    }
    result.ema = std::move(ema);
    return result;
}

}  // namespace smoothie
