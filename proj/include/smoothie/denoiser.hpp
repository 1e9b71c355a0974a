#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "smoothie/autodiff.hpp"
#include "smoothie/diffusion.hpp"

namespace smoothie {

enum class DenoiserFamily { kMlp, kTransformer };

struct DenoiserConfig {
    DenoiserFamily family = DenoiserFamily::kTransformer;
    std::size_t d = 16;        // embedding dim (input/output width)
    std::size_t hidden = 64;   // mlp hidden width / transformer model dim
    std::size_t t_emb_dim = 16;
    int T = 200;               // timestep table covers [0, T]
    int layers = 2;            // decoder blocks (transformer family)
    int enc_layers = 1;        // source encoder blocks
    std::size_t max_tgt = 32;  // positional table rows, decoder side
    std::size_t max_src = 32;  // positional table rows, encoder side
    std::uint64_t seed = 0;

    std::string to_json() const;
    static DenoiserConfig from_json(const std::string& text);
};

// Named parameter tensors; ordered by name so initialization, gradient
// reduction and serialization are all deterministic.
using ParamMap = std::map<std::string, Mat>;

std::size_t param_count(const ParamMap& p);

// Checkpoint: uint64 header length + config JSON, then per tensor
// uint32 name length, name bytes, uint64 rows, uint64 cols, float32 payload.
void save_params(const std::string& path, const DenoiserConfig& cfg,
                 const ParamMap& params);
std::pair<DenoiserConfig, ParamMap> load_params(const std::string& path);

// Trainable denoiser over the fixed embedding matrix E. Predicts clean
// target embeddings from the smoothed input, the timestep and the source;
// can also emit token logits through a tied E-readout for cross-entropy
// training in the simplex space.
class TrainableDenoiser final : public Denoiser {
public:
    TrainableDenoiser(DenoiserConfig cfg, const EmbeddingMatrix& E);
    TrainableDenoiser(DenoiserConfig cfg, const EmbeddingMatrix& E,
                      ParamMap params);

    Mat predict(const Mat& x, double t,
                const std::vector<TokenId>& source) const override;
    Mat predict_logits(const Mat& x, double t,
                       const std::vector<TokenId>& source,
                       const EmbeddingMatrix& E) const override;

    // Forward + reverse pass; accumulates parameter gradients into `grads`
    // (created on demand) and returns the loss. `target_emb` drives the MSE
    // objective; the _ce variant trains the tied logits head instead.
    double loss_and_grads(const Mat& x, double t,
                          const std::vector<TokenId>& source,
                          const Mat& target_emb, ParamMap& grads) const;
    double loss_and_grads_ce(const Mat& x, double t,
                             const std::vector<TokenId>& source,
                             const std::vector<TokenId>& target_ids,
                             ParamMap& grads) const;

    // Central finite differences on a random subset of >= min_coords
    // coordinates against the analytic gradient; returns the max relative
    // error with denominator max(|a|, |b|, 1e-8). Throws if h <= 0.
    double gradient_check(const Mat& x, double t,
                          const std::vector<TokenId>& source,
                          const Mat& target_emb, double h,
                          std::size_t min_coords, std::uint64_t seed);

    const DenoiserConfig& config() const { return cfg_; }
    ParamMap& params() { return params_; }
    const ParamMap& params() const { return params_; }
    bool use_ce_head() const { return ce_head_; }
    void set_ce_head(bool on) { ce_head_ = on; }

private:
    ad::Tape::VarId build(ad::Tape& tape, const Mat& x, double t,
                          const std::vector<TokenId>& source,
                          std::map<std::string, ad::Tape::VarId>& leaves) const;
    void accumulate(const ad::Tape& tape,
                    const std::map<std::string, ad::Tape::VarId>& leaves,
                    ParamMap& grads) const;

    DenoiserConfig cfg_;
    const EmbeddingMatrix* emb_;
    ParamMap params_;
    bool ce_head_ = false;
};

ParamMap init_params(const DenoiserConfig& cfg);

}  // namespace smoothie
