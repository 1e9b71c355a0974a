#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "smoothie/denoiser.hpp"

using namespace smoothie;

namespace {

DenoiserConfig tiny_cfg(DenoiserFamily family) {
    DenoiserConfig cfg;
    cfg.family = family;
    cfg.d = 6;
    cfg.hidden = 12;
    cfg.t_emb_dim = 6;
    cfg.T = 20;
    cfg.layers = 1;
    cfg.enc_layers = 1;
    cfg.max_tgt = 8;
    cfg.max_src = 8;
    cfg.seed = 3;
    return cfg;
}

EmbeddingMatrix emb() {
    return EmbeddingMatrix::init_random(9, 6, 2).normalized();
}

}  // namespace

TEST_CASE("config json round trip") {
    auto cfg = tiny_cfg(DenoiserFamily::kMlp);
    cfg.seed = 99;
    const auto back = DenoiserConfig::from_json(cfg.to_json());
    CHECK(back.family == cfg.family);
    CHECK(back.d == cfg.d);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.t_emb_dim == cfg.t_emb_dim);
    CHECK(back.T == cfg.T);
    CHECK(back.layers == cfg.layers);
    CHECK(back.enc_layers == cfg.enc_layers);
    CHECK(back.max_tgt == cfg.max_tgt);
    CHECK(back.max_src == cfg.max_src);
    CHECK(back.seed == cfg.seed);
}

TEST_CASE("init is deterministic and shapes are family dependent") {
    const auto cfg = tiny_cfg(DenoiserFamily::kTransformer);
    const auto a = init_params(cfg);
    const auto b = init_params(cfg);
    REQUIRE(a.size() == b.size());
    for (const auto& [name, mat] : a)
        CHECK(max_abs_diff(mat, b.at(name)) == 0.0);
    CHECK(param_count(a) > 0);

    const auto mlp = init_params(tiny_cfg(DenoiserFamily::kMlp));
    CHECK(mlp.size() != a.size());
    CHECK(mlp.count("mlp.w1") == 1);
    CHECK(a.count("dec.L0.sa.wq") == 1);
    CHECK(a.count("enc.L0.sa.wq") == 1);
}

TEST_CASE("predict output shape and finiteness, both families") {
    const auto E = emb();
    for (auto family : {DenoiserFamily::kMlp, DenoiserFamily::kTransformer}) {
        TrainableDenoiser den(tiny_cfg(family), E);
        Rng rng(4);
        const Mat x = rng.normal_mat(5, 6);
        const Mat out = den.predict(x, 7.0, {3, 4, 1});
        CHECK(out.rows() == 5);
        CHECK(out.cols() == 6);
        CHECK(all_finite(out));

        // unconditional path (empty source) must also work
        const Mat unc = den.predict(x, 7.0, {});
        CHECK(unc.rows() == 5);
        CHECK(all_finite(unc));

        const Mat logits = den.predict_logits(x, 7.0, {3, 4, 1}, E);
        CHECK(logits.rows() == 5);
        CHECK(logits.cols() == E.V());
        CHECK(all_finite(logits));
    }
}

TEST_CASE("predictions depend on timestep and source") {
    const auto E = emb();
    TrainableDenoiser den(tiny_cfg(DenoiserFamily::kTransformer), E);
    Rng rng(6);
    const Mat x = rng.normal_mat(4, 6);
    const Mat a = den.predict(x, 2.0, {1, 2});
    const Mat b = den.predict(x, 15.0, {1, 2});
    const Mat c = den.predict(x, 2.0, {5, 6});
    CHECK(max_abs_diff(a, b) > 1e-8);
    CHECK(max_abs_diff(a, c) > 1e-8);
}

TEST_CASE("padding in the source does not change the prediction") {
    const auto E = emb();
    TrainableDenoiser den(tiny_cfg(DenoiserFamily::kTransformer), E);
    Rng rng(8);
    const Mat x = rng.normal_mat(3, 6);
    const Mat a = den.predict(x, 5.0, {4, 7, Vocabulary::kPad, Vocabulary::kPad});
    const Mat b = den.predict(x, 5.0, {4, 7, Vocabulary::kPad});
    CHECK(max_abs_diff(a, b) < 1e-10);
}

TEST_CASE("analytic gradients match finite differences") {
    const auto E = emb();
    Rng rng(10);
    const Mat x = rng.normal_mat(3, 6);
    const Mat target = rng.normal_mat(3, 6);
    for (auto family : {DenoiserFamily::kMlp, DenoiserFamily::kTransformer}) {
        TrainableDenoiser den(tiny_cfg(family), E);
        const double err =
            den.gradient_check(x, 4.5, {2, 5}, target, 1e-5, 60, 123);
        CHECK(err < 1e-5);
    }
}

TEST_CASE("gradient check covers the unconditional path") {
    const auto E = emb();
    Rng rng(11);
    const Mat x = rng.normal_mat(2, 6);
    const Mat target = rng.normal_mat(2, 6);
    TrainableDenoiser den(tiny_cfg(DenoiserFamily::kTransformer), E);
    CHECK(den.gradient_check(x, 9.0, {}, target, 1e-5, 40, 7) < 1e-5);
}

TEST_CASE("loss_and_grads returns the mse of predict") {
    const auto E = emb();
    TrainableDenoiser den(tiny_cfg(DenoiserFamily::kMlp), E);
    Rng rng(12);
    const Mat x = rng.normal_mat(3, 6);
    const Mat target = rng.normal_mat(3, 6);
    ParamMap grads;
    const double loss = den.loss_and_grads(x, 3.0, {1}, target, grads);

    const Mat pred = den.predict(x, 3.0, {1});
    double ref = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        ref += (pred.vec()[i] - target.vec()[i]) *
               (pred.vec()[i] - target.vec()[i]);
    ref /= static_cast<double>(pred.size());
    CHECK(loss == doctest::Approx(ref).epsilon(1e-10));
    CHECK(!grads.empty());

    // gradients accumulate across calls
    ParamMap g2;
    den.loss_and_grads(x, 3.0, {1}, target, g2);
    den.loss_and_grads(x, 3.0, {1}, target, g2);
    for (const auto& [name, g] : grads)
        CHECK(max_abs_diff(2.0 * g, g2.at(name)) < 1e-10);
}

TEST_CASE("cross entropy objective trains the tied readout") {
    const auto E = emb();
    TrainableDenoiser den(tiny_cfg(DenoiserFamily::kMlp), E);
    Rng rng(13);
    const Mat x = rng.normal_mat(2, 6);
    ParamMap grads;
    const double loss = den.loss_and_grads_ce(x, 6.0, {4}, {3, 8}, grads);
    CHECK(loss > 0.0);
    CHECK(std::isfinite(loss));
    CHECK(!grads.empty());
}

TEST_CASE("checkpoint round trip preserves config and parameters") {
    const auto cfg = tiny_cfg(DenoiserFamily::kTransformer);
    auto params = init_params(cfg);
    const auto path = (std::filesystem::temp_directory_path() /
                       "smoothie_ckpt_test.bin")
                          .string();
    save_params(path, cfg, params);
    auto [cfg2, params2] = load_params(path);
    CHECK(cfg2.family == cfg.family);
    CHECK(cfg2.hidden == cfg.hidden);
    REQUIRE(params2.size() == params.size());
    for (const auto& [name, mat] : params)
        CHECK(max_abs_diff(mat, params2.at(name)) < 1e-6);

    // once quantized, a second cycle is bit-exact
    save_params(path, cfg2, params2);
    auto [cfg3, params3] = load_params(path);
    for (const auto& [name, mat] : params2)
        CHECK(max_abs_diff(mat, params3.at(name)) == 0.0);
    std::remove(path.c_str());

    CHECK_THROWS(load_params(path + ".does_not_exist"));
}

TEST_CASE("loaded checkpoints reproduce predictions") {
    const auto E = emb();
    const auto cfg = tiny_cfg(DenoiserFamily::kMlp);
    TrainableDenoiser den(cfg, E);
    const auto path = (std::filesystem::temp_directory_path() /
                       "smoothie_ckpt_pred.bin")
                          .string();
    save_params(path, cfg, den.params());
    auto [cfg2, params2] = load_params(path);
    TrainableDenoiser den2(cfg2, E, std::move(params2));
    // reload once more so both sides carry f32-quantized weights
    save_params(path, cfg, den2.params());
    auto [cfg3, params3] = load_params(path);
    TrainableDenoiser den3(cfg3, E, std::move(params3));

    Rng rng(14);
    const Mat x = rng.normal_mat(4, 6);
    CHECK(max_abs_diff(den2.predict(x, 5.0, {2}),
                       den3.predict(x, 5.0, {2})) == 0.0);
    std::remove(path.c_str());
}
