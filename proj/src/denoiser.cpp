#include "smoothie/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "smoothie/rng.hpp"

namespace smoothie {

namespace {

const char* family_name(DenoiserFamily f) {
    return f == DenoiserFamily::kMlp ? "mlp" : "transformer";
}

DenoiserFamily family_from_name(const std::string& s) {
    if (s == "mlp") return DenoiserFamily::kMlp;
    if (s == "transformer") return DenoiserFamily::kTransformer;
    throw std::invalid_argument("unknown denoiser family: " + s);
}

constexpr double kMaskValue = -1e30;

}  // namespace

std::string DenoiserConfig::to_json() const {
    nlohmann::json j;
    j["family"] = family_name(family);
    j["d"] = d;
    j["hidden"] = hidden;
    j["t_emb_dim"] = t_emb_dim;
    j["T"] = T;
    j["layers"] = layers;
    j["enc_layers"] = enc_layers;
    j["max_tgt"] = max_tgt;
    j["max_src"] = max_src;
    j["seed"] = seed;
    return j.dump();
}

DenoiserConfig DenoiserConfig::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    DenoiserConfig c;
    c.family = family_from_name(j.at("family").get<std::string>());
    c.d = j.at("d").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.t_emb_dim = j.at("t_emb_dim").get<std::size_t>();
    c.T = j.at("T").get<int>();
    c.layers = j.at("layers").get<int>();
    c.enc_layers = j.at("enc_layers").get<int>();
    c.max_tgt = j.at("max_tgt").get<std::size_t>();
    c.max_src = j.at("max_src").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

std::size_t param_count(const ParamMap& p) {
    std::size_t n = 0;
    for (const auto& [name, m] : p) n += m.size();
    return n;
}

namespace {

void declare_shapes(const DenoiserConfig& cfg,
                    std::map<std::string, std::pair<std::size_t, std::size_t>>&
                        shapes) {
    const std::size_t d = cfg.d, h = cfg.hidden;
    const std::size_t rows_t = static_cast<std::size_t>(cfg.T) + 1;
    if (cfg.family == DenoiserFamily::kMlp) {
        shapes["t_table"] = {rows_t, cfg.t_emb_dim};
        shapes["mlp.w1"] = {2 * d + cfg.t_emb_dim, h};
        shapes["mlp.b1"] = {1, h};
        shapes["mlp.w2"] = {h, h};
        shapes["mlp.b2"] = {1, h};
        shapes["mlp.w3"] = {h, d};
        shapes["mlp.b3"] = {1, d};
        return;
    }
    shapes["t_table"] = {rows_t, h};
    shapes["dec.in.w"] = {d, h};
    shapes["dec.in.b"] = {1, h};
    shapes["dec.pos"] = {cfg.max_tgt, h};
    shapes["dec.out.w"] = {h, d};
    shapes["dec.out.b"] = {1, d};
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "dec.L" + std::to_string(l) + ".";
        for (const char* m : {"sa.", "ca."})
            for (const char* w : {"wq", "wk", "wv", "wo"})
                shapes[p + m + w] = {h, h};
        shapes[p + "ff.w1"] = {h, 2 * h};
        shapes[p + "ff.b1"] = {1, 2 * h};
        shapes[p + "ff.w2"] = {2 * h, h};
        shapes[p + "ff.b2"] = {1, h};
        for (const char* ln : {"ln1.", "ln2.", "ln3."}) {
            shapes[p + ln + "g"] = {1, h};
            shapes[p + ln + "b"] = {1, h};
        }
    }
    shapes["enc.in.w"] = {d, h};
    shapes["enc.in.b"] = {1, h};
    shapes["enc.pos"] = {cfg.max_src, h};
    for (int l = 0; l < cfg.enc_layers; ++l) {
        const std::string p = "enc.L" + std::to_string(l) + ".";
        for (const char* w : {"wq", "wk", "wv", "wo"})
            shapes[p + "sa." + w] = {h, h};
        shapes[p + "ff.w1"] = {h, 2 * h};
        shapes[p + "ff.b1"] = {1, 2 * h};
        shapes[p + "ff.w2"] = {2 * h, h};
        shapes[p + "ff.b2"] = {1, h};
        for (const char* ln : {"ln1.", "ln2."}) {
            shapes[p + ln + "g"] = {1, h};
            shapes[p + ln + "b"] = {1, h};
        }
    }
}

bool is_gain(const std::string& name) {
    return name.size() >= 2 && name.compare(name.size() - 2, 2, ".g") == 0 &&
           name.find(".ln") != std::string::npos;
}

bool is_shift(const std::string& name) {
    return name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0 &&
           name.find(".ln") != std::string::npos;
}

}  // namespace

ParamMap init_params(const DenoiserConfig& cfg) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> shapes;
    declare_shapes(cfg, shapes);
    ParamMap params;
    Rng rng(cfg.seed);
    for (const auto& [name, shape] : shapes) {  // name order: deterministic
        Mat m(shape.first, shape.second);
        if (is_gain(name)) {
            for (double& v : m.vec()) v = 1.0;
        } else if (is_shift(name)) {
            // zeros
        } else {
            const double bound =
                1.0 / std::sqrt(static_cast<double>(shape.first));
            for (double& v : m.vec()) v = bound * (2.0 * rng.uniform() - 1.0);
        }
        params.emplace(name, std::move(m));
    }
    return params;
}

void save_params(const std::string& path, const DenoiserConfig& cfg,
                 const ParamMap& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const std::string header = cfg.to_json();
    const std::uint64_t hlen = header.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, m] : params) {
        const std::uint32_t nlen = static_cast<std::uint32_t>(name.size());
        out.write(reinterpret_cast<const char*>(&nlen), sizeof(nlen));
        out.write(name.data(), nlen);
        const std::uint64_t dims[2] = {m.rows(), m.cols()};
        out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
        for (double v : m.vec()) {
            const float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), sizeof(f));
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<DenoiserConfig, ParamMap> load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("checkpoint truncated header: " + path);
    DenoiserConfig cfg = DenoiserConfig::from_json(header);
    ParamMap params;
    while (true) {
        std::uint32_t nlen = 0;
        in.read(reinterpret_cast<char*>(&nlen), sizeof(nlen));
        if (in.eof()) break;
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        std::uint64_t dims[2];
        in.read(reinterpret_cast<char*>(dims), sizeof(dims));
        if (!in) throw std::runtime_error("checkpoint truncated: " + path);
        Mat m(dims[0], dims[1]);
        for (double& v : m.vec()) {
            float f;
            in.read(reinterpret_cast<char*>(&f), sizeof(f));
            if (!in) throw std::runtime_error("checkpoint truncated: " + path);
            v = static_cast<double>(f);
        }
        params.emplace(std::move(name), std::move(m));
    }
    return {cfg, std::move(params)};
}

TrainableDenoiser::TrainableDenoiser(DenoiserConfig cfg,
                                     const EmbeddingMatrix& E)
    : cfg_(cfg), emb_(&E), params_(init_params(cfg)) {}

TrainableDenoiser::TrainableDenoiser(DenoiserConfig cfg,
                                     const EmbeddingMatrix& E, ParamMap params)
    : cfg_(cfg), emb_(&E), params_(std::move(params)) {}

namespace {

using VarId = ad::Tape::VarId;

struct Ctx {
    ad::Tape& tape;
    const ParamMap& params;
    std::map<std::string, VarId>& leaves;

    VarId p(const std::string& name) {
        auto it = leaves.find(name);
        if (it != leaves.end()) return it->second;
        auto pit = params.find(name);
        if (pit == params.end())
            throw std::logic_error("missing parameter tensor: " + name);
        VarId id = tape.leaf(pit->second);
        leaves.emplace(name, id);
        return id;
    }
};

VarId attention(Ctx& c, const std::string& prefix, VarId queries, VarId keys,
                const Mat* mask) {
    ad::Tape& t = c.tape;
    const std::size_t h = t.value(c.p(prefix + "wq")).cols();
    VarId q = t.matmul(queries, c.p(prefix + "wq"));
    VarId k = t.matmul(keys, c.p(prefix + "wk"));
    VarId v = t.matmul(keys, c.p(prefix + "wv"));
    VarId scores = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(double(h)));
    VarId weights = t.softmax_rows(scores, mask);
    return t.matmul(t.matmul(weights, v), c.p(prefix + "wo"));
}

VarId ffn(Ctx& c, const std::string& prefix, VarId x) {
    ad::Tape& t = c.tape;
    VarId a = t.relu(
        t.add_rowvec(t.matmul(x, c.p(prefix + "ff.w1")), c.p(prefix + "ff.b1")));
    return t.add_rowvec(t.matmul(a, c.p(prefix + "ff.w2")),
                        c.p(prefix + "ff.b2"));
}

VarId ln(Ctx& c, const std::string& prefix, VarId x) {
    return c.tape.layer_norm(x, c.p(prefix + "g"), c.p(prefix + "b"));
}

}  // namespace

VarId TrainableDenoiser::build(
    ad::Tape& tape, const Mat& x, double t,
    const std::vector<TokenId>& source,
    std::map<std::string, ad::Tape::VarId>& leaves) const {
    if (x.cols() != cfg_.d)
        throw std::invalid_argument("denoiser: input width != d");
    if (t < 0.0 || t > static_cast<double>(cfg_.T))
        throw std::invalid_argument("denoiser: t outside [0, T]");
    Ctx c{tape, params_, leaves};
    const std::size_t m = x.rows();
    VarId xin = tape.constant(x);
    VarId t_emb = tape.interp_row(c.p("t_table"), t);

    if (cfg_.family == DenoiserFamily::kMlp) {
        // pooled source embedding: mean over non-pad positions, zeros when
        // unconditional
        Mat pooled(1, cfg_.d);
        if (!source.empty()) {
            std::vector<double> w(source.size(), 0.0);
            double total = 0.0;
            for (std::size_t i = 0; i < source.size(); ++i)
                if (source[i] != Vocabulary::kPad) {
                    w[i] = 1.0;
                    total += 1.0;
                }
            if (total > 0.0) {
                const Mat rows = emb_->lookup(source);
                for (std::size_t i = 0; i < source.size(); ++i)
                    if (w[i] > 0.0)
                        for (std::size_t jj = 0; jj < cfg_.d; ++jj)
                            pooled(0, jj) += rows(i, jj) / total;
            }
        }
        VarId in = tape.concat_cols(
            {xin, tape.broadcast_row(tape.constant(pooled), m),
             tape.broadcast_row(t_emb, m)});
        VarId h1 = tape.relu(
            tape.add_rowvec(tape.matmul(in, c.p("mlp.w1")), c.p("mlp.b1")));
        VarId h2 = tape.relu(
            tape.add_rowvec(tape.matmul(h1, c.p("mlp.w2")), c.p("mlp.b2")));
        return tape.add_rowvec(tape.matmul(h2, c.p("mlp.w3")), c.p("mlp.b3"));
    }

    // transformer family
    if (m > cfg_.max_tgt)
        throw std::invalid_argument("denoiser: sequence longer than max_tgt");

    const bool conditional = !source.empty();
    VarId enc_out = -1;
    Mat cross_mask;  // m x n, kMaskValue over pad keys
    if (conditional) {
        const std::size_t n = source.size();
        if (n > cfg_.max_src)
            throw std::invalid_argument("denoiser: source longer than max_src");
        Mat enc_mask(n, n);
        cross_mask = Mat(m, n);
        for (std::size_t j = 0; j < n; ++j)
            if (source[j] == Vocabulary::kPad) {
                for (std::size_t i = 0; i < n; ++i)
                    enc_mask(i, j) = kMaskValue;
                for (std::size_t i = 0; i < m; ++i)
                    cross_mask(i, j) = kMaskValue;
            }
        VarId s = tape.add(
            tape.add_rowvec(tape.matmul(tape.constant(emb_->lookup(source)),
                                        c.p("enc.in.w")),
                            c.p("enc.in.b")),
            tape.slice_rows(c.p("enc.pos"), n));
        for (int l = 0; l < cfg_.enc_layers; ++l) {
            const std::string p = "enc.L" + std::to_string(l) + ".";
            s = ln(c, p + "ln1.", tape.add(s, attention(c, p + "sa.", s, s,
                                                        &enc_mask)));
            s = ln(c, p + "ln2.", tape.add(s, ffn(c, p, s)));
        }
        enc_out = s;
    }

    VarId h = tape.add(
        tape.add_rowvec(tape.matmul(xin, c.p("dec.in.w")), c.p("dec.in.b")),
        tape.slice_rows(c.p("dec.pos"), m));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "dec.L" + std::to_string(l) + ".";
        h = tape.add(h, tape.broadcast_row(t_emb, m));
        h = ln(c, p + "ln1.", tape.add(h, attention(c, p + "sa.", h, h,
                                                    nullptr)));
        if (conditional)
            h = ln(c, p + "ln2.",
                   tape.add(h, attention(c, p + "ca.", h, enc_out,
                                         &cross_mask)));
        h = ln(c, p + "ln3.", tape.add(h, ffn(c, p, h)));
    }
    return tape.add_rowvec(tape.matmul(h, c.p("dec.out.w")), c.p("dec.out.b"));
}

Mat TrainableDenoiser::predict(const Mat& x, double t,
                               const std::vector<TokenId>& source) const {
    ad::Tape tape;
    std::map<std::string, VarId> leaves;
    const VarId out = build(tape, x, t, source, leaves);
    Mat result = tape.value(out);
    if (!all_finite(result))
        throw std::runtime_error("denoiser: non-finite prediction");
    return result;
}

Mat TrainableDenoiser::predict_logits(const Mat& x, double t,
                                      const std::vector<TokenId>& source,
                                      const EmbeddingMatrix& E) const {
    if (ce_head_) return matmul_nt(predict(x, t, source), E.mat());
    return Denoiser::predict_logits(x, t, source, E);
}

void TrainableDenoiser::accumulate(
    const ad::Tape& tape, const std::map<std::string, ad::Tape::VarId>& leaves,
    ParamMap& grads) const {
    for (const auto& [name, id] : leaves) {
        const Mat& g = tape.grad(id);
        auto it = grads.find(name);
        if (it == grads.end())
            grads.emplace(name, g);
        else
            it->second = it->second + g;
    }
}

double TrainableDenoiser::loss_and_grads(const Mat& x, double t,
                                         const std::vector<TokenId>& source,
                                         const Mat& target_emb,
                                         ParamMap& grads) const {
    ad::Tape tape;
    std::map<std::string, VarId> leaves;
    const VarId out = build(tape, x, t, source, leaves);
    const VarId loss = tape.mse_loss(out, target_emb);
    tape.backward(loss);
    accumulate(tape, leaves, grads);
    return tape.value(loss)(0, 0);
}

double TrainableDenoiser::loss_and_grads_ce(
    const Mat& x, double t, const std::vector<TokenId>& source,
    const std::vector<TokenId>& target_ids, ParamMap& grads) const {
    ad::Tape tape;
    std::map<std::string, VarId> leaves;
    const VarId out = build(tape, x, t, source, leaves);
    const VarId logits = tape.matmul_nt(out, tape.constant(emb_->mat()));
    const VarId loss = tape.cross_entropy_loss(logits, target_ids);
    tape.backward(loss);
    accumulate(tape, leaves, grads);
    return tape.value(loss)(0, 0);
}

double TrainableDenoiser::gradient_check(const Mat& x, double t,
                                         const std::vector<TokenId>& source,
                                         const Mat& target_emb, double h,
                                         std::size_t min_coords,
                                         std::uint64_t seed) {
    if (!(h > 0.0))
        throw std::invalid_argument("gradient_check: h must be positive");
    ParamMap analytic;
    loss_and_grads(x, t, source, target_emb, analytic);

    auto forward_loss = [&]() {
        ad::Tape tape;
        std::map<std::string, VarId> leaves;
        const VarId out = build(tape, x, t, source, leaves);
        const VarId loss = tape.mse_loss(out, target_emb);
        return tape.value(loss)(0, 0);
    };

    const std::size_t total = param_count(params_);
    const std::size_t count = std::min(min_coords, total);
    Rng rng(seed);
    std::unordered_set<std::size_t> picked;
    while (picked.size() < count)
        picked.insert(static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(total) - 1)));

    double max_rel = 0.0;
    std::size_t offset = 0;
    for (auto& [name, tensor] : params_) {
        for (std::size_t i = 0; i < tensor.size(); ++i, ++offset) {
            if (!picked.count(offset)) continue;
            const double saved = tensor.data()[i];
            tensor.data()[i] = saved + h;
            const double up = forward_loss();
            tensor.data()[i] = saved - h;
            const double down = forward_loss();
            tensor.data()[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            // parameters with no path to the loss (e.g. the encoder stack in
            // unconditional mode) have no analytic entry; their gradient is 0
            const auto git = analytic.find(name);
            const double exact = git == analytic.end() ? 0.0
                                                       : git->second.data()[i];
            const double denom =
                std::max({std::fabs(numeric), std::fabs(exact), 1e-8});
            max_rel = std::max(max_rel, std::fabs(numeric - exact) / denom);
        }
    }
    return max_rel;
}

}  // namespace smoothie
