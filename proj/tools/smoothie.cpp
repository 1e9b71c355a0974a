// Command-line front end: build-vocab, train, sample, evaluate,
// inspect-schedule, ablate, verify.
//
// Exit codes: 0 success, 1 property/eval failure, 2 usage/config error,
// 3 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "smoothie/data_io.hpp"
#include "smoothie/denoiser.hpp"
#include "smoothie/diffusion.hpp"
#include "smoothie/metrics.hpp"
#include "smoothie/trainer.hpp"

using namespace smoothie;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Everything a run needs, loadable from one JSON file with flag overrides.
struct RunConfig {
    std::string space = "smoothie";
    NoiseSchedule schedule;
    TrainConfig train;
    DenoiserConfig denoiser;

    std::string train_path;  // jsonl; empty -> synthetic data
    std::string vocab_path;  // empty -> built from the training data
    std::size_t vocab_max = 256;
    std::string synth_task = "cipher";
    std::size_t synth_vocab = 16;
    std::size_t synth_pairs = 512;
    std::size_t synth_len = 6;

    int sample_steps = 200;
    double delta_tilde_override = -1.0;  // < 0 means "use schedule value"
    double simplex_k = 5.0;
    std::uint64_t seed = 0;
};

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (const auto& [key, unused] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok |= (key == a);
        if (!ok)
            throw std::invalid_argument("config: unknown key \"" + key +
                                        "\" in " + where);
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig parse_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    const json j = json::parse(in);
    reject_unknown(j,
                   {"space", "schedule", "train", "denoiser", "train_path",
                    "vocab_path", "vocab_max", "synthetic", "sample_steps",
                    "delta_tilde", "simplex_k", "seed"},
                   "root");
    maybe(j, "space", cfg.space);
    maybe(j, "train_path", cfg.train_path);
    maybe(j, "vocab_path", cfg.vocab_path);
    maybe(j, "vocab_max", cfg.vocab_max);
    maybe(j, "sample_steps", cfg.sample_steps);
    maybe(j, "delta_tilde", cfg.delta_tilde_override);
    maybe(j, "simplex_k", cfg.simplex_k);
    maybe(j, "seed", cfg.seed);
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        reject_unknown(s,
                       {"sigma_min", "sigma_max", "d_rate", "T", "eps", "delta",
                        "delta_tilde"},
                       "schedule");
        maybe(s, "sigma_min", cfg.schedule.sigma_min);
        maybe(s, "sigma_max", cfg.schedule.sigma_max);
        maybe(s, "d_rate", cfg.schedule.d_rate);
        maybe(s, "T", cfg.schedule.T);
        maybe(s, "eps", cfg.schedule.eps);
        maybe(s, "delta", cfg.schedule.delta);
        maybe(s, "delta_tilde", cfg.schedule.delta_tilde);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t,
                       {"lr", "beta1", "beta2", "weight_decay", "warmup_steps",
                        "grad_clip", "ema_decay", "batch_size", "total_steps",
                        "seed", "log_every"},
                       "train");
        maybe(t, "lr", cfg.train.lr);
        maybe(t, "beta1", cfg.train.beta1);
        maybe(t, "beta2", cfg.train.beta2);
        maybe(t, "weight_decay", cfg.train.weight_decay);
        maybe(t, "warmup_steps", cfg.train.warmup_steps);
        maybe(t, "grad_clip", cfg.train.grad_clip);
        maybe(t, "ema_decay", cfg.train.ema_decay);
        maybe(t, "batch_size", cfg.train.batch_size);
        maybe(t, "total_steps", cfg.train.total_steps);
        maybe(t, "seed", cfg.train.seed);
        maybe(t, "log_every", cfg.train.log_every);
    }
    if (j.contains("denoiser"))
        cfg.denoiser = DenoiserConfig::from_json(j.at("denoiser").dump());
    if (j.contains("synthetic")) {
        const json& s = j.at("synthetic");
        reject_unknown(s, {"task", "vocab", "pairs", "len"}, "synthetic");
        maybe(s, "task", cfg.synth_task);
        maybe(s, "vocab", cfg.synth_vocab);
        maybe(s, "pairs", cfg.synth_pairs);
        maybe(s, "len", cfg.synth_len);
    }
    return cfg;
}

json dump_run_config(const RunConfig& cfg) {
    json j;
    j["space"] = cfg.space;
    j["schedule"] = {{"sigma_min", cfg.schedule.sigma_min},
                     {"sigma_max", cfg.schedule.sigma_max},
                     {"d_rate", cfg.schedule.d_rate},
                     {"T", cfg.schedule.T},
                     {"eps", cfg.schedule.eps},
                     {"delta", cfg.schedule.delta},
                     {"delta_tilde", cfg.schedule.delta_tilde}};
    j["train"] = {{"lr", cfg.train.lr},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"weight_decay", cfg.train.weight_decay},
                  {"warmup_steps", cfg.train.warmup_steps},
                  {"grad_clip", cfg.train.grad_clip},
                  {"ema_decay", cfg.train.ema_decay},
                  {"batch_size", cfg.train.batch_size},
                  {"total_steps", cfg.train.total_steps},
                  {"seed", cfg.train.seed},
                  {"log_every", cfg.train.log_every}};
    j["denoiser"] = json::parse(cfg.denoiser.to_json());
    j["train_path"] = cfg.train_path;
    j["vocab_path"] = cfg.vocab_path;
    j["vocab_max"] = cfg.vocab_max;
    j["synthetic"] = {{"task", cfg.synth_task},
                      {"vocab", cfg.synth_vocab},
                      {"pairs", cfg.synth_pairs},
                      {"len", cfg.synth_len}};
    j["sample_steps"] = cfg.sample_steps;
    j["delta_tilde"] = cfg.delta_tilde_override;
    j["simplex_k"] = cfg.simplex_k;
    j["seed"] = cfg.seed;
    return j;
}

LatentSpace space_from_name(const std::string& s) {
    if (s == "smoothie") return LatentSpace::kSmoothie;
    if (s == "embedding") return LatentSpace::kEmbedding;
    if (s == "simplex") return LatentSpace::kSimplex;
    throw std::invalid_argument("unknown latent space: " + s);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
    write_text((std::filesystem::path(out_dir) / "config.json").string(),
               dump_run_config(cfg).dump(2) + "\n");
}

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return out.str();
}

ParallelDataset load_training_data(const RunConfig& cfg) {
    if (!cfg.train_path.empty()) return load_jsonl(cfg.train_path);
    const SyntheticTask task = cfg.synth_task == "copy" ? SyntheticTask::kCopy
                             : cfg.synth_task == "cipher"
                                 ? SyntheticTask::kCipher
                                 : throw std::invalid_argument(
                                       "unknown synthetic task: " +
                                       cfg.synth_task);
    return make_synthetic(task, cfg.synth_vocab, cfg.synth_pairs,
                          cfg.synth_len, cfg.seed);
}

Vocabulary vocab_for(const RunConfig& cfg, const ParallelDataset& data) {
    if (!cfg.vocab_path.empty()) return Vocabulary::load(cfg.vocab_path);
    std::vector<std::string> corpus;
    for (const auto& p : data.pairs) {
        if (!p.source.empty()) corpus.push_back(p.source);
        corpus.push_back(p.target);
    }
    return Vocabulary::build(corpus, cfg.vocab_max);
}

int thread_cap() {
    // Upper bound on worker parallelism; all current kernels are
    // single-threaded, so this only validates the setting.
    if (const char* env = std::getenv("SMOOTHIE_THREADS")) {
        const int n = std::atoi(env);
        if (n < 1)
            throw std::invalid_argument("SMOOTHIE_THREADS must be >= 1");
        return n;
    }
    return 1;
}

// ---- commands -------------------------------------------------------------

int cmd_build_vocab(const std::string& input, const std::string& out,
                    std::size_t max_size) {
    const ParallelDataset data = load_jsonl(input);
    std::vector<std::string> corpus;
    for (const auto& p : data.pairs) {
        if (!p.source.empty()) corpus.push_back(p.source);
        corpus.push_back(p.target);
    }
    const auto vocab = Vocabulary::build(corpus, max_size);
    vocab.save(out);
    std::cout << "wrote " << vocab.size() << " tokens to " << out << "\n";
    return kExitOk;
}

int cmd_train(RunConfig cfg, const std::string& out_dir) {
    cfg.schedule.validate();
    cfg.train.validate();
    std::filesystem::create_directories(out_dir);

    const ParallelDataset data = load_training_data(cfg);
    const Vocabulary vocab = vocab_for(cfg, data);
    const auto E =
        EmbeddingMatrix::init_random(vocab.size(), cfg.denoiser.d, cfg.seed)
            .normalized();
    const auto bsched =
        BaselineSchedule::cosine(cfg.schedule.T, cfg.simplex_k);
    cfg.denoiser.T = cfg.schedule.T;
    TrainableDenoiser den(cfg.denoiser, E);
    if (cfg.space == "simplex") den.set_ce_head(true);

    const auto out = [&](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };
    echo_config(cfg, out_dir);
    vocab.save(out("vocab.txt"));
    E.save(out("embeddings.bin"));

    TrainResult result;
    try {
        result = train(den, cfg.train, data, vocab, E, cfg.schedule, bsched,
                       space_from_name(cfg.space), cfg.denoiser.max_src,
                       cfg.denoiser.max_tgt, out("train_log.csv"));
    } catch (const std::runtime_error& e) {
        if (std::string(e.what()).find("non-finite") != std::string::npos)
            throw NumericError(e.what());
        throw;
    }
    save_params(out("checkpoint.bin"), cfg.denoiser, den.params());
    save_params(out("ema.bin"), cfg.denoiser, result.ema);
    std::cout << "trained " << cfg.train.total_steps << " steps ("
              << cfg.space << " space); final logged loss "
              << (result.log.empty() ? std::string("n/a")
                                     : fmt(result.log.back().loss))
              << "\n";
    return kExitOk;
}

int cmd_sample(const RunConfig& cfg, const std::string& checkpoint_dir,
               const std::string& data_path, const std::string& out_dir,
               bool oracle, bool trace) {
    std::filesystem::create_directories(out_dir);
    const auto in = [&](const char* name) {
        return (std::filesystem::path(checkpoint_dir) / name).string();
    };
    const auto out = [&](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };

    const Vocabulary vocab = Vocabulary::load(in("vocab.txt"));
    const auto E = EmbeddingMatrix::load(in("embeddings.bin"));
    std::optional<TrainableDenoiser> model;
    DenoiserConfig dcfg = cfg.denoiser;
    if (!oracle) {
        auto [loaded_cfg, params] = load_params(in("ema.bin"));
        dcfg = loaded_cfg;
        model.emplace(dcfg, E, std::move(params));
        if (cfg.space == "simplex") model->set_ce_head(true);
    }

    NoiseSchedule sched = cfg.schedule;
    if (cfg.delta_tilde_override >= 0.0)
        sched.delta_tilde = cfg.delta_tilde_override;
    sched.validate();
    const auto bsched = BaselineSchedule::cosine(sched.T, cfg.simplex_k);
    const LatentSpace space = space_from_name(cfg.space);

    const ParallelDataset data = load_jsonl(data_path);
    Rng rng(cfg.seed);
    std::ostringstream gen_lines, trace_lines;
    for (const auto& pair : data.pairs) {
        const auto src = pair.source.empty()
                             ? std::vector<TokenId>{}
                             : vocab.encode(pair.source, dcfg.max_src).ids;
        const auto tgt = vocab.encode(pair.target, dcfg.max_tgt).ids;
        std::vector<TokenId> decoded;
        SampleTrace st;
        if (oracle) {
            OracleDenoiser den(E, tgt);
            decoded = space == LatentSpace::kSmoothie
                          ? sample(den, src, sched, cfg.sample_steps, E,
                                   tgt.size(), rng, trace ? &st : nullptr)
                          : sample_baseline(space, den, src, bsched,
                                            cfg.sample_steps, E, tgt.size(),
                                            rng);
        } else {
            decoded = space == LatentSpace::kSmoothie
                          ? sample(*model, src, sched, cfg.sample_steps, E,
                                   dcfg.max_tgt, rng, trace ? &st : nullptr)
                          : sample_baseline(space, *model, src, bsched,
                                            cfg.sample_steps, E, dcfg.max_tgt,
                                            rng);
        }
        json line;
        if (!pair.source.empty()) line["source"] = pair.source;
        line["target"] = pair.target;
        line["generated"] = vocab.decode_text(decoded);
        gen_lines << line.dump() << "\n";
        if (trace) {
            for (const auto& step : st.steps) {
                json tl;
                tl["step"] = step.step;
                tl["t"] = step.t;
                tl["decoded"] = vocab.decode_text(step.decoded);
                tl["mean_entropy"] = step.mean_entropy;
                trace_lines << tl.dump() << "\n";
            }
        }
    }
    write_text(out("generations.jsonl"), gen_lines.str());
    if (trace) write_text(out("trace.jsonl"), trace_lines.str());
    echo_config(cfg, out_dir);
    std::cout << "wrote " << data.pairs.size() << " generations to "
              << out("generations.jsonl") << "\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& generated_path,
                 const std::string& references_path, const std::string& out_dir,
                 bool json_only) {
    const ParallelDataset gen = load_jsonl(generated_path);
    std::vector<Tokens> sources, cands, refs;
    if (references_path.empty()) {
        // single file carrying source/target/generated per line
        std::ifstream in(generated_path);
        std::string line;
        bool all_have_source = true;
        std::size_t lineno = 0;
        cands.clear();
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const json j = json::parse(line);
            if (!j.contains("generated"))
                throw std::invalid_argument(
                    "evaluate: line " + std::to_string(lineno) +
                    " lacks a \"generated\" field");
            cands.push_back(split_tokens(j.at("generated").get<std::string>()));
            refs.push_back(split_tokens(j.at("target").get<std::string>()));
            if (j.contains("source"))
                sources.push_back(
                    split_tokens(j.at("source").get<std::string>()));
            else
                all_have_source = false;
        }
        if (!all_have_source) sources.clear();
    } else {
        const ParallelDataset ref = load_jsonl(references_path);
        if (gen.pairs.size() != ref.pairs.size())
            throw std::invalid_argument(
                "evaluate: line counts differ (" +
                std::to_string(gen.pairs.size()) + " vs " +
                std::to_string(ref.pairs.size()) + ")");
        bool all_have_source = true;
        for (std::size_t i = 0; i < gen.pairs.size(); ++i) {
            cands.push_back(split_tokens(gen.pairs[i].target));
            refs.push_back(split_tokens(ref.pairs[i].target));
            if (!ref.pairs[i].source.empty())
                sources.push_back(split_tokens(ref.pairs[i].source));
            else
                all_have_source = false;
        }
        if (!all_have_source) sources.clear();
    }
    if (cands.empty()) throw std::invalid_argument("evaluate: no examples");

    const EvalReport report = evaluate(sources, cands, refs);
    std::cout << report.to_json() << "\n";
    if (!json_only) std::cout << report.to_csv_line();
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text((std::filesystem::path(out_dir) / "report.json").string(),
                   report.to_json() + "\n");
        write_text((std::filesystem::path(out_dir) / "report.csv").string(),
                   report.to_csv_line());
    }
    return kExitOk;
}

int cmd_inspect_schedule(const NoiseSchedule& sched, int points,
                         const std::string& out_path) {
    sched.validate();
    if (points < 2)
        throw std::invalid_argument("inspect-schedule: need >= 2 grid points");
    std::ostringstream csv;
    csv << "t,sigma_t\n";
    for (int i = 0; i < points; ++i) {
        const double t = static_cast<double>(sched.T) * i / (points - 1);
        csv << fmt(t) << ',' << fmt(sched.sigma(t)) << '\n';
    }
    if (out_path.empty())
        std::cout << csv.str();
    else
        write_text(out_path, csv.str());
    return kExitOk;
}

struct PropertyResult {
    std::string name;
    double deviation;
    double tolerance;
    bool pass;
};

int cmd_verify(bool as_json, bool flip_d0_sign) {
    std::vector<PropertyResult> results;
    const auto record = [&](const std::string& name, double dev, double tol) {
        results.push_back({name, dev, tol, dev < tol});
    };

    // Theorem offset constancy over random embedding/distribution draws.
    {
        Rng rng(101);
        double worst_dev = 0.0, worst_off = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t V =
                8 + static_cast<std::size_t>(rng.uniform_int(0, 40));
            const std::size_t d =
                2 + static_cast<std::size_t>(rng.uniform_int(0, 10));
            const auto E =
                EmbeddingMatrix::init_random(V, d, rng.next_u64()).normalized();
            std::vector<double> dist(V);
            double total = 0.0;
            for (double& p : dist) total += (p = rng.uniform() + 0.01);
            for (double& p : dist) p /= total;
            if (flip_d0_sign) {
                // sensitivity injection: negate the mixture grid and measure
                // how far A - B drifts from a per-row constant
                Mat ubar(1, d, 0.0);
                for (std::size_t w = 0; w < V; ++w)
                    for (std::size_t c = 0; c < d; ++c)
                        ubar(0, c) += dist[w] * E.mat()(w, c);
                const Mat B = compute_D0_from_embeddings(ubar, E);
                Mat A(1, V, 0.0);
                for (std::size_t w = 0; w < V; ++w) {
                    Mat row(1, d);
                    for (std::size_t c = 0; c < d; ++c)
                        row(0, c) = E.mat()(w, c);
                    const Mat Dw = compute_D0_from_embeddings(row, E);
                    for (std::size_t j = 0; j < V; ++j)
                        A(0, j) -= dist[w] * Dw(0, j);  // sign flipped
                }
                double mean = 0.0;
                for (std::size_t j = 0; j < V; ++j) mean += A(0, j) - B(0, j);
                mean /= static_cast<double>(V);
                for (std::size_t j = 0; j < V; ++j)
                    worst_dev = std::max(
                        worst_dev, std::fabs(A(0, j) - B(0, j) - mean));
                continue;
            }
            const auto rep = verify_theorem_offset(E, dist);
            worst_dev = std::max(worst_dev, rep.max_row_deviation);
            worst_off = std::max(worst_off, rep.max_offset_mismatch);
        }
        record("theorem_offset_row_deviation", worst_dev, 1e-9);
        record("theorem_offset_value_mismatch", worst_off, 1e-9);
    }

    // Simplex/trivial-metric forward equivalence.
    {
        Rng rng(102);
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t V = 4 + rng.uniform_int(0, 28);
            std::vector<TokenId> tgt(2 + rng.uniform_int(0, 6));
            for (auto& id : tgt)
                id = static_cast<TokenId>(rng.uniform_int(0, V - 1));
            const double k = 1.0 + 9.0 * rng.uniform();
            const double phi = 0.02 + rng.uniform();
            const double gamma = rng.uniform();
            const Mat noise = rng.normal_mat(tgt.size(), V);
            worst = std::max(worst, verify_simplex_equivalence(tgt, k, phi,
                                                               gamma, noise,
                                                               V));
        }
        record("simplex_equivalence", worst, 1e-12);
    }

    // Scheduler endpoints and monotonicity.
    {
        NoiseSchedule s;
        s.validate();
        record("schedule_sigma0", std::fabs(s.sigma(0.0) - 1.5), 1e-12);
        record("schedule_sigmaT", std::fabs(s.sigma(200.0) - 192.0), 0.5);
        double worst = 0.0;
        double prev = s.sigma(0.0);
        for (int i = 1; i <= 1000; ++i) {
            const double cur = s.sigma(200.0 * i / 1000.0);
            if (cur <= prev) worst = 1.0;
            prev = cur;
        }
        record("schedule_monotonic", worst, 0.5);
    }

    // Gradient checks, both families.
    {
        const auto E = EmbeddingMatrix::init_random(9, 6, 7).normalized();
        Rng rng(103);
        const Mat x = rng.normal_mat(3, 6);
        const Mat target = rng.normal_mat(3, 6);
        for (auto family :
             {DenoiserFamily::kMlp, DenoiserFamily::kTransformer}) {
            DenoiserConfig dc;
            dc.family = family;
            dc.d = 6;
            dc.hidden = 12;
            dc.t_emb_dim = 6;
            dc.T = 20;
            dc.layers = 1;
            dc.seed = 9;
            TrainableDenoiser den(dc, E);
            const double err =
                den.gradient_check(x, 4.0, {2, 5}, target, 1e-5, 50, 11);
            record(family == DenoiserFamily::kMlp ? "gradients_mlp"
                                                  : "gradients_transformer",
                   err, 1e-4);
        }
    }

    // Oracle recovery through the full reverse loop.
    {
        const auto E = EmbeddingMatrix::init_random(40, 8, 17).normalized();
        NoiseSchedule s;
        Rng rng(104);
        double failures = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<TokenId> tgt(6);
            for (auto& id : tgt)
                id = static_cast<TokenId>(rng.uniform_int(0, 39));
            OracleDenoiser oracle(E, tgt);
            if (sample(oracle, {}, s, 25, E, tgt.size(), rng) != tgt)
                failures += 1.0;
        }
        record("oracle_recovery_failures", failures, 0.5);
    }

    bool all_pass = true;
    for (const auto& r : results) all_pass &= r.pass;
    if (as_json) {
        json j;
        j["pass"] = all_pass;
        j["properties"] = json::array();
        for (const auto& r : results)
            j["properties"].push_back({{"name", r.name},
                                       {"deviation", r.deviation},
                                       {"tolerance", r.tolerance},
                                       {"pass", r.pass}});
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << std::left << std::setw(36) << "property" << std::setw(26)
                  << "deviation" << std::setw(26) << "tolerance"
                  << "status\n";
        for (const auto& r : results)
            std::cout << std::left << std::setw(36) << r.name << std::setw(26)
                      << fmt(r.deviation) << std::setw(26) << fmt(r.tolerance)
                      << (r.pass ? "pass" : "FAIL") << "\n";
        std::cout << (all_pass ? "all properties pass\n"
                               : "some properties FAILED\n");
    }
    return all_pass ? kExitOk : kExitFail;
}

int cmd_ablate(RunConfig cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const ParallelDataset data = load_training_data(cfg);
    const Vocabulary vocab = vocab_for(cfg, data);
    const auto E =
        EmbeddingMatrix::init_random(vocab.size(), cfg.denoiser.d, cfg.seed)
            .normalized();
    const auto bsched =
        BaselineSchedule::cosine(cfg.schedule.T, cfg.simplex_k);
    cfg.denoiser.T = cfg.schedule.T;
    echo_config(cfg, out_dir);

    std::ostringstream csv;
    csv << "space,bleu,rouge1,rouge2,rougeL,div1,div4,sari,n_examples\n";
    for (const std::string space_name : {"smoothie", "embedding", "simplex"}) {
        const LatentSpace space = space_from_name(space_name);
        TrainableDenoiser den(cfg.denoiser, E);
        if (space == LatentSpace::kSimplex) den.set_ce_head(true);
        train(den, cfg.train, data, vocab, E, cfg.schedule, bsched, space,
              cfg.denoiser.max_src, cfg.denoiser.max_tgt);

        NoiseSchedule sched = cfg.schedule;
        if (cfg.delta_tilde_override >= 0.0)
            sched.delta_tilde = cfg.delta_tilde_override;
        Rng rng(cfg.seed);
        std::vector<Tokens> sources, cands, refs;
        const std::size_t n_eval = std::min<std::size_t>(64, data.pairs.size());
        for (std::size_t i = 0; i < n_eval; ++i) {
            const auto& pair = data.pairs[i];
            const auto src = vocab.encode(pair.source, cfg.denoiser.max_src).ids;
            const auto decoded =
                space == LatentSpace::kSmoothie
                    ? sample(den, src, sched, cfg.sample_steps, E,
                             cfg.denoiser.max_tgt, rng)
                    : sample_baseline(space, den, src, bsched,
                                      cfg.sample_steps, E, cfg.denoiser.max_tgt,
                                      rng);
            sources.push_back(split_tokens(pair.source));
            cands.push_back(split_tokens(vocab.decode_text(decoded)));
            refs.push_back(split_tokens(pair.target));
        }
        const EvalReport rep = evaluate(sources, cands, refs);
        csv << space_name << ',' << fmt(rep.bleu) << ',' << fmt(rep.rouge1)
            << ',' << fmt(rep.rouge2) << ',' << fmt(rep.rougeL) << ','
            << fmt(rep.div1) << ',' << fmt(rep.div4) << ',' << fmt(rep.sari)
            << ',' << rep.n_examples << '\n';
    }
    write_text((std::filesystem::path(out_dir) / "ablation.csv").string(),
               csv.str());
    std::cout << csv.str();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Smoothing-diffusion text generation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, space_flag;
    std::uint64_t seed_flag = 0;
    bool seed_set = false, space_set = false;
    int steps_flag = 0;
    bool steps_set = false;
    double dt_flag = -1.0;
    bool dt_set = false;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config JSON");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--space", space_flag,
                        "latent space: smoothie|embedding|simplex")
            ->each([&](const std::string&) { space_set = true; });
        cmd->add_option("--seed", seed_flag, "RNG seed")->each(
            [&](const std::string&) { seed_set = true; });
        cmd->add_option("--steps", steps_flag, "sampling steps")
            ->each([&](const std::string&) { steps_set = true; });
        cmd->add_option("--delta-tilde", dt_flag, "reverse noise std")
            ->each([&](const std::string&) { dt_set = true; });
    };

    // build-vocab
    std::string bv_input, bv_out = "vocab.txt";
    std::size_t bv_max = 256;
    auto* bv = app.add_subcommand("build-vocab",
                                  "build a vocabulary from a JSONL dataset");
    bv->add_option("--input", bv_input, "JSONL dataset")->required();
    bv->add_option("--vocab-out", bv_out, "output vocabulary file");
    bv->add_option("--max-size", bv_max, "maximum vocabulary size");

    // train
    auto* tr = app.add_subcommand("train", "train a denoiser");
    add_common(tr);

    // sample
    std::string sm_checkpoint, sm_data;
    bool sm_oracle = false, sm_trace = false;
    auto* sm = app.add_subcommand("sample", "generate with the reverse process");
    add_common(sm);
    sm->add_option("--checkpoint", sm_checkpoint,
                   "training output directory (vocab/embeddings/ema)")
        ->required();
    sm->add_option("--data", sm_data, "JSONL with sources/targets")->required();
    sm->add_flag("--oracle", sm_oracle, "use the oracle denoiser");
    sm->add_flag("--trace", sm_trace, "write per-step decode trace");

    // evaluate
    std::string ev_generated, ev_references;
    bool ev_json = false;
    auto* ev = app.add_subcommand("evaluate", "score generations");
    ev->add_option("--generated", ev_generated, "generations JSONL")
        ->required();
    ev->add_option("--references", ev_references,
                   "references JSONL (optional when --generated carries "
                   "\"target\" fields)");
    ev->add_option("--out", out_dir, "output directory");
    ev->add_flag("--json", ev_json, "JSON report only");

    // inspect-schedule
    int is_points = 201;
    std::string is_out;
    auto* is = app.add_subcommand("inspect-schedule",
                                  "emit the sigma(t) grid as CSV");
    is->add_option("--config", config_path, "run config JSON");
    is->add_option("--points", is_points, "grid points");
    is->add_option("--out", is_out, "CSV path (default stdout)");

    // ablate
    auto* ab = app.add_subcommand(
        "ablate", "train/sample/evaluate all three latent spaces");
    add_common(ab);

    // verify
    bool vf_json = false, vf_flip = false;
    auto* vf = app.add_subcommand("verify", "run the property suites");
    vf->add_flag("--json", vf_json, "machine-readable report");
    vf->add_flag("--inject-sign-flip", vf_flip,
                 "sensitivity check: corrupt the distance latent");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        thread_cap();
        RunConfig cfg = parse_run_config(config_path);
        if (space_set) cfg.space = space_flag;
        if (seed_set) {
            cfg.seed = seed_flag;
            cfg.train.seed = seed_flag;
            cfg.denoiser.seed = seed_flag;
        }
        if (steps_set) cfg.sample_steps = steps_flag;
        if (dt_set) cfg.delta_tilde_override = dt_flag;
        space_from_name(cfg.space);  // validate early

        if (bv->parsed()) return cmd_build_vocab(bv_input, bv_out, bv_max);
        if (tr->parsed())
            return cmd_train(cfg, out_dir.empty() ? "train_out" : out_dir);
        if (sm->parsed())
            return cmd_sample(cfg, sm_checkpoint, sm_data,
                              out_dir.empty() ? "sample_out" : out_dir,
                              sm_oracle, sm_trace);
        if (ev->parsed())
            return cmd_evaluate(ev_generated, ev_references, out_dir, ev_json);
        if (is->parsed())
            return cmd_inspect_schedule(cfg.schedule, is_points, is_out);
        if (ab->parsed())
            return cmd_ablate(cfg, out_dir.empty() ? "ablate_out" : out_dir);
        if (vf->parsed()) return cmd_verify(vf_json, vf_flip);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}
