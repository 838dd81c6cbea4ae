// memroute: synthetic-data training runs, inference, analytic cost sweeps,
// routing-mask export, and verification suites for the token-routing encoder.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "memroute/checkpoint.hpp"
#include "memroute/netpbm.hpp"
#include "memroute/ops.hpp"
#include "memroute/train.hpp"
#include "memroute/verify.hpp"

namespace fs = std::filesystem;
using namespace memroute;

namespace {

struct TrainArgs {
    std::string data, config, out, teacher, log;
    std::size_t steps = 100;
    std::uint64_t seed = 0;
    std::int64_t pretrain_teacher = -1;  // steps; <0 = disabled
};

struct InferArgs {
    std::string ckpt, image, out_alpha, export_masks;
    std::int64_t max_tokens = -1;  // <0 = use checkpoint config
};

struct BenchArgs {
    std::string config, resolutions = "256,512,1024", ratios = "0.25,0.5,1", out;
    std::uint64_t measure_budget = 1ull << 30;
};

std::vector<std::pair<std::size_t, std::size_t>> parse_resolutions(const std::string& s) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        const auto x = tok.find('x');
        if (x == std::string::npos) {
            const std::size_t v = std::stoul(tok);
            out.emplace_back(v, v);
        } else {
            out.emplace_back(std::stoul(tok.substr(0, x)), std::stoul(tok.substr(x + 1)));
        }
    }
    if (out.empty()) throw ConfigError("bench-cost: no resolutions given");
    return out;
}

std::vector<double> parse_ratios(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        const double r = std::stod(tok);
        if (r < 0.0 || r > 1.0)
            throw ConfigError("bench-cost: ratio " + tok + " outside [0,1]");
        out.push_back(r);
    }
    if (out.empty()) throw ConfigError("bench-cost: no ratios given");
    return out;
}

int cmd_gen_data(const std::string& out, std::size_t count, std::size_t size,
                 const std::string& difficulty, std::uint64_t seed) {
    if (difficulty != "easy" && difficulty != "hard")
        throw ConfigError("gen-data: difficulty must be easy or hard");
    write_dataset(out, count, size,
                  difficulty == "easy" ? Difficulty::easy : Difficulty::hard, seed);
    std::printf("wrote %zu samples of size %zu to %s\n", count, size, out.c_str());
    return 0;
}

template <typename T>
int run_train(const TrainArgs& a, const RunConfig& cfg) {
    auto data = load_dataset<T>(a.data);
    if (data.empty()) throw ConfigError("train: dataset is empty");
    if (data[0].image.dim(1) != cfg.encoder.img_h || data[0].image.dim(2) != cfg.encoder.img_w)
        throw ConfigError("train: dataset size " + std::to_string(data[0].image.dim(1)) +
                          "x" + std::to_string(data[0].image.dim(2)) +
                          " does not match config img-size " +
                          std::to_string(cfg.encoder.img_h) + "x" +
                          std::to_string(cfg.encoder.img_w));
    Rng master(a.seed);

    ModelWeights<T> teacher;
    if (!a.teacher.empty()) {
        const RunConfig tcfg = read_checkpoint_config(a.teacher);
        teacher = load_checkpoint<T>(a.teacher, tcfg);
        set_trainable(teacher, false);
    } else if (a.pretrain_teacher >= 0) {
        Rng init = master.fork(1);
        teacher = init_teacher<T>(cfg.encoder, init);
        train_teacher(teacher, cfg, data, static_cast<std::size_t>(a.pretrain_teacher),
                      master.fork(3));
        RunConfig tcfg = cfg;
        save_checkpoint<T>(fs::path(a.out) / "teacher", tcfg, teacher, "teacher");
        std::printf("pretrained teacher for %lld steps\n",
                    static_cast<long long>(a.pretrain_teacher));
    } else {
        throw ConfigError("train: provide --teacher CKPT or --pretrain-teacher [steps]");
    }

    Rng sinit = master.fork(2);
    ModelWeights<T> student = init_student<T>(cfg.encoder, teacher, sinit);

    const fs::path log_path = a.log.empty() ? fs::path(a.out) / "train_log.csv" : fs::path(a.log);
    std::error_code ec;
    fs::create_directories(log_path.parent_path(), ec);
    std::ofstream csv(log_path);
    if (!csv) throw IoError("cannot open log file " + log_path.string());
    auto logs = train_student(student, teacher, cfg, data, a.steps, master.fork(4), &csv,
                              StepCallback<T>());
    csv.close();

    save_checkpoint<T>(a.out, cfg, student, "student");
    if (!logs.empty())
        std::printf("step %zu: total=%.6g gamma_hard=%.6g\n", logs.back().step,
                    logs.back().total, logs.back().gamma_hard);
    std::printf("saved checkpoint to %s\n", a.out.c_str());
    return 0;
}

int cmd_train(const TrainArgs& a) {
    const RunConfig cfg = load_run_config(a.config);
    return cfg.dtype == DType::f32 ? run_train<float>(a, cfg) : run_train<double>(a, cfg);
}

template <typename T>
int run_infer(const InferArgs& a, RunConfig cfg) {
    if (a.max_tokens >= 0)
        cfg.encoder.routing.max_tokens = static_cast<std::size_t>(a.max_tokens);
    ModelWeights<T> model = load_checkpoint<T>(a.ckpt, cfg);
    set_trainable(model, false);
    Tensor<T> img3 = read_ppm<T>(a.image);
    if (img3.dim(1) != cfg.encoder.img_h || img3.dim(2) != cfg.encoder.img_w)
        throw ConfigError("infer: image " + std::to_string(img3.dim(1)) + "x" +
                          std::to_string(img3.dim(2)) + " does not match checkpoint size " +
                          std::to_string(cfg.encoder.img_h) + "x" +
                          std::to_string(cfg.encoder.img_w));
    auto img = ops::reshape(img3, Shape{1, img3.dim(0), img3.dim(1), img3.dim(2)});
    auto out = encoder_forward(img, model, cfg.encoder, RunMode::infer, nullptr);
    auto alpha = decode_alpha(out.features, model.decoder);
    write_pgm(a.out_alpha,
              ops::reshape(alpha, Shape{cfg.encoder.img_h, cfg.encoder.img_w}));

    if (!a.export_masks.empty()) {
        std::error_code ec;
        fs::create_directories(a.export_masks, ec);
        if (ec) throw IoError("cannot create " + a.export_masks);
        const std::size_t hp = cfg.encoder.grid_h(), wp = cfg.encoder.grid_w();
        for (const auto& blk : out.record.blocks) {
            std::vector<std::uint8_t> bytes(hp * wp);
            for (std::size_t i = 0; i < hp * wp; ++i)
                bytes[i] = blk.delta[i] ? 255 : 0;  // sample 0
            char name[64];
            std::snprintf(name, sizeof(name), "mask_s0_b%zu.pgm", blk.block);
            write_pgm_bytes(fs::path(a.export_masks) / name, bytes.data(), wp, hp);
        }
    }

    for (const auto& blk : out.record.blocks) {
        double g = 0;
        for (std::uint8_t d : blk.delta) g += d;
        g /= static_cast<double>(blk.delta.size());
        std::printf("gamma block %zu = %.6f\n", blk.block, g);
    }
    std::printf("gamma overall = %.6f\n", out.record.gamma_hard());

    CostReport report;
    const std::uint64_t dtype_bytes = sizeof(T);
    std::size_t rec_i = 0;
    for (std::size_t i = 0; i < cfg.encoder.depth; ++i) {
        CostReport::PerBlock pb;
        pb.block = i;
        if (cfg.encoder.block_routed(i)) {
            const auto& blk = out.record.blocks[rec_i++];
            pb.routed_tokens = blk.postcap_count.empty() ? 0 : blk.postcap_count[0];
        } else {
            pb.routed_tokens = cfg.encoder.n_tokens();
        }
        const auto c =
            attention_cost(pb.routed_tokens, cfg.encoder.heads, cfg.encoder.dim, dtype_bytes);
        pb.attn_map_bytes = c.attn_map_bytes;
        pb.flops = c.flops;
        report.per_block.push_back(pb);
    }
    report.write_csv(std::cout);
    return 0;
}

int cmd_infer(const InferArgs& a) {
    const RunConfig cfg = read_checkpoint_config(a.ckpt);
    return cfg.dtype == DType::f32 ? run_infer<float>(a, cfg) : run_infer<double>(a, cfg);
}

int cmd_bench_cost(const BenchArgs& a) {
    const RunConfig cfg = load_run_config(a.config);
    const auto resolutions = parse_resolutions(a.resolutions);
    const auto ratios = parse_ratios(a.ratios);
    std::ofstream out(a.out);
    if (!out) throw IoError("cannot open " + a.out + " for writing");
    out << "H,W,N,ratio,analytic_bytes,measured_bytes,flops\n";
    const std::size_t D = cfg.encoder.dim, h = cfg.encoder.heads, p = cfg.encoder.patch;
    Rng rng(12);
    for (const auto& [H, W] : resolutions) {
        if (H % p != 0 || W % p != 0)
            throw ConfigError("bench-cost: resolution " + std::to_string(H) + "x" +
                              std::to_string(W) + " not divisible by patch " +
                              std::to_string(p));
        const std::size_t N = (H / p) * (W / p);
        for (double r : ratios) {
            const auto n_routed =
                static_cast<std::size_t>(std::llround(r * static_cast<double>(N)));
            const auto cost = attention_cost(n_routed, h, D, 4);
            std::string measured;
            if (cost.attn_map_bytes <= a.measure_budget && n_routed > 0) {
                TensorF x = TensorF::zeros({1, N, D});
                for (float& v : x.mut_data()) v = static_cast<float>(rng.uniform(-1, 1));
                AttentionParams<float> ap;
                Rng wr(5);
                auto randw = [&]() {
                    TensorF t = TensorF::zeros({D, D});
                    for (float& v : t.mut_data()) v = static_cast<float>(wr.normal(0, 0.05));
                    return t;
                };
                ap.wq = randw();
                ap.wk = randw();
                ap.wv = randw();
                ap.wo = randw();
                ap.heads = h;
                std::vector<std::size_t> idx(n_routed);
                for (std::size_t i = 0; i < n_routed; ++i)
                    idx[i] = i * N / n_routed;  // evenly spread, strictly increasing
                const std::uint64_t baseline = alloc_stats::current_bytes();
                alloc_stats::reset_peak();
                auto rows = attend_subset(x, {idx}, ap);
                const std::uint64_t peak = alloc_stats::peak_bytes();
                measured = std::to_string(peak > baseline ? peak - baseline : 0);
            }
            char line[160];
            std::snprintf(line, sizeof(line), "%zu,%zu,%zu,%g,%llu,%s,%llu\n", H, W, N, r,
                          static_cast<unsigned long long>(cost.attn_map_bytes),
                          measured.c_str(), static_cast<unsigned long long>(cost.flops));
            out << line;
        }
    }
    std::printf("wrote cost sweep to %s\n", a.out.c_str());
    return 0;
}

int cmd_verify(const std::string& suite) {
    const auto results = verify::run_suite(suite);
    bool all_pass = true;
    for (const auto& r : results) {
        std::printf("[%s] %-36s measured=%-12.6g threshold=%-10.6g %s\n", r.suite.c_str(),
                    r.name.c_str(), r.measured, r.threshold, r.pass ? "PASS" : "FAIL");
        all_pass = all_pass && r.pass;
    }
    std::printf("%zu checks, %s\n", results.size(), all_pass ? "all passed" : "FAILURES");
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memroute: adaptive token-routing encoder toolkit"};
    app.require_subcommand(1);

    // gen-data
    std::string gd_out, gd_difficulty = "easy";
    std::size_t gd_count = 8, gd_size = 64;
    std::uint64_t gd_seed = 0;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic compositing dataset");
    gen->add_option("--out", gd_out, "output directory")->required();
    gen->add_option("--count", gd_count, "number of samples");
    gen->add_option("--size", gd_size, "square image size in pixels");
    gen->add_option("--difficulty", gd_difficulty, "easy|hard");
    gen->add_option("--seed", gd_seed, "master seed");

    // train
    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train the routed student encoder");
    train->add_option("--data", ta.data, "dataset directory")->required();
    train->add_option("--config", ta.config, "run config JSON")->required();
    train->add_option("--out", ta.out, "output checkpoint directory")->required();
    train->add_option("--steps", ta.steps, "training steps");
    train->add_option("--seed", ta.seed, "master seed");
    train->add_option("--teacher", ta.teacher, "teacher checkpoint directory");
    train->add_option("--pretrain-teacher", ta.pretrain_teacher,
                      "pretrain a routing-free teacher for N steps first");
    train->add_option("--log", ta.log, "loss CSV path (default <out>/train_log.csv)");

    // infer
    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "Predict an alpha matte for one image");
    infer->add_option("--ckpt", ia.ckpt, "checkpoint directory")->required();
    infer->add_option("--image", ia.image, "input PPM (P6)")->required();
    infer->add_option("--out-alpha", ia.out_alpha, "output PGM (P5)")->required();
    infer->add_option("--max-tokens", ia.max_tokens,
                      "top-k cap on attention tokens (overrides config)");
    infer->add_option("--export-masks", ia.export_masks,
                      "directory for per-block routing masks (PGM)");

    // bench-cost
    BenchArgs ba;
    auto* bench = app.add_subcommand(
        "bench-cost", "Analytic + measured attention cost sweep (CSV)");
    bench->add_option("--config", ba.config, "run config JSON")->required();
    bench->add_option("--resolutions", ba.resolutions, "comma list, e.g. 512,1024 or 512x768");
    bench->add_option("--ratios", ba.ratios, "comma list of routed fractions in [0,1]");
    bench->add_option("--out", ba.out, "output CSV path")->required();
    bench->add_option("--measure-budget", ba.measure_budget,
                      "skip live measurement above this many attention-map bytes");

    // verify
    std::string suite = "all";
    auto* ver = app.add_subcommand("verify", "Run verification suites");
    ver->add_option("--suite", suite, "grad|oracle|routing|all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // 2 = usage error
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gd_out, gd_count, gd_size, gd_difficulty, gd_seed);
        if (train->parsed()) return cmd_train(ta);
        if (infer->parsed()) return cmd_infer(ia);
        if (bench->parsed()) return cmd_bench_cost(ba);
        if (ver->parsed()) return cmd_verify(suite);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
