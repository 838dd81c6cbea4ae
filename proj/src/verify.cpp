#include "memroute/verify.hpp"

#include <cmath>
#include <functional>

#include "memroute/grad_check.hpp"
#include "memroute/ops.hpp"
#include "memroute/reference.hpp"
#include "memroute/tape.hpp"
#include "memroute/train.hpp"

namespace memroute::verify {

namespace {

TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorD t = TensorD::zeros(std::move(shape));
    for (double& v : t.mut_data()) v = rng.uniform(lo, hi);
    return t;
}

TensorD sumsq(const TensorD& t) { return ops::sum_all(ops::square(t)); }

CheckResult check(const std::string& suite, const std::string& name, double measured,
                  double threshold) {
    return {suite, name, measured, threshold, measured <= threshold};
}

// ---- tiny end-to-end fixture for the full-loss gradient check ----

struct TinyFixture {
    RunConfig cfg;
    ModelWeights<double> teacher;
    ModelWeights<double> student;
    TensorD img;    // [1,3,32,32]
    TensorD truth;  // [1,32,32]
    TensorD tfeat;  // [1,N,D]
    std::uint64_t noise_seed = 0;
};

TinyFixture build_tiny_fixture() {
    TinyFixture f;
    f.cfg.encoder.img_h = f.cfg.encoder.img_w = 32;
    f.cfg.encoder.patch = 16;
    f.cfg.encoder.in_channels = 3;
    f.cfg.encoder.dim = 8;
    f.cfg.encoder.heads = 2;
    f.cfg.encoder.depth = 2;
    f.cfg.encoder.mlp_ratio = 2;
    f.cfg.encoder.routing.rho = 0.25;
    f.cfg.encoder.routing.tau = 1.0;
    Rng init(20240901);
    f.teacher = init_teacher<double>(f.cfg.encoder, init);
    set_trainable(f.teacher, false);
    Rng sinit = init.fork(1);
    f.student = init_student<double>(f.cfg.encoder, f.teacher, sinit);
    set_trainable(f.student, false);
    Rng data_rng(42);
    auto sample = gen_toy_sample<double>(data_rng, 32, Difficulty::hard);
    f.img = ops::reshape(sample.image, Shape{1, 3, 32, 32});
    f.truth = ops::reshape(sample.alpha, Shape{1, 32, 32});
    auto tb = teacher_forward(f.img, f.teacher, f.cfg.encoder);
    f.tfeat = tb.x;

    // Pick a frozen-noise seed whose routing decisions (a) keep a safe margin
    // from the decision boundary so finite differences stay on one side, and
    // (b) populate both branches in every block.
    for (std::uint64_t seed = 1; seed < 64; ++seed) {
        Rng noise(seed);
        auto out = encoder_forward(f.img, f.student, f.cfg.encoder, RunMode::train, &noise);
        double min_margin = 1e30;
        bool both = true;
        for (const auto& blk : out.record.blocks) {
            std::size_t ones = 0;
            for (std::uint8_t d : blk.delta) ones += d;
            if (ones == 0 || ones == blk.delta.size()) both = false;
            // margin of the perturbed logits, recovered from the soft sample
            const auto s = blk.soft.data();
            for (std::size_t i = 0; i < s.size(); i += 2) {
                const double m = std::abs(std::log(s[i + 1]) - std::log(s[i]));
                min_margin = std::min(min_margin, m);
            }
        }
        if (both && min_margin > 1e-2) {
            f.noise_seed = seed;
            return f;
        }
    }
    throw Error("tiny fixture: no frozen-noise seed with safe routing margins found");
}

TensorD tiny_full_loss(const TinyFixture& f, ModelWeights<double>& w) {
    Rng noise(f.noise_seed);  // identical stream every call = frozen noise
    auto out = encoder_forward(f.img, w, f.cfg.encoder, RunMode::train, &noise);
    auto alpha = decode_alpha(out.features, w.decoder);
    TensorD loss = ops::add(matting_loss(alpha, f.truth),
                            distill_loss(f.tfeat, out.features.x, true));
    return ops::add(loss, compress_loss(out.record.gamma_soft, f.cfg.encoder.routing.rho));
}

}  // namespace

double full_loss_grad_max_err() {
    TinyFixture f = build_tiny_fixture();
    std::vector<std::pair<std::string, Tensor<double>*>> params;
    visit_params<double>(f.student, [&](const std::string& name, Tensor<double>& t) {
        params.emplace_back(name, &t);
    });
    double max_err = 0.0;
    for (auto& [name, ptr] : params) {
        TensorD base = *ptr;
        auto fn = [&](const TensorD& cand) {
            *ptr = cand;
            TensorD loss = tiny_full_loss(f, f.student);
            *ptr = base;
            return loss;
        };
        max_err = std::max(max_err, grad_check(fn, base, 1e-5));
    }
    return max_err;
}

double full_routing_max_diff() {
    EncoderConfig cfg;
    cfg.img_h = cfg.img_w = 64;
    cfg.patch = 16;
    cfg.in_channels = 3;
    cfg.dim = 32;
    cfg.heads = 2;
    cfg.depth = 2;
    Rng init(7);
    auto teacher = init_teacher<double>(cfg, init);
    set_trainable(teacher, false);
    Rng sinit = init.fork(1);
    auto student = init_student<double>(cfg, teacher, sinit);
    set_trainable(student, false);
    Rng data_rng(3);
    auto sample = gen_toy_sample<double>(data_rng, 64, Difficulty::hard);
    auto img = ops::reshape(sample.image, Shape{1, 3, 64, 64});
    ForcedRouting forced(cfg.depth, std::vector<std::uint8_t>(cfg.n_tokens(), 1));
    auto routed = encoder_forward(img, student, cfg, RunMode::infer, nullptr, &forced);
    auto plain = teacher_forward(img, teacher, cfg);
    double max_diff = 0.0;
    const auto a = routed.features.x.data();
    const auto b = plain.x.data();
    for (std::size_t i = 0; i < a.size(); ++i)
        max_diff = std::max(max_diff, std::abs(a[i] - b[i]));
    return max_diff;
}

double gumbel_class1_frequency(double p1, std::size_t draws, double tau,
                               std::uint64_t seed) {
    TensorD log_p = TensorD::zeros({1, draws, 2});
    auto v = log_p.mut_data();
    for (std::size_t i = 0; i < draws; ++i) {
        v[2 * i] = std::log(1.0 - p1);
        v[2 * i + 1] = std::log(p1);
    }
    Rng rng(seed);
    auto dec = decide_train(log_p, tau, rng);
    std::size_t ones = 0;
    for (std::uint8_t d : dec.delta) ones += d;
    return static_cast<double>(ones) / static_cast<double>(draws);
}

std::vector<CheckResult> run_grad_suite() {
    std::vector<CheckResult> out;
    Rng rng(1234);
    const double tol = 1e-6;
    auto add_check = [&](const std::string& name,
                         const std::function<TensorD(const TensorD&)>& f, const TensorD& x,
                         double threshold = 1e-6) {
        out.push_back(check("grad", name, grad_check(f, x), threshold));
    };

    {
        TensorD c = random_tensor({3}, rng);
        TensorD big = random_tensor({2, 3}, rng);
        add_check("add_broadcast", [&](const TensorD& x) { return sumsq(ops::add(x, c)); },
                  big);
        add_check("add_broadcast_small_side",
                  [&](const TensorD& x) { return sumsq(ops::add(big, x)); }, c);
    }
    {
        TensorD c = random_tensor({4}, rng, 0.5, 1.5);
        add_check("mul_broadcast", [&](const TensorD& x) { return sumsq(ops::mul(x, c)); },
                  random_tensor({2, 4}, rng));
    }
    add_check("affine", [](const TensorD& x) { return sumsq(ops::affine(x, 1.7, -0.3)); },
              random_tensor({10}, rng));
    add_check("sigmoid", [](const TensorD& x) { return sumsq(ops::sigmoid(x)); },
              random_tensor({10}, rng, -2, 2));
    add_check("gelu", [](const TensorD& x) { return sumsq(ops::gelu(x)); },
              random_tensor({10}, rng, -2, 2));
    add_check("abs", [](const TensorD& x) { return ops::sum_all(ops::abs(x)); },
              random_tensor({10}, rng, 0.2, 1.0));
    {
        TensorD b = random_tensor({4, 2}, rng);
        add_check("matmul_lhs", [&](const TensorD& x) { return sumsq(ops::matmul(x, b)); },
                  random_tensor({3, 4}, rng));
        TensorD a = random_tensor({3, 4}, rng);
        add_check("matmul_rhs", [&](const TensorD& x) { return sumsq(ops::matmul(a, x)); },
                  random_tensor({4, 2}, rng));
        TensorD bb = random_tensor({2, 4, 3}, rng);
        add_check("matmul_batched",
                  [&](const TensorD& x) { return sumsq(ops::matmul(x, bb)); },
                  random_tensor({2, 2, 4}, rng));
        TensorD nt = random_tensor({5, 4}, rng);
        add_check("matmul_nt", [&](const TensorD& x) { return sumsq(ops::matmul_nt(x, nt)); },
                  random_tensor({3, 4}, rng));
    }
    add_check("softmax", [](const TensorD& x) { return sumsq(ops::softmax(x, -1)); },
              random_tensor({2, 5}, rng));
    add_check("softmax_axis0", [](const TensorD& x) { return sumsq(ops::softmax(x, 0)); },
              random_tensor({4, 3}, rng));
    add_check("log_softmax", [](const TensorD& x) { return sumsq(ops::log_softmax(x, -1)); },
              random_tensor({2, 5}, rng));
    {
        TensorD gain = random_tensor({6}, rng, 0.5, 1.5);
        TensorD bias = random_tensor({6}, rng);
        add_check("layer_norm_x",
                  [&](const TensorD& x) { return sumsq(ops::layer_norm(x, gain, bias)); },
                  random_tensor({3, 6}, rng));
        TensorD x0 = random_tensor({3, 6}, rng);
        add_check("layer_norm_gain",
                  [&](const TensorD& g) { return sumsq(ops::layer_norm(x0, g, bias)); },
                  gain);
        add_check("layer_norm_bias",
                  [&](const TensorD& b) { return sumsq(ops::layer_norm(x0, gain, b)); },
                  bias);
    }
    {
        TensorD k = random_tensor({2, 3, 3}, rng);
        add_check("dwconv2d_x",
                  [&](const TensorD& x) { return sumsq(ops::depthwise_conv2d(x, k)); },
                  random_tensor({1, 2, 4, 4}, rng));
        TensorD x0 = random_tensor({1, 2, 4, 4}, rng);
        add_check("dwconv2d_kernel",
                  [&](const TensorD& kk) { return sumsq(ops::depthwise_conv2d(x0, kk)); },
                  k);
    }
    {
        TensorD k = random_tensor({3}, rng);
        add_check("conv1d_x", [&](const TensorD& x) { return sumsq(ops::conv1d(x, k)); },
                  random_tensor({2, 1, 7}, rng));
        TensorD x0 = random_tensor({2, 1, 7}, rng);
        add_check("conv1d_kernel",
                  [&](const TensorD& kk) { return sumsq(ops::conv1d(x0, kk)); }, k);
    }
    add_check("mean_axis",
              [](const TensorD& x) { return sumsq(ops::mean_axis(x, 1, false)); },
              random_tensor({2, 4, 3}, rng));
    add_check("broadcast_to",
              [](const TensorD& x) { return sumsq(ops::broadcast_to(x, {4, 2, 3})); },
              random_tensor({2, 3}, rng));
    add_check("reshape_permute",
              [](const TensorD& x) {
                  return sumsq(ops::permute(ops::reshape(x, {2, 3, 2}), {1, 0, 2}));
              },
              random_tensor({12}, rng));
    add_check("concat_split",
              [](const TensorD& x) {
                  auto parts = ops::split(x, 1, {2, 2});
                  return sumsq(ops::concat<double>({parts[1], parts[0]}, 1));
              },
              random_tensor({2, 4}, rng));
    add_check("gather_scatter",
              [](const TensorD& x) {
                  auto rows = ops::gather_rows(x, {3, 1});
                  return sumsq(ops::scatter_rows(rows, {0, 2}, 4));
              },
              random_tensor({4, 3}, rng));
    add_check("select_stack",
              [](const TensorD& x) {
                  std::vector<TensorD> parts = {ops::select0(x, 1), ops::select0(x, 0)};
                  return sumsq(ops::stack0(parts));
              },
              random_tensor({2, 3}, rng));
    add_check("extract_patches",
              [](const TensorD& x) { return sumsq(ops::extract_patches(x, 2)); },
              random_tensor({1, 2, 4, 4}, rng));
    {
        TensorD k = random_tensor({2, 2, 2, 2}, rng);
        TensorD b = random_tensor({2}, rng);
        add_check("upsample_conv_x",
                  [&](const TensorD& x) { return sumsq(ops::upsample_conv(x, k, b, 2)); },
                  random_tensor({1, 2, 2, 2}, rng));
        TensorD x0 = random_tensor({1, 2, 2, 2}, rng);
        add_check("upsample_conv_k",
                  [&](const TensorD& kk) { return sumsq(ops::upsample_conv(x0, kk, b, 2)); },
                  k);
        add_check("upsample_conv_bias",
                  [&](const TensorD& bb) { return sumsq(ops::upsample_conv(x0, k, bb, 2)); },
                  b);
    }
    {
        // relaxed routing sample: gradient of mean(soft) w.r.t. log-probs with
        // frozen noise
        TensorD noise = sample_gumbel<double>({1, 4, 2}, rng);
        add_check("gumbel_soft_mean",
                  [&](const TensorD& lp) {
                      auto dec = decide_train(ops::log_softmax(lp, -1), 1.0, noise);
                      return ops::mean_all(dec.soft);
                  },
                  random_tensor({1, 4, 2}, rng));
    }
    add_check("attend", [&](const TensorD& x) {
        AttentionParams<double> p;
        Rng wr(99);
        p.wq = random_tensor({6, 6}, wr);
        p.wk = random_tensor({6, 6}, wr);
        p.wv = random_tensor({6, 6}, wr);
        p.wo = random_tensor({6, 6}, wr);
        p.heads = 2;
        return sumsq(attend(x, p));
    }, random_tensor({1, 4, 6}, rng));

    out.push_back(check("grad", "full_loss_all_param_groups", full_loss_grad_max_err(),
                        1e-4));
    (void)tol;
    return out;
}

std::vector<CheckResult> run_oracle_suite() {
    std::vector<CheckResult> out;
    Rng rng(77);

    {
        TensorD a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
        auto c = ops::matmul(a, b);
        std::vector<double> expect(6);
        ref::matmul(a.data().data(), b.data().data(), expect.data(), 3, 4, 2);
        double diff = 0;
        for (std::size_t i = 0; i < expect.size(); ++i)
            diff = std::max(diff, std::abs(c.at(i) - expect[i]));
        out.push_back(check("oracle", "matmul_vs_triple_loop", diff, 1e-12));
    }
    {
        TensorD x = TensorD::from({1, 3}, {1, 2, 3});
        auto y = ops::softmax(x, -1);
        std::vector<double> expect(3);
        ref::softmax_rows(x.data().data(), expect.data(), 1, 3);
        double diff = 0;
        for (std::size_t i = 0; i < 3; ++i) diff = std::max(diff, std::abs(y.at(i) - expect[i]));
        out.push_back(check("oracle", "softmax_vs_direct_exp_sum", diff, 1e-7));
    }
    {
        TensorD x = TensorD::from({1, 2}, {5, 1});
        auto y = ops::log_softmax(x, -1);
        std::vector<double> expect(2);
        ref::log_softmax_rows(x.data().data(), expect.data(), 1, 2);
        double diff = std::max(std::abs(y.at(0) - expect[0]), std::abs(y.at(1) - expect[1]));
        out.push_back(check("oracle", "log_softmax_vs_direct", diff, 1e-7));
    }
    {
        AttentionParams<double> p;
        p.wq = random_tensor({8, 8}, rng);
        p.wk = random_tensor({8, 8}, rng);
        p.wv = random_tensor({8, 8}, rng);
        p.wo = random_tensor({8, 8}, rng);
        p.heads = 2;
        TensorD x = random_tensor({1, 5, 8}, rng);
        auto y = attend(x, p);
        std::vector<double> expect(5 * 8);
        ref::attention(x.data().data(), p.wq.data().data(), p.wk.data().data(),
                       p.wv.data().data(), p.wo.data().data(), 5, 8, 2, expect.data());
        double diff = 0;
        for (std::size_t i = 0; i < expect.size(); ++i)
            diff = std::max(diff, std::abs(y.at(i) - expect[i]));
        out.push_back(check("oracle", "attend_vs_per_head_loop", diff, 1e-10));

        // full index set must reproduce plain attention
        std::vector<std::size_t> all = {0, 1, 2, 3, 4};
        auto rows = attend_rows(ops::reshape(x, {5, 8}), all, p);
        double diff2 = 0;
        for (std::size_t i = 0; i < expect.size(); ++i)
            diff2 = std::max(diff2, std::abs(rows.at(i) - y.at(i)));
        out.push_back(check("oracle", "attend_subset_full_equals_attend", diff2, 1e-12));
    }
    {
        RouterParams<double> p;
        Rng wr(5);
        p.ln_gain = random_tensor({4}, wr, 0.5, 1.5);
        p.ln_bias = random_tensor({4}, wr);
        p.w1 = random_tensor({4, 4}, wr);
        p.b1 = random_tensor({4}, wr);
        p.w2 = random_tensor({4, 2}, wr);
        p.b2 = random_tensor({2}, wr);
        TensorD x = random_tensor({1, 4, 4}, rng);
        auto lp = route_probs(x, p);
        std::vector<double> expect(4 * 2);
        ref::router_log_probs(x.data().data(), p.ln_gain.data().data(),
                              p.ln_bias.data().data(), p.w1.data().data(),
                              p.b1.data().data(), p.w2.data().data(), p.b2.data().data(), 4,
                              4, 1e-6, expect.data());
        double diff = 0;
        for (std::size_t i = 0; i < expect.size(); ++i)
            diff = std::max(diff, std::abs(lp.at(i) - expect[i]));
        out.push_back(check("oracle", "router_vs_straight_line", diff, 1e-10));
    }
    {
        LtrmParams<double> p;
        Rng wr(6);
        p.w1 = random_tensor({4, 4}, wr);
        p.b1 = random_tensor({4}, wr);
        p.dw_kernel = random_tensor({4, 3, 3}, wr);
        p.w2 = random_tensor({4, 4}, wr);
        p.b2 = random_tensor({4}, wr);
        p.eca_kernel = random_tensor({3}, wr);
        TensorD x = random_tensor({1, 9, 4}, rng);
        auto y = ltrm_forward(x, 3, 3, p);
        std::vector<double> expect(9 * 4);
        ref::ltrm(x.data().data(), p.w1.data().data(), p.b1.data().data(),
                  p.dw_kernel.data().data(), p.w2.data().data(), p.b2.data().data(),
                  p.eca_kernel.data().data(), 3, 3, 3, 4, expect.data());
        double diff = 0;
        for (std::size_t i = 0; i < expect.size(); ++i)
            diff = std::max(diff, std::abs(y.at(i) - expect[i]));
        out.push_back(check("oracle", "ltrm_vs_straight_line", diff, 1e-10));
    }
    out.push_back(check("oracle", "full_routing_equals_plain_vit", full_routing_max_diff(),
                        1e-12));
    {
        const auto c = attention_cost(4096, 6, 384, 4);
        out.push_back(check("oracle", "attn_map_bytes_4096_h6",
                            std::abs(static_cast<double>(c.attn_map_bytes) - 402653184.0),
                            0.0));
        const auto q = attention_cost(1024, 6, 384, 4);
        const double ratio = static_cast<double>(q.attn_map_bytes) /
                             static_cast<double>(c.attn_map_bytes);
        out.push_back(
            check("oracle", "quarter_tokens_sixteenth_bytes", std::abs(ratio - 1.0 / 16.0), 0.0));
    }
    {
        const double lin = std::abs(static_cast<double>(ltrm_cost(392, 384)) -
                                    2.0 * static_cast<double>(ltrm_cost(196, 384)));
        out.push_back(check("oracle", "ltrm_cost_linear_in_tokens", lin, 0.0));
    }
    return out;
}

std::vector<CheckResult> run_routing_suite() {
    std::vector<CheckResult> out;
    out.push_back(check("routing", "gumbel_class1_frequency",
                        std::abs(gumbel_class1_frequency(0.9, 10000, 1.0, 1337) - 0.9),
                        0.02));
    Rng rng(55);
    {
        // straight-through consistency: hard decision equals argmax of soft
        TensorD lp = ops::log_softmax(random_tensor({2, 16, 2}, rng), -1);
        Rng nrng(3);
        auto dec = decide_train(lp, 0.7, nrng);
        std::size_t mismatches = 0;
        const auto s = dec.soft.data();
        for (std::size_t i = 0; i < dec.delta.size(); ++i) {
            const std::uint8_t am = s[2 * i + 1] > s[2 * i] ? 1 : 0;
            if (am != dec.delta[i]) ++mismatches;
        }
        out.push_back(check("routing", "straight_through_consistency",
                            static_cast<double>(mismatches), 0.0));
        // the straight-through tensor is exactly one-hot in the forward pass
        double st_err = 0.0;
        const auto st = dec.st.data();
        for (std::size_t i = 0; i < dec.delta.size(); ++i) {
            st_err = std::max(st_err, std::abs(st[2 * i + 1] - (dec.delta[i] ? 1.0 : 0.0)));
            st_err = std::max(st_err, std::abs(st[2 * i] - (dec.delta[i] ? 0.0 : 1.0)));
        }
        out.push_back(check("routing", "straight_through_hard_forward", st_err, 0.0));
    }
    {
        // vanishing temperature with frozen noise reduces to argmax(log_p + g)
        TensorD lp = ops::log_softmax(random_tensor({1, 32, 2}, rng), -1);
        TensorD g = sample_gumbel<double>({1, 32, 2}, rng);
        auto dec = decide_train(lp, 1e-6, g);
        std::size_t mismatches = 0;
        for (std::size_t i = 0; i < dec.delta.size(); ++i) {
            const double a0 = lp.at(2 * i) + g.at(2 * i);
            const double a1 = lp.at(2 * i + 1) + g.at(2 * i + 1);
            if ((a1 > a0 ? 1 : 0) != dec.delta[i]) ++mismatches;
        }
        out.push_back(check("routing", "tau_limit_matches_argmax",
                            static_cast<double>(mismatches), 0.0));
    }
    {
        // top-k cap invariant: surviving count == min(k, pre-cap count)
        double worst = 0.0;
        for (std::size_t trial = 0; trial < 20; ++trial) {
            TensorD lp = ops::log_softmax(random_tensor({2, 12, 2}, rng), -1);
            auto delta = decide_infer(lp);
            const std::size_t k = trial % 6;
            auto capped = apply_topk_cap(lp, delta, k);
            for (std::size_t b = 0; b < 2; ++b) {
                std::size_t pre = 0, post = 0;
                for (std::size_t i = 0; i < 12; ++i) {
                    pre += delta[b * 12 + i];
                    post += capped[b * 12 + i];
                }
                worst = std::max(worst,
                                 std::abs(static_cast<double>(post) -
                                          static_cast<double>(std::min(k, pre))));
            }
        }
        out.push_back(check("routing", "topk_count_invariant", worst, 0.0));
    }
    {
        TensorD tie = TensorD::from({1, 1, 2}, {-std::log(2.0), -std::log(2.0)});
        out.push_back(check("routing", "tie_resolves_to_refinement",
                            static_cast<double>(decide_infer(tie)[0]), 0.0));
    }
    {
        // argmax decisions are invariant to adding a constant to both columns
        TensorD lp = random_tensor({1, 20, 2}, rng);
        auto base = decide_infer(lp);
        auto shifted = decide_infer(ops::affine(lp, 1.0, 3.25));
        std::size_t mismatches = 0;
        for (std::size_t i = 0; i < base.size(); ++i)
            if (base[i] != shifted[i]) ++mismatches;
        out.push_back(check("routing", "argmax_shift_invariance",
                            static_cast<double>(mismatches), 0.0));
    }
    return out;
}

std::vector<CheckResult> run_suite(const std::string& suite) {
    if (suite == "grad") return run_grad_suite();
    if (suite == "oracle") return run_oracle_suite();
    if (suite == "routing") return run_routing_suite();
    if (suite == "all") {
        auto all = run_grad_suite();
        auto o = run_oracle_suite();
        auto r = run_routing_suite();
        all.insert(all.end(), o.begin(), o.end());
        all.insert(all.end(), r.begin(), r.end());
        return all;
    }
    throw ConfigError("verify: unknown suite \"" + suite +
                      "\" (expected grad|oracle|routing|all)");
}

}  // namespace memroute::verify
