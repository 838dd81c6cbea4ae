#include "memroute/encoder.hpp"

#include <cmath>

#include "memroute/ops.hpp"

namespace memroute {

void EncoderConfig::validate() const {
    if (patch == 0 || img_h % patch != 0 || img_w % patch != 0)
        throw ConfigError("encoder: image " + std::to_string(img_h) + "x" +
                          std::to_string(img_w) + " not divisible by patch size " +
                          std::to_string(patch));
    if (dim == 0 || dim % 2 != 0)
        throw ConfigError("encoder: embed dim must be even, got " + std::to_string(dim));
    if (heads == 0 || dim % heads != 0)
        throw ConfigError("encoder: dim " + std::to_string(dim) +
                          " not divisible by heads " + std::to_string(heads));
    if (mlp_ratio == 0) throw ConfigError("encoder: mlp ratio must be positive");
    if (in_channels == 0) throw ConfigError("encoder: in_channels must be positive");
    routing.validate();
    if (routed_blocks)
        for (std::size_t b : *routed_blocks)
            if (b >= depth)
                throw ConfigError("encoder: routed block index " + std::to_string(b) +
                                  " out of range for depth " + std::to_string(depth));
}

std::size_t EncoderConfig::n_routed_blocks() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < depth; ++i)
        if (block_routed(i)) ++n;
    return n;
}

namespace {

// Largest divisor of p not above sqrt(p); the two decoder stages then
// upsample by f1*f2 == p.
std::pair<std::size_t, std::size_t> decoder_factors(std::size_t p) {
    std::size_t f1 = 1;
    for (std::size_t d = 1; d * d <= p; ++d)
        if (p % d == 0) f1 = d;
    return {f1, p / f1};
}

template <typename T>
Tensor<T> normal_tensor(Shape shape, Rng& rng, double stddev) {
    Tensor<T> t = Tensor<T>::zeros(std::move(shape));
    for (T& v : t.mut_data()) v = static_cast<T>(rng.normal(0.0, stddev));
    return t;
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, Rng& rng, double lo, double hi) {
    Tensor<T> t = Tensor<T>::zeros(std::move(shape));
    for (T& v : t.mut_data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

constexpr double kInitStd = 0.02;

template <typename T>
MlpParams<T> init_mlp(std::size_t d, std::size_t ratio, Rng& rng) {
    MlpParams<T> m;
    m.w1 = normal_tensor<T>({d, d * ratio}, rng, kInitStd);
    m.b1 = Tensor<T>::zeros({d * ratio});
    m.w2 = normal_tensor<T>({d * ratio, d}, rng, kInitStd);
    m.b2 = Tensor<T>::zeros({d});
    return m;
}

template <typename T>
AttentionParams<T> init_attn(std::size_t d, std::size_t heads, Rng& rng) {
    AttentionParams<T> a;
    a.wq = normal_tensor<T>({d, d}, rng, kInitStd);
    a.wk = normal_tensor<T>({d, d}, rng, kInitStd);
    a.wv = normal_tensor<T>({d, d}, rng, kInitStd);
    a.wo = normal_tensor<T>({d, d}, rng, kInitStd);
    a.heads = heads;
    return a;
}

template <typename T>
RouterParams<T> init_router(std::size_t d, Rng& rng) {
    RouterParams<T> r;
    r.ln_gain = Tensor<T>::full({d}, T(1));
    r.ln_bias = Tensor<T>::zeros({d});
    r.w1 = normal_tensor<T>({d, d}, rng, kInitStd);
    r.b1 = Tensor<T>::zeros({d});
    r.w2 = uniform_tensor<T>({d, 2}, rng, -1e-3, 1e-3);
    r.b2 = Tensor<T>::zeros({2});
    return r;
}

template <typename T>
LtrmParams<T> init_ltrm(std::size_t d, Rng& rng) {
    LtrmParams<T> l;
    l.w1 = normal_tensor<T>({d, d}, rng, kInitStd);
    l.b1 = Tensor<T>::zeros({d});
    // starts near a pass-through: identity tap plus small noise
    l.dw_kernel = normal_tensor<T>({d, 3, 3}, rng, kInitStd);
    for (std::size_t c = 0; c < d; ++c) l.dw_kernel.mut_data()[c * 9 + 4] += T(1);
    l.w2 = normal_tensor<T>({d, d}, rng, kInitStd);
    l.b2 = Tensor<T>::zeros({d});
    l.eca_kernel = Tensor<T>::zeros({eca_kernel_size(d)});
    return l;
}

template <typename T>
Tensor<T> deep_copy(const Tensor<T>& t) {
    return t.defined() ? t.clone() : Tensor<T>();
}

}  // namespace

template <typename T>
ModelWeights<T> init_teacher(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    ModelWeights<T> w;
    const std::size_t d = cfg.dim;
    w.patch_w = normal_tensor<T>({cfg.patch * cfg.patch * cfg.in_channels, d}, rng, kInitStd);
    w.patch_b = Tensor<T>::zeros({d});
    w.pos = normal_tensor<T>({cfg.n_tokens(), d}, rng, kInitStd);
    for (std::size_t i = 0; i < cfg.depth; ++i) {
        BlockParams<T> b;
        b.ln1_gain = Tensor<T>::full({d}, T(1));
        b.ln1_bias = Tensor<T>::zeros({d});
        b.attn = init_attn<T>(d, cfg.heads, rng);
        b.ln2_gain = Tensor<T>::full({d}, T(1));
        b.ln2_bias = Tensor<T>::zeros({d});
        b.mlp = init_mlp<T>(d, cfg.mlp_ratio, rng);
        w.blocks.push_back(std::move(b));
    }
    auto [f1, f2] = decoder_factors(cfg.patch);
    w.decoder.f1 = f1;
    w.decoder.f2 = f2;
    w.decoder.k1 = normal_tensor<T>({d, d / 2, f1, f1}, rng, kInitStd);
    w.decoder.b1 = Tensor<T>::zeros({d / 2});
    w.decoder.k2 = normal_tensor<T>({d / 2, 1, f2, f2}, rng, kInitStd);
    w.decoder.b2 = Tensor<T>::zeros({1});
    return w;
}

template <typename T>
ModelWeights<T> init_student(const EncoderConfig& cfg, const ModelWeights<T>& teacher,
                             Rng& rng) {
    cfg.validate();
    ModelWeights<T> w;
    w.patch_w = deep_copy(teacher.patch_w);
    w.patch_b = deep_copy(teacher.patch_b);
    w.pos = deep_copy(teacher.pos);
    for (std::size_t i = 0; i < cfg.depth; ++i) {
        const BlockParams<T>& tb = teacher.blocks[i];
        BlockParams<T> b;
        b.ln1_gain = deep_copy(tb.ln1_gain);
        b.ln1_bias = deep_copy(tb.ln1_bias);
        b.ln2_gain = deep_copy(tb.ln2_gain);
        b.ln2_bias = deep_copy(tb.ln2_bias);
        b.attn.wq = deep_copy(tb.attn.wq);
        b.attn.wk = deep_copy(tb.attn.wk);
        b.attn.wv = deep_copy(tb.attn.wv);
        b.attn.wo = deep_copy(tb.attn.wo);
        b.attn.heads = tb.attn.heads;
        b.mlp.w1 = deep_copy(tb.mlp.w1);
        b.mlp.b1 = deep_copy(tb.mlp.b1);
        b.mlp.w2 = deep_copy(tb.mlp.w2);
        b.mlp.b2 = deep_copy(tb.mlp.b2);
        if (cfg.block_routed(i)) {
            b.router = init_router<T>(cfg.dim, rng);
            b.ltrm = init_ltrm<T>(cfg.dim, rng);
        }
        w.blocks.push_back(std::move(b));
    }
    w.decoder.f1 = teacher.decoder.f1;
    w.decoder.f2 = teacher.decoder.f2;
    w.decoder.k1 = deep_copy(teacher.decoder.k1);
    w.decoder.b1 = deep_copy(teacher.decoder.b1);
    w.decoder.k2 = deep_copy(teacher.decoder.k2);
    w.decoder.b2 = deep_copy(teacher.decoder.b2);
    return w;
}

template <typename T>
void visit_params(ModelWeights<T>& w,
                  const std::function<void(const std::string&, Tensor<T>&)>& fn) {
    auto visit = [&](const std::string& name, Tensor<T>& t) {
        if (t.defined()) fn(name, t);
    };
    visit("patch_embed.weight", w.patch_w);
    visit("patch_embed.bias", w.patch_b);
    visit("pos_embed", w.pos);
    for (std::size_t i = 0; i < w.blocks.size(); ++i) {
        const std::string p = "blocks." + std::to_string(i) + ".";
        BlockParams<T>& b = w.blocks[i];
        visit(p + "ln1.gain", b.ln1_gain);
        visit(p + "ln1.bias", b.ln1_bias);
        visit(p + "attn.wq", b.attn.wq);
        visit(p + "attn.wk", b.attn.wk);
        visit(p + "attn.wv", b.attn.wv);
        visit(p + "attn.wo", b.attn.wo);
        visit(p + "router.ln_gain", b.router.ln_gain);
        visit(p + "router.ln_bias", b.router.ln_bias);
        visit(p + "router.w1", b.router.w1);
        visit(p + "router.b1", b.router.b1);
        visit(p + "router.w2", b.router.w2);
        visit(p + "router.b2", b.router.b2);
        visit(p + "ltrm.w1", b.ltrm.w1);
        visit(p + "ltrm.b1", b.ltrm.b1);
        visit(p + "ltrm.dw_kernel", b.ltrm.dw_kernel);
        visit(p + "ltrm.w2", b.ltrm.w2);
        visit(p + "ltrm.b2", b.ltrm.b2);
        visit(p + "ltrm.eca_kernel", b.ltrm.eca_kernel);
        visit(p + "ln2.gain", b.ln2_gain);
        visit(p + "ln2.bias", b.ln2_bias);
        visit(p + "mlp.w1", b.mlp.w1);
        visit(p + "mlp.b1", b.mlp.b1);
        visit(p + "mlp.w2", b.mlp.w2);
        visit(p + "mlp.b2", b.mlp.b2);
    }
    visit("decoder.k1", w.decoder.k1);
    visit("decoder.b1", w.decoder.b1);
    visit("decoder.k2", w.decoder.k2);
    visit("decoder.b2", w.decoder.b2);
}

template <typename T>
void set_trainable(ModelWeights<T>& w, bool trainable) {
    visit_params<T>(w, [trainable](const std::string&, Tensor<T>& t) {
        t.set_requires_grad(trainable);
    });
}

template <typename T>
TokenBatch<T> patch_embed(const Tensor<T>& img, const ModelWeights<T>& w,
                          const EncoderConfig& cfg) {
    if (img.ndim() != 4 || img.dim(1) != cfg.in_channels || img.dim(2) != cfg.img_h ||
        img.dim(3) != cfg.img_w)
        throw ShapeError("patch_embed: expected image [B," +
                         std::to_string(cfg.in_channels) + "," + std::to_string(cfg.img_h) +
                         "," + std::to_string(cfg.img_w) + "], got " +
                         shape_str(img.shape()));
    const std::size_t B = img.dim(0), N = cfg.n_tokens(), D = cfg.dim;
    auto patches = ops::extract_patches(img, cfg.patch);  // [B,N,p*p*C]
    auto tokens = ops::reshape(
        ops::add(ops::matmul(ops::reshape(patches, {B * N, patches.dim(2)}), w.patch_w),
                 w.patch_b),
        {B, N, D});
    TokenBatch<T> tb;
    tb.x = ops::add(tokens, w.pos);  // pos [N,D] broadcasts over the batch
    tb.hp = cfg.grid_h();
    tb.wp = cfg.grid_w();
    return tb;
}

namespace {

template <typename T>
Tensor<T> mlp_forward(const Tensor<T>& x, const MlpParams<T>& m) {
    const std::size_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
    auto flat = ops::reshape(x, {B * N, D});
    auto h = ops::gelu(ops::add(ops::matmul(flat, m.w1), m.b1));
    return ops::reshape(ops::add(ops::matmul(h, m.w2), m.b2), {B, N, D});
}

}  // namespace

template <typename T>
Tensor<T> plain_block_forward(const Tensor<T>& x, const BlockParams<T>& p) {
    auto xn = ops::layer_norm(x, p.ln1_gain, p.ln1_bias);
    auto x1 = ops::add(x, attend(xn, p.attn));
    auto x2n = ops::layer_norm(x1, p.ln2_gain, p.ln2_bias);
    return ops::add(x1, mlp_forward(x2n, p.mlp));
}

template <typename T>
std::pair<Tensor<T>, BlockRouting<T>> block_forward(const TokenBatch<T>& tb,
                                                    const BlockParams<T>& p, RunMode mode,
                                                    const RoutingConfig& routing, Rng* rng,
                                                    const std::vector<std::uint8_t>* forced,
                                                    std::size_t block_index) {
    if (!p.has_routing())
        throw ConfigError("block_forward: block " + std::to_string(block_index) +
                          " carries no router");
    const Tensor<T>& x = tb.x;
    const std::size_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
    BlockRouting<T> rec;
    rec.block = block_index;
    rec.batch = B;
    rec.tokens = N;

    auto xn = ops::layer_norm(x, p.ln1_gain, p.ln1_bias);
    rec.log_p = route_probs(xn, p.router);

    Tensor<T> st1;  // [B,N,1] attention gate; constant unless training
    if (forced) {
        if (forced->size() != B * N)
            throw ShapeError("block_forward: forced mask length mismatch");
        rec.delta = *forced;
        Tensor<T> hard = Tensor<T>::zeros({B, N, 1});
        for (std::size_t i = 0; i < B * N; ++i)
            hard.mut_data()[i] = rec.delta[i] ? T(1) : T(0);
        st1 = hard;
    } else if (mode == RunMode::train) {
        if (!rng) throw ConfigError("block_forward: training mode needs an rng");
        auto dec = decide_train(rec.log_p, routing.tau, *rng);
        rec.delta = std::move(dec.delta);
        rec.soft = dec.soft;
        st1 = ops::split(dec.st, 2, {1, 1})[1];  // [B,N,1]
    } else {
        rec.delta = decide_infer(rec.log_p);
        for (std::size_t b = 0; b < B; ++b) {
            std::size_t c = 0;
            for (std::size_t i = 0; i < N; ++i) c += rec.delta[b * N + i];
            rec.precap_count.push_back(c);
        }
        if (routing.max_tokens)
            rec.delta = apply_topk_cap(rec.log_p, rec.delta, *routing.max_tokens);
        Tensor<T> hard = Tensor<T>::zeros({B, N, 1});
        for (std::size_t i = 0; i < B * N; ++i)
            hard.mut_data()[i] = rec.delta[i] ? T(1) : T(0);
        st1 = hard;
    }
    if (rec.precap_count.empty()) {
        for (std::size_t b = 0; b < B; ++b) {
            std::size_t c = 0;
            for (std::size_t i = 0; i < N; ++i) c += rec.delta[b * N + i];
            rec.precap_count.push_back(c);
        }
    }
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < N; ++i) c += rec.delta[b * N + i];
        rec.postcap_count.push_back(c);
    }

    // branch index lists
    std::vector<std::vector<std::size_t>> idx1(B), idx0(B);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < N; ++i)
            (rec.delta[b * N + i] ? idx1[b] : idx0[b]).push_back(i);
    bool any1 = false, any0 = false;
    for (std::size_t b = 0; b < B; ++b) {
        any1 = any1 || !idx1[b].empty();
        any0 = any0 || !idx0[b].empty();
    }

    Tensor<T> attn_full;
    if (any1) {
        std::vector<Tensor<T>> per_sample;
        for (std::size_t b = 0; b < B; ++b) {
            if (idx1[b].empty()) {
                per_sample.push_back(Tensor<T>::zeros({N, D}));
                continue;
            }
            auto rows = attend_rows(ops::select0(xn, b), idx1[b], p.attn);
            per_sample.push_back(ops::scatter_rows(rows, idx1[b], N));
        }
        attn_full = ops::stack0(per_sample);  // [B,N,D]
    }

    Tensor<T> ltrm_masked;
    if (any0) {
        // The refinement conv runs over the full token grid so that
        // attention-branch tokens still provide spatial context; only
        // refinement-branch rows are written back.
        auto lt = ltrm_forward(xn, tb.hp, tb.wp, p.ltrm);
        Tensor<T> mask0 = Tensor<T>::zeros({B, N, 1});
        for (std::size_t i = 0; i < B * N; ++i)
            mask0.mut_data()[i] = rec.delta[i] ? T(0) : T(1);
        ltrm_masked = ops::mul(lt, mask0);
    }

    Tensor<T> merged;
    if (any1 && any0) {
        merged = ops::add(ops::mul(attn_full, st1),
                          ops::mul(ltrm_masked, ops::affine(st1, T(-1), T(1))));
    } else if (any1) {
        merged = ops::mul(attn_full, st1);
    } else {
        merged = ops::mul(ltrm_masked, ops::affine(st1, T(-1), T(1)));
    }

    auto x1 = ops::add(x, merged);
    auto x2n = ops::layer_norm(x1, p.ln2_gain, p.ln2_bias);
    auto out = ops::add(x1, mlp_forward(x2n, p.mlp));
    return {out, std::move(rec)};
}

template <typename T>
double RoutingRecord<T>::gamma_hard() const {
    std::size_t ones = 0, total = 0;
    for (const auto& b : blocks) {
        for (std::uint8_t d : b.delta) ones += d;
        total += b.delta.size();
    }
    return total == 0 ? 0.0 : static_cast<double>(ones) / static_cast<double>(total);
}

template <typename T>
Tensor<T> RoutingRecord<T>::delta_tensor() const {
    if (blocks.empty()) return Tensor<T>::zeros({0, 0, 0});
    const std::size_t B = blocks[0].batch, M = blocks.size(), N = blocks[0].tokens;
    Tensor<T> t = Tensor<T>::zeros({B, M, N});
    auto v = t.mut_data();
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < N; ++i)
                v[(b * M + m) * N + i] = blocks[m].delta[b * N + i] ? T(1) : T(0);
    return t;
}

template <typename T>
EncoderOutput<T> encoder_forward(const Tensor<T>& img, const ModelWeights<T>& w,
                                 const EncoderConfig& cfg, RunMode mode, Rng* rng,
                                 const ForcedRouting* forced) {
    cfg.validate();
    EncoderOutput<T> out;
    out.features = patch_embed(img, w, cfg);
    for (std::size_t i = 0; i < cfg.depth; ++i) {
        if (cfg.block_routed(i)) {
            const std::vector<std::uint8_t>* mask = nullptr;
            if (forced && i < forced->size() && !(*forced)[i].empty()) mask = &(*forced)[i];
            auto [x, rec] =
                block_forward(out.features, w.blocks[i], mode, cfg.routing, rng, mask, i);
            out.features.x = x;
            out.record.blocks.push_back(std::move(rec));
        } else {
            out.features.x = plain_block_forward(out.features.x, w.blocks[i]);
        }
    }
    if (mode == RunMode::train && !out.record.blocks.empty()) {
        // differentiable gamma: mean of the soft attention probabilities over
        // every (sample, routed block, token)
        Tensor<T> acc;
        for (const auto& blk : out.record.blocks) {
            if (!blk.soft.defined()) continue;
            auto s1 = ops::split(blk.soft, 2, {1, 1})[1];
            auto m = ops::mean_all(s1);
            acc = acc.defined() ? ops::add(acc, m) : m;
        }
        if (acc.defined())
            out.record.gamma_soft =
                ops::affine(acc, T(1) / static_cast<T>(out.record.blocks.size()), T(0));
    }
    return out;
}

template <typename T>
TokenBatch<T> teacher_forward(const Tensor<T>& img, const ModelWeights<T>& w,
                              const EncoderConfig& cfg) {
    cfg.validate();
    TokenBatch<T> tb = patch_embed(img, w, cfg);
    for (const auto& block : w.blocks) tb.x = plain_block_forward(tb.x, block);
    return tb;
}

template <typename T>
Tensor<T> decode_alpha(const TokenBatch<T>& features, const DecoderParams<T>& dec) {
    const Tensor<T>& f = features.x;
    const std::size_t B = f.dim(0), D = f.dim(2), hp = features.hp, wp = features.wp;
    if (hp * wp != f.dim(1))
        throw ShapeError("decode_alpha: token grid does not match feature count");
    auto grid = ops::permute(ops::reshape(f, {B, hp, wp, D}), {0, 3, 1, 2});
    auto u1 = ops::gelu(ops::upsample_conv(grid, dec.k1, dec.b1, dec.f1));
    auto u2 = ops::upsample_conv(u1, dec.k2, dec.b2, dec.f2);
    auto alpha = ops::sigmoid(u2);  // [B,1,H,W]
    return ops::reshape(alpha, {B, hp * dec.f1 * dec.f2, wp * dec.f1 * dec.f2});
}

#define MEMROUTE_INSTANTIATE_ENCODER(T)                                                   \
    template struct TokenBatch<T>;                                                        \
    template struct BlockParams<T>;                                                       \
    template struct ModelWeights<T>;                                                      \
    template struct RoutingRecord<T>;                                                     \
    template ModelWeights<T> init_teacher<T>(const EncoderConfig&, Rng&);                 \
    template ModelWeights<T> init_student<T>(const EncoderConfig&, const ModelWeights<T>&, \
                                             Rng&);                                       \
    template void set_trainable<T>(ModelWeights<T>&, bool);                               \
    template void visit_params<T>(                                                        \
        ModelWeights<T>&, const std::function<void(const std::string&, Tensor<T>&)>&);    \
    template TokenBatch<T> patch_embed<T>(const Tensor<T>&, const ModelWeights<T>&,       \
                                          const EncoderConfig&);                          \
    template Tensor<T> plain_block_forward<T>(const Tensor<T>&, const BlockParams<T>&);   \
    template std::pair<Tensor<T>, BlockRouting<T>> block_forward<T>(                      \
        const TokenBatch<T>&, const BlockParams<T>&, RunMode, const RoutingConfig&, Rng*, \
        const std::vector<std::uint8_t>*, std::size_t);                                   \
    template EncoderOutput<T> encoder_forward<T>(const Tensor<T>&, const ModelWeights<T>&, \
                                                 const EncoderConfig&, RunMode, Rng*,     \
                                                 const ForcedRouting*);                   \
    template TokenBatch<T> teacher_forward<T>(const Tensor<T>&, const ModelWeights<T>&,   \
                                              const EncoderConfig&);                      \
    template Tensor<T> decode_alpha<T>(const TokenBatch<T>&, const DecoderParams<T>&);

MEMROUTE_INSTANTIATE_ENCODER(float)
MEMROUTE_INSTANTIATE_ENCODER(double)

#undef MEMROUTE_INSTANTIATE_ENCODER

}  // namespace memroute
