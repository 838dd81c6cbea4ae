#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "memroute/attention.hpp"
#include "memroute/batr.hpp"
#include "memroute/ltrm.hpp"
#include "memroute/router.hpp"

namespace memroute {

enum class RunMode { train, infer };

struct EncoderConfig {
    std::size_t img_h = 64, img_w = 64;
    std::size_t patch = 16;
    std::size_t in_channels = 3;
    std::size_t dim = 32;
    std::size_t heads = 2;
    std::size_t depth = 2;
    std::size_t mlp_ratio = 4;
    RoutingConfig routing;
    // Blocks that carry a router/refinement pair; nullopt = every block.
    std::optional<std::set<std::size_t>> routed_blocks;

    void validate() const;
    std::size_t grid_h() const { return img_h / patch; }
    std::size_t grid_w() const { return img_w / patch; }
    std::size_t n_tokens() const { return grid_h() * grid_w(); }
    bool block_routed(std::size_t i) const {
        return !routed_blocks || routed_blocks->count(i) > 0;
    }
    std::size_t n_routed_blocks() const;
};

template <typename T>
struct TokenBatch {
    Tensor<T> x;  // [B,N,D]
    std::size_t hp = 0, wp = 0;
};

template <typename T>
struct MlpParams {
    Tensor<T> w1, b1, w2, b2;  // D -> ratio*D -> D
};

template <typename T>
struct BlockParams {
    Tensor<T> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    AttentionParams<T> attn;
    MlpParams<T> mlp;
    RouterParams<T> router;  // undefined on teacher blocks
    LtrmParams<T> ltrm;      // undefined on teacher blocks
    bool has_routing() const { return router.w1.defined(); }
};

// Two transposed-conv stages (D -> D/2 -> 1) with GELU between and sigmoid on
// the logits; upsamples the token grid back to full resolution. A stand-in
// prediction head, not a full matting decoder.
template <typename T>
struct DecoderParams {
    Tensor<T> k1, b1;  // [D, D/2, f1, f1], [D/2]
    Tensor<T> k2, b2;  // [D/2, 1, f2, f2], [1]
    std::size_t f1 = 1, f2 = 1;
};

template <typename T>
struct ModelWeights {
    Tensor<T> patch_w;  // [p*p*C, D]
    Tensor<T> patch_b;  // [D]
    Tensor<T> pos;      // [N, D]
    std::vector<BlockParams<T>> blocks;
    DecoderParams<T> decoder;
};

// Per routed block: the decision mask, the relaxed sample (training), and
// pre/post-cap per-sample counts (inference).
template <typename T>
struct BlockRouting {
    std::size_t block = 0;
    std::size_t batch = 0, tokens = 0;
    std::vector<std::uint8_t> delta;  // B*N, final decisions
    std::vector<std::size_t> precap_count, postcap_count;
    Tensor<T> log_p;  // [B,N,2]
    Tensor<T> soft;   // [B,N,2], training only
};

template <typename T>
struct RoutingRecord {
    std::vector<BlockRouting<T>> blocks;
    Tensor<T> gamma_soft;  // differentiable mean of soft attention probs (training)
    double gamma_hard() const;
    // Decisions as a [B, M, N] tensor over the routed blocks.
    Tensor<T> delta_tensor() const;
};

template <typename T>
struct EncoderOutput {
    TokenBatch<T> features;
    RoutingRecord<T> record;
};

// ---- initialization ----
// Weight layout and draw order are fixed, so a seed fully determines a model.
template <typename T>
ModelWeights<T> init_teacher(const EncoderConfig& cfg, Rng& rng);
// Attention/MLP/norm/embedding/decoder weights are deep copies of the
// teacher's; routers and refinement blocks are freshly initialized. Router
// logits start near zero so routing begins at roughly 50/50.
template <typename T>
ModelWeights<T> init_student(const EncoderConfig& cfg, const ModelWeights<T>& teacher,
                             Rng& rng);

template <typename T>
void set_trainable(ModelWeights<T>& w, bool trainable);

// Fixed-order enumeration of all defined parameters.
template <typename T>
void visit_params(ModelWeights<T>& w,
                  const std::function<void(const std::string&, Tensor<T>&)>& fn);

// ---- forward passes ----
template <typename T>
TokenBatch<T> patch_embed(const Tensor<T>& img, const ModelWeights<T>& w,
                          const EncoderConfig& cfg);

// Standard pre-norm ViT block: full attention, no routing.
template <typename T>
Tensor<T> plain_block_forward(const Tensor<T>& x, const BlockParams<T>& p);

// Routed block: pre-norm, router on the normed tokens, branch decision,
// subset attention / refinement, straight-through-gated merge, residual, MLP.
// `forced` (B*N mask) bypasses the decision entirely when provided.
template <typename T>
std::pair<Tensor<T>, BlockRouting<T>> block_forward(
    const TokenBatch<T>& tb, const BlockParams<T>& p, RunMode mode,
    const RoutingConfig& routing, Rng* rng,
    const std::vector<std::uint8_t>* forced = nullptr, std::size_t block_index = 0);

// Optional per-block forced masks, indexed by block; empty inner vector means
// "not forced".
using ForcedRouting = std::vector<std::vector<std::uint8_t>>;

template <typename T>
EncoderOutput<T> encoder_forward(const Tensor<T>& img, const ModelWeights<T>& w,
                                 const EncoderConfig& cfg, RunMode mode, Rng* rng,
                                 const ForcedRouting* forced = nullptr);

// Routing-free encoder: every token through full attention in every block.
template <typename T>
TokenBatch<T> teacher_forward(const Tensor<T>& img, const ModelWeights<T>& w,
                              const EncoderConfig& cfg);

// features [B,N,D] -> alpha in (0,1), [B, H, W].
template <typename T>
Tensor<T> decode_alpha(const TokenBatch<T>& features, const DecoderParams<T>& dec);

}  // namespace memroute
