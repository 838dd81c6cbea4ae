#include "memroute/train.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "memroute/ops.hpp"
#include "memroute/tape.hpp"

namespace memroute {

template <typename T>
Optimizer<T>::Optimizer(OptimConfig cfg, std::vector<Tensor<T>> params)
    : cfg_(cfg), params_(std::move(params)) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].size(), T(0));
        if (cfg_.kind == OptimizerKind::adam) v_[i].assign(params_[i].size(), T(0));
    }
}

template <typename T>
void Optimizer<T>::step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor<T>& p = params_[i];
        auto data = p.mut_data();
        const bool has_grad = p.has_grad();
        if (cfg_.kind == OptimizerKind::adam) {
            const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
            const T bc1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, t_));
            const T bc2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, t_));
            const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
            for (std::size_t j = 0; j < data.size(); ++j) {
                const T g = has_grad ? p.grad()[j] : T(0);
                m_[i][j] = b1 * m_[i][j] + (T(1) - b1) * g;
                v_[i][j] = b2 * v_[i][j] + (T(1) - b2) * g * g;
                const T mhat = m_[i][j] / bc1;
                const T vhat = v_[i][j] / bc2;
                data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        } else {
            const T mu = static_cast<T>(cfg_.momentum), lr = static_cast<T>(cfg_.lr);
            for (std::size_t j = 0; j < data.size(); ++j) {
                const T g = has_grad ? p.grad()[j] : T(0);
                m_[i][j] = mu * m_[i][j] + g;
                data[j] -= lr * m_[i][j];
            }
        }
    }
}

template <typename T>
void Optimizer<T>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template <typename T>
std::vector<Tensor<T>> trainable_params(ModelWeights<T>& w) {
    std::vector<Tensor<T>> out;
    visit_params<T>(w, [&](const std::string&, Tensor<T>& t) {
        if (t.requires_grad()) out.push_back(t);
    });
    return out;
}

namespace {

template <typename T>
Tensor<T> batch_images(const std::vector<LoadedSample<T>>& data,
                       const std::vector<std::size_t>& idx) {
    std::vector<Tensor<T>> imgs;
    imgs.reserve(idx.size());
    for (std::size_t i : idx) imgs.push_back(data[i].image);
    return ops::stack0(imgs);
}

template <typename T>
Tensor<T> batch_alphas(const std::vector<LoadedSample<T>>& data,
                       const std::vector<std::size_t>& idx) {
    std::vector<Tensor<T>> alphas;
    alphas.reserve(idx.size());
    for (std::size_t i : idx) alphas.push_back(data[i].alpha);
    return ops::stack0(alphas);
}

std::vector<std::size_t> batch_indices(std::size_t step, std::size_t batch,
                                       std::size_t n_samples) {
    std::vector<std::size_t> idx(batch);
    for (std::size_t i = 0; i < batch; ++i) idx[i] = (step * batch + i) % n_samples;
    return idx;
}

// Teacher features per sample, computed on demand; the teacher is frozen so
// entries never invalidate.
template <typename T>
class TeacherCache {
public:
    TeacherCache(const ModelWeights<T>& w, const RunConfig& cfg) : w_(w), cfg_(cfg) {}

    Tensor<T> features(const std::vector<LoadedSample<T>>& data,
                       const std::vector<std::size_t>& idx) {
        std::vector<Tensor<T>> feats;
        feats.reserve(idx.size());
        for (std::size_t i : idx) {
            auto it = cache_.find(i);
            if (it == cache_.end()) {
                auto img = ops::reshape(data[i].image, Shape{std::size_t(1),
                                                             data[i].image.dim(0),
                                                             data[i].image.dim(1),
                                                             data[i].image.dim(2)});
                TokenBatch<T> tb = teacher_forward(img, w_, cfg_.encoder);
                it = cache_.emplace(i, ops::reshape(tb.x, Shape{tb.x.dim(1), tb.x.dim(2)}))
                         .first;
            }
            feats.push_back(it->second);
        }
        return ops::stack0(feats);
    }

private:
    const ModelWeights<T>& w_;
    const RunConfig& cfg_;
    std::map<std::size_t, Tensor<T>> cache_;
};

}  // namespace

template <typename T>
void train_teacher(ModelWeights<T>& teacher, const RunConfig& cfg,
                   const std::vector<LoadedSample<T>>& data, std::size_t steps, Rng rng) {
    if (data.empty()) throw ConfigError("train_teacher: empty dataset");
    set_trainable(teacher, true);
    Optimizer<T> opt(cfg.optim, trainable_params(teacher));
    (void)rng;  // batch order is deterministic round-robin
    for (std::size_t s = 0; s < steps; ++s) {
        const auto idx = batch_indices(s, cfg.batch_size, data.size());
        auto img = batch_images(data, idx);
        auto truth = batch_alphas(data, idx);
        Tape<T> tape;
        TokenBatch<T> tb = teacher_forward(img, teacher, cfg.encoder);
        auto alpha = decode_alpha(tb, teacher.decoder);
        auto loss = matting_loss(alpha, truth);
        tape.backward(loss);
        opt.step();
        opt.zero_grad();
    }
    set_trainable(teacher, false);
}

template <typename T>
std::vector<StepLog> train_student(ModelWeights<T>& student, const ModelWeights<T>& teacher,
                                   const RunConfig& cfg,
                                   const std::vector<LoadedSample<T>>& data,
                                   std::size_t steps, Rng rng, std::ostream* csv,
                                   const StepCallback<T>& after_step) {
    if (data.empty()) throw ConfigError("train_student: empty dataset");
    set_trainable(student, true);
    Optimizer<T> opt(cfg.optim, trainable_params(student));
    TeacherCache<T> tcache(teacher, cfg);
    std::vector<StepLog> logs;
    if (csv) (*csv) << "step,matting,distill,compress,total,gamma_hard\n";
    for (std::size_t s = 0; s < steps; ++s) {
        const auto idx = batch_indices(s, cfg.batch_size, data.size());
        auto img = batch_images(data, idx);
        auto truth = batch_alphas(data, idx);
        auto tfeat = tcache.features(data, idx);
        Rng step_rng = rng.fork(s);

        Tape<T> tape;
        auto out = encoder_forward(img, student, cfg.encoder, RunMode::train, &step_rng);
        auto alpha = decode_alpha(out.features, student.decoder);
        auto l_mat = matting_loss(alpha, truth);
        auto l_dis = distill_loss(tfeat, out.features.x, cfg.distill_per_channel_mean);
        Tensor<T> total =
            ops::add(ops::affine(l_mat, static_cast<T>(cfg.loss_weights.matting), T(0)),
                     ops::affine(l_dis, static_cast<T>(cfg.loss_weights.distill), T(0)));
        StepLog log;
        log.step = s;
        log.matting = static_cast<double>(l_mat.item());
        log.distill = static_cast<double>(l_dis.item());
        if (out.record.gamma_soft.defined()) {
            auto l_cmp = compress_loss(out.record.gamma_soft, cfg.encoder.routing.rho);
            log.compress = static_cast<double>(l_cmp.item());
            total = ops::add(
                total, ops::affine(l_cmp, static_cast<T>(cfg.loss_weights.compress), T(0)));
        }
        log.total = static_cast<double>(total.item());
        log.gamma_hard = out.record.gamma_hard();
        tape.backward(total);
        opt.step();
        opt.zero_grad();
        if (csv) {
            char buf[192];
            std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", s, log.matting,
                          log.distill, log.compress, log.total, log.gamma_hard);
            (*csv) << buf;
        }
        logs.push_back(log);
        if (after_step) after_step(s + 1);
    }
    return logs;
}

template <typename T>
EvalResult<T> evaluate(const ModelWeights<T>& student, const ModelWeights<T>& teacher,
                       const RunConfig& cfg, const std::vector<LoadedSample<T>>& samples) {
    EvalResult<T> r;
    if (samples.empty()) return r;
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto img = batch_images(samples, idx);
    auto truth = batch_alphas(samples, idx);
    TeacherCache<T> tcache(teacher, cfg);
    auto tfeat = tcache.features(samples, idx);
    auto out = encoder_forward(img, student, cfg.encoder, RunMode::infer, nullptr);
    auto alpha = decode_alpha(out.features, student.decoder);
    r.matting = static_cast<double>(matting_loss(alpha, truth).item());
    r.distill = static_cast<double>(
        distill_loss(tfeat, out.features.x, cfg.distill_per_channel_mean).item());
    r.gamma_hard = out.record.gamma_hard();
    return r;
}

#define MEMROUTE_INSTANTIATE_TRAIN(T)                                                    \
    template class Optimizer<T>;                                                         \
    template std::vector<Tensor<T>> trainable_params<T>(ModelWeights<T>&);               \
    template void train_teacher<T>(ModelWeights<T>&, const RunConfig&,                   \
                                   const std::vector<LoadedSample<T>>&, std::size_t, Rng); \
    template std::vector<StepLog> train_student<T>(                                      \
        ModelWeights<T>&, const ModelWeights<T>&, const RunConfig&,                      \
        const std::vector<LoadedSample<T>>&, std::size_t, Rng, std::ostream*,            \
        const StepCallback<T>&);                                                         \
    template struct EvalResult<T>;                                                       \
    template EvalResult<T> evaluate<T>(const ModelWeights<T>&, const ModelWeights<T>&,   \
                                       const RunConfig&,                                 \
                                       const std::vector<LoadedSample<T>>&);

MEMROUTE_INSTANTIATE_TRAIN(float)
MEMROUTE_INSTANTIATE_TRAIN(double)

#undef MEMROUTE_INSTANTIATE_TRAIN

}  // namespace memroute
