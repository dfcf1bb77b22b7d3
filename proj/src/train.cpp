#include "aggronet/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "aggronet/error.hpp"

namespace aggronet {

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.batch_size < 1)
        throw ConfigError("train.batch_size must be >= 1, got " + std::to_string(cfg.batch_size));
    if (cfg.epochs < 0)
        throw ConfigError("train.epochs must be >= 0, got " + std::to_string(cfg.epochs));
    if (!(cfg.base_lr > 0.0))
        throw ConfigError("train.base_lr must be positive, got " + std::to_string(cfg.base_lr));
    if (!(cfg.schedule.gamma > 0.0) || cfg.schedule.gamma > 1.0)
        throw ConfigError("train.schedule.gamma must be in (0,1], got " +
                          std::to_string(cfg.schedule.gamma));
    if (cfg.schedule.step_epochs < 1)
        throw ConfigError("train.schedule.step_epochs must be >= 1, got " +
                          std::to_string(cfg.schedule.step_epochs));
}

double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw ConfigError("lr_at: epoch must be >= 0");
    // exact repeated product rather than pow(): 1e-3 * 0.5^k stays bit-stable
    double factor = 1.0;
    for (int i = 0; i < epoch / cfg.schedule.step_epochs; ++i) factor *= cfg.schedule.gamma;
    return cfg.base_lr * factor;
}

template <typename T>
CeResult<T> sparse_ce_loss(const TensorT<T>& probs, const std::vector<int>& labels) {
    if (probs.rank() != 2)
        throw ShapeError("sparse_ce_loss: expected [N,K] probabilities, got " +
                         shape_str(probs.shape()));
    const int64_t n = probs.dim(0), k = probs.dim(1);
    if (static_cast<int64_t>(labels.size()) != n)
        throw ShapeError("sparse_ce_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");

    CeResult<T> r;
    r.grad_logits = TensorT<T>(probs.shape());
    double loss_sum = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= k)
            throw ShapeError("sparse_ce_loss: label " + std::to_string(y) + " out of range [0," +
                             std::to_string(k) + ")");
        loss_sum -= std::log(static_cast<double>(probs(i, y)) + 1e-12);
        for (int64_t c = 0; c < k; ++c) {
            const double onehot = c == y ? 1.0 : 0.0;
            r.grad_logits(i, c) =
                static_cast<T>((static_cast<double>(probs(i, c)) - onehot) / static_cast<double>(n));
        }
    }
    r.loss = loss_sum / static_cast<double>(n);
    return r;
}

template struct CeResult<float>;
template struct CeResult<double>;
template CeResult<float> sparse_ce_loss<float>(const TensorT<float>&, const std::vector<int>&);
template CeResult<double> sparse_ce_loss<double>(const TensorT<double>&, const std::vector<int>&);

AdamState make_adam_state(const Model& m) {
    AdamState st;
    for (const Layer* l : layer_walk(m)) {
        AdamState::Slot slot;
        if (!l->weights.empty() && l->trainable) {
            slot.m_w = TensorD(l->weights.shape());
            slot.v_w = TensorD(l->weights.shape());
            slot.m_b = TensorD(l->bias.shape());
            slot.v_b = TensorD(l->bias.shape());
        }
        st.slots.push_back(std::move(slot));
    }
    return st;
}

void adam_update_tensor(Tensor& param, const Tensor& grad, TensorD& m, TensorD& v, int64_t t,
                        double beta1, double beta2, double eps, double lr) {
    if (grad.shape() != param.shape() || m.shape() != param.shape() || v.shape() != param.shape())
        throw ShapeError("adam_update_tensor: shape mismatch, param " + shape_str(param.shape()) +
                         " vs grad " + shape_str(grad.shape()));
    if (t < 1) throw ConfigError("adam_update_tensor: step counter must be >= 1");
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    float* pp = param.data();
    const float* pg = grad.data();
    double* pm = m.data();
    double* pv = v.data();
    const int64_t size = param.size();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < size; ++i) {
        const double g = static_cast<double>(pg[i]);
        pm[i] = beta1 * pm[i] + (1.0 - beta1) * g;
        pv[i] = beta2 * pv[i] + (1.0 - beta2) * g * g;
        const double m_hat = pm[i] / c1;
        const double v_hat = pv[i] / c2;
        pp[i] = static_cast<float>(static_cast<double>(pp[i]) -
                                   lr * m_hat / (std::sqrt(v_hat) + eps));
    }
}

void adam_step(Model& m, const std::vector<LayerGrads>& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ConfigError("adam_step: lr must be positive");
    auto walk = layer_walk(m);
    if (grads.size() != walk.size() || state.slots.size() != walk.size())
        throw ShapeError("adam_step: gradient table has " + std::to_string(grads.size()) +
                         " entries, state " + std::to_string(state.slots.size()) + ", model " +
                         std::to_string(walk.size()));
    state.t += 1;
    for (size_t i = 0; i < walk.size(); ++i) {
        Layer* l = walk[i];
        if (l->weights.empty() || !l->trainable) continue;
        const LayerGrads& g = grads[i];
        if (g.weights.empty() || g.bias.empty())
            throw ShapeError("adam_step: missing gradient for " + l->name);
        AdamState::Slot& slot = state.slots[i];
        adam_update_tensor(l->weights, g.weights, slot.m_w, slot.v_w, state.t, state.beta1,
                           state.beta2, state.eps, lr);
        adam_update_tensor(l->bias, g.bias, slot.m_b, slot.v_b, state.t, state.beta1, state.beta2,
                           state.eps, lr);
    }
}

SplitAssignment split(int64_t n, SplitCounts counts, uint64_t seed) {
    if (n < 0 || counts.train < 0 || counts.val < 0 || counts.test < 0)
        throw ConfigError("split: sizes must be non-negative");
    if (counts.train + counts.val + counts.test != n)
        throw ConfigError("split: counts (" + std::to_string(counts.train) + "," +
                          std::to_string(counts.val) + "," + std::to_string(counts.test) +
                          ") must sum to " + std::to_string(n));

    std::vector<int64_t> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    SeededRng rng(seed);
    rng.shuffle(perm);

    SplitAssignment s;
    s.seed = seed;
    s.train.assign(perm.begin(), perm.begin() + counts.train);
    s.val.assign(perm.begin() + counts.train, perm.begin() + counts.train + counts.val);
    s.test.assign(perm.begin() + counts.train + counts.val, perm.end());
    s.labels.resize(static_cast<size_t>(n));
    for (int64_t i : s.train) s.labels[static_cast<size_t>(i)] = Partition::train;
    for (int64_t i : s.val) s.labels[static_cast<size_t>(i)] = Partition::val;
    for (int64_t i : s.test) s.labels[static_cast<size_t>(i)] = Partition::test;
    return s;
}

std::string history_csv_text(const History& h) {
    std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
    char line[192];
    for (int64_t e = 0; e < h.epochs(); ++e) {
        const auto i = static_cast<size_t>(e);
        std::snprintf(line, sizeof(line), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(e), h.train_loss[i], h.train_acc[i], h.val_loss[i],
                      h.val_acc[i], h.lr[i]);
        out += line;
    }
    return out;
}

std::string history_json_text(const History& h) {
    nlohmann::ordered_json j;
    j["train_loss"] = h.train_loss;
    j["train_acc"] = h.train_acc;
    j["val_loss"] = h.val_loss;
    j["val_acc"] = h.val_acc;
    j["lr"] = h.lr;
    return j.dump(2) + "\n";
}

namespace {

int argmax_row(const Tensor& probs, int64_t row) {
    int best = 0;
    for (int64_t k = 1; k < probs.dim(1); ++k)
        if (probs(row, k) > probs(row, best)) best = static_cast<int>(k);
    return best;
}

uint64_t stream_seed(uint64_t seed, uint64_t tag, uint64_t a, uint64_t b) {
    return mix64(mix64(mix64(seed ^ tag) ^ a) ^ b);
}

constexpr uint64_t kShuffleTag = 0x73687566666c65ull;
constexpr uint64_t kAugmentTag = 0x6175676d656e74ull;
constexpr uint64_t kDropoutTag = 0x64726f706f7574ull;

}  // namespace

EvalResult evaluate(const Model& m, const std::vector<Tensor>& images,
                    const std::vector<int>& labels, const std::vector<int64_t>& indices,
                    int batch_size) {
    if (indices.empty()) throw ConfigError("evaluate: empty partition");
    if (batch_size < 1) throw ConfigError("evaluate: batch_size must be >= 1");
    const int64_t n = static_cast<int64_t>(indices.size());
    const int64_t k = m.spec.class_count;

    EvalResult r;
    r.scores = Tensor({n, k});
    for (int64_t lo = 0; lo < n; lo += batch_size) {
        const int64_t hi = std::min(n, lo + batch_size);
        const std::vector<int64_t> slice(indices.begin() + lo, indices.begin() + hi);
        Tensor probs = forward_hybrid(m, stack(images, slice), Mode::infer);
        std::copy(probs.data(), probs.data() + probs.size(), r.scores.data() + lo * k);
    }

    double loss_sum = 0.0;
    int64_t correct = 0;
    for (int64_t i = 0; i < n; ++i) {
        const int y = labels.at(static_cast<size_t>(indices[static_cast<size_t>(i)]));
        if (y < 0 || y >= k)
            throw ShapeError("evaluate: label " + std::to_string(y) + " out of range [0," +
                             std::to_string(k) + ")");
        loss_sum -= std::log(static_cast<double>(r.scores(i, y)) + 1e-12);
        const int pred = argmax_row(r.scores, i);
        r.predictions.push_back(pred);
        if (pred == y) ++correct;
    }
    r.loss = loss_sum / static_cast<double>(n);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    return r;
}

History train_loop(Model& m, const std::vector<Tensor>& images, const std::vector<int>& labels,
                   const SplitAssignment& splits, const TrainConfig& cfg,
                   const AugmentParams& aug) {
    validate_train_config(cfg);
    if (images.size() != labels.size())
        throw ConfigError("train_loop: " + std::to_string(images.size()) + " images vs " +
                          std::to_string(labels.size()) + " labels");
    if (splits.labels.size() != images.size())
        throw ConfigError("train_loop: split covers " + std::to_string(splits.labels.size()) +
                          " examples, dataset has " + std::to_string(images.size()));
    if (splits.train.empty()) throw ConfigError("train_loop: empty training split");
    if (splits.val.empty()) throw ConfigError("train_loop: empty validation split");
    const int64_t n_train = static_cast<int64_t>(splits.train.size());
    if (cfg.batch_size > n_train)
        throw ConfigError("train.batch_size " + std::to_string(cfg.batch_size) +
                          " exceeds training-set size " + std::to_string(n_train));

    History h;
    if (cfg.epochs == 0) return h;
    AdamState st = make_adam_state(m);
    const int64_t bs = cfg.batch_size;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        std::vector<int64_t> order = splits.train;
        if (cfg.shuffle) {
            SeededRng rng(stream_seed(cfg.seed, kShuffleTag, static_cast<uint64_t>(epoch), 0));
            rng.shuffle(order);
        }

        double loss_sum = 0.0;
        int64_t correct = 0;
        const int64_t batches = (n_train + bs - 1) / bs;
        for (int64_t b = 0; b < batches; ++b) {
            const int64_t lo = b * bs, hi = std::min(n_train, lo + bs), bn = hi - lo;
            std::vector<Tensor> batch_imgs;
            std::vector<int64_t> iota_idx;
            std::vector<int> batch_labels;
            batch_imgs.reserve(static_cast<size_t>(bn));
            for (int64_t j = lo; j < hi; ++j) {
                const int64_t example = order[static_cast<size_t>(j)];
                SeededRng rng(stream_seed(cfg.seed, kAugmentTag, static_cast<uint64_t>(epoch),
                                          static_cast<uint64_t>(example)));
                batch_imgs.push_back(
                    augment(images.at(static_cast<size_t>(example)), aug, rng));
                iota_idx.push_back(j - lo);
                batch_labels.push_back(labels[static_cast<size_t>(example)]);
            }
            try {
                SeededRng drop_rng(
                    stream_seed(cfg.seed, kDropoutTag, static_cast<uint64_t>(epoch),
                                static_cast<uint64_t>(b)));
                ForwardTrace trace;
                Tensor probs =
                    forward_hybrid(m, stack(batch_imgs, iota_idx), Mode::train, &drop_rng, &trace);
                CeResult<float> ce = sparse_ce_loss(probs, batch_labels);
                if (!std::isfinite(ce.loss)) throw NumericError("train loss is not finite");
                auto grads = backward_hybrid(m, trace, ce.grad_logits);
                adam_step(m, grads, st, lr);

                loss_sum += ce.loss * static_cast<double>(bn);
                for (int64_t i = 0; i < bn; ++i)
                    if (argmax_row(probs, i) == batch_labels[static_cast<size_t>(i)]) ++correct;
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b) + ": " + e.what());
            }
        }

        EvalResult val = evaluate(m, images, labels, splits.val, cfg.batch_size);
        h.train_loss.push_back(loss_sum / static_cast<double>(n_train));
        h.train_acc.push_back(static_cast<double>(correct) / static_cast<double>(n_train));
        h.val_loss.push_back(val.loss);
        h.val_acc.push_back(val.accuracy);
        h.lr.push_back(lr);
    }
    return h;
}

}  // namespace aggronet
