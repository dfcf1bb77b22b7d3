#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aggronet/datapipe.hpp"
#include "aggronet/model.hpp"

namespace aggronet {

struct ScheduleConfig {
    double gamma = 0.5;
    int step_epochs = 5;
};

struct TrainConfig {
    int batch_size = 32;
    int epochs = 20;
    double base_lr = 1e-3;
    ScheduleConfig schedule;
    uint64_t seed = 0;
    bool shuffle = true;
};

// Throws ConfigError naming the offending field.
void validate_train_config(const TrainConfig& cfg);

// Step decay: base_lr * gamma^floor(epoch / step_epochs).
double lr_at(int epoch, const TrainConfig& cfg);

// Mean negative log-likelihood of the true class, probabilities clipped at
// 1e-12 before the log. grad_logits is the exact gradient with respect to
// the pre-softmax logits: (probs - onehot) / N.
template <typename T>
struct CeResult {
    double loss = 0.0;
    TensorT<T> grad_logits;
};
template <typename T>
CeResult<T> sparse_ce_loss(const TensorT<T>& probs, const std::vector<int>& labels);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    int64_t t = 0;

    struct Slot {
        TensorD m_w, v_w, m_b, v_b;
    };
    std::vector<Slot> slots;  // indexed by layer id; empty for parameterless layers
};

AdamState make_adam_state(const Model& m);

// One bias-corrected Adam update of a single tensor. Arithmetic in double,
// parameters rounded to storage precision per step.
void adam_update_tensor(Tensor& param, const Tensor& grad, TensorD& m, TensorD& v, int64_t t,
                        double beta1, double beta2, double eps, double lr);

// Applies one step over every trainable parameter; frozen layers are left
// untouched, moments included. t increments by exactly 1 per call.
void adam_step(Model& m, const std::vector<LayerGrads>& grads, AdamState& state, double lr);

enum class Partition { train, val, test };

struct SplitCounts {
    int64_t train = 0;
    int64_t val = 0;
    int64_t test = 0;
};

struct SplitAssignment {
    uint64_t seed = 0;
    std::vector<int64_t> train, val, test;  // disjoint, union = [0, n)
    std::vector<Partition> labels;          // per-example partition

    const std::vector<int64_t>& of(Partition p) const {
        return p == Partition::train ? train : p == Partition::val ? val : test;
    }
};

// Seeded uniform permutation of [0, n) cut into the three counts in order
// train, val, test. Counts must sum to n.
SplitAssignment split(int64_t n, SplitCounts counts, uint64_t seed);

struct History {
    std::vector<double> train_loss, train_acc, val_loss, val_acc, lr;

    int64_t epochs() const { return static_cast<int64_t>(lr.size()); }
};

// `epoch,train_loss,train_acc,val_loss,val_acc,lr`, one row per epoch.
std::string history_csv_text(const History& h);
std::string history_json_text(const History& h);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<int> predictions;  // argmax, ties toward the lowest class index
    Tensor scores;                 // [n, K] probabilities, rows in `indices` order
};

// Infer mode, no augmentation. `indices` selects the examples to score.
EvalResult evaluate(const Model& m, const std::vector<Tensor>& images,
                    const std::vector<int>& labels, const std::vector<int64_t>& indices,
                    int batch_size);

// Epoch loop: seeded shuffle of the train indices, per-example augmentation
// (stream seeds derived from config seed, epoch, and example index), forward
// in train mode, fused softmax+CE gradient, Adam with lr_at(epoch), then a
// full validation pass in infer mode. Mutates `m`; History has one row per
// epoch. A non-finite training loss aborts with a NumericError naming the
// epoch and batch.
History train_loop(Model& m, const std::vector<Tensor>& images, const std::vector<int>& labels,
                   const SplitAssignment& splits, const TrainConfig& cfg,
                   const AugmentParams& aug = {});

}  // namespace aggronet
