#pragma once

#include <string>
#include <utility>
#include <vector>

#include "aggronet/kernels.hpp"
#include "aggronet/rng.hpp"
#include "aggronet/tensor.hpp"

namespace aggronet {

enum class LayerKind { conv, dense, relu, maxpool, global_avg_pool, dropout, concat, softmax };

const char* kind_name(LayerKind k);

enum class Mode { train, infer };

// One network layer. Which fields matter depends on `kind`; the factory
// functions below set them consistently. `trainable=false` layers still
// produce parameter gradients, the optimizer just never applies them.
template <typename T>
struct LayerT {
    std::string name;
    LayerKind kind = LayerKind::relu;
    bool trainable = false;
    int id = -1;  // position in the model's layer walk, set by the builder

    TensorT<T> weights;  // conv kernel [kh,kw,c_in,c_out] or dense [in,out]
    TensorT<T> bias;     // [c_out] / [out]

    int64_t stride = 1;               // conv
    Padding padding = Padding::same;  // conv

    int64_t window = 2;                     // maxpool
    int64_t pool_stride = 2;                // maxpool
    Padding pool_padding = Padding::valid;  // maxpool

    double rate = 0.0;  // dropout, in [0, 1)
};

using Layer = LayerT<float>;

// Everything backward needs from the matching forward call.
template <typename T>
struct LayerCacheT {
    TensorT<T> input;
    TensorT<T> output;            // softmax keeps its probabilities
    TensorT<T> mask;              // dropout keep/scale mask, empty in infer mode
    std::vector<int64_t> argmax;  // maxpool winner indices
};

template <typename T>
struct GradientBundleT {
    TensorT<T> weights;  // empty when the layer has no parameters
    TensorT<T> bias;
    TensorT<T> input;
};

template <typename T>
LayerT<T> make_conv(std::string name, TensorT<T> kernel, TensorT<T> bias, int64_t stride,
                    Padding padding, bool trainable = true);
template <typename T>
LayerT<T> make_dense(std::string name, TensorT<T> weights, TensorT<T> bias, bool trainable = true);
template <typename T>
LayerT<T> make_relu(std::string name);
template <typename T>
LayerT<T> make_maxpool(std::string name, int64_t window, int64_t stride,
                       Padding padding = Padding::valid);
template <typename T>
LayerT<T> make_global_avg_pool(std::string name);
template <typename T>
LayerT<T> make_dropout(std::string name, double rate);
template <typename T>
LayerT<T> make_softmax(std::string name);

// Runs the layer on one input tensor. Dropout in train mode draws its mask
// from `rng` (required there, unused elsewhere); in infer mode it is the
// identity. If `cache` is non-null it is filled for a later backward call.
// The concat kind takes two inputs and goes through concat_forward instead.
template <typename T>
TensorT<T> forward(const LayerT<T>& layer, const TensorT<T>& input, Mode mode,
                   SeededRng* rng = nullptr, LayerCacheT<T>* cache = nullptr);

// Exact reverse-mode gradients of the layer function at the cached point.
template <typename T>
GradientBundleT<T> backward(const LayerT<T>& layer, const LayerCacheT<T>& cache,
                            const TensorT<T>& upstream);

// Row-wise exp-normalization with max subtraction; rows sum to 1.
template <typename T>
TensorT<T> softmax(const TensorT<T>& logits);

// Fusion junction: the one spot in the network with two parents.
template <typename T>
TensorT<T> concat_forward(const TensorT<T>& a, const TensorT<T>& b) {
    return concat_channels(a, b);
}

template <typename T>
std::pair<TensorT<T>, TensorT<T>> concat_backward(const TensorT<T>& upstream, int64_t f1) {
    const int64_t total = upstream.dim(upstream.rank() - 1);
    return {slice_channels(upstream, 0, f1), slice_channels(upstream, f1, total)};
}

}  // namespace aggronet
