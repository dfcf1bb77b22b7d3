#pragma once

#include <cstdint>
#include <vector>

#include "aggronet/tensor.hpp"

namespace aggronet {

enum class Padding { same, valid };

// Convolution filter plus stepping config. Kernel layout is [kh, kw, c_in, c_out].
template <typename T>
struct ConvParams {
    TensorT<T> kernel;
    int64_t stride = 1;
    Padding padding = Padding::same;
};

struct ConvGeom {
    int64_t out_h = 0, out_w = 0;
    int64_t pad_top = 0, pad_left = 0;
};

// Output size and zero-padding amounts. `same` pads so out = ceil(in/stride),
// with the surplus row/column going to the bottom/right.
ConvGeom conv_output_geometry(int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
                              Padding padding);

// Throws NumericError naming `op` if any element is NaN or infinite.
template <typename T>
void require_finite(const TensorT<T>& t, const char* op);

// All kernels are pure and deterministic: every output element is produced by
// exactly one thread with a fixed reduction order, so results do not depend on
// the OpenMP thread count. Reductions accumulate in double regardless of T.

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b);  // [M,K]x[K,N]

template <typename T>
TensorT<T> transpose2d(const TensorT<T>& a);

// Cross-correlation (no kernel flip) over NHWC input with zero padding.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvParams<T>& p);

// d(conv2d)/d(input) given upstream gradient of the output.
template <typename T>
TensorT<T> conv2d_grad_input(const Shape& input_shape, const TensorT<T>& kernel, int64_t stride,
                             Padding padding, const TensorT<T>& upstream);

// d(conv2d)/d(kernel), summed over the batch.
template <typename T>
TensorT<T> conv2d_grad_kernel(const TensorT<T>& input, const Shape& kernel_shape, int64_t stride,
                              Padding padding, const TensorT<T>& upstream);

// Max pooling over NHWC. `valid` drops the trailing remainder; `same` pads to
// out = ceil(in/stride) and takes the max over in-bounds cells only. If
// `argmax` is given it receives one flat input index per output element, the
// first maximal element in row-major window order on ties.
template <typename T>
TensorT<T> maxpool2d(const TensorT<T>& input, int64_t window, int64_t stride,
                     Padding padding = Padding::valid, std::vector<int64_t>* argmax = nullptr);

// [N,H,W,C] -> [N,C], mean over the spatial grid.
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& input);

// Concatenation along the last axis; all leading dimensions must agree.
template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b);

// Slice [begin, end) of the last axis.
template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int64_t begin, int64_t end);

// Elementwise ops: equal shapes, or tensor-with-scalar.
template <typename T>
TensorT<T> relu(const TensorT<T>& x);
template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> add(const TensorT<T>& a, T scalar);
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> scale(const TensorT<T>& a, T factor);

// Bilinear resize of an [H,W,C] image with half-pixel-center alignment:
// src = (dst + 0.5) * (in/out) - 0.5, clamped to the border.
template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& img, int64_t out_w, int64_t out_h);

// Broadcast-add a length-C vector along the last axis.
template <typename T>
TensorT<T> add_channels(const TensorT<T>& x, const TensorT<T>& bias);

// Sum over all leading axes, one value per last-axis channel.
template <typename T>
TensorT<T> channel_sums(const TensorT<T>& x);

}  // namespace aggronet
