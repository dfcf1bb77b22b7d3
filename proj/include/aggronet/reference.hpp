#pragma once

#include <cstdint>
#include <vector>

#include "aggronet/kernels.hpp"
#include "aggronet/tensor.hpp"

// Serial reference implementations. Everything here is the most direct
// transcription of the defining formula: triple loops, exhaustive window
// scans, per-element sums. Double precision, no OpenMP, no shared code with
// the parallel kernels. Tests use these as oracles; the benchmark target
// compares the parallel kernels against them.
namespace aggronet::ref {

TensorD matmul(const TensorD& a, const TensorD& b);

TensorD conv2d(const TensorD& input, const TensorD& kernel, int64_t stride, Padding padding);

TensorD maxpool2d(const TensorD& input, int64_t window, int64_t stride,
                  Padding padding = Padding::valid);

TensorD global_avg_pool(const TensorD& input);

TensorD resize_bilinear(const TensorD& img, int64_t out_w, int64_t out_h);

// K x K tally, rows = true class, columns = predicted class.
std::vector<std::vector<int64_t>> confusion(const std::vector<int>& preds,
                                            const std::vector<int>& labels, int k);

// AUC as the rank statistic: P(score_pos > score_neg) + 0.5 P(equal),
// counted over every (positive, negative) pair.
double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels,
                    int positive_class);

}  // namespace aggronet::ref
