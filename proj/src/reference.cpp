#include "aggronet/reference.hpp"

#include <algorithm>
#include <cmath>

namespace aggronet::ref {

TensorD matmul(const TensorD& a, const TensorD& b) {
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorD c({m, n});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int64_t l = 0; l < k; ++l) s += a(i, l) * b(l, j);
            c(i, j) = s;
        }
    return c;
}

TensorD conv2d(const TensorD& input, const TensorD& kernel, int64_t stride, Padding padding) {
    const int64_t n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
    const int64_t kh = kernel.dim(0), kw = kernel.dim(1), cout = kernel.dim(3);
    const ConvGeom g = conv_output_geometry(h, w, kh, kw, stride, padding);
    TensorD out({n, g.out_h, g.out_w, cout});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t oh = 0; oh < g.out_h; ++oh)
            for (int64_t ow = 0; ow < g.out_w; ++ow)
                for (int64_t oc = 0; oc < cout; ++oc) {
                    double s = 0.0;
                    for (int64_t kr = 0; kr < kh; ++kr)
                        for (int64_t kc = 0; kc < kw; ++kc)
                            for (int64_t ic = 0; ic < cin; ++ic) {
                                const int64_t ih = oh * stride - g.pad_top + kr;
                                const int64_t iw = ow * stride - g.pad_left + kc;
                                if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                                s += input(b, ih, iw, ic) * kernel(kr, kc, ic, oc);
                            }
                    out(b, oh, ow, oc) = s;
                }
    return out;
}

TensorD maxpool2d(const TensorD& input, int64_t window, int64_t stride, Padding padding) {
    const int64_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    const ConvGeom g = conv_output_geometry(h, w, window, window, stride, padding);
    TensorD out({n, g.out_h, g.out_w, c});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t oh = 0; oh < g.out_h; ++oh)
            for (int64_t ow = 0; ow < g.out_w; ++ow)
                for (int64_t ch = 0; ch < c; ++ch) {
                    bool seen = false;
                    double best = 0.0;
                    for (int64_t kr = 0; kr < window; ++kr)
                        for (int64_t kc = 0; kc < window; ++kc) {
                            const int64_t ih = oh * stride - g.pad_top + kr;
                            const int64_t iw = ow * stride - g.pad_left + kc;
                            if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                            const double v = input(b, ih, iw, ch);
                            if (!seen || v > best) {
                                best = v;
                                seen = true;
                            }
                        }
                    out(b, oh, ow, ch) = best;
                }
    return out;
}

TensorD global_avg_pool(const TensorD& input) {
    const int64_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    TensorD out({n, c});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
            double s = 0.0;
            int64_t count = 0;
            for (int64_t ih = 0; ih < h; ++ih)
                for (int64_t iw = 0; iw < w; ++iw) {
                    s += input(b, ih, iw, ch);
                    ++count;
                }
            out(b, ch) = s / static_cast<double>(count);
        }
    return out;
}

TensorD resize_bilinear(const TensorD& img, int64_t out_w, int64_t out_h) {
    const int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    TensorD out({out_h, out_w, c});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (int64_t y = 0; y < out_h; ++y)
        for (int64_t x = 0; x < out_w; ++x) {
            double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
            double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
            src_y = std::min(std::max(src_y, 0.0), static_cast<double>(h - 1));
            src_x = std::min(std::max(src_x, 0.0), static_cast<double>(w - 1));
            const int64_t y0 = static_cast<int64_t>(std::floor(src_y));
            const int64_t x0 = static_cast<int64_t>(std::floor(src_x));
            const int64_t y1 = std::min(y0 + 1, h - 1);
            const int64_t x1 = std::min(x0 + 1, w - 1);
            const double fy = src_y - static_cast<double>(y0);
            const double fx = src_x - static_cast<double>(x0);
            for (int64_t ch = 0; ch < c; ++ch) {
                const double top = (1.0 - fx) * img(y0, x0, ch) + fx * img(y0, x1, ch);
                const double bot = (1.0 - fx) * img(y1, x0, ch) + fx * img(y1, x1, ch);
                out(y, x, ch) = (1.0 - fy) * top + fy * bot;
            }
        }
    return out;
}

std::vector<std::vector<int64_t>> confusion(const std::vector<int>& preds,
                                            const std::vector<int>& labels, int k) {
    std::vector<std::vector<int64_t>> counts(static_cast<size_t>(k),
                                             std::vector<int64_t>(static_cast<size_t>(k), 0));
    for (size_t i = 0; i < preds.size(); ++i)
        counts[static_cast<size_t>(labels[i])][static_cast<size_t>(preds[i])] += 1;
    return counts;
}

double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels,
                    int positive_class) {
    double wins = 0.0;
    int64_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != positive_class) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] == positive_class) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace aggronet::ref
