#include "aggronet/kernels.hpp"

#include <cmath>

namespace aggronet {

ConvGeom conv_output_geometry(int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
                              Padding padding) {
    ConvGeom g;
    if (padding == Padding::same) {
        g.out_h = (h + stride - 1) / stride;
        g.out_w = (w + stride - 1) / stride;
        const int64_t pad_h = std::max<int64_t>(0, (g.out_h - 1) * stride + kh - h);
        const int64_t pad_w = std::max<int64_t>(0, (g.out_w - 1) * stride + kw - w);
        g.pad_top = pad_h / 2;
        g.pad_left = pad_w / 2;
    } else {
        g.out_h = (h - kh) / stride + 1;
        g.out_w = (w - kw) / stride + 1;
    }
    return g;
}

template <typename T>
void require_finite(const TensorT<T>& t, const char* op) {
    const T* p = t.data();
    const int64_t n = t.size();
    bool ok = true;
#pragma omp parallel for schedule(static) reduction(&& : ok)
    for (int64_t i = 0; i < n; ++i) ok = ok && std::isfinite(p[i]);
    if (!ok) throw NumericError(std::string(op) + ": non-finite value in result");
}

namespace {

template <typename T>
void check_rank(const TensorT<T>& t, int64_t rank, const char* op) {
    if (t.rank() != rank)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got shape " + shape_str(t.shape()));
}

}  // namespace

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    check_rank(a, 2, "matmul");
    check_rank(b, 2, "matmul");
    const int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    TensorT<T> c({m, n});
    const T* pa = a.data();
    const T* pb = b.data();
    T* pc = c.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        std::vector<double> acc(static_cast<size_t>(n), 0.0);
        for (int64_t l = 0; l < k; ++l) {
            const double x = static_cast<double>(pa[i * k + l]);
            const T* brow = pb + l * n;
            for (int64_t j = 0; j < n; ++j) acc[static_cast<size_t>(j)] += x * static_cast<double>(brow[j]);
        }
        for (int64_t j = 0; j < n; ++j) pc[i * n + j] = static_cast<T>(acc[static_cast<size_t>(j)]);
    }
    require_finite(c, "matmul");
    return c;
}

template <typename T>
TensorT<T> transpose2d(const TensorT<T>& a) {
    check_rank(a, 2, "transpose2d");
    const int64_t m = a.dim(0), n = a.dim(1);
    TensorT<T> t({n, m});
    const T* pa = a.data();
    T* pt = t.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) pt[j * m + i] = pa[i * n + j];
    return t;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvParams<T>& p) {
    check_rank(input, 4, "conv2d");
    check_rank(p.kernel, 4, "conv2d kernel");
    const int64_t n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
    const int64_t kh = p.kernel.dim(0), kw = p.kernel.dim(1);
    const int64_t kcin = p.kernel.dim(2), cout = p.kernel.dim(3);
    if (cin != kcin)
        throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels, kernel expects " +
                         std::to_string(kcin));
    if (p.stride <= 0) throw ShapeError("conv2d: stride must be positive, got " + std::to_string(p.stride));
    if (p.padding == Padding::same && (kh % 2 == 0 || kw % 2 == 0))
        throw ShapeError("conv2d: `same` padding requires odd kernel size, got " + std::to_string(kh) +
                         "x" + std::to_string(kw));
    if (p.padding == Padding::valid && (h < kh || w < kw))
        throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " larger than input " + std::to_string(h) + "x" + std::to_string(w));

    const ConvGeom g = conv_output_geometry(h, w, kh, kw, p.stride, p.padding);
    TensorT<T> out({n, g.out_h, g.out_w, cout});
    const T* in = input.data();
    const T* ker = p.kernel.data();
    T* po = out.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t b = 0; b < n; ++b) {
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
            std::vector<double> acc(static_cast<size_t>(cout));
            for (int64_t ow = 0; ow < g.out_w; ++ow) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int64_t kr = 0; kr < kh; ++kr) {
                    const int64_t ih = oh * p.stride - g.pad_top + kr;
                    if (ih < 0 || ih >= h) continue;
                    for (int64_t kc = 0; kc < kw; ++kc) {
                        const int64_t iw = ow * p.stride - g.pad_left + kc;
                        if (iw < 0 || iw >= w) continue;
                        const T* px = in + ((b * h + ih) * w + iw) * cin;
                        const T* kslice = ker + (kr * kw + kc) * cin * cout;
                        for (int64_t ic = 0; ic < cin; ++ic) {
                            const double x = static_cast<double>(px[ic]);
                            const T* krow = kslice + ic * cout;
                            for (int64_t oc = 0; oc < cout; ++oc)
                                acc[static_cast<size_t>(oc)] += x * static_cast<double>(krow[oc]);
                        }
                    }
                }
                T* orow = po + ((b * g.out_h + oh) * g.out_w + ow) * cout;
                for (int64_t oc = 0; oc < cout; ++oc) orow[oc] = static_cast<T>(acc[static_cast<size_t>(oc)]);
            }
        }
    }
    require_finite(out, "conv2d");
    return out;
}

template <typename T>
TensorT<T> conv2d_grad_input(const Shape& input_shape, const TensorT<T>& kernel, int64_t stride,
                             Padding padding, const TensorT<T>& upstream) {
    const int64_t n = input_shape[0], h = input_shape[1], w = input_shape[2], cin = input_shape[3];
    const int64_t kh = kernel.dim(0), kw = kernel.dim(1), cout = kernel.dim(3);
    const ConvGeom g = conv_output_geometry(h, w, kh, kw, stride, padding);
    if (upstream.shape() != Shape{n, g.out_h, g.out_w, cout})
        throw ShapeError("conv2d_grad_input: upstream shape " + shape_str(upstream.shape()) +
                         " does not match output shape " + shape_str({n, g.out_h, g.out_w, cout}));
    TensorT<T> din(input_shape);
    const T* up = upstream.data();
    const T* ker = kernel.data();
    T* pd = din.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t b = 0; b < n; ++b) {
        for (int64_t ih = 0; ih < h; ++ih) {
            std::vector<double> acc(static_cast<size_t>(cin));
            for (int64_t iw = 0; iw < w; ++iw) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int64_t kr = 0; kr < kh; ++kr) {
                    const int64_t num_h = ih + g.pad_top - kr;
                    if (num_h < 0 || num_h % stride != 0) continue;
                    const int64_t oh = num_h / stride;
                    if (oh >= g.out_h) continue;
                    for (int64_t kc = 0; kc < kw; ++kc) {
                        const int64_t num_w = iw + g.pad_left - kc;
                        if (num_w < 0 || num_w % stride != 0) continue;
                        const int64_t ow = num_w / stride;
                        if (ow >= g.out_w) continue;
                        const T* urow = up + ((b * g.out_h + oh) * g.out_w + ow) * cout;
                        const T* kslice = ker + (kr * kw + kc) * cin * cout;
                        for (int64_t ic = 0; ic < cin; ++ic) {
                            const T* krow = kslice + ic * cout;
                            double s = 0.0;
                            for (int64_t oc = 0; oc < cout; ++oc)
                                s += static_cast<double>(urow[oc]) * static_cast<double>(krow[oc]);
                            acc[static_cast<size_t>(ic)] += s;
                        }
                    }
                }
                T* drow = pd + ((b * h + ih) * w + iw) * cin;
                for (int64_t ic = 0; ic < cin; ++ic) drow[ic] = static_cast<T>(acc[static_cast<size_t>(ic)]);
            }
        }
    }
    require_finite(din, "conv2d_grad_input");
    return din;
}

template <typename T>
TensorT<T> conv2d_grad_kernel(const TensorT<T>& input, const Shape& kernel_shape, int64_t stride,
                              Padding padding, const TensorT<T>& upstream) {
    const int64_t n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
    const int64_t kh = kernel_shape[0], kw = kernel_shape[1], cout = kernel_shape[3];
    const ConvGeom g = conv_output_geometry(h, w, kh, kw, stride, padding);
    if (upstream.shape() != Shape{n, g.out_h, g.out_w, cout})
        throw ShapeError("conv2d_grad_kernel: upstream shape " + shape_str(upstream.shape()) +
                         " does not match output shape " + shape_str({n, g.out_h, g.out_w, cout}));
    TensorT<T> gk(kernel_shape);
    const T* in = input.data();
    const T* up = upstream.data();
    T* pg = gk.data();
#pragma omp parallel for collapse(3) schedule(static)
    for (int64_t kr = 0; kr < kh; ++kr) {
        for (int64_t kc = 0; kc < kw; ++kc) {
            for (int64_t ic = 0; ic < cin; ++ic) {
                std::vector<double> acc(static_cast<size_t>(cout), 0.0);
                for (int64_t b = 0; b < n; ++b) {
                    for (int64_t oh = 0; oh < g.out_h; ++oh) {
                        const int64_t ih = oh * stride - g.pad_top + kr;
                        if (ih < 0 || ih >= h) continue;
                        for (int64_t ow = 0; ow < g.out_w; ++ow) {
                            const int64_t iw = ow * stride - g.pad_left + kc;
                            if (iw < 0 || iw >= w) continue;
                            const double x = static_cast<double>(in[((b * h + ih) * w + iw) * cin + ic]);
                            const T* urow = up + ((b * g.out_h + oh) * g.out_w + ow) * cout;
                            for (int64_t oc = 0; oc < cout; ++oc)
                                acc[static_cast<size_t>(oc)] += x * static_cast<double>(urow[oc]);
                        }
                    }
                }
                T* grow = pg + ((kr * kw + kc) * cin + ic) * cout;
                for (int64_t oc = 0; oc < cout; ++oc) grow[oc] = static_cast<T>(acc[static_cast<size_t>(oc)]);
            }
        }
    }
    require_finite(gk, "conv2d_grad_kernel");
    return gk;
}

template <typename T>
TensorT<T> maxpool2d(const TensorT<T>& input, int64_t window, int64_t stride, Padding padding,
                     std::vector<int64_t>* argmax) {
    check_rank(input, 4, "maxpool2d");
    if (window < 1 || stride < 1)
        throw ShapeError("maxpool2d: window and stride must be >= 1, got window=" +
                         std::to_string(window) + " stride=" + std::to_string(stride));
    const int64_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    if (padding == Padding::valid && (window > h || window > w))
        throw ShapeError("maxpool2d: window " + std::to_string(window) +
                         " larger than spatial extent " + std::to_string(h) + "x" + std::to_string(w));
    const ConvGeom g = conv_output_geometry(h, w, window, window, stride, padding);
    TensorT<T> out({n, g.out_h, g.out_w, c});
    if (argmax) argmax->assign(static_cast<size_t>(out.size()), -1);
    const T* in = input.data();
    T* po = out.data();
    int64_t* pa = argmax ? argmax->data() : nullptr;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t b = 0; b < n; ++b) {
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
            for (int64_t ow = 0; ow < g.out_w; ++ow) {
                for (int64_t ch = 0; ch < c; ++ch) {
                    T best{};
                    int64_t best_idx = -1;
                    for (int64_t kr = 0; kr < window; ++kr) {
                        const int64_t ih = oh * stride - g.pad_top + kr;
                        if (ih < 0 || ih >= h) continue;
                        for (int64_t kc = 0; kc < window; ++kc) {
                            const int64_t iw = ow * stride - g.pad_left + kc;
                            if (iw < 0 || iw >= w) continue;
                            const int64_t idx = ((b * h + ih) * w + iw) * c + ch;
                            if (best_idx < 0 || in[idx] > best) {
                                best = in[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    const int64_t oidx = ((b * g.out_h + oh) * g.out_w + ow) * c + ch;
                    po[oidx] = best;
                    if (pa) pa[oidx] = best_idx;
                }
            }
        }
    }
    require_finite(out, "maxpool2d");
    return out;
}

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& input) {
    check_rank(input, 4, "global_avg_pool");
    const int64_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    if (h * w < 1) throw ShapeError("global_avg_pool: empty spatial grid " + shape_str(input.shape()));
    TensorT<T> out({n, c});
    const T* in = input.data();
    T* po = out.data();
    const double inv = 1.0 / static_cast<double>(h * w);
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < n; ++b) {
        std::vector<double> acc(static_cast<size_t>(c), 0.0);
        const T* base = in + b * h * w * c;
        for (int64_t i = 0; i < h * w; ++i)
            for (int64_t ch = 0; ch < c; ++ch) acc[static_cast<size_t>(ch)] += static_cast<double>(base[i * c + ch]);
        for (int64_t ch = 0; ch < c; ++ch) po[b * c + ch] = static_cast<T>(acc[static_cast<size_t>(ch)] * inv);
    }
    require_finite(out, "global_avg_pool");
    return out;
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != b.rank() || a.rank() < 2)
        throw ShapeError("concat_channels: incompatible ranks " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    for (int64_t i = 0; i + 1 < a.rank(); ++i)
        if (a.dim(i) != b.dim(i))
            throw ShapeError("concat_channels: batch dimensions differ, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    const int64_t fa = a.dim(a.rank() - 1), fb = b.dim(b.rank() - 1);
    const int64_t rows = fa > 0 ? a.size() / fa : b.size() / std::max<int64_t>(fb, 1);
    Shape out_shape = a.shape();
    out_shape.back() = fa + fb;
    TensorT<T> out(out_shape);
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        T* dst = po + r * (fa + fb);
        std::copy(pa + r * fa, pa + (r + 1) * fa, dst);
        std::copy(pb + r * fb, pb + (r + 1) * fb, dst + fa);
    }
    require_finite(out, "concat_channels");
    return out;
}

template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int64_t begin, int64_t end) {
    const int64_t f = x.dim(x.rank() - 1);
    if (begin < 0 || end < begin || end > f)
        throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of bounds for width " + std::to_string(f));
    Shape out_shape = x.shape();
    out_shape.back() = end - begin;
    TensorT<T> out(out_shape);
    const int64_t rows = f > 0 ? x.size() / f : 0;
    const int64_t width = end - begin;
    const T* px = x.data();
    T* po = out.data();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r)
        std::copy(px + r * f + begin, px + r * f + end, po + r * width);
    return out;
}

namespace {

template <typename T, typename F>
TensorT<T> unary_map(const TensorT<T>& x, F f, const char* op) {
    TensorT<T> out(x.shape());
    const T* px = x.data();
    T* po = out.data();
    const int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) po[i] = f(px[i]);
    require_finite(out, op);
    return out;
}

template <typename T, typename F>
TensorT<T> binary_map(const TensorT<T>& a, const TensorT<T>& b, F f, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shapes differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const int64_t n = a.size();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    require_finite(out, op);
    return out;
}

}  // namespace

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    return unary_map(x, [](T v) { return v > T{} ? v : T{}; }, "relu");
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_map(a, b, [](T x, T y) { return x + y; }, "add");
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, T scalar) {
    return unary_map(a, [scalar](T v) { return v + scalar; }, "add");
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_map(a, b, [](T x, T y) { return x * y; }, "mul");
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T factor) {
    return unary_map(a, [factor](T v) { return v * factor; }, "scale");
}

template <typename T>
TensorT<T> add_channels(const TensorT<T>& x, const TensorT<T>& bias) {
    check_rank(bias, 1, "add_channels bias");
    const int64_t c = x.dim(x.rank() - 1);
    if (bias.dim(0) != c)
        throw ShapeError("add_channels: bias width " + std::to_string(bias.dim(0)) +
                         " does not match channel count " + std::to_string(c));
    TensorT<T> out(x.shape());
    const int64_t rows = c > 0 ? x.size() / c : 0;
    const T* px = x.data();
    const T* pb = bias.data();
    T* po = out.data();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t ch = 0; ch < c; ++ch) po[r * c + ch] = px[r * c + ch] + pb[ch];
    require_finite(out, "add_channels");
    return out;
}

template <typename T>
TensorT<T> channel_sums(const TensorT<T>& x) {
    const int64_t c = x.dim(x.rank() - 1);
    const int64_t rows = c > 0 ? x.size() / c : 0;
    TensorT<T> out({c});
    const T* px = x.data();
    T* po = out.data();
#pragma omp parallel for schedule(static)
    for (int64_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int64_t r = 0; r < rows; ++r) acc += static_cast<double>(px[r * c + ch]);
        po[ch] = static_cast<T>(acc);
    }
    require_finite(out, "channel_sums");
    return out;
}

template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& img, int64_t out_w, int64_t out_h) {
    if (img.rank() != 3)
        throw ShapeError("resize_bilinear: expected [H,W,C], got " + shape_str(img.shape()));
    if (out_w < 1 || out_h < 1) throw ShapeError("resize_bilinear: output size must be positive");
    const int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    TensorT<T> out({out_h, out_w, c});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    const T* pin = img.data();
    T* po = out.data();
#pragma omp parallel for schedule(static)
    for (int64_t y = 0; y < out_h; ++y) {
        double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
        src_y = std::min(std::max(src_y, 0.0), static_cast<double>(h - 1));
        const int64_t y0 = static_cast<int64_t>(std::floor(src_y));
        const int64_t y1 = std::min(y0 + 1, h - 1);
        const double fy = src_y - static_cast<double>(y0);
        for (int64_t x = 0; x < out_w; ++x) {
            double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
            src_x = std::min(std::max(src_x, 0.0), static_cast<double>(w - 1));
            const int64_t x0 = static_cast<int64_t>(std::floor(src_x));
            const int64_t x1 = std::min(x0 + 1, w - 1);
            const double fx = src_x - static_cast<double>(x0);
            for (int64_t ch = 0; ch < c; ++ch) {
                const double top = (1.0 - fx) * static_cast<double>(pin[(y0 * w + x0) * c + ch]) +
                                   fx * static_cast<double>(pin[(y0 * w + x1) * c + ch]);
                const double bot = (1.0 - fx) * static_cast<double>(pin[(y1 * w + x0) * c + ch]) +
                                   fx * static_cast<double>(pin[(y1 * w + x1) * c + ch]);
                po[(y * out_w + x) * c + ch] = static_cast<T>((1.0 - fy) * top + fy * bot);
            }
        }
    }
    require_finite(out, "resize_bilinear");
    return out;
}

#define AGGRONET_INSTANTIATE(T)                                                                        \
    template void require_finite<T>(const TensorT<T>&, const char*);                                   \
    template TensorT<T> matmul<T>(const TensorT<T>&, const TensorT<T>&);                               \
    template TensorT<T> transpose2d<T>(const TensorT<T>&);                                             \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const ConvParams<T>&);                            \
    template TensorT<T> conv2d_grad_input<T>(const Shape&, const TensorT<T>&, int64_t, Padding,        \
                                             const TensorT<T>&);                                       \
    template TensorT<T> conv2d_grad_kernel<T>(const TensorT<T>&, const Shape&, int64_t, Padding,       \
                                              const TensorT<T>&);                                      \
    template TensorT<T> maxpool2d<T>(const TensorT<T>&, int64_t, int64_t, Padding,                     \
                                     std::vector<int64_t>*);                                           \
    template TensorT<T> global_avg_pool<T>(const TensorT<T>&);                                         \
    template TensorT<T> concat_channels<T>(const TensorT<T>&, const TensorT<T>&);                      \
    template TensorT<T> slice_channels<T>(const TensorT<T>&, int64_t, int64_t);                        \
    template TensorT<T> relu<T>(const TensorT<T>&);                                                    \
    template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                                  \
    template TensorT<T> add<T>(const TensorT<T>&, T);                                                  \
    template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                                  \
    template TensorT<T> scale<T>(const TensorT<T>&, T);                                                \
    template TensorT<T> resize_bilinear<T>(const TensorT<T>&, int64_t, int64_t);                       \
    template TensorT<T> add_channels<T>(const TensorT<T>&, const TensorT<T>&);                         \
    template TensorT<T> channel_sums<T>(const TensorT<T>&);

AGGRONET_INSTANTIATE(float)
AGGRONET_INSTANTIATE(double)

#undef AGGRONET_INSTANTIATE

}  // namespace aggronet
