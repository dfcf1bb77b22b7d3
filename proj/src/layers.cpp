#include "aggronet/layers.hpp"

#include <cmath>

#include "aggronet/error.hpp"

namespace aggronet {

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::global_avg_pool: return "global_avg_pool";
        case LayerKind::dropout: return "dropout";
        case LayerKind::concat: return "concat";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

template <typename T>
LayerT<T> make_conv(std::string name, TensorT<T> kernel, TensorT<T> bias, int64_t stride,
                    Padding padding, bool trainable) {
    if (kernel.rank() != 4)
        throw ShapeError(name + ": conv kernel must be [kh,kw,c_in,c_out], got " +
                         shape_str(kernel.shape()));
    if (bias.shape() != Shape{kernel.dim(3)})
        throw ShapeError(name + ": conv bias shape " + shape_str(bias.shape()) +
                         " does not match c_out " + std::to_string(kernel.dim(3)));
    LayerT<T> l;
    l.name = std::move(name);
    l.kind = LayerKind::conv;
    l.trainable = trainable;
    l.weights = std::move(kernel);
    l.bias = std::move(bias);
    l.stride = stride;
    l.padding = padding;
    return l;
}

template <typename T>
LayerT<T> make_dense(std::string name, TensorT<T> weights, TensorT<T> bias, bool trainable) {
    if (weights.rank() != 2)
        throw ShapeError(name + ": dense weights must be [in,out], got " + shape_str(weights.shape()));
    if (bias.shape() != Shape{weights.dim(1)})
        throw ShapeError(name + ": dense bias shape " + shape_str(bias.shape()) +
                         " does not match output width " + std::to_string(weights.dim(1)));
    LayerT<T> l;
    l.name = std::move(name);
    l.kind = LayerKind::dense;
    l.trainable = trainable;
    l.weights = std::move(weights);
    l.bias = std::move(bias);
    return l;
}

template <typename T>
LayerT<T> make_relu(std::string name) {
    LayerT<T> l;
    l.name = std::move(name);
    l.kind = LayerKind::relu;
    return l;
}

template <typename T>
LayerT<T> make_maxpool(std::string name, int64_t window, int64_t stride, Padding padding) {
    LayerT<T> l;
    l.name = std::move(name);
    l.kind = LayerKind::maxpool;
    l.window = window;
    l.pool_stride = stride;
    l.pool_padding = padding;
    return l;
}

template <typename T>
LayerT<T> make_global_avg_pool(std::string name) {
    LayerT<T> l;
    l.name = std::move(name);
    l.kind = LayerKind::global_avg_pool;
    return l;
}

template <typename T>
LayerT<T> make_dropout(std::string name, double rate) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw ConfigError(name + ": dropout rate must be in [0, 1), got " + std::to_string(rate));
    LayerT<T> l;
    l.name = std::move(name);
    l.kind = LayerKind::dropout;
    l.rate = rate;
    return l;
}

template <typename T>
LayerT<T> make_softmax(std::string name) {
    LayerT<T> l;
    l.name = std::move(name);
    l.kind = LayerKind::softmax;
    return l;
}

template <typename T>
TensorT<T> softmax(const TensorT<T>& logits) {
    if (logits.rank() != 2)
        throw ShapeError("softmax: expected [N,K] logits, got " + shape_str(logits.shape()));
    const int64_t n = logits.dim(0), k = logits.dim(1);
    if (k < 1) throw ShapeError("softmax: K must be >= 1");
    TensorT<T> out(logits.shape());
    const T* px = logits.data();
    T* po = out.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const T* row = px + i * k;
        double mx = static_cast<double>(row[0]);
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double sum = 0.0;
        for (int64_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
        const double inv = 1.0 / sum;
        for (int64_t j = 0; j < k; ++j)
            po[i * k + j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - mx) * inv);
    }
    require_finite(out, "softmax");
    return out;
}

namespace {

template <typename T>
TensorT<T> dropout_mask(const Shape& shape, double rate, SeededRng& rng) {
    TensorT<T> mask(shape);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (int64_t i = 0; i < mask.size(); ++i)
        mask[i] = rng.uniform() < rate ? T{} : keep_scale;
    return mask;
}

template <typename T>
Shape output_shape_of(const LayerT<T>& layer, const Shape& in) {
    switch (layer.kind) {
        case LayerKind::conv: {
            const ConvGeom g = conv_output_geometry(in[1], in[2], layer.weights.dim(0),
                                                    layer.weights.dim(1), layer.stride, layer.padding);
            return {in[0], g.out_h, g.out_w, layer.weights.dim(3)};
        }
        case LayerKind::dense:
            return {in[0], layer.weights.dim(1)};
        case LayerKind::maxpool: {
            const ConvGeom g = conv_output_geometry(in[1], in[2], layer.window, layer.window,
                                                    layer.pool_stride, layer.pool_padding);
            return {in[0], g.out_h, g.out_w, in[3]};
        }
        case LayerKind::global_avg_pool:
            return {in[0], in[3]};
        default:
            return in;
    }
}

}  // namespace

template <typename T>
TensorT<T> forward(const LayerT<T>& layer, const TensorT<T>& input, Mode mode, SeededRng* rng,
                   LayerCacheT<T>* cache) {
    if (cache) {
        *cache = LayerCacheT<T>{};
        cache->input = input;
    }
    switch (layer.kind) {
        case LayerKind::conv: {
            if (input.rank() != 4 || input.dim(3) != layer.weights.dim(2))
                throw ShapeError(layer.name + ": conv input " + shape_str(input.shape()) +
                                 " incompatible with kernel " + shape_str(layer.weights.shape()));
            ConvParams<T> p{layer.weights, layer.stride, layer.padding};
            return add_channels(conv2d(input, p), layer.bias);
        }
        case LayerKind::dense: {
            if (input.rank() != 2 || input.dim(1) != layer.weights.dim(0))
                throw ShapeError(layer.name + ": dense input " + shape_str(input.shape()) +
                                 " incompatible with weights " + shape_str(layer.weights.shape()));
            return add_channels(matmul(input, layer.weights), layer.bias);
        }
        case LayerKind::relu:
            return relu(input);
        case LayerKind::maxpool:
            return maxpool2d(input, layer.window, layer.pool_stride, layer.pool_padding,
                             cache ? &cache->argmax : nullptr);
        case LayerKind::global_avg_pool:
            return global_avg_pool(input);
        case LayerKind::dropout: {
            if (mode == Mode::infer) return input;
            if (!rng)
                throw Error(layer.name + ": dropout in train mode needs an rng");
            TensorT<T> mask = dropout_mask<T>(input.shape(), layer.rate, *rng);
            TensorT<T> out = mul(input, mask);
            if (cache) cache->mask = std::move(mask);
            return out;
        }
        case LayerKind::softmax: {
            TensorT<T> out = softmax(input);
            if (cache) cache->output = out;
            return out;
        }
        case LayerKind::concat:
            throw ShapeError(layer.name + ": concat takes two inputs, use concat_forward");
    }
    throw Error(layer.name + ": unknown layer kind");
}

template <typename T>
GradientBundleT<T> backward(const LayerT<T>& layer, const LayerCacheT<T>& cache,
                            const TensorT<T>& upstream) {
    const Shape want = output_shape_of(layer, cache.input.shape());
    if (upstream.shape() != want)
        throw ShapeError(layer.name + ": upstream shape " + shape_str(upstream.shape()) +
                         " does not match forward output " + shape_str(want));
    GradientBundleT<T> g;
    switch (layer.kind) {
        case LayerKind::conv: {
            g.weights = conv2d_grad_kernel(cache.input, layer.weights.shape(), layer.stride,
                                           layer.padding, upstream);
            g.bias = channel_sums(upstream);
            g.input = conv2d_grad_input(cache.input.shape(), layer.weights, layer.stride,
                                        layer.padding, upstream);
            return g;
        }
        case LayerKind::dense: {
            g.weights = matmul(transpose2d(cache.input), upstream);
            g.bias = channel_sums(upstream);
            g.input = matmul(upstream, transpose2d(layer.weights));
            return g;
        }
        case LayerKind::relu: {
            TensorT<T> dx(cache.input.shape());
            const T* px = cache.input.data();
            const T* pu = upstream.data();
            T* pd = dx.data();
            const int64_t n = dx.size();
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) pd[i] = px[i] > T{} ? pu[i] : T{};
            g.input = std::move(dx);
            return g;
        }
        case LayerKind::maxpool: {
            if (cache.argmax.size() != static_cast<size_t>(upstream.size()))
                throw ShapeError(layer.name + ": cache has no argmax for this upstream");
            const Shape& in = cache.input.shape();
            TensorT<T> dx(in);
            const T* pu = upstream.data();
            T* pd = dx.data();
            const int64_t per_batch = upstream.size() / in[0];
            const int64_t nb = in[0];
            // windows can overlap, so winners accumulate; batches are disjoint
#pragma omp parallel for schedule(static)
            for (int64_t b = 0; b < nb; ++b)
                for (int64_t i = b * per_batch; i < (b + 1) * per_batch; ++i)
                    pd[cache.argmax[static_cast<size_t>(i)]] += pu[i];
            g.input = std::move(dx);
            return g;
        }
        case LayerKind::global_avg_pool: {
            const Shape& in = cache.input.shape();
            TensorT<T> dx(in);
            const int64_t n = in[0], h = in[1], w = in[2], c = in[3];
            const double inv = 1.0 / static_cast<double>(h * w);
            const T* pu = upstream.data();
            T* pd = dx.data();
#pragma omp parallel for schedule(static)
            for (int64_t b = 0; b < n; ++b)
                for (int64_t i = 0; i < h * w; ++i)
                    for (int64_t ch = 0; ch < c; ++ch)
                        pd[(b * h * w + i) * c + ch] =
                            static_cast<T>(static_cast<double>(pu[b * c + ch]) * inv);
            g.input = std::move(dx);
            return g;
        }
        case LayerKind::dropout: {
            g.input = cache.mask.empty() ? upstream : mul(upstream, cache.mask);
            return g;
        }
        case LayerKind::softmax: {
            const TensorT<T>& p = cache.output;
            if (p.shape() != upstream.shape())
                throw ShapeError(layer.name + ": softmax cache missing or mismatched");
            const int64_t n = p.dim(0), k = p.dim(1);
            TensorT<T> dx(p.shape());
            const T* pp = p.data();
            const T* pu = upstream.data();
            T* pd = dx.data();
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int64_t j = 0; j < k; ++j)
                    dot += static_cast<double>(pu[i * k + j]) * static_cast<double>(pp[i * k + j]);
                for (int64_t j = 0; j < k; ++j)
                    pd[i * k + j] = static_cast<T>(static_cast<double>(pp[i * k + j]) *
                                                   (static_cast<double>(pu[i * k + j]) - dot));
            }
            g.input = std::move(dx);
            return g;
        }
        case LayerKind::concat:
            throw ShapeError(layer.name + ": concat gradients flow through concat_backward");
    }
    throw Error(layer.name + ": unknown layer kind");
}

#define AGGRONET_INSTANTIATE(T)                                                                       \
    template LayerT<T> make_conv<T>(std::string, TensorT<T>, TensorT<T>, int64_t, Padding, bool);     \
    template LayerT<T> make_dense<T>(std::string, TensorT<T>, TensorT<T>, bool);                      \
    template LayerT<T> make_relu<T>(std::string);                                                     \
    template LayerT<T> make_maxpool<T>(std::string, int64_t, int64_t, Padding);                       \
    template LayerT<T> make_global_avg_pool<T>(std::string);                                          \
    template LayerT<T> make_dropout<T>(std::string, double);                                          \
    template LayerT<T> make_softmax<T>(std::string);                                                  \
    template TensorT<T> softmax<T>(const TensorT<T>&);                                                \
    template TensorT<T> forward<T>(const LayerT<T>&, const TensorT<T>&, Mode, SeededRng*,             \
                                   LayerCacheT<T>*);                                                  \
    template GradientBundleT<T> backward<T>(const LayerT<T>&, const LayerCacheT<T>&,                  \
                                            const TensorT<T>&);

AGGRONET_INSTANTIATE(float)
AGGRONET_INSTANTIATE(double)

#undef AGGRONET_INSTANTIATE

}  // namespace aggronet
