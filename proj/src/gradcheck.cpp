#include "aggronet/gradcheck.hpp"

#include <cmath>
#include <numeric>

namespace aggronet {

namespace {

constexpr double kStep = 1e-5;

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

}  // namespace

TensorD gradcheck_input(LayerKind kind, const Shape& shape, SeededRng& rng) {
    TensorD x(shape);
    const int64_t n = x.size();
    if (kind == LayerKind::relu) {
        for (int64_t i = 0; i < n; ++i) {
            double v;
            do {
                v = rng.uniform(-1.0, 1.0);
            } while (std::fabs(v) <= 1e-3);
            x[i] = v;
        }
    } else if (kind == LayerKind::maxpool) {
        std::vector<int64_t> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), int64_t{0});
        rng.shuffle(order);
        for (int64_t i = 0; i < n; ++i)
            x[i] = -1.0 + 2.0 * (static_cast<double>(order[static_cast<size_t>(i)]) + 0.5) /
                              static_cast<double>(n);
    } else {
        for (int64_t i = 0; i < n; ++i) x[i] = rng.uniform(-1.0, 1.0);
    }
    return x;
}

GradCheckReport gradient_check(const LayerT<double>& layer, const Shape& input_shape,
                               uint64_t seed) {
    SeededRng rng(seed);
    TensorD x = gradcheck_input(layer.kind, input_shape, rng);

    // dropout redraws its mask each call, so every evaluation reseeds the
    // mask stream identically to keep the function under test fixed
    const uint64_t mask_seed = seed ^ 0x6a09e667f3bcc909ull;
    auto run = [&](const TensorD& xi, const LayerT<double>& li, LayerCacheT<double>* cache) {
        SeededRng mask_rng(mask_seed);
        return forward(li, xi, Mode::train, &mask_rng, cache);
    };

    LayerCacheT<double> cache;
    TensorD y = run(x, layer, &cache);
    TensorD u(y.shape());
    for (int64_t i = 0; i < u.size(); ++i) u[i] = rng.uniform(-1.0, 1.0);

    auto loss = [&](const TensorD& xi, const LayerT<double>& li) {
        TensorD o = run(xi, li, nullptr);
        double s = 0.0;
        for (int64_t i = 0; i < o.size(); ++i) s += o[i] * u[i];
        return s;
    };

    GradientBundleT<double> g = backward(layer, cache, u);

    GradCheckReport rep;
    auto fd_against = [&](const TensorD& analytic, auto&& loss_at) {
        for (int64_t i = 0; i < analytic.size(); ++i) {
            const double num = (loss_at(i, kStep) - loss_at(i, -kStep)) / (2.0 * kStep);
            rep.max_rel_err = std::max(rep.max_rel_err, rel_err(analytic[i], num));
            ++rep.checked;
        }
    };

    fd_against(g.input, [&](int64_t i, double d) {
        TensorD xi = x;
        xi[i] += d;
        return loss(xi, layer);
    });
    if (!g.weights.empty())
        fd_against(g.weights, [&](int64_t i, double d) {
            LayerT<double> li = layer;
            li.weights[i] += d;
            return loss(x, li);
        });
    if (!g.bias.empty())
        fd_against(g.bias, [&](int64_t i, double d) {
            LayerT<double> li = layer;
            li.bias[i] += d;
            return loss(x, li);
        });
    return rep;
}

GradCheckReport gradient_check_concat(const Shape& a_shape, int64_t b_channels, uint64_t seed) {
    SeededRng rng(seed);
    Shape b_shape = a_shape;
    b_shape.back() = b_channels;
    TensorD a(a_shape), b(b_shape);
    for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-1.0, 1.0);
    for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-1.0, 1.0);

    TensorD y = concat_forward(a, b);
    TensorD u(y.shape());
    for (int64_t i = 0; i < u.size(); ++i) u[i] = rng.uniform(-1.0, 1.0);

    auto loss = [&](const TensorD& ai, const TensorD& bi) {
        TensorD o = concat_forward(ai, bi);
        double s = 0.0;
        for (int64_t i = 0; i < o.size(); ++i) s += o[i] * u[i];
        return s;
    };

    auto [da, db] = concat_backward(u, a_shape.back());

    GradCheckReport rep;
    for (int64_t i = 0; i < a.size(); ++i) {
        TensorD ap = a, am = a;
        ap[i] += kStep;
        am[i] -= kStep;
        const double num = (loss(ap, b) - loss(am, b)) / (2.0 * kStep);
        rep.max_rel_err = std::max(rep.max_rel_err, rel_err(da[i], num));
        ++rep.checked;
    }
    for (int64_t i = 0; i < b.size(); ++i) {
        TensorD bp = b, bm = b;
        bp[i] += kStep;
        bm[i] -= kStep;
        const double num = (loss(a, bp) - loss(a, bm)) / (2.0 * kStep);
        rep.max_rel_err = std::max(rep.max_rel_err, rel_err(db[i], num));
        ++rep.checked;
    }
    return rep;
}

}  // namespace aggronet
