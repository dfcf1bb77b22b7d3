#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <cmath>

#include "aggronet/layers.hpp"
#include "aggronet/sha256.hpp"
#include "aggronet/train.hpp"
#include "test_util.hpp"

using namespace aggronet;

namespace {

std::string param_hash(const Model& m) {
    Sha256 h;
    for (const Layer* l : layer_walk(m)) {
        h.update(l->weights.data(), sizeof(float) * static_cast<size_t>(l->weights.size()));
        h.update(l->bias.data(), sizeof(float) * static_cast<size_t>(l->bias.size()));
    }
    return h.hex_digest();
}

HybridSpec tiny_spec() {
    HybridSpec s;
    s.input_h = s.input_w = 16;
    s.class_count = 3;
    s.backbone_a.family = BackboneFamily::vgg_style;
    s.backbone_a.vgg_blocks = {{1, 4}};
    s.backbone_b.family = BackboneFamily::inception_style;
    s.backbone_b.stem_channels = 4;
    s.backbone_b.inception_blocks = {{2, 2, 4, 2, 2, 2}};
    s.head = {16, 3};
    s.dropout_rate = 0.25;
    return s;
}

}  // namespace

TEST_CASE("step decay schedule") {
    TrainConfig cfg;
    cfg.base_lr = 1e-3;
    CHECK(lr_at(0, cfg) == 1e-3);
    CHECK(lr_at(4, cfg) == 1e-3);
    CHECK(lr_at(5, cfg) == 5e-4);
    CHECK(lr_at(12, cfg) == 1e-3 * 0.25);
    for (int e = 1; e < 40; ++e) CHECK(lr_at(e, cfg) <= lr_at(e - 1, cfg));
    CHECK_THROWS_AS(lr_at(-1, cfg), ConfigError);

    cfg.schedule.gamma = 1.0;
    CHECK(lr_at(30, cfg) == 1e-3);
}

TEST_CASE("train config validation names the field") {
    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_WITH_AS(validate_train_config(bad), doctest::Contains("batch_size"), ConfigError);
    bad = TrainConfig{};
    bad.epochs = -1;
    CHECK_THROWS_WITH_AS(validate_train_config(bad), doctest::Contains("epochs"), ConfigError);
    bad = TrainConfig{};
    bad.base_lr = 0.0;
    CHECK_THROWS_WITH_AS(validate_train_config(bad), doctest::Contains("base_lr"), ConfigError);
    bad = TrainConfig{};
    bad.schedule.gamma = 1.5;
    CHECK_THROWS_WITH_AS(validate_train_config(bad), doctest::Contains("gamma"), ConfigError);
    bad = TrainConfig{};
    bad.schedule.step_epochs = 0;
    CHECK_THROWS_WITH_AS(validate_train_config(bad), doctest::Contains("step_epochs"),
                         ConfigError);
    CHECK_NOTHROW(validate_train_config(TrainConfig{}));
}

TEST_CASE("cross entropy endpoints") {
    // perfect prediction
    TensorD perfect({3, 4});
    std::vector<int> y = {1, 0, 3};
    for (int64_t i = 0; i < 3; ++i) perfect(i, y[static_cast<size_t>(i)]) = 1.0;
    CHECK(sparse_ce_loss(perfect, y).loss == doctest::Approx(0.0).epsilon(1e-9));

    // uniform over 8 classes
    TensorD uniform = TensorD::full({5, 8}, 1.0 / 8.0);
    std::vector<int> labels = {0, 7, 3, 2, 5};
    CHECK(sparse_ce_loss(uniform, labels).loss == doctest::Approx(std::log(8.0)).epsilon(1e-9));
}

TEST_CASE("cross entropy matches the direct formula and rejects bad labels") {
    SeededRng rng(40);
    TensorD logits = tu::random_tensor<double>({6, 5}, rng, -3, 3);
    TensorD probs = softmax(logits);
    std::vector<int> labels;
    for (int i = 0; i < 6; ++i) labels.push_back(static_cast<int>(rng.below(5)));

    double want = 0.0;
    for (int64_t i = 0; i < 6; ++i)
        want -= std::log(probs(i, labels[static_cast<size_t>(i)]) + 1e-12);
    want /= 6.0;
    CeResult<double> r = sparse_ce_loss(probs, labels);
    CHECK(r.loss == doctest::Approx(want).epsilon(1e-12));

    for (int64_t i = 0; i < 6; ++i)
        for (int64_t k = 0; k < 5; ++k) {
            const double onehot = labels[static_cast<size_t>(i)] == k ? 1.0 : 0.0;
            CHECK(r.grad_logits(i, k) == doctest::Approx((probs(i, k) - onehot) / 6.0));
        }

    CHECK_THROWS_AS(sparse_ce_loss(probs, std::vector<int>{0, 1, 2, 3, 4, 5}), ShapeError);
    CHECK_THROWS_AS(sparse_ce_loss(probs, std::vector<int>{0, 1, 2, 3, -1, 0}), ShapeError);
    CHECK_THROWS_AS(sparse_ce_loss(probs, std::vector<int>{0, 1}), ShapeError);
}

TEST_CASE("cross entropy gradient matches finite differences through softmax") {
    for (uint64_t seed = 50; seed < 56; ++seed) {
        SeededRng rng(seed);
        TensorD z = tu::random_tensor<double>({4, 6}, rng, -2, 2);
        std::vector<int> labels;
        for (int i = 0; i < 4; ++i) labels.push_back(static_cast<int>(rng.below(6)));

        CeResult<double> analytic = sparse_ce_loss(softmax(z), labels);
        const double step = 1e-5;
        double worst = 0.0;
        for (int64_t i = 0; i < z.size(); ++i) {
            TensorD zp = z, zm = z;
            zp[i] += step;
            zm[i] -= step;
            const double numeric = (sparse_ce_loss(softmax(zp), labels).loss -
                                    sparse_ce_loss(softmax(zm), labels).loss) /
                                   (2.0 * step);
            worst = std::max(worst, tu::rel_err(analytic.grad_logits[i], numeric));
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("adam leaves parameters alone on zero gradients") {
    SeededRng rng(60);
    Tensor param = tu::random_tensor<float>({3, 5}, rng);
    const Tensor before = param;
    Tensor zero(param.shape());
    TensorD m(param.shape()), v(param.shape());
    for (int64_t t = 1; t <= 5; ++t) adam_update_tensor(param, zero, m, v, t, 0.9, 0.999, 1e-7, 0.1);
    CHECK(param == before);
}

TEST_CASE("adam first step has magnitude ~lr") {
    SeededRng rng(61);
    Tensor param = tu::random_tensor<float>({4, 4}, rng);
    const Tensor before = param;
    Tensor grad({4, 4});
    for (int64_t i = 0; i < grad.size(); ++i) {
        const double u = rng.uniform(-1.0, 1.0);
        grad[i] = static_cast<float>((u < 0 ? -1.0 : 1.0) * (1e-3 + std::fabs(u)));
    }
    TensorD m(param.shape()), v(param.shape());
    const double lr = 1e-3;
    adam_update_tensor(param, grad, m, v, 1, 0.9, 0.999, 1e-7, lr);
    // params are float, so the measured delta carries ~1 ulp of the param value
    const double ulp_slack = 5e-7;
    for (int64_t i = 0; i < param.size(); ++i) {
        const double delta = std::fabs(static_cast<double>(param[i]) - before[i]);
        CHECK(delta >= lr * 0.99 - ulp_slack);
        CHECK(delta <= lr * 1.0 + ulp_slack);
    }
}

TEST_CASE("adam trajectory matches a scalar recurrence oracle") {
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-7, curvature = 0.7;
    Tensor param({1});
    param[0] = 1.5f;
    TensorD m({1}), v({1});

    float xo = 1.5f;
    double mo = 0.0, vo = 0.0;
    for (int64_t t = 1; t <= 10; ++t) {
        Tensor grad({1});
        grad[0] = static_cast<float>(curvature * static_cast<double>(param[0]));
        adam_update_tensor(param, grad, m, v, t, b1, b2, eps, lr);

        const double g = curvature * static_cast<double>(xo);
        mo = b1 * mo + (1.0 - b1) * static_cast<float>(g);
        vo = b2 * vo + (1.0 - b2) * static_cast<double>(static_cast<float>(g)) *
                           static_cast<double>(static_cast<float>(g));
        const double m_hat = mo / (1.0 - std::pow(b1, static_cast<double>(t)));
        const double v_hat = vo / (1.0 - std::pow(b2, static_cast<double>(t)));
        xo = static_cast<float>(static_cast<double>(xo) - lr * m_hat / (std::sqrt(v_hat) + eps));

        CHECK(param[0] == doctest::Approx(xo).epsilon(1e-9));
    }
    CHECK(std::fabs(param[0]) < 1.5f);  // quadratic pulls toward zero

    Tensor bad({2});
    TensorD m2({1}), v2({1});
    CHECK_THROWS_AS(adam_update_tensor(param, bad, m2, v2, 1, b1, b2, eps, lr), ShapeError);
}

TEST_CASE("adam_step skips frozen layers and keeps them bit-identical") {
    HybridSpec spec = tiny_spec();
    spec.freeze = {"backbone_a/*"};
    Model m = build(spec, 70);
    AdamState st = make_adam_state(m);

    SeededRng rng(71);
    Tensor batch = tu::random_tensor<float>({4, 16, 16, 3}, rng, 0, 1);
    SeededRng drop(1);
    ForwardTrace trace;
    Tensor probs = forward_hybrid(m, batch, Mode::train, &drop, &trace);
    CeResult<float> ce = sparse_ce_loss(probs, {0, 1, 2, 0});
    auto grads = backward_hybrid(m, trace, ce.grad_logits);

    std::vector<Tensor> frozen_before, live_before;
    for (const Layer* l : layer_walk(m))
        if (!l->weights.empty())
            (l->trainable ? live_before : frozen_before).push_back(l->weights);

    adam_step(m, grads, st, 1e-3);
    CHECK(st.t == 1);

    size_t fi = 0, li = 0;
    bool any_live_changed = false;
    for (const Layer* l : layer_walk(m)) {
        if (l->weights.empty()) continue;
        if (l->trainable) {
            if (!(l->weights == live_before[li++])) any_live_changed = true;
        } else {
            CHECK(l->weights == frozen_before[fi++]);
        }
    }
    CHECK(any_live_changed);
}

TEST_CASE("split partitions exactly, disjointly, exhaustively") {
    SplitAssignment s = split(4525, {3162, 902, 461}, 9);
    CHECK(s.train.size() == 3162);
    CHECK(s.val.size() == 902);
    CHECK(s.test.size() == 461);
    std::vector<int> seen(4525, 0);
    for (int64_t i : s.train) seen[static_cast<size_t>(i)]++;
    for (int64_t i : s.val) seen[static_cast<size_t>(i)]++;
    for (int64_t i : s.test) seen[static_cast<size_t>(i)]++;
    for (int v : seen) CHECK(v == 1);

    SplitAssignment small = split(10, {7, 2, 1}, 3);
    CHECK(small.train.size() == 7);
    CHECK(small.val.size() == 2);
    CHECK(small.test.size() == 1);
    std::vector<int> seen10(10, 0);
    for (int64_t i : small.train) seen10[static_cast<size_t>(i)]++;
    for (int64_t i : small.val) seen10[static_cast<size_t>(i)]++;
    for (int64_t i : small.test) seen10[static_cast<size_t>(i)]++;
    for (int v : seen10) CHECK(v == 1);
    for (int64_t i = 0; i < 10; ++i)
        CHECK(small.labels[static_cast<size_t>(i)] ==
              (std::find(small.train.begin(), small.train.end(), i) != small.train.end()
                   ? Partition::train
               : std::find(small.val.begin(), small.val.end(), i) != small.val.end()
                   ? Partition::val
                   : Partition::test));

    SplitAssignment a = split(100, {60, 20, 20}, 5), b = split(100, {60, 20, 20}, 5);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    SplitAssignment c = split(100, {60, 20, 20}, 6);
    CHECK_FALSE(a.train == c.train);

    CHECK_THROWS_AS(split(10, {7, 2, 2}, 1), ConfigError);
    CHECK_THROWS_AS(split(10, {-1, 10, 1}, 1), ConfigError);
}

TEST_CASE("history serialization") {
    History h;
    TrainConfig cfg;
    for (int e = 0; e < 3; ++e) {
        h.train_loss.push_back(1.0 / (e + 1));
        h.train_acc.push_back(0.5 + 0.1 * e);
        h.val_loss.push_back(2.0 / (e + 1));
        h.val_acc.push_back(0.4 + 0.1 * e);
        h.lr.push_back(lr_at(e, cfg));
    }
    const std::string csv = history_csv_text(h);
    CHECK(csv.starts_with("epoch,train_loss,train_acc,val_loss,val_acc,lr\n"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("\n0,1,0.5,2,0.4,0.001\n") != std::string::npos);

    auto j = nlohmann::json::parse(history_json_text(h));
    CHECK(j["train_loss"].size() == 3);
    CHECK(j["val_acc"][2].get<double>() == doctest::Approx(0.6));
    CHECK(j["lr"][0].get<double>() == 0.001);
}

TEST_CASE("evaluate breaks argmax ties toward the lowest class") {
    Model m = build(tiny_spec(), 80);
    for (Layer* l : layer_walk(m))
        if (l->name.starts_with("head/") && !l->weights.empty()) {
            l->weights.fill(0.0f);
            l->bias.fill(0.0f);
        }
    SeededRng rng(81);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
        images.push_back(tu::random_tensor<float>({16, 16, 3}, rng, 0, 1));
        labels.push_back(static_cast<int>(rng.below(3)));
    }
    std::vector<int64_t> all(12);
    std::iota(all.begin(), all.end(), 0);
    EvalResult r = evaluate(m, images, labels, all, 5);
    for (int p : r.predictions) CHECK(p == 0);
    const double freq0 =
        static_cast<double>(std::count(labels.begin(), labels.end(), 0)) / 12.0;
    CHECK(r.accuracy == doctest::Approx(freq0));
    CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-5));
}

TEST_CASE("evaluate accuracy equals a recount from its own outputs") {
    Model m = build(tiny_spec(), 82);
    SeededRng rng(83);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) {
        images.push_back(tu::random_tensor<float>({16, 16, 3}, rng, 0, 1));
        labels.push_back(static_cast<int>(rng.below(3)));
    }
    std::vector<int64_t> idx;
    for (int64_t i = 0; i < 50; i += 2) idx.push_back(i);  // a proper subset
    EvalResult r = evaluate(m, images, labels, idx, 7);
    CHECK(r.scores.shape() == Shape{25, 3});
    CHECK(r.predictions.size() == 25);

    int64_t correct = 0;
    double loss = 0.0;
    for (size_t i = 0; i < idx.size(); ++i) {
        int best = 0;
        for (int64_t k = 1; k < 3; ++k)
            if (r.scores(static_cast<int64_t>(i), k) > r.scores(static_cast<int64_t>(i), best))
                best = static_cast<int>(k);
        CHECK(best == r.predictions[i]);
        if (best == labels[static_cast<size_t>(idx[i])]) ++correct;
        loss -= std::log(static_cast<double>(
                    r.scores(static_cast<int64_t>(i), labels[static_cast<size_t>(idx[i])])) +
                1e-12);
    }
    CHECK(r.accuracy == doctest::Approx(static_cast<double>(correct) / 25.0));
    CHECK(r.loss == doctest::Approx(loss / 25.0).epsilon(1e-12));

    CHECK_THROWS_AS(evaluate(m, images, labels, {}, 7), ConfigError);
}

TEST_CASE("zero epochs is a no-op") {
    Model m = build(tiny_spec(), 90);
    const std::string before = param_hash(m);
    Dataset ds = synth_dataset(4, 3, 16, 91);
    std::vector<Tensor> images = prepare_images(ds, 16, 16);
    SplitAssignment s = split(12, {8, 2, 2}, 92);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.batch_size = 4;
    History h = train_loop(m, images, ds.labels, s, cfg);
    CHECK(h.epochs() == 0);
    CHECK(param_hash(m) == before);
}

TEST_CASE("training with every layer frozen changes nothing but still logs") {
    HybridSpec spec = tiny_spec();
    spec.freeze = {"*"};
    Model m = build(spec, 93);
    const std::string before = param_hash(m);

    Dataset ds = synth_dataset(6, 3, 16, 94);
    std::vector<Tensor> images = prepare_images(ds, 16, 16);
    SplitAssignment s = split(18, {12, 3, 3}, 95);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 6;
    cfg.seed = 96;
    History h = train_loop(m, images, ds.labels, s, cfg);
    CHECK(h.epochs() == 3);
    CHECK(param_hash(m) == before);
    for (int64_t e = 0; e < 3; ++e) {
        CHECK(h.lr[static_cast<size_t>(e)] == lr_at(static_cast<int>(e), cfg));
        CHECK(h.train_acc[static_cast<size_t>(e)] >= 0.0);
        CHECK(h.train_acc[static_cast<size_t>(e)] <= 1.0);
        CHECK(h.val_acc[static_cast<size_t>(e)] >= 0.0);
        CHECK(h.val_acc[static_cast<size_t>(e)] <= 1.0);
    }
}

TEST_CASE("training is deterministic given the seed") {
    Dataset ds = synth_dataset(8, 3, 16, 100);
    std::vector<Tensor> images = prepare_images(ds, 16, 16);
    SplitAssignment s = split(24, {16, 4, 4}, 101);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 102;

    Model m1 = build(tiny_spec(), 103);
    History h1 = train_loop(m1, images, ds.labels, s, cfg);
    Model m2 = build(tiny_spec(), 103);
    History h2 = train_loop(m2, images, ds.labels, s, cfg);

    CHECK(param_hash(m1) == param_hash(m2));
    CHECK(h1.train_loss == h2.train_loss);
    CHECK(h1.train_acc == h2.train_acc);
    CHECK(h1.val_loss == h2.val_loss);
    CHECK(h1.val_acc == h2.val_acc);
    CHECK(history_csv_text(h1) == history_csv_text(h2));
}

TEST_CASE("a short run on separable data beats chance") {
    Dataset ds = synth_dataset(30, 3, 16, 42);
    std::vector<Tensor> images = prepare_images(ds, 16, 16);
    SplitAssignment s = split(90, {60, 15, 15}, 42);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 16;
    cfg.seed = 42;
    // only 4 steps per epoch at this scale, so the default lr moves too little
    cfg.base_lr = 1e-2;

    Model m = build(tiny_spec(), 42);
    History h = train_loop(m, images, ds.labels, s, cfg);
    CHECK(h.epochs() == 8);
    CHECK(h.val_acc.back() >= 0.5);  // chance is 1/3
    EvalResult test = evaluate(m, images, ds.labels, s.test, cfg.batch_size);
    INFO("test accuracy ", test.accuracy);
    CHECK(test.accuracy > 1.0 / 3.0);
}

TEST_CASE("divergence aborts with the epoch and batch named") {
    Dataset ds = synth_dataset(8, 3, 16, 110);
    std::vector<Tensor> images = prepare_images(ds, 16, 16);
    SplitAssignment s = split(24, {16, 4, 4}, 111);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;  // two batches per epoch: the blow-up hits batch 1
    cfg.base_lr = 1e30;
    cfg.seed = 112;

    Model m = build(tiny_spec(), 113);
    CHECK_THROWS_WITH_AS(train_loop(m, images, ds.labels, s, cfg),
                         doctest::Contains("epoch"), NumericError);
}

TEST_CASE("train_loop validates its inputs") {
    Dataset ds = synth_dataset(4, 3, 16, 120);
    std::vector<Tensor> images = prepare_images(ds, 16, 16);
    Model m = build(tiny_spec(), 121);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4;

    SplitAssignment no_train = split(12, {0, 8, 4}, 1);
    CHECK_THROWS_WITH_AS(train_loop(m, images, ds.labels, no_train, cfg),
                         doctest::Contains("training split"), ConfigError);
    SplitAssignment no_val = split(12, {12, 0, 0}, 1);
    CHECK_THROWS_WITH_AS(train_loop(m, images, ds.labels, no_val, cfg),
                         doctest::Contains("validation split"), ConfigError);
    SplitAssignment ok = split(12, {8, 2, 2}, 1);
    cfg.batch_size = 9;
    CHECK_THROWS_WITH_AS(train_loop(m, images, ds.labels, ok, cfg),
                         doctest::Contains("exceeds"), ConfigError);
    SplitAssignment wrong_n = split(10, {8, 1, 1}, 1);
    cfg.batch_size = 4;
    CHECK_THROWS_AS(train_loop(m, images, ds.labels, wrong_n, cfg), ConfigError);
}
