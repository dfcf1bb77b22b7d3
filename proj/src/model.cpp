#include "aggronet/model.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "aggronet/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written as raw little-endian float32");

namespace aggronet {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

HybridSpec default_desk_spec() {
    HybridSpec s;
    s.input_h = 32;
    s.input_w = 32;
    s.class_count = 8;
    s.backbone_a.family = BackboneFamily::vgg_style;
    s.backbone_a.vgg_blocks = {{2, 8}, {2, 16}};
    s.backbone_b.family = BackboneFamily::inception_style;
    s.backbone_b.stem_channels = 8;
    s.backbone_b.inception_blocks = {InceptionWidths{8, 8, 16, 4, 8, 8}};
    s.head = {64, 8};
    s.dropout_rate = 0.5;
    return s;
}

bool glob_match(const std::string& pattern, const std::string& name) {
    size_t p = 0, n = 0;
    size_t star = std::string::npos, mark = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

void validate_spec(const HybridSpec& s) {
    if (s.class_count < 2)
        throw ConfigError("model.class_count: must be >= 2, got " + std::to_string(s.class_count));
    if (s.input_h < 1 || s.input_w < 1)
        throw ConfigError("model.input_size: must be positive, got " + std::to_string(s.input_h) +
                          "x" + std::to_string(s.input_w));
    if (s.head.empty()) throw ConfigError("model.head: must list at least the output width");
    for (int64_t w : s.head)
        if (w < 1) throw ConfigError("model.head: widths must be positive, got " + std::to_string(w));
    if (s.head.back() != s.class_count)
        throw ConfigError("model.head: last width " + std::to_string(s.head.back()) +
                          " must equal class_count " + std::to_string(s.class_count));
    if (!(s.dropout_rate >= 0.0 && s.dropout_rate < 1.0))
        throw ConfigError("model.dropout_rate: must be in [0, 1), got " +
                          std::to_string(s.dropout_rate));
    if (s.backbone_a.family != BackboneFamily::vgg_style)
        throw ConfigError("model.backbone_a: must be vgg_style");
    if (s.backbone_b.family != BackboneFamily::inception_style)
        throw ConfigError("model.backbone_b: must be inception_style");
    if (s.backbone_a.vgg_blocks.empty())
        throw ConfigError("model.backbone_a: needs at least one block");
    for (const VggBlock& b : s.backbone_a.vgg_blocks)
        if (b.conv_count < 1 || b.channels < 1)
            throw ConfigError("model.backbone_a: block fields must be positive");
    const int64_t div = int64_t{1} << s.backbone_a.vgg_blocks.size();
    if (s.input_h % div != 0 || s.input_w % div != 0)
        throw ConfigError("model.input_size: " + std::to_string(s.input_h) + "x" +
                          std::to_string(s.input_w) + " not divisible by 2^" +
                          std::to_string(s.backbone_a.vgg_blocks.size()) + " = " +
                          std::to_string(div) + " required by the pooling stack");
    if (s.backbone_b.stem_channels < 1)
        throw ConfigError("model.backbone_b.stem_channels: must be positive");
    for (const InceptionWidths& w : s.backbone_b.inception_blocks)
        if (w.b1x1 < 1 || w.b3x3_reduce < 1 || w.b3x3 < 1 || w.b5x5_reduce < 1 || w.b5x5 < 1 ||
            w.pool_proj < 1)
            throw ConfigError("model.backbone_b: inception widths must be positive");
}

namespace {

Tensor he_uniform(Shape shape, int64_t fan_in, SeededRng& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(-limit, limit));
    return t;
}

Layer conv_layer(std::string name, int64_t kh, int64_t kw, int64_t c_in, int64_t c_out,
                 int64_t stride, Padding pad, SeededRng& rng) {
    return make_conv<float>(std::move(name), he_uniform({kh, kw, c_in, c_out}, kh * kw * c_in, rng),
                            Tensor({c_out}), stride, pad);
}

Layer dense_layer(std::string name, int64_t in, int64_t out, SeededRng& rng) {
    return make_dense<float>(std::move(name), he_uniform({in, out}, in, rng), Tensor({out}));
}

Tensor seq_forward(const std::vector<Layer>& layers, Tensor x, Mode mode, SeededRng* rng,
                   std::vector<LayerCacheT<float>>* caches) {
    if (caches) caches->resize(layers.size());
    for (size_t i = 0; i < layers.size(); ++i)
        x = forward(layers[i], x, mode, rng, caches ? &(*caches)[i] : nullptr);
    return x;
}

Tensor seq_backward(const std::vector<Layer>& layers, const std::vector<LayerCacheT<float>>& caches,
                    Tensor up, std::vector<LayerGrads>& grads, size_t skip_tail = 0) {
    for (size_t i = layers.size() - skip_tail; i-- > 0;) {
        GradientBundleT<float> g = backward(layers[i], caches[i], up);
        if (!g.weights.empty()) grads[static_cast<size_t>(layers[i].id)].weights = std::move(g.weights);
        if (!g.bias.empty()) grads[static_cast<size_t>(layers[i].id)].bias = std::move(g.bias);
        up = std::move(g.input);
    }
    return up;
}

template <typename ModelLike, typename LayerLike>
std::vector<LayerLike*> walk_impl(ModelLike& m) {
    std::vector<LayerLike*> out;
    for (auto& l : m.backbone_a) out.push_back(&l);
    for (auto& l : m.stem) out.push_back(&l);
    for (auto& blk : m.inception) {
        for (auto& l : blk.b1) out.push_back(&l);
        for (auto& l : blk.b3) out.push_back(&l);
        for (auto& l : blk.b5) out.push_back(&l);
        for (auto& l : blk.pool) out.push_back(&l);
    }
    for (auto& l : m.head) out.push_back(&l);
    return out;
}

}  // namespace

std::vector<Layer*> layer_walk(Model& m) { return walk_impl<Model, Layer>(m); }
std::vector<const Layer*> layer_walk(const Model& m) { return walk_impl<const Model, const Layer>(m); }

InceptionBlockLayers make_inception_block(const std::string& prefix, int64_t c_in,
                                          const InceptionWidths& w, SeededRng& rng) {
    InceptionBlockLayers blk;
    blk.b1.push_back(conv_layer(prefix + "/b1x1", 1, 1, c_in, w.b1x1, 1, Padding::same, rng));
    blk.b1.push_back(make_relu<float>(prefix + "/b1x1_relu"));

    blk.b3.push_back(conv_layer(prefix + "/b3x3_reduce", 1, 1, c_in, w.b3x3_reduce, 1, Padding::same, rng));
    blk.b3.push_back(make_relu<float>(prefix + "/b3x3_reduce_relu"));
    blk.b3.push_back(conv_layer(prefix + "/b3x3", 3, 3, w.b3x3_reduce, w.b3x3, 1, Padding::same, rng));
    blk.b3.push_back(make_relu<float>(prefix + "/b3x3_relu"));

    blk.b5.push_back(conv_layer(prefix + "/b5x5_reduce", 1, 1, c_in, w.b5x5_reduce, 1, Padding::same, rng));
    blk.b5.push_back(make_relu<float>(prefix + "/b5x5_reduce_relu"));
    blk.b5.push_back(conv_layer(prefix + "/b5x5", 5, 5, w.b5x5_reduce, w.b5x5, 1, Padding::same, rng));
    blk.b5.push_back(make_relu<float>(prefix + "/b5x5_relu"));

    blk.pool.push_back(make_maxpool<float>(prefix + "/pool", 3, 1, Padding::same));
    blk.pool.push_back(conv_layer(prefix + "/pool_proj", 1, 1, c_in, w.pool_proj, 1, Padding::same, rng));
    blk.pool.push_back(make_relu<float>(prefix + "/pool_proj_relu"));
    return blk;
}

Tensor inception_forward(const InceptionBlockLayers& blk, const Tensor& x, Mode mode,
                         SeededRng* rng, InceptionTrace* trace) {
    if (x.rank() != 4 || x.dim(1) < 5 || x.dim(2) < 5)
        throw ShapeError("inception block: spatial size must be >= 5 for the 5x5 branch, got " +
                         shape_str(x.shape()));
    Tensor o1 = seq_forward(blk.b1, x, mode, rng, trace ? &trace->b1 : nullptr);
    Tensor o3 = seq_forward(blk.b3, x, mode, rng, trace ? &trace->b3 : nullptr);
    Tensor o5 = seq_forward(blk.b5, x, mode, rng, trace ? &trace->b5 : nullptr);
    Tensor op = seq_forward(blk.pool, x, mode, rng, trace ? &trace->pool : nullptr);
    if (trace) trace->widths = {o1.dim(3), o3.dim(3), o5.dim(3), op.dim(3)};
    return concat_channels(concat_channels(o1, o3), concat_channels(o5, op));
}

namespace {

Tensor inception_backward(const InceptionBlockLayers& blk, const InceptionTrace& tr,
                          const Tensor& up, std::vector<LayerGrads>& grads) {
    const int64_t w1 = tr.widths[0], w3 = tr.widths[1], w5 = tr.widths[2], wp = tr.widths[3];
    Tensor dx = seq_backward(blk.b1, tr.b1, slice_channels(up, 0, w1), grads);
    dx = add(dx, seq_backward(blk.b3, tr.b3, slice_channels(up, w1, w1 + w3), grads));
    dx = add(dx, seq_backward(blk.b5, tr.b5, slice_channels(up, w1 + w3, w1 + w3 + w5), grads));
    dx = add(dx, seq_backward(blk.pool, tr.pool,
                              slice_channels(up, w1 + w3 + w5, w1 + w3 + w5 + wp), grads));
    return dx;
}

}  // namespace

Model build(const HybridSpec& spec, uint64_t seed, std::vector<std::string> class_names) {
    validate_spec(spec);
    if (class_names.empty())
        for (int64_t k = 0; k < spec.class_count; ++k)
            class_names.push_back("class_" + std::to_string(k));
    if (static_cast<int64_t>(class_names.size()) != spec.class_count)
        throw ConfigError("model: class-name table has " + std::to_string(class_names.size()) +
                          " entries, class_count is " + std::to_string(spec.class_count));

    Model m;
    m.spec = spec;
    m.class_names = std::move(class_names);
    SeededRng rng(seed);

    int64_t c = 3;
    for (size_t bi = 0; bi < spec.backbone_a.vgg_blocks.size(); ++bi) {
        const VggBlock& b = spec.backbone_a.vgg_blocks[bi];
        const std::string base = "backbone_a/block" + std::to_string(bi);
        for (int64_t j = 0; j < b.conv_count; ++j) {
            m.backbone_a.push_back(
                conv_layer(base + "/conv" + std::to_string(j), 3, 3, c, b.channels, 1, Padding::same, rng));
            m.backbone_a.push_back(make_relu<float>(base + "/relu" + std::to_string(j)));
            c = b.channels;
        }
        m.backbone_a.push_back(make_maxpool<float>(base + "/pool", 2, 2));
    }
    m.feat_a = c;

    m.stem.push_back(conv_layer("backbone_b/stem", 3, 3, 3, spec.backbone_b.stem_channels, 2,
                                Padding::same, rng));
    m.stem.push_back(make_relu<float>("backbone_b/stem_relu"));
    int64_t cb = spec.backbone_b.stem_channels;
    const int64_t sh = (spec.input_h + 1) / 2, sw = (spec.input_w + 1) / 2;
    for (size_t k = 0; k < spec.backbone_b.inception_blocks.size(); ++k) {
        if (sh < 5 || sw < 5)
            throw ConfigError("model.backbone_b: inception block input " + std::to_string(sh) + "x" +
                              std::to_string(sw) + " too small for the 5x5 branch (needs >= 5)");
        const InceptionWidths& w = spec.backbone_b.inception_blocks[k];
        m.inception.push_back(make_inception_block("backbone_b/inc" + std::to_string(k), cb, w, rng));
        cb = w.out_channels();
    }
    m.feat_b = cb;

    int64_t in = m.feat_a + m.feat_b;
    for (size_t i = 0; i + 1 < spec.head.size(); ++i) {
        m.head.push_back(dense_layer("head/dense" + std::to_string(i), in, spec.head[i], rng));
        m.head.push_back(make_relu<float>("head/relu" + std::to_string(i)));
        if (spec.dropout_rate > 0.0)
            m.head.push_back(make_dropout<float>("head/dropout" + std::to_string(i), spec.dropout_rate));
        in = spec.head[i];
    }
    m.head.push_back(dense_layer("head/dense_out", in, spec.head.back(), rng));
    m.head.push_back(make_softmax<float>("head/softmax"));

    std::vector<Layer*> walk = layer_walk(m);
    for (size_t i = 0; i < walk.size(); ++i) {
        walk[i]->id = static_cast<int>(i);
        for (const std::string& pat : spec.freeze)
            if (glob_match(pat, walk[i]->name)) walk[i]->trainable = false;
    }

    if (m.head.front().weights.dim(0) != m.feat_a + m.feat_b)
        throw ShapeError("model: head input width " + std::to_string(m.head.front().weights.dim(0)) +
                         " does not equal fused feature width " +
                         std::to_string(m.feat_a + m.feat_b));
    Tensor probe({1, spec.input_h, spec.input_w, 3});
    Tensor probs = forward_hybrid(m, probe, Mode::infer);
    if (probs.shape() != Shape{1, spec.class_count})
        throw ShapeError("model: shape probe produced " + shape_str(probs.shape()) + ", expected " +
                         shape_str({1, spec.class_count}));
    return m;
}

Tensor forward_hybrid(const Model& m, const Tensor& batch, Mode mode, SeededRng* rng,
                      ForwardTrace* trace) {
    if (batch.rank() != 4 || batch.dim(1) != m.spec.input_h || batch.dim(2) != m.spec.input_w ||
        batch.dim(3) != 3)
        throw ShapeError("model: batch shape " + shape_str(batch.shape()) + ", expected " +
                         shape_str({-1, m.spec.input_h, m.spec.input_w, 3}) +
                         " (any batch size)");
    float lo = 0.0f, hi = 1.0f;
    for (int64_t i = 0; i < batch.size(); ++i) {
        lo = std::min(lo, batch[i]);
        hi = std::max(hi, batch[i]);
    }
    if (lo < 0.0f || hi > 1.0f)
        std::fprintf(stderr, "warning: pixel values outside [0,1] (min %g, max %g)\n",
                     static_cast<double>(lo), static_cast<double>(hi));

    Tensor fa = seq_forward(m.backbone_a, batch, mode, rng, trace ? &trace->a_layers : nullptr);
    const Layer gap = make_global_avg_pool<float>("gap");
    Tensor va = forward(gap, fa, mode, nullptr, trace ? &trace->gap_a : nullptr);

    Tensor fb = seq_forward(m.stem, batch, mode, rng, trace ? &trace->stem_layers : nullptr);
    if (trace) trace->inception.resize(m.inception.size());
    for (size_t k = 0; k < m.inception.size(); ++k)
        fb = inception_forward(m.inception[k], fb, mode, rng, trace ? &trace->inception[k] : nullptr);
    Tensor vb = forward(gap, fb, mode, nullptr, trace ? &trace->gap_b : nullptr);

    Tensor fused = concat_forward(va, vb);
    return seq_forward(m.head, fused, mode, rng, trace ? &trace->head_layers : nullptr);
}

std::vector<LayerGrads> backward_hybrid(const Model& m, const ForwardTrace& trace,
                                        const Tensor& grad_logits) {
    if (m.head.empty() || m.head.back().kind != LayerKind::softmax)
        throw Error("model: head does not end in softmax");
    std::vector<LayerGrads> grads(layer_walk(m).size());

    // the loss gradient already accounts for softmax, so it is skipped here
    Tensor dfused = seq_backward(m.head, trace.head_layers, grad_logits, grads, 1);
    auto [dva, dvb] = concat_backward(dfused, m.feat_a);

    const Layer gap = make_global_avg_pool<float>("gap");
    Tensor dfb = backward(gap, trace.gap_b, dvb).input;
    for (size_t k = m.inception.size(); k-- > 0;)
        dfb = inception_backward(m.inception[k], trace.inception[k], dfb, grads);
    seq_backward(m.stem, trace.stem_layers, std::move(dfb), grads);

    Tensor dfa = backward(gap, trace.gap_a, dva).input;
    seq_backward(m.backbone_a, trace.a_layers, std::move(dfa), grads);
    return grads;
}

namespace {

ordered_json spec_to_json(const HybridSpec& s) {
    ordered_json j;
    j["input_h"] = s.input_h;
    j["input_w"] = s.input_w;
    j["class_count"] = s.class_count;
    ordered_json blocks = ordered_json::array();
    for (const VggBlock& b : s.backbone_a.vgg_blocks)
        blocks.push_back(ordered_json::array({b.conv_count, b.channels}));
    j["vgg_blocks"] = std::move(blocks);
    j["stem_channels"] = s.backbone_b.stem_channels;
    ordered_json inc = ordered_json::array();
    for (const InceptionWidths& w : s.backbone_b.inception_blocks)
        inc.push_back(ordered_json::array(
            {w.b1x1, w.b3x3_reduce, w.b3x3, w.b5x5_reduce, w.b5x5, w.pool_proj}));
    j["inception_blocks"] = std::move(inc);
    j["head"] = s.head;
    j["dropout_rate"] = s.dropout_rate;
    j["freeze"] = s.freeze;
    return j;
}

HybridSpec spec_from_json(const ordered_json& j) {
    HybridSpec s;
    try {
        s.input_h = j.at("input_h").get<int64_t>();
        s.input_w = j.at("input_w").get<int64_t>();
        s.class_count = j.at("class_count").get<int64_t>();
        s.backbone_a.family = BackboneFamily::vgg_style;
        s.backbone_a.vgg_blocks.clear();
        for (const auto& b : j.at("vgg_blocks"))
            s.backbone_a.vgg_blocks.push_back({b.at(0).get<int64_t>(), b.at(1).get<int64_t>()});
        s.backbone_b.family = BackboneFamily::inception_style;
        s.backbone_b.stem_channels = j.at("stem_channels").get<int64_t>();
        s.backbone_b.inception_blocks.clear();
        for (const auto& w : j.at("inception_blocks"))
            s.backbone_b.inception_blocks.push_back(
                {w.at(0).get<int64_t>(), w.at(1).get<int64_t>(), w.at(2).get<int64_t>(),
                 w.at(3).get<int64_t>(), w.at(4).get<int64_t>(), w.at(5).get<int64_t>()});
        s.head = j.at("head").get<std::vector<int64_t>>();
        s.dropout_rate = j.at("dropout_rate").get<double>();
        s.freeze = j.at("freeze").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint manifest spec: ") + e.what());
    }
    return s;
}

void atomic_write(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.flush();
        if (!f) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& dir) {
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());

    ordered_json manifest;
    manifest["format_version"] = 1;
    manifest["spec"] = spec_to_json(m.spec);
    manifest["class_names"] = m.class_names;

    std::string blob;
    ordered_json table = ordered_json::array();
    auto append = [&](const std::string& name, const Tensor& t) {
        ordered_json e;
        e["name"] = name;
        e["shape"] = t.shape();
        e["dtype"] = "f32";
        e["byte_offset"] = static_cast<int64_t>(blob.size());
        e["byte_length"] = t.size() * 4;
        table.push_back(std::move(e));
        blob.append(reinterpret_cast<const char*>(t.data()), static_cast<size_t>(t.size()) * 4);
    };
    for (const Layer* l : layer_walk(m)) {
        if (!l->weights.empty()) append(l->name + "/weights", l->weights);
        if (!l->bias.empty()) append(l->name + "/bias", l->bias);
    }
    manifest["tensors"] = std::move(table);

    atomic_write(root / "weights.bin", blob);
    atomic_write(root / "manifest.json", manifest.dump(2) + "\n");
}

Model load_checkpoint(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream mf(root / "manifest.json");
    if (!mf) throw IoError("cannot open checkpoint manifest " + (root / "manifest.json").string());
    ordered_json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
    }

    const int64_t version = manifest.value("format_version", int64_t{-1});
    if (version != 1)
        throw FormatError("unknown checkpoint format version " + std::to_string(version));

    HybridSpec spec;
    std::vector<std::string> names;
    try {
        spec = spec_from_json(manifest.at("spec"));
        names = manifest.at("class_names").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }
    Model m = build(spec, 0, std::move(names));

    std::ifstream wf(root / "weights.bin", std::ios::binary);
    if (!wf) throw IoError("cannot open " + (root / "weights.bin").string());
    std::string blob((std::istreambuf_iterator<char>(wf)), std::istreambuf_iterator<char>());

    std::unordered_map<std::string, Layer*> by_name;
    size_t param_tensors = 0;
    for (Layer* l : layer_walk(m)) {
        by_name[l->name] = l;
        param_tensors += (l->weights.empty() ? 0 : 1) + (l->bias.empty() ? 0 : 1);
    }

    if (!manifest.contains("tensors"))
        throw FormatError("checkpoint manifest has no tensor table");
    const ordered_json& table = manifest.at("tensors");
    if (table.size() != param_tensors)
        throw FormatError("checkpoint tensor table has " + std::to_string(table.size()) +
                          " entries, model needs " + std::to_string(param_tensors));

    int64_t expected_total = 0;
    for (const auto& e : table) {
        try {
            const int64_t off = e.at("byte_offset").get<int64_t>();
            const int64_t len = e.at("byte_length").get<int64_t>();
            expected_total = std::max(expected_total, off + len);
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(std::string("checkpoint tensor table: ") + ex.what());
        }
    }
    if (static_cast<int64_t>(blob.size()) != expected_total)
        throw FormatError("weights.bin holds " + std::to_string(blob.size()) +
                          " bytes, manifest expects " + std::to_string(expected_total));

    for (const auto& e : table) {
        const std::string name = e.at("name").get<std::string>();
        const size_t slash = name.rfind('/');
        const std::string layer_name = slash == std::string::npos ? name : name.substr(0, slash);
        const std::string part = slash == std::string::npos ? "" : name.substr(slash + 1);
        auto it = by_name.find(layer_name);
        if (it == by_name.end() || (part != "weights" && part != "bias"))
            throw FormatError("checkpoint tensor " + name + " does not correspond to any layer");
        Tensor& target = part == "weights" ? it->second->weights : it->second->bias;

        const Shape shape = e.at("shape").get<Shape>();
        if (shape != target.shape())
            throw FormatError("checkpoint tensor " + name + ": manifest shape " + shape_str(shape) +
                              " does not match model shape " + shape_str(target.shape()));
        if (e.at("dtype").get<std::string>() != "f32")
            throw FormatError("checkpoint tensor " + name + ": unsupported dtype " +
                              e.at("dtype").get<std::string>());
        const int64_t off = e.at("byte_offset").get<int64_t>();
        const int64_t len = e.at("byte_length").get<int64_t>();
        if (len != target.size() * 4 || off < 0 || off + len > static_cast<int64_t>(blob.size()))
            throw FormatError("checkpoint tensor " + name + ": byte range [" + std::to_string(off) +
                              ", " + std::to_string(off + len) + ") is invalid");
        std::memcpy(target.data(), blob.data() + off, static_cast<size_t>(len));
    }
    return m;
}

}  // namespace aggronet
