#include "aggronet/runconfig.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "aggronet/error.hpp"

using ordered_json = nlohmann::ordered_json;

namespace aggronet {

RunConfig::RunConfig() : model(default_desk_spec()) {}

namespace {

// Tracks which keys the schema consumed so leftovers can be reported.
struct Reader {
    const toml::Table& t;
    std::set<std::string> used;

    bool has(const std::string& key) {
        if (!t.has(key)) return false;
        used.insert(key);
        return true;
    }
    const toml::Value& at(const std::string& key) { return t.values.at(key); }

    template <typename I>
    void read_int(const std::string& key, I& into) {
        if (!has(key)) return;
        int64_t v = at(key).as_int(key);
        if (v < static_cast<int64_t>(std::numeric_limits<I>::min()) ||
            v > static_cast<int64_t>(std::numeric_limits<I>::max()))
            throw ConfigError(key + ": value " + std::to_string(v) + " is out of range");
        into = static_cast<I>(v);
    }
    void read_float(const std::string& key, double& into) {
        if (has(key)) into = at(key).as_float(key);
    }
    void read_bool(const std::string& key, bool& into) {
        if (has(key)) into = at(key).as_bool(key);
    }
    void read_string(const std::string& key, std::string& into) {
        if (has(key)) into = at(key).as_string(key);
    }

    std::vector<int64_t> int_list(const std::string& key) {
        std::vector<int64_t> out;
        size_t i = 0;
        for (const toml::Value& v : at(key).as_array(key))
            out.push_back(v.as_int(key + "[" + std::to_string(i++) + "]"));
        return out;
    }
    std::vector<std::string> string_list(const std::string& key) {
        std::vector<std::string> out;
        size_t i = 0;
        for (const toml::Value& v : at(key).as_array(key))
            out.push_back(v.as_string(key + "[" + std::to_string(i++) + "]"));
        return out;
    }
    // Array of fixed-width integer rows, e.g. vgg_blocks = [[2, 8], [2, 16]].
    std::vector<std::vector<int64_t>> int_rows(const std::string& key, size_t width) {
        std::vector<std::vector<int64_t>> rows;
        size_t r = 0;
        for (const toml::Value& row : at(key).as_array(key)) {
            std::string rk = key + "[" + std::to_string(r++) + "]";
            std::vector<int64_t> cells;
            size_t c = 0;
            for (const toml::Value& v : row.as_array(rk))
                cells.push_back(v.as_int(rk + "[" + std::to_string(c++) + "]"));
            if (cells.size() != width)
                throw ConfigError(rk + ": expected " + std::to_string(width) + " integers, got " +
                                  std::to_string(cells.size()));
            rows.push_back(std::move(cells));
        }
        return rows;
    }
};

const char* kKnownTables[] = {"data", "data.synth", "data.split", "data.augment",
                              "model", "train", "report"};

}  // namespace

RunConfig run_config_from_toml(const toml::Table& t) {
    RunConfig c;
    Reader r{t, {}};

    if (r.has("seed")) {
        int64_t seed = r.at("seed").as_int("seed");
        if (seed < 0) throw ConfigError("seed: must be >= 0, got " + std::to_string(seed));
        c.seed = static_cast<uint64_t>(seed);
    }
    r.read_string("out", c.out);

    r.read_string("data.path", c.data_path);
    c.use_synth = t.has_table("data.synth");
    r.read_int("data.synth.per_class", c.synth.per_class);
    r.read_int("data.synth.size", c.synth.size);

    bool have_counts = t.has("data.split.train") || t.has("data.split.val") ||
                       t.has("data.split.test");
    bool have_fracs = t.has("data.split.train_frac") || t.has("data.split.val_frac") ||
                      t.has("data.split.test_frac");
    if (have_counts && have_fracs)
        throw ConfigError("data.split: give either counts (train/val/test) or fractions "
                          "(train_frac/val_frac/test_frac), not both");
    if (have_counts) {
        c.split.by_fraction = false;
        c.split.train = c.split.val = c.split.test = 0;
        r.read_int("data.split.train", c.split.train);
        r.read_int("data.split.val", c.split.val);
        r.read_int("data.split.test", c.split.test);
    } else if (have_fracs) {
        c.split.by_fraction = true;
        r.read_float("data.split.train_frac", c.split.train_frac);
        r.read_float("data.split.val_frac", c.split.val_frac);
        r.read_float("data.split.test_frac", c.split.test_frac);
    }

    r.read_float("data.augment.p_hflip", c.augment.p_hflip);
    r.read_float("data.augment.max_rotation_deg", c.augment.max_rotation_deg);
    r.read_float("data.augment.max_zoom", c.augment.max_zoom);

    if (r.has("model.image_size")) {
        int64_t sz = r.at("model.image_size").as_int("model.image_size");
        c.model.input_h = c.model.input_w = sz;
    }
    r.read_int("model.classes", c.model.class_count);
    if (r.has("model.vgg_blocks")) {
        c.model.backbone_a.vgg_blocks.clear();
        for (const auto& row : r.int_rows("model.vgg_blocks", 2))
            c.model.backbone_a.vgg_blocks.push_back({row[0], row[1]});
    }
    r.read_int("model.stem_channels", c.model.backbone_b.stem_channels);
    if (r.has("model.inception_blocks")) {
        c.model.backbone_b.inception_blocks.clear();
        for (const auto& row : r.int_rows("model.inception_blocks", 6))
            c.model.backbone_b.inception_blocks.push_back(
                {row[0], row[1], row[2], row[3], row[4], row[5]});
    }
    if (r.has("model.head")) {
        // Hidden widths only; the class layer is appended.
        c.model.head = r.int_list("model.head");
        c.model.head.push_back(c.model.class_count);
    } else {
        // Keep the default head's final width in step with model.classes.
        if (!c.model.head.empty()) c.model.head.back() = c.model.class_count;
    }
    r.read_float("model.dropout", c.model.dropout_rate);
    if (r.has("model.freeze")) c.model.freeze = r.string_list("model.freeze");

    r.read_int("train.epochs", c.train.epochs);
    r.read_int("train.batch_size", c.train.batch_size);
    r.read_float("train.base_lr", c.train.base_lr);
    r.read_float("train.lr_gamma", c.train.schedule.gamma);
    r.read_int("train.lr_step_epochs", c.train.schedule.step_epochs);
    r.read_bool("train.shuffle", c.train.shuffle);

    r.read_bool("report.svgs", c.svgs);

    c.train.seed = c.seed;

    for (const auto& kv : t.values)
        if (!r.used.count(kv.first)) throw ConfigError("unknown config key '" + kv.first + "'");
    for (const std::string& h : t.headers) {
        bool known = false;
        for (const char* k : kKnownTables)
            if (h == k) known = true;
        if (!known) throw ConfigError("unknown config table [" + h + "]");
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    try {
        return run_config_from_toml(toml::parse_file(path));
    } catch (const IoError& e) {
        // An unreadable --config path is a configuration failure, not an io one.
        throw ConfigError(e.what());
    }
}

void apply_overrides(RunConfig& c, const CliOverrides& o) {
    if (o.seed) {
        c.seed = *o.seed;
        c.train.seed = *o.seed;
    }
    if (o.out) c.out = *o.out;
    if (o.epochs) c.train.epochs = *o.epochs;
    if (o.batch_size) c.train.batch_size = *o.batch_size;
    if (o.base_lr) c.train.base_lr = *o.base_lr;
    if (o.image_size) c.model.input_h = c.model.input_w = *o.image_size;
    if (o.dropout) c.model.dropout_rate = *o.dropout;
}

void validate_run_config(const RunConfig& c, bool require_data) {
    if (!c.data_path.empty() && c.use_synth)
        throw ConfigError("data: give either data.path or a [data.synth] block, not both");
    if (require_data && c.data_path.empty() && !c.use_synth)
        throw ConfigError("data: one of data.path or a [data.synth] block is required");

    if (c.out.empty()) throw ConfigError("out: must not be empty");

    if (c.use_synth) {
        if (c.synth.per_class < 1)
            throw ConfigError("data.synth.per_class: must be >= 1, got " +
                              std::to_string(c.synth.per_class));
        if (c.model.class_count > 8)
            throw ConfigError("model.classes: synthetic data supports at most 8 classes, got " +
                              std::to_string(c.model.class_count));
        int64_t size = resolve_synth_size(c);
        if (size < 8)
            throw ConfigError("data.synth.size: must be >= 8, got " + std::to_string(size));
    }

    if (c.split.by_fraction) {
        double fr[3] = {c.split.train_frac, c.split.val_frac, c.split.test_frac};
        const char* names[3] = {"train_frac", "val_frac", "test_frac"};
        for (int i = 0; i < 3; ++i)
            if (!(fr[i] >= 0.0) || !(fr[i] <= 1.0))
                throw ConfigError(std::string("data.split.") + names[i] +
                                  ": must be in [0, 1], got " + std::to_string(fr[i]));
        double sum = fr[0] + fr[1] + fr[2];
        if (std::fabs(sum - 1.0) > 1e-6)
            throw ConfigError("data.split: fractions sum to " + std::to_string(sum) +
                              ", expected 1");
    } else {
        if (c.split.train < 0 || c.split.val < 0 || c.split.test < 0)
            throw ConfigError("data.split: counts must be >= 0");
    }

    if (c.augment.p_hflip < 0.0 || c.augment.p_hflip > 1.0)
        throw ConfigError("data.augment.p_hflip: must be in [0, 1], got " +
                          std::to_string(c.augment.p_hflip));
    if (c.augment.max_rotation_deg < 0.0 || c.augment.max_rotation_deg > 180.0)
        throw ConfigError("data.augment.max_rotation_deg: must be in [0, 180], got " +
                          std::to_string(c.augment.max_rotation_deg));
    if (c.augment.max_zoom < 0.0 || c.augment.max_zoom >= 1.0)
        throw ConfigError("data.augment.max_zoom: must be in [0, 1), got " +
                          std::to_string(c.augment.max_zoom));

    validate_spec(c.model);
    validate_train_config(c.train);
}

SplitCounts resolve_split(const SplitSpec& s, int64_t n) {
    if (n < 1) throw ConfigError("data.split: dataset is empty");
    if (!s.by_fraction) return {s.train, s.val, s.test};
    int64_t train = static_cast<int64_t>(std::floor(static_cast<double>(n) * s.train_frac));
    int64_t val = static_cast<int64_t>(std::floor(static_cast<double>(n) * s.val_frac));
    int64_t test = n - train - val;
    if (test < 0) throw ConfigError("data.split: fractions overshoot the dataset size");
    return {train, val, test};
}

int64_t resolve_synth_size(const RunConfig& c) {
    return c.synth.size > 0 ? c.synth.size : c.model.input_h;
}

std::string run_config_json(const RunConfig& c) {
    ordered_json j;
    j["seed"] = c.seed;
    j["out"] = c.out;

    ordered_json data;
    data["path"] = c.data_path;
    data["use_synth"] = c.use_synth;
    if (c.use_synth) {
        data["synth"] =
            ordered_json{{"per_class", c.synth.per_class}, {"size", resolve_synth_size(c)}};
    }
    if (c.split.by_fraction) {
        data["split"] = ordered_json{{"train_frac", c.split.train_frac},
                                     {"val_frac", c.split.val_frac},
                                     {"test_frac", c.split.test_frac}};
    } else {
        data["split"] = ordered_json{
            {"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
    }
    data["augment"] = ordered_json{{"p_hflip", c.augment.p_hflip},
                                   {"max_rotation_deg", c.augment.max_rotation_deg},
                                   {"max_zoom", c.augment.max_zoom}};
    j["data"] = std::move(data);

    ordered_json model;
    model["image_size"] = c.model.input_h;
    model["classes"] = c.model.class_count;
    ordered_json vgg = ordered_json::array();
    for (const VggBlock& b : c.model.backbone_a.vgg_blocks)
        vgg.push_back(ordered_json::array({b.conv_count, b.channels}));
    model["vgg_blocks"] = std::move(vgg);
    model["stem_channels"] = c.model.backbone_b.stem_channels;
    ordered_json inc = ordered_json::array();
    for (const InceptionWidths& w : c.model.backbone_b.inception_blocks)
        inc.push_back(ordered_json::array(
            {w.b1x1, w.b3x3_reduce, w.b3x3, w.b5x5_reduce, w.b5x5, w.pool_proj}));
    model["inception_blocks"] = std::move(inc);
    model["head"] = c.model.head;
    model["dropout"] = c.model.dropout_rate;
    model["freeze"] = c.model.freeze;
    j["model"] = std::move(model);

    ordered_json train;
    train["epochs"] = c.train.epochs;
    train["batch_size"] = c.train.batch_size;
    train["base_lr"] = c.train.base_lr;
    train["lr_gamma"] = c.train.schedule.gamma;
    train["lr_step_epochs"] = c.train.schedule.step_epochs;
    train["shuffle"] = c.train.shuffle;
    j["train"] = std::move(train);

    j["report"] = ordered_json{{"svgs", c.svgs}};
    return j.dump(2) + "\n";
}

}  // namespace aggronet
