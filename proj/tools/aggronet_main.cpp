#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "aggronet/datapipe.hpp"
#include "aggronet/error.hpp"
#include "aggronet/evalreport.hpp"
#include "aggronet/model.hpp"
#include "aggronet/runconfig.hpp"
#include "aggronet/sha256.hpp"
#include "aggronet/threads.hpp"
#include "aggronet/train.hpp"

namespace fs = std::filesystem;
using namespace aggronet;
using ordered_json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        f.flush();
        if (!f) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path.string());
    std::ostringstream body;
    body << f.rdbuf();
    return body.str();
}

// Order-dependent digest of the full dataset: geometry, pixels, labels,
// class roster. Used by the run manifest so a result is traceable to its
// exact inputs.
std::string dataset_hash(const Dataset& ds) {
    Sha256 h;
    for (const Image& img : ds.images) {
        int64_t geom[2] = {img.width, img.height};
        h.update(geom, sizeof(geom));
        h.update(img.pixels.data(), img.pixels.size());
    }
    for (int label : ds.labels) {
        int32_t v = label;
        h.update(&v, sizeof(v));
    }
    for (const std::string& name : ds.class_names) {
        h.update(name);
        h.update("\0", 1);
    }
    return h.hex_digest();
}

Dataset acquire_dataset(const RunConfig& c) {
    if (c.use_synth)
        return synth_dataset(c.synth.per_class, c.model.class_count, resolve_synth_size(c),
                             c.seed);
    return load_dataset(c.data_path);
}

Partition parse_partition(const std::string& s) {
    if (s == "train") return Partition::train;
    if (s == "val") return Partition::val;
    if (s == "test") return Partition::test;
    throw ConfigError("partition: expected train, val, or test, got '" + s + "'");
}

// Flags shared by the subcommands; pointers remember what was actually set
// so flag > file > default resolution can work.
struct CommonFlags {
    std::string config;
    uint64_t seed = 0;
    std::string out;
    int64_t epochs = 0;
    int64_t batch_size = 0;
    int64_t image_size = 0;
    double base_lr = 0.0;
    double dropout = 0.0;

    CLI::Option* o_seed = nullptr;
    CLI::Option* o_out = nullptr;
    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_batch = nullptr;
    CLI::Option* o_image = nullptr;
    CLI::Option* o_lr = nullptr;
    CLI::Option* o_dropout = nullptr;

    void attach(CLI::App* cmd, bool train_flags) {
        cmd->add_option("--config", config, "TOML config file");
        o_seed = cmd->add_option("--seed", seed, "random seed (overrides config)");
        o_out = cmd->add_option("--out", out, "output directory (overrides config)");
        o_image = cmd->add_option("--image-size", image_size, "model input edge (overrides config)");
        if (train_flags) {
            o_epochs = cmd->add_option("--epochs", epochs, "training epochs (overrides config)");
            o_batch = cmd->add_option("--batch-size", batch_size, "batch size (overrides config)");
            o_lr = cmd->add_option("--base-lr", base_lr, "initial learning rate (overrides config)");
            o_dropout = cmd->add_option("--dropout", dropout, "head dropout rate (overrides config)");
        }
    }

    RunConfig resolve() const {
        RunConfig c = config.empty() ? RunConfig() : load_run_config(config);
        CliOverrides o;
        if (o_seed && o_seed->count()) o.seed = seed;
        if (o_out && o_out->count()) o.out = out;
        if (o_epochs && o_epochs->count()) o.epochs = epochs;
        if (o_batch && o_batch->count()) o.batch_size = batch_size;
        if (o_image && o_image->count()) o.image_size = image_size;
        if (o_lr && o_lr->count()) o.base_lr = base_lr;
        if (o_dropout && o_dropout->count()) o.dropout = dropout;
        apply_overrides(c, o);
        return c;
    }
};

int cmd_synth(const CommonFlags& flags) {
    RunConfig c = flags.resolve();
    if (!c.data_path.empty())
        throw ConfigError("data.path: the synth command generates data; remove data.path");
    c.use_synth = true;
    validate_run_config(c, true);

    Dataset ds = acquire_dataset(c);
    write_dataset_tree(ds, c.out);

    std::vector<int64_t> counts(ds.class_names.size(), 0);
    for (int label : ds.labels) ++counts[static_cast<size_t>(label)];
    for (size_t k = 0; k < ds.class_names.size(); ++k)
        std::printf("%s %lld\n", ds.class_names[k].c_str(), static_cast<long long>(counts[k]));
    std::printf("wrote %lld images across %zu classes to %s\n",
                static_cast<long long>(ds.size()), ds.class_names.size(), c.out.c_str());
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    RunConfig c = flags.resolve();
    validate_run_config(c, true);

    Dataset ds = acquire_dataset(c);
    int64_t k = static_cast<int64_t>(ds.class_names.size());
    if (k != c.model.class_count)
        throw ConfigError("model.classes: config says " + std::to_string(c.model.class_count) +
                          " but the dataset has " + std::to_string(k) + " classes");

    std::vector<Tensor> images = prepare_images(ds, c.model.input_h, c.model.input_w);
    SplitAssignment splits = split(ds.size(), resolve_split(c.split, ds.size()), c.seed);

    Model m = build(c.model, c.seed, ds.class_names);
    History h = train_loop(m, images, ds.labels, splits, c.train, c.augment);

    fs::create_directories(c.out);
    save_checkpoint(m, (fs::path(c.out) / "checkpoint").string());
    write_text(fs::path(c.out) / "history.csv", history_csv_text(h));
    write_text(fs::path(c.out) / "history.json", history_json_text(h));

    ordered_json manifest;
    manifest["command"] = "train";
    manifest["config"] = ordered_json::parse(run_config_json(c));
    manifest["dataset"] = ordered_json{{"classes", k},
                                       {"examples", ds.size()},
                                       {"content_hash", dataset_hash(ds)}};
    manifest["artifacts"] = ordered_json{{"checkpoint", "checkpoint"},
                                         {"history_csv", "history.csv"},
                                         {"history_json", "history.json"}};
    write_text(fs::path(c.out) / "manifest.json", manifest.dump(2) + "\n");

    for (int64_t e = 0; e < h.epochs(); ++e)
        std::printf("epoch %lld: lr %.6g train_loss %.6g train_acc %.6g val_loss %.6g val_acc %.6g\n",
                    static_cast<long long>(e), h.lr[static_cast<size_t>(e)],
                    h.train_loss[static_cast<size_t>(e)], h.train_acc[static_cast<size_t>(e)],
                    h.val_loss[static_cast<size_t>(e)], h.val_acc[static_cast<size_t>(e)]);
    std::printf("saved checkpoint to %s\n", (fs::path(c.out) / "checkpoint").string().c_str());
    return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& partition_name,
             std::string checkpoint_dir, bool svg_flag) {
    RunConfig c = flags.resolve();
    validate_run_config(c, true);
    if (checkpoint_dir.empty()) checkpoint_dir = (fs::path(c.out) / "checkpoint").string();

    Model m = load_checkpoint(checkpoint_dir);
    Dataset ds = acquire_dataset(c);
    int64_t k = static_cast<int64_t>(ds.class_names.size());
    if (k != m.spec.class_count)
        throw ConfigError("checkpoint expects " + std::to_string(m.spec.class_count) +
                          " classes but the dataset has " + std::to_string(k));

    std::vector<Tensor> images = prepare_images(ds, m.spec.input_h, m.spec.input_w);
    SplitAssignment splits = split(ds.size(), resolve_split(c.split, ds.size()), c.seed);
    Partition part = parse_partition(partition_name);
    const std::vector<int64_t>& indices = splits.of(part);
    if (indices.empty()) throw ConfigError("partition '" + partition_name + "' is empty");

    EvalResult r = evaluate(m, images, ds.labels, indices, c.train.batch_size);

    std::vector<int> part_labels;
    part_labels.reserve(indices.size());
    for (int64_t i : indices) part_labels.push_back(ds.labels[static_cast<size_t>(i)]);

    ReportBundle bundle;
    bundle.cm = confusion(r.predictions, part_labels, m.spec.class_count, m.class_names);
    bundle.report = report_from_confusion(bundle.cm);
    for (int cls = 0; cls < m.spec.class_count; ++cls) {
        try {
            bundle.rocs.push_back(roc_one_vs_rest(r.scores, part_labels, cls));
        } catch (const Error&) {
            std::fprintf(stderr, "warning: class %d has no positives or no negatives in '%s', roc skipped\n",
                         cls, partition_name.c_str());
        }
    }
    bundle.svgs = c.svgs || svg_flag;

    std::string eval_dir = (fs::path(c.out) / ("eval_" + partition_name)).string();
    emit(bundle, eval_dir);

    std::fputs(report_txt_text(bundle.report).c_str(), stdout);
    std::printf("\nloss %.6g accuracy %.6g on %zu examples; artifacts in %s\n", r.loss,
                r.accuracy, indices.size(), eval_dir.c_str());
    return 0;
}

int cmd_predict(const CommonFlags& flags, const std::string& image_path,
                std::string checkpoint_dir) {
    if (checkpoint_dir.empty()) {
        RunConfig c = flags.resolve();
        checkpoint_dir = (fs::path(c.out) / "checkpoint").string();
    }
    Model m = load_checkpoint(checkpoint_dir);

    Image img = read_ppm(image_path);
    Tensor t = rescale(img);
    if (t.dim(0) != m.spec.input_h || t.dim(1) != m.spec.input_w)
        t = resize_bilinear(t, m.spec.input_w, m.spec.input_h);
    std::vector<Tensor> one = {t};
    Tensor batch = stack(one, {0});

    Tensor probs = forward_hybrid(m, batch, Mode::infer);
    int64_t best = 0;
    for (int64_t cls = 1; cls < m.spec.class_count; ++cls)
        if (probs(int64_t{0}, cls) > probs(int64_t{0}, best)) best = cls;

    std::printf("prediction: %s (%.4f)\n", m.class_names[static_cast<size_t>(best)].c_str(),
                static_cast<double>(probs(int64_t{0}, best)));
    for (int64_t cls = 0; cls < m.spec.class_count; ++cls)
        std::printf("%s %.4f\n", m.class_names[static_cast<size_t>(cls)].c_str(),
                    static_cast<double>(probs(int64_t{0}, cls)));
    return 0;
}

ClassReport report_from_json_text(const std::string& text, const std::string& origin) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw FormatError("cannot parse " + origin + ": " + e.what());
    }
    ClassReport r;
    try {
        r.accuracy = j.at("accuracy").get<double>();
        r.total = j.at("total").get<int64_t>();
        for (const auto& e : j.at("classes")) {
            r.class_names.push_back(e.at("name").get<std::string>());
            ClassRow row;
            row.precision = e.at("precision").get<double>();
            row.recall = e.at("recall").get<double>();
            row.f1 = e.at("f1").get<double>();
            row.support = e.at("support").get<int64_t>();
            r.rows.push_back(row);
        }
        r.macro = {j.at("macro_avg").at("precision").get<double>(),
                   j.at("macro_avg").at("recall").get<double>(),
                   j.at("macro_avg").at("f1").get<double>()};
        r.weighted = {j.at("weighted_avg").at("precision").get<double>(),
                      j.at("weighted_avg").at("recall").get<double>(),
                      j.at("weighted_avg").at("f1").get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(origin + ": " + e.what());
    }
    return r;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

ConfusionMatrix confusion_from_csv(const std::string& text, const std::string& origin) {
    auto rows = csv_rows(text);
    if (rows.empty()) throw FormatError(origin + ": empty confusion csv");
    ConfusionMatrix cm;
    for (size_t i = 1; i < rows[0].size(); ++i) cm.class_names.push_back(rows[0][i]);
    for (size_t r = 1; r < rows.size(); ++r) {
        std::vector<int64_t> counts;
        for (size_t i = 1; i < rows[r].size(); ++i) counts.push_back(std::stoll(rows[r][i]));
        if (counts.size() != cm.class_names.size())
            throw FormatError(origin + ": row " + std::to_string(r) + " has " +
                              std::to_string(counts.size()) + " counts for " +
                              std::to_string(cm.class_names.size()) + " classes");
        cm.counts.push_back(std::move(counts));
    }
    if (cm.counts.size() != cm.class_names.size())
        throw FormatError(origin + ": " + std::to_string(cm.counts.size()) + " rows for " +
                          std::to_string(cm.class_names.size()) + " classes");
    return cm;
}

RocCurve roc_from_csv(const std::string& text, int class_index, const std::string& origin) {
    auto rows = csv_rows(text);
    if (rows.empty() || rows[0] != std::vector<std::string>{"threshold", "fpr", "tpr"})
        throw FormatError(origin + ": expected threshold,fpr,tpr header");
    RocCurve c;
    c.class_index = class_index;
    for (size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 3)
            throw FormatError(origin + ": row " + std::to_string(r) + " has " +
                              std::to_string(rows[r].size()) + " cells");
        c.thresholds.push_back(std::stod(rows[r][0]));
        c.fpr.push_back(std::stod(rows[r][1]));
        c.tpr.push_back(std::stod(rows[r][2]));
    }
    double auc = 0.0;
    for (size_t i = 1; i < c.fpr.size(); ++i)
        auc += (c.fpr[i] - c.fpr[i - 1]) * (c.tpr[i] + c.tpr[i - 1]) * 0.5;
    c.auc = auc;
    return c;
}

History history_from_csv(const std::string& text, const std::string& origin) {
    auto rows = csv_rows(text);
    if (rows.empty() ||
        rows[0] != std::vector<std::string>{"epoch", "train_loss", "train_acc", "val_loss",
                                            "val_acc", "lr"})
        throw FormatError(origin + ": expected a history csv header");
    History h;
    for (size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 6)
            throw FormatError(origin + ": row " + std::to_string(r) + " has " +
                              std::to_string(rows[r].size()) + " cells");
        h.train_loss.push_back(std::stod(rows[r][1]));
        h.train_acc.push_back(std::stod(rows[r][2]));
        h.val_loss.push_back(std::stod(rows[r][3]));
        h.val_acc.push_back(std::stod(rows[r][4]));
        h.lr.push_back(std::stod(rows[r][5]));
    }
    return h;
}

// Re-render every artifact in a finished run directory from its recorded
// data files, no model or dataset required.
int cmd_report(const std::string& from_dir, bool svg_flag) {
    fs::path dir(from_dir);
    if (!fs::exists(dir / "report.json"))
        throw IoError("report: " + (dir / "report.json").string() + " not found");

    ReportBundle bundle;
    bundle.report = report_from_json_text(read_text(dir / "report.json"),
                                          (dir / "report.json").string());
    bundle.cm = confusion_from_csv(read_text(dir / "confusion.csv"),
                                   (dir / "confusion.csv").string());
    bundle.history = history_from_csv(read_text(dir / "history.csv"),
                                      (dir / "history.csv").string());
    for (int cls = 0; cls < static_cast<int>(bundle.report.rows.size()); ++cls) {
        fs::path roc = dir / ("roc_class_" + std::to_string(cls) + ".csv");
        if (fs::exists(roc))
            bundle.rocs.push_back(roc_from_csv(read_text(roc), cls, roc.string()));
    }
    bundle.svgs = svg_flag;

    emit(bundle, dir.string());
    std::fputs(report_txt_text(bundle.report).c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap_from_env();

    CLI::App app{"aggronet: dual-backbone CNN classifier over PPM image trees"};
    app.require_subcommand(1);

    CommonFlags synth_flags, train_flags, eval_flags, predict_flags;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic PPM dataset tree");
    synth_flags.attach(synth, false);

    CLI::App* train = app.add_subcommand("train", "train a model; writes checkpoint, history, manifest");
    train_flags.attach(train, true);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on one partition");
    eval_flags.attach(eval, true);
    std::string partition = "test";
    std::string eval_checkpoint;
    bool eval_svg = false;
    eval->add_option("--partition", partition, "train, val, or test (default test)");
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint directory (default <out>/checkpoint)");
    eval->add_flag("--svg", eval_svg, "also render svg figures");

    CLI::App* predict = app.add_subcommand("predict", "classify one PPM image");
    predict_flags.attach(predict, false);
    std::string image_path;
    std::string predict_checkpoint;
    predict->add_option("image", image_path, "PPM image to classify")->required();
    predict->add_option("--checkpoint", predict_checkpoint,
                        "checkpoint directory (default <out>/checkpoint)");

    CLI::App* report = app.add_subcommand("report", "re-render artifacts from a finished run directory");
    std::string from_dir;
    bool report_svg = false;
    report->add_option("--from", from_dir, "directory holding report.json and friends")->required();
    report->add_flag("--svg", report_svg, "also render svg figures");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(synth)) return cmd_synth(synth_flags);
        if (app.got_subcommand(train)) return cmd_train(train_flags);
        if (app.got_subcommand(eval)) return cmd_eval(eval_flags, partition, eval_checkpoint, eval_svg);
        if (app.got_subcommand(predict)) return cmd_predict(predict_flags, image_path, predict_checkpoint);
        if (app.got_subcommand(report)) return cmd_report(from_dir, report_svg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
