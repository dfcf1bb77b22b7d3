#include "aggronet/evalreport.hpp"

#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "aggronet/error.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace aggronet {

namespace {

std::string fmt(const char* pattern, ...) {
    va_list args;
    va_start(args, pattern);
    char buf[256];
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

}  // namespace

int64_t ConfusionMatrix::row_sum(int64_t t) const {
    int64_t s = 0;
    for (int64_t v : counts.at(static_cast<size_t>(t))) s += v;
    return s;
}

int64_t ConfusionMatrix::col_sum(int64_t p) const {
    int64_t s = 0;
    for (const auto& row : counts) s += row.at(static_cast<size_t>(p));
    return s;
}

int64_t ConfusionMatrix::trace() const {
    int64_t s = 0;
    for (size_t i = 0; i < counts.size(); ++i) s += counts[i][i];
    return s;
}

int64_t ConfusionMatrix::total() const {
    int64_t s = 0;
    for (const auto& row : counts)
        for (int64_t v : row) s += v;
    return s;
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int64_t class_count, std::vector<std::string> class_names) {
    if (class_count < 1)
        throw ConfigError(fmt("confusion: class_count must be >= 1, got %" PRId64, class_count));
    if (preds.size() != labels.size())
        throw ShapeError(fmt("confusion: %zu predictions vs %zu labels", preds.size(), labels.size()));
    if (!class_names.empty() && static_cast<int64_t>(class_names.size()) != class_count)
        throw ShapeError(fmt("confusion: %zu class names for %" PRId64 " classes",
                             class_names.size(), class_count));

    ConfusionMatrix cm;
    cm.counts.assign(static_cast<size_t>(class_count),
                     std::vector<int64_t>(static_cast<size_t>(class_count), 0));
    for (size_t n = 0; n < labels.size(); ++n) {
        int t = labels[n];
        int p = preds[n];
        if (t < 0 || t >= class_count)
            throw ShapeError(fmt("confusion: label %d at index %zu out of range [0, %" PRId64 ")",
                                 t, n, class_count));
        if (p < 0 || p >= class_count)
            throw ShapeError(fmt("confusion: prediction %d at index %zu out of range [0, %" PRId64 ")",
                                 p, n, class_count));
        ++cm.counts[static_cast<size_t>(t)][static_cast<size_t>(p)];
    }
    if (class_names.empty()) {
        for (int64_t k = 0; k < class_count; ++k)
            class_names.push_back("class_" + std::to_string(k));
    }
    cm.class_names = std::move(class_names);
    return cm;
}

ClassReport report_from_confusion(const ConfusionMatrix& cm) {
    int64_t k = cm.k();
    if (k == 0) throw ShapeError("report_from_confusion: empty confusion matrix");
    for (int64_t t = 0; t < k; ++t) {
        const auto& row = cm.counts[static_cast<size_t>(t)];
        if (static_cast<int64_t>(row.size()) != k)
            throw ShapeError(fmt("report_from_confusion: row %" PRId64 " has %zu columns, expected %" PRId64,
                                 t, row.size(), k));
        for (int64_t v : row)
            if (v < 0)
                throw ShapeError(fmt("report_from_confusion: negative count in row %" PRId64, t));
    }
    int64_t total = cm.total();
    if (total == 0) throw ShapeError("report_from_confusion: confusion matrix has zero total");

    ClassReport r;
    r.class_names = cm.class_names;
    if (r.class_names.empty())
        for (int64_t c = 0; c < k; ++c) r.class_names.push_back("class_" + std::to_string(c));
    r.total = total;

    int64_t trace = cm.trace();
    for (int64_t c = 0; c < k; ++c) {
        int64_t hit = cm.counts[static_cast<size_t>(c)][static_cast<size_t>(c)];
        int64_t col = cm.col_sum(c);
        int64_t row = cm.row_sum(c);
        ClassRow cr;
        cr.support = row;
        cr.precision = col > 0 ? static_cast<double>(hit) / static_cast<double>(col) : 0.0;
        cr.recall = row > 0 ? static_cast<double>(hit) / static_cast<double>(row) : 0.0;
        double pr = cr.precision + cr.recall;
        cr.f1 = pr > 0.0 ? 2.0 * cr.precision * cr.recall / pr : 0.0;
        r.rows.push_back(cr);
    }

    r.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    double mp = 0.0, mr = 0.0, mf = 0.0, wp = 0.0, wf = 0.0;
    for (const ClassRow& cr : r.rows) {
        mp += cr.precision;
        mr += cr.recall;
        mf += cr.f1;
        wp += cr.precision * static_cast<double>(cr.support);
        wf += cr.f1 * static_cast<double>(cr.support);
    }
    double dk = static_cast<double>(k);
    r.macro = {mp / dk, mr / dk, mf / dk};
    // Support-weighted recall collapses algebraically to trace/total; computing
    // it through that integer path keeps the identity with accuracy exact.
    r.weighted = {wp / static_cast<double>(total),
                  static_cast<double>(trace) / static_cast<double>(total),
                  wf / static_cast<double>(total)};
    return r;
}

namespace {

void check_rows(const std::vector<ClassRow>& rows, const char* who) {
    if (rows.empty()) throw ShapeError(std::string(who) + ": empty row list");
    for (size_t i = 0; i < rows.size(); ++i)
        if (rows[i].support <= 0)
            throw ShapeError(fmt("%s: support must be positive, got %" PRId64 " at row %zu",
                                 who, rows[i].support, i));
}

}  // namespace

Aggregates macro_of(const std::vector<ClassRow>& rows) {
    check_rows(rows, "macro_of");
    Aggregates a;
    for (const ClassRow& r : rows) {
        a.precision += r.precision;
        a.recall += r.recall;
        a.f1 += r.f1;
    }
    double n = static_cast<double>(rows.size());
    a.precision /= n;
    a.recall /= n;
    a.f1 /= n;
    return a;
}

Aggregates weighted_of(const std::vector<ClassRow>& rows) {
    check_rows(rows, "weighted_of");
    Aggregates a;
    double total = 0.0;
    for (const ClassRow& r : rows) {
        double s = static_cast<double>(r.support);
        a.precision += r.precision * s;
        a.recall += r.recall * s;
        a.f1 += r.f1 * s;
        total += s;
    }
    a.precision /= total;
    a.recall /= total;
    a.f1 /= total;
    return a;
}

RocCurve roc_one_vs_rest(const Tensor& scores, const std::vector<int>& labels, int class_index) {
    if (scores.rank() != 2)
        throw ShapeError(fmt("roc_one_vs_rest: scores must be rank 2, got rank %zu", scores.rank()));
    int64_t n = scores.dim(0);
    int64_t k = scores.dim(1);
    if (n != static_cast<int64_t>(labels.size()))
        throw ShapeError(fmt("roc_one_vs_rest: %" PRId64 " score rows vs %zu labels", n, labels.size()));
    if (class_index < 0 || class_index >= k)
        throw ShapeError(fmt("roc_one_vs_rest: class %d out of range [0, %" PRId64 ")", class_index, k));

    int64_t pos = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= k)
            throw ShapeError(fmt("roc_one_vs_rest: label %d at index %zu out of range [0, %" PRId64 ")",
                                 labels[i], i, k));
        if (labels[i] == class_index) ++pos;
    }
    int64_t neg = n - pos;
    if (pos == 0)
        throw Error(fmt("roc_one_vs_rest: class %d has no positive examples, curve undefined",
                        class_index));
    if (neg == 0)
        throw Error(fmt("roc_one_vs_rest: class %d has no negative examples, curve undefined",
                        class_index));

    // (score, is_positive) sorted by score descending; equal scores form one
    // sweep point, which is what gives ties their half credit in the AUC.
    std::vector<std::pair<double, bool>> ranked(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        ranked[static_cast<size_t>(i)] = {static_cast<double>(scores(i, class_index)),
                                          labels[static_cast<size_t>(i)] == class_index};
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    RocCurve curve;
    curve.class_index = class_index;
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);

    int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < ranked.size()) {
        double s = ranked[i].first;
        while (i < ranked.size() && ranked[i].first == s) {
            if (ranked[i].second)
                ++tp;
            else
                ++fp;
            ++i;
        }
        curve.thresholds.push_back(s);
        curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
        curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    }

    curve.thresholds.push_back(-std::numeric_limits<double>::infinity());
    curve.fpr.push_back(1.0);
    curve.tpr.push_back(1.0);

    double auc = 0.0;
    for (size_t j = 1; j < curve.fpr.size(); ++j)
        auc += (curve.fpr[j] - curve.fpr[j - 1]) * (curve.tpr[j] + curve.tpr[j - 1]) * 0.5;
    curve.auc = std::min(1.0, std::max(0.0, auc));
    return curve;
}

int percent_half_up(double rate) {
    return static_cast<int>(std::floor(rate * 100.0 + 0.5));
}

std::string report_json_text(const ClassReport& r) {
    ordered_json j;
    j["accuracy"] = r.accuracy;
    j["total"] = r.total;
    ordered_json classes = ordered_json::array();
    for (size_t c = 0; c < r.rows.size(); ++c) {
        ordered_json e;
        e["name"] = c < r.class_names.size() ? r.class_names[c] : "class_" + std::to_string(c);
        e["precision"] = r.rows[c].precision;
        e["recall"] = r.rows[c].recall;
        e["f1"] = r.rows[c].f1;
        e["support"] = r.rows[c].support;
        classes.push_back(std::move(e));
    }
    j["classes"] = std::move(classes);
    auto agg = [](const Aggregates& a) {
        ordered_json e;
        e["precision"] = a.precision;
        e["recall"] = a.recall;
        e["f1"] = a.f1;
        return e;
    };
    j["macro_avg"] = agg(r.macro);
    j["weighted_avg"] = agg(r.weighted);
    return j.dump(2) + "\n";
}

std::string report_txt_text(const ClassReport& r) {
    size_t name_w = std::string("weighted avg").size();
    for (const std::string& s : r.class_names) name_w = std::max(name_w, s.size());
    int nw = static_cast<int>(name_w);

    std::string out;
    auto pct = [](double v) { return std::to_string(percent_half_up(v)) + "%"; };
    out += fmt("%*s %10s %10s %10s %10s\n", nw, "", "precision", "recall", "f1-score", "support");
    out += "\n";
    for (size_t c = 0; c < r.rows.size(); ++c) {
        const ClassRow& row = r.rows[c];
        std::string name = c < r.class_names.size() ? r.class_names[c] : "class_" + std::to_string(c);
        out += fmt("%*s %10s %10s %10s %10" PRId64 "\n", nw, name.c_str(),
                   pct(row.precision).c_str(), pct(row.recall).c_str(), pct(row.f1).c_str(),
                   row.support);
    }
    out += "\n";
    out += fmt("%*s %10s %10s %10s %10" PRId64 "\n", nw, "accuracy", "", "",
               pct(r.accuracy).c_str(), r.total);
    out += fmt("%*s %10s %10s %10s %10" PRId64 "\n", nw, "macro avg",
               pct(r.macro.precision).c_str(), pct(r.macro.recall).c_str(),
               pct(r.macro.f1).c_str(), r.total);
    out += fmt("%*s %10s %10s %10s %10" PRId64 "\n", nw, "weighted avg",
               pct(r.weighted.precision).c_str(), pct(r.weighted.recall).c_str(),
               pct(r.weighted.f1).c_str(), r.total);
    return out;
}

std::string confusion_csv_text(const ConfusionMatrix& cm) {
    std::string out = "class";
    for (const std::string& s : cm.class_names) out += "," + s;
    out += "\n";
    for (size_t t = 0; t < cm.counts.size(); ++t) {
        out += t < cm.class_names.size() ? cm.class_names[t] : "class_" + std::to_string(t);
        for (int64_t v : cm.counts[t]) out += fmt(",%" PRId64, v);
        out += "\n";
    }
    return out;
}

std::string roc_csv_text(const RocCurve& curve) {
    std::string out = "threshold,fpr,tpr\n";
    for (size_t i = 0; i < curve.thresholds.size(); ++i)
        out += fmt("%.9g,%.9g,%.9g\n", curve.thresholds[i], curve.fpr[i], curve.tpr[i]);
    return out;
}

namespace {

void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("emit: cannot open " + tmp.string() + " for writing");
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        f.flush();
        if (!f) throw IoError("emit: write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("emit: cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

const char* kSeriesColors[8] = {"#c23b3b", "#2a8f2a", "#2a55c2", "#b0a424",
                                "#a035a0", "#2a9f9f", "#c27a22", "#7040b0"};

// Polyline for points already mapped into pixel space.
std::string svg_polyline(const std::vector<std::pair<double, double>>& pts, const char* color) {
    std::string s = "  <polyline fill=\"none\" stroke=\"";
    s += color;
    s += "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
        if (i) s += " ";
        s += fmt("%.2f,%.2f", pts[i].first, pts[i].second);
    }
    s += "\"/>\n";
    return s;
}

std::string svg_text(double x, double y, const std::string& body, const char* anchor = "start",
                     const char* color = "#333333", int size = 11) {
    return fmt("  <text x=\"%.2f\" y=\"%.2f\" font-family=\"monospace\" font-size=\"%d\" "
               "fill=\"%s\" text-anchor=\"%s\">",
               x, y, size, color, anchor) +
           body + "</text>\n";
}

// Two stacked panels: training curves (when history is non-empty) and
// one-vs-rest ROC curves (when any were computed).
std::string curves_svg_text(const ReportBundle& b) {
    const double panel_w = 640.0, panel_h = 320.0, margin = 48.0;
    bool with_history = b.history.epochs() > 0;
    bool with_roc = !b.rocs.empty();
    int panels = (with_history ? 1 : 0) + (with_roc ? 1 : 0);
    double height = panel_h * panels;
    std::string s = fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                        "viewBox=\"0 0 %.0f %.0f\">\n",
                        panel_w, height, panel_w, height);
    s += "  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

    double top = 0.0;
    auto frame = [&](const std::string& title) {
        s += fmt("  <rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" "
                 "stroke=\"#888888\"/>\n",
                 margin, top + margin * 0.5, panel_w - 2 * margin, panel_h - margin * 1.5);
        s += svg_text(margin, top + margin * 0.5 - 6, title);
    };
    auto px = [&](double unit_x) { return margin + unit_x * (panel_w - 2 * margin); };
    auto py = [&](double unit_y) {
        return top + margin * 0.5 + (1.0 - unit_y) * (panel_h - margin * 1.5);
    };

    if (with_history) {
        frame("training curves (solid: loss scaled to max, dashed: accuracy)");
        int64_t e = b.history.epochs();
        double max_loss = 1e-12;
        for (int64_t i = 0; i < e; ++i) {
            max_loss = std::max(max_loss, b.history.train_loss[static_cast<size_t>(i)]);
            max_loss = std::max(max_loss, b.history.val_loss[static_cast<size_t>(i)]);
        }
        auto series = [&](const std::vector<double>& v, double scale, const char* color, bool dash) {
            std::vector<std::pair<double, double>> pts;
            for (int64_t i = 0; i < e; ++i) {
                double ux = e == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(e - 1);
                pts.push_back({px(ux), py(v[static_cast<size_t>(i)] / scale)});
            }
            std::string line = svg_polyline(pts, color);
            if (dash)
                line.insert(line.size() - 3, " stroke-dasharray=\"4 3\"");
            s += line;
        };
        series(b.history.train_loss, max_loss, kSeriesColors[0], false);
        series(b.history.val_loss, max_loss, kSeriesColors[2], false);
        series(b.history.train_acc, 1.0, kSeriesColors[0], true);
        series(b.history.val_acc, 1.0, kSeriesColors[2], true);
        s += svg_text(px(0.0), py(0.0) + 16, "train", "start", kSeriesColors[0]);
        s += svg_text(px(0.12), py(0.0) + 16, "val", "start", kSeriesColors[2]);
        top += panel_h;
    }

    if (with_roc) {
        frame("one-vs-rest ROC");
        std::vector<std::pair<double, double>> diag = {{px(0.0), py(0.0)}, {px(1.0), py(1.0)}};
        std::string d = svg_polyline(diag, "#bbbbbb");
        d.insert(d.size() - 3, " stroke-dasharray=\"2 3\"");
        s += d;
        for (size_t c = 0; c < b.rocs.size(); ++c) {
            const RocCurve& rc = b.rocs[c];
            std::vector<std::pair<double, double>> pts;
            for (size_t i = 0; i < rc.fpr.size(); ++i) pts.push_back({px(rc.fpr[i]), py(rc.tpr[i])});
            const char* color = kSeriesColors[c % 8];
            s += svg_polyline(pts, color);
            std::string name = rc.class_index < static_cast<int>(b.report.class_names.size())
                                   ? b.report.class_names[static_cast<size_t>(rc.class_index)]
                                   : "class_" + std::to_string(rc.class_index);
            s += svg_text(px(1.0), py(1.0) + 14.0 * (static_cast<double>(c) + 1.0),
                          name + fmt(" auc=%.3f", rc.auc), "end", color);
        }
    }

    s += "</svg>\n";
    return s;
}

std::string confusion_svg_text(const ConfusionMatrix& cm) {
    int64_t k = cm.k();
    const double cell = 44.0, left = 120.0, topm = 60.0;
    double w = left + cell * static_cast<double>(k) + 20.0;
    double h = topm + cell * static_cast<double>(k) + 20.0;
    int64_t max_count = 1;
    for (const auto& row : cm.counts)
        for (int64_t v : row) max_count = std::max(max_count, v);

    std::string s = fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                        "viewBox=\"0 0 %.0f %.0f\">\n",
                        w, h, w, h);
    s += "  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    s += svg_text(left, 20.0, "confusion matrix (rows: true, columns: predicted)");
    for (int64_t t = 0; t < k; ++t) {
        std::string name = t < static_cast<int64_t>(cm.class_names.size())
                               ? cm.class_names[static_cast<size_t>(t)]
                               : "class_" + std::to_string(t);
        s += svg_text(left - 6.0, topm + cell * (static_cast<double>(t) + 0.62), name, "end");
        s += svg_text(left + cell * (static_cast<double>(t) + 0.5), topm - 8.0,
                      std::to_string(t), "middle");
        for (int64_t p = 0; p < k; ++p) {
            int64_t v = cm.counts[static_cast<size_t>(t)][static_cast<size_t>(p)];
            // Light-to-dark blue ramp on count / max.
            double u = static_cast<double>(v) / static_cast<double>(max_count);
            int rch = static_cast<int>(std::floor(240.0 - 170.0 * u + 0.5));
            int gch = static_cast<int>(std::floor(245.0 - 140.0 * u + 0.5));
            int bch = 250;
            double x = left + cell * static_cast<double>(p);
            double y = topm + cell * static_cast<double>(t);
            s += fmt("  <rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                     "fill=\"rgb(%d,%d,%d)\" stroke=\"#dddddd\"/>\n",
                     x, y, cell, cell, rch, gch, bch);
            s += svg_text(x + cell * 0.5, y + cell * 0.62, std::to_string(v), "middle",
                          u > 0.6 ? "#ffffff" : "#333333");
        }
    }
    s += "</svg>\n";
    return s;
}

}  // namespace

void emit(const ReportBundle& bundle, const std::string& out_dir) {
    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("emit: cannot create directory " + dir.string() + ": " + ec.message());

    write_text_atomic(dir / "report.json", report_json_text(bundle.report));
    write_text_atomic(dir / "report.txt", report_txt_text(bundle.report));
    write_text_atomic(dir / "confusion.csv", confusion_csv_text(bundle.cm));
    write_text_atomic(dir / "history.csv", history_csv_text(bundle.history));
    for (const RocCurve& curve : bundle.rocs)
        write_text_atomic(dir / ("roc_class_" + std::to_string(curve.class_index) + ".csv"),
                          roc_csv_text(curve));
    if (bundle.svgs) {
        if (bundle.history.epochs() > 0 || !bundle.rocs.empty())
            write_text_atomic(dir / "curves.svg", curves_svg_text(bundle));
        if (bundle.cm.k() > 0)
            write_text_atomic(dir / "confusion.svg", confusion_svg_text(bundle.cm));
    }
}

}  // namespace aggronet
