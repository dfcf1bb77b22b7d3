#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aggronet/tensor.hpp"
#include "aggronet/train.hpp"

namespace aggronet {

// Square tally of predictions: rows = true class, columns = predicted class.
// Row sums are the per-class supports; the grand total is the number of
// evaluated examples.
struct ConfusionMatrix {
    std::vector<std::vector<int64_t>> counts;
    std::vector<std::string> class_names;

    int64_t k() const { return static_cast<int64_t>(counts.size()); }
    int64_t row_sum(int64_t t) const;
    int64_t col_sum(int64_t p) const;
    int64_t trace() const;
    int64_t total() const;
};

struct ClassRow {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t support = 0;
};

struct Aggregates {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Per-class rates plus macro / weighted aggregates. All rates live in [0,1];
// undefined ratios (class never predicted, class absent) are reported as 0.
struct ClassReport {
    std::vector<std::string> class_names;
    std::vector<ClassRow> rows;
    double accuracy = 0.0;
    int64_t total = 0;
    Aggregates macro;
    Aggregates weighted;
};

// One-vs-rest ROC curve for a single class. Points run from (0,0) to (1,1)
// and are non-decreasing in both coordinates; thresholds[i] is the score
// cutoff that produced points[i] (+inf for the leading (0,0), -inf for the
// trailing (1,1)).
struct RocCurve {
    int class_index = 0;
    std::vector<double> thresholds;
    std::vector<double> fpr;
    std::vector<double> tpr;
    double auc = 0.0;
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int64_t class_count, std::vector<std::string> class_names = {});

ClassReport report_from_confusion(const ConfusionMatrix& cm);

// Recomputes macro / weighted aggregates from bare per-class rows. Supports
// must be positive; rows must be non-empty.
Aggregates macro_of(const std::vector<ClassRow>& rows);
Aggregates weighted_of(const std::vector<ClassRow>& rows);

RocCurve roc_one_vs_rest(const Tensor& scores, const std::vector<int>& labels, int class_index);

// Everything emit() materializes into an output directory. `rocs` may be
// empty (no roc_class_<k>.csv files then); `history` may have zero epochs
// (history.csv is still written, header only). `svgs` additionally renders
// self-contained curves.svg / confusion.svg.
struct ReportBundle {
    ClassReport report;
    ConfusionMatrix cm;
    std::vector<RocCurve> rocs;
    History history;
    bool svgs = false;
};

// report.json field order is fixed: accuracy, total, classes (name,
// precision, recall, f1, support per entry), macro_avg, weighted_avg
// (precision, recall, f1 each). report.txt prints the same numbers as
// fixed-width integer percentages, rounded half-up.
void emit(const ReportBundle& bundle, const std::string& out_dir);

// Shared with report.txt; exposed for tests. Half-up integer percent.
int percent_half_up(double rate);

std::string report_json_text(const ClassReport& r);
std::string report_txt_text(const ClassReport& r);
std::string confusion_csv_text(const ConfusionMatrix& cm);
std::string roc_csv_text(const RocCurve& curve);

}  // namespace aggronet
