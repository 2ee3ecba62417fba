#pragma once

#include <map>
#include <string>

#include "huemod/dataset.hpp"
#include "huemod/image.hpp"

namespace huemod {

/// Pixel-level confusion counts; forged is the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        tn += o.tn;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    std::uint64_t total() const { return tp + tn + fp + fn; }
};

ConfusionCounts confusion(const BoolMask& pred, const BoolMask& gt);

struct Metrics {
    double tpr = 0., tnr = 0., f1 = 0.;
    bool tpr_degenerate = false, tnr_degenerate = false, f1_degenerate = false;
};

/// TPR = tp/(tp+fn), TNR = tn/(tn+fp), F1 = 2tp/(2tp+fp+fn); 0/0 -> 0, flagged.
Metrics metrics(const ConfusionCounts& counts);

enum class GroupBy { Angle, Qf };

struct GroupReport {
    std::string key;
    int n_cases = 0;
    ConfusionCounts counts;  // micro-aggregated
    Metrics micro;
    Metrics macro;  // per-image average, diagnostic only
};

struct EvalReport {
    std::vector<GroupReport> groups;
    std::vector<std::string> missing;  // case ids without a prediction

    std::string table() const;  // aligned text
    std::string to_jsonl() const;
};

/// Compares predicted masks named <pred_dir>/<case id>_mask.png against the
/// manifest's ground truth. Missing predictions are listed, not fatal here.
EvalReport evaluate_run(const std::string& manifest_path, const std::string& predictions_dir,
                        GroupBy grouping);

}  // namespace huemod
