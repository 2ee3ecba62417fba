#include "huemod/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "huemod/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace huemod {

ConfusionCounts confusion(const BoolMask& pred, const BoolMask& gt) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw std::invalid_argument("confusion: mask dimension mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.m.size(); ++i) {
        const bool p = pred.m[i] != 0, g = gt.m[i] != 0;
        if (p && g)
            ++c.tp;
        else if (!p && !g)
            ++c.tn;
        else if (p && !g)
            ++c.fp;
        else
            ++c.fn;
    }
    return c;
}

Metrics metrics(const ConfusionCounts& c) {
    Metrics m;
    if (c.tp + c.fn == 0) {
        m.tpr_degenerate = true;
    } else {
        m.tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (c.tn + c.fp == 0) {
        m.tnr_degenerate = true;
    } else {
        m.tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    }
    if (2 * c.tp + c.fp + c.fn == 0) {
        m.f1_degenerate = true;
    } else {
        m.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    }
    return m;
}

EvalReport evaluate_run(const std::string& manifest_path, const std::string& predictions_dir,
                        GroupBy grouping) {
    const auto cases = read_manifest(manifest_path);
    const fs::path root = fs::path(manifest_path).parent_path();

    struct Accum {
        int n = 0;
        ConfusionCounts counts;
        double tpr_sum = 0., tnr_sum = 0., f1_sum = 0.;
    };
    std::map<int, Accum> by_key;

    EvalReport report;
    for (const auto& c : cases) {
        const fs::path pred_path = fs::path(predictions_dir) / (c.id + "_mask.png");
        if (!fs::exists(pred_path)) {
            report.missing.push_back(c.id);
            continue;
        }
        const BoolMask pred = read_png_mask(pred_path.string());
        const BoolMask gt = read_png_mask((root / c.mask_path).string());
        const ConfusionCounts cc = confusion(pred, gt);
        const Metrics m = metrics(cc);
        const int key = grouping == GroupBy::Angle
                            ? c.angle
                            : (c.qf_history.empty() ? -1 : c.qf_history.front());
        Accum& a = by_key[key];
        ++a.n;
        a.counts += cc;
        a.tpr_sum += m.tpr;
        a.tnr_sum += m.tnr;
        a.f1_sum += m.f1;
    }

    const std::string prefix = grouping == GroupBy::Angle ? "angle=" : "qf=";
    for (const auto& [key, a] : by_key) {
        GroupReport g;
        g.key = key < 0 ? "uncompressed" : prefix + std::to_string(key);
        g.n_cases = a.n;
        g.counts = a.counts;
        g.micro = metrics(a.counts);
        g.macro.tpr = a.tpr_sum / a.n;
        g.macro.tnr = a.tnr_sum / a.n;
        g.macro.f1 = a.f1_sum / a.n;
        report.groups.push_back(std::move(g));
    }
    return report;
}

std::string EvalReport::table() const {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %6s %10s %10s %10s %14s %14s\n", "group", "cases",
                  "TPR", "TNR", "F1", "macro-F1", "pixels");
    os << line;
    for (const auto& g : groups) {
        auto fmt = [](const Metrics& m, double v, bool degenerate) {
            char buf[32];
            if (degenerate)
                std::snprintf(buf, sizeof(buf), "0*");
            else
                std::snprintf(buf, sizeof(buf), "%.4f", v);
            (void)m;
            return std::string(buf);
        };
        std::snprintf(line, sizeof(line), "%-16s %6d %10s %10s %10s %14.4f %14llu\n", g.key.c_str(),
                      g.n_cases, fmt(g.micro, g.micro.tpr, g.micro.tpr_degenerate).c_str(),
                      fmt(g.micro, g.micro.tnr, g.micro.tnr_degenerate).c_str(),
                      fmt(g.micro, g.micro.f1, g.micro.f1_degenerate).c_str(), g.macro.f1,
                      static_cast<unsigned long long>(g.counts.total()));
        os << line;
    }
    if (!missing.empty()) {
        os << "incomplete: " << missing.size() << " case(s) without predictions\n";
        for (const auto& id : missing) os << "  missing " << id << "\n";
    }
    return os.str();
}

std::string EvalReport::to_jsonl() const {
    std::ostringstream os;
    for (const auto& g : groups) {
        json j;
        j["group"] = g.key;
        j["cases"] = g.n_cases;
        j["tp"] = g.counts.tp;
        j["tn"] = g.counts.tn;
        j["fp"] = g.counts.fp;
        j["fn"] = g.counts.fn;
        j["tpr"] = g.micro.tpr;
        j["tnr"] = g.micro.tnr;
        j["f1"] = g.micro.f1;
        j["tpr_degenerate"] = g.micro.tpr_degenerate;
        j["tnr_degenerate"] = g.micro.tnr_degenerate;
        j["f1_degenerate"] = g.micro.f1_degenerate;
        j["macro_tpr"] = g.macro.tpr;
        j["macro_tnr"] = g.macro.tnr;
        j["macro_f1"] = g.macro.f1;
        os << j.dump() << "\n";
    }
    for (const auto& id : missing) {
        json j;
        j["missing"] = id;
        os << j.dump() << "\n";
    }
    return os.str();
}

}  // namespace huemod
