#include "cxr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cxr/error.hpp"

namespace cxr {

RocCurve roc(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) throw ValidationError("roc: scores and labels differ in length");
    RocCurve c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw ValidationError("roc: non-finite score");
        (labels[i] == Label::Positive ? c.positives : c.negatives)++;
    }
    if (c.positives == 0 || c.negatives == 0) throw ValidationError("roc: need both positive and negative labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    const double np = static_cast<double>(c.positives), nn = static_cast<double>(c.negatives);
    c.points.push_back({std::numeric_limits<double>::infinity(), 0, 0, 0.0, 1.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == t; ++i) (labels[order[i]] == Label::Positive ? tp : fp)++;
        c.points.push_back({t, tp, fp, static_cast<double>(tp) / np, static_cast<double>(c.negatives - fp) / nn});
    }
    c.auc = trapezoid_auc(c.points);
    c.youden_index_argmax = youden(c).index;
    return c;
}

double trapezoid_auc(std::span<const RocPoint> points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double dx = points[i].fpr() - points[i - 1].fpr();
        area += dx * (points[i].sensitivity + points[i - 1].sensitivity) * 0.5;
    }
    return area;
}

double youden_j(std::size_t tp, std::size_t positives, std::size_t tn, std::size_t negatives) {
    const auto num = static_cast<std::int64_t>(tp * negatives + tn * positives) -
                     static_cast<std::int64_t>(positives * negatives);
    return static_cast<double>(num) / static_cast<double>(positives * negatives);
}

YoudenPoint youden(const RocCurve& curve) {
    if (curve.points.empty()) throw ValidationError("youden: empty curve");
    // Compare J exactly as integers: tp*N + tn*P - P*N over a common
    // denominator.
    const auto P = static_cast<std::int64_t>(curve.positives), N = static_cast<std::int64_t>(curve.negatives);
    auto numer = [&](const RocPoint& p) {
        const auto tn = N - static_cast<std::int64_t>(p.fp);
        return static_cast<std::int64_t>(p.tp) * N + tn * P - P * N;
    };
    const bool counted = P > 0 && N > 0;
    // Negative: a better than b; positive: b better; zero: tie.
    auto compare_j = [&](const RocPoint& a, const RocPoint& b) -> int {
        if (counted) {
            const auto ja = numer(a), jb = numer(b);
            return ja > jb ? -1 : (ja < jb ? 1 : 0);
        }
        const double ja = a.sensitivity + a.specificity - 1.0, jb = b.sensitivity + b.specificity - 1.0;
        return ja > jb ? -1 : (ja < jb ? 1 : 0);
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i];
        const auto& b = curve.points[best];
        const int cmp = compare_j(a, b);
        if (cmp < 0 || (cmp == 0 && (a.sensitivity > b.sensitivity ||
                                     (a.sensitivity == b.sensitivity && a.threshold < b.threshold))))
            best = i;
    }
    const auto& p = curve.points[best];
    YoudenPoint y;
    y.threshold = p.threshold;
    y.sensitivity = p.sensitivity;
    y.specificity = p.specificity;
    y.index = best;
    y.j = counted ? static_cast<double>(numer(p)) / static_cast<double>(P * N)
                         : p.sensitivity + p.specificity - 1.0;
    return y;
}

Confusion confusion(std::span<const double> scores, std::span<const Label> labels, double threshold) {
    if (scores.size() != labels.size()) throw ValidationError("confusion: scores and labels differ in length");
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        const bool pos = labels[i] == Label::Positive;
        if (pred && pos) ++c.tp;
        else if (pred) ++c.fp;
        else if (pos) ++c.fn;
        else ++c.tn;
    }
    return c;
}

}  // namespace cxr
