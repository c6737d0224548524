#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cxr/datamodel.hpp"

namespace cxr {

struct RocPoint {
    double threshold = 0.0;  ///< predict positive iff score >= threshold
    std::size_t tp = 0, fp = 0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double fpr() const { return 1.0 - specificity; }
};

/// Points ordered by descending threshold (fpr non-decreasing). The first
/// point is the +inf sentinel that predicts nothing positive; then one point
/// per distinct score.
struct RocCurve {
    std::vector<RocPoint> points;
    std::size_t positives = 0, negatives = 0;
    double auc = 0.0;
    std::size_t youden_index_argmax = 0;
};

/// Throws ValidationError for mismatched lengths, non-finite scores, or
/// single-class labels.
RocCurve roc(std::span<const double> scores, std::span<const Label> labels);

/// Trapezoidal area under (fpr, tpr) points.
double trapezoid_auc(std::span<const RocPoint> points);

struct YoudenPoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double j = 0.0;
    std::size_t index = 0;
};

/// sensitivity + specificity - 1 from integer counts.
double youden_j(std::size_t tp, std::size_t positives, std::size_t tn, std::size_t negatives);

/// Maximises J; ties go to higher sensitivity, then lower threshold.
YoudenPoint youden(const RocCurve& curve);

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    double sensitivity() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
    double specificity() const { return tn + fp ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0; }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Inclusive rule: predicted positive iff score >= threshold.
Confusion confusion(std::span<const double> scores, std::span<const Label> labels, double threshold);

}  // namespace cxr
