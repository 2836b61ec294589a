#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "vtopo/grid.hpp"
#include "vtopo/skeleton.hpp"

namespace vtopo {

/// Centreline Dice: harmonic mean of |skel(P) n Y| / |skel(P)| and
/// |skel(Y) n P| / |skel(Y)|. Both skeletons empty gives 1, exactly one
/// empty gives 0.
[[nodiscard]] inline double cl_dice(const BinaryMask& prediction, const BinaryMask& truth) {
    require_same_shape(prediction, truth, "cl_dice");
    const BinaryMask skel_p = skeletonize(prediction);
    const BinaryMask skel_y = skeletonize(truth);
    std::size_t sp = 0;
    std::size_t sp_in_y = 0;
    std::size_t sy = 0;
    std::size_t sy_in_p = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (skel_p[i]) {
            ++sp;
            sp_in_y += truth[i] ? 1 : 0;
        }
        if (skel_y[i]) {
            ++sy;
            sy_in_p += prediction[i] ? 1 : 0;
        }
    }
    if (sp == 0 && sy == 0) {
        return 1.0;
    }
    if (sp == 0 || sy == 0) {
        return 0.0;
    }
    const double tprec = static_cast<double>(sp_in_y) / static_cast<double>(sp);
    const double tsens = static_cast<double>(sy_in_p) / static_cast<double>(sy);
    if (tprec + tsens == 0.0) {
        return 0.0;
    }
    return 2.0 * tprec * tsens / (tprec + tsens);
}

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
};

struct PixelMetricReport {
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double threshold = 0.5;
    ConfusionCounts counts;
    bool sensitivity_degenerate = false;  // no positives in Y; reported as 1
    bool specificity_degenerate = false;  // no negatives in Y; reported as 1
};

/// Thresholds P (value >= threshold is positive) and scores it against Y
/// over the full frame.
[[nodiscard]] inline PixelMetricReport pixel_metrics(const ProbMap& prediction, const BinaryMask& truth,
                                                     double threshold) {
    require_same_shape(prediction, truth, "pixel_metrics");
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw Error("pixel_metrics: threshold must lie in [0,1]");
    }
    PixelMetricReport rep;
    rep.threshold = threshold;
    auto& c = rep.counts;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool pos = prediction[i] >= threshold;
        if (truth[i]) {
            (pos ? c.tp : c.fn) += 1;
        } else {
            (pos ? c.fp : c.tn) += 1;
        }
    }
    const double total = static_cast<double>(c.tp + c.tn + c.fp + c.fn);
    rep.accuracy = static_cast<double>(c.tp + c.tn) / total;
    if (c.tp + c.fn == 0) {
        rep.sensitivity = 1.0;
        rep.sensitivity_degenerate = true;
    } else {
        rep.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (c.tn + c.fp == 0) {
        rep.specificity = 1.0;
        rep.specificity_degenerate = true;
    } else {
        rep.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    }
    return rep;
}

/// Rank-based (Mann-Whitney) ROC AUC with midranks for ties.
[[nodiscard]] inline double auc(const ProbMap& prediction, const BinaryMask& truth) {
    require_same_shape(prediction, truth, "auc");
    const std::size_t n = truth.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return prediction[a] < prediction[b]; });
    std::uint64_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        positives += truth[i] ? 1 : 0;
    }
    const std::uint64_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw Error("auc: ground truth must contain both classes");
    }
    // Ranks are 1-based; a tie group spanning ranks [lo, hi] gets (lo + hi) / 2.
    // Sums of midranks are kept doubled so they stay integral.
    std::uint64_t doubled_rank_sum = 0;
    for (std::size_t lo = 0; lo < n;) {
        std::size_t hi = lo;
        while (hi + 1 < n && prediction[order[hi + 1]] == prediction[order[lo]]) {
            ++hi;
        }
        const std::uint64_t doubled_midrank = (lo + 1) + (hi + 1);
        for (std::size_t k = lo; k <= hi; ++k) {
            if (truth[order[k]]) {
                doubled_rank_sum += doubled_midrank;
            }
        }
        lo = hi + 1;
    }
    const double u = static_cast<double>(doubled_rank_sum) / 2.0 -
                     static_cast<double>(positives) * static_cast<double>(positives + 1) / 2.0;
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace vtopo
