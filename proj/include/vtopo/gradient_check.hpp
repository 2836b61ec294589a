#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "vtopo/grid.hpp"
#include "vtopo/losses.hpp"

namespace vtopo {

struct GradientCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::vector<std::size_t> excluded;  // flat indices
    std::optional<std::size_t> worst_pixel;
};

struct GradientCheckOptions {
    double step = 1e-5;
    /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
    double abs_floor = 1e-6;
    /// Restricts the check to these flat indices; all pixels when empty.
    std::vector<std::size_t> pixels;
};

[[nodiscard]] constexpr bool loss_uses_morphology(LossKind k) noexcept {
    return k != LossKind::dice && k != LossKind::bce;
}

/// Central finite differences against the analytic gradient. A pixel is
/// excluded when P +/- step leaves [0,1], when a 3x3 neighbour lies within
/// 2*step of it (losses built on max/min pooling), or when either
/// perturbation changes the loss's branch signature. The skeleton-mass
/// normaliser is frozen at its value for the unperturbed input.
[[nodiscard]] inline GradientCheckResult gradient_check(LossKind kind, const SoftMap& prediction,
                                                        const BinaryMask& truth, const LossParams& params,
                                                        const GradientCheckOptions& options = {}) {
    if (!(options.step > 0.0)) {
        throw Error("gradient_check: step must be positive");
    }
    const LossValue base = evaluate_loss(kind, prediction, truth, params, LossOptions{true, std::nullopt});
    LossOptions frozen{false, base.skeleton_mass};
    const auto& grad = *base.gradient;

    std::vector<std::size_t> pixels = options.pixels;
    if (pixels.empty()) {
        pixels.resize(prediction.size());
        for (std::size_t i = 0; i < pixels.size(); ++i) {
            pixels[i] = i;
        }
    }
    const double h = options.step;
    GradientCheckResult res;
    SoftMap work = prediction;
    for (std::size_t i : pixels) {
        if (i >= prediction.size()) {
            throw Error("gradient_check: pixel index out of range");
        }
        const double x = prediction[i];
        bool excluded = x - h < 0.0 || x + h > 1.0;
        if (!excluded && loss_uses_morphology(kind)) {
            const Pixel p = prediction.pixel(i);
            for (int k = 0; k < 8 && !excluded; ++k) {
                const Pixel q{p.row + kNeighbor8Row[k], p.col + kNeighbor8Col[k]};
                if (prediction.contains(q) && std::abs(prediction[q] - x) < 2.0 * h) {
                    excluded = true;
                }
            }
        }
        double numeric = 0.0;
        if (!excluded) {
            work[i] = x + h;
            const LossValue up = evaluate_loss(kind, work, truth, params, frozen);
            work[i] = x - h;
            const LossValue down = evaluate_loss(kind, work, truth, params, frozen);
            work[i] = x;
            excluded = up.branch_signature != base.branch_signature || down.branch_signature != base.branch_signature;
            numeric = (up.value - down.value) / (2.0 * h);
        }
        if (excluded) {
            res.excluded.push_back(i);
            continue;
        }
        const double analytic = grad[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
        const double rel = std::abs(analytic - numeric) / denom;
        ++res.checked;
        if (!res.worst_pixel || rel > res.max_rel_error) {
            res.max_rel_error = rel;
            res.worst_pixel = i;
        }
    }
    return res;
}

}  // namespace vtopo
