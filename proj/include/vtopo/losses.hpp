#pragma once

// Closing-based topological losses and the baseline segmentation losses,
// each with an analytic (sub)gradient with respect to the soft prediction.
//
// Conventions shared by every loss:
//  * P is a SoftMap in [0,1]; Y is a binary mask.
//  * Y_s is the Zhang-Suen skeleton of Y; P_s is soft_skeleton(P, iters).
//  * Logarithms are evaluated as log(max(x, kLogClamp)).
//  * Max/min ties route the subgradient to the first extremal cell in raster
//    order (see morphology.hpp).
//  * The normaliser |P_s| of the topological precision term is a constant
//    for differentiation; LossOptions::frozen_skeleton_mass lets a caller
//    pin it (gradient_check does so for its finite differences).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtopo/grid.hpp"
#include "vtopo/morphology.hpp"
#include "vtopo/skeleton.hpp"

namespace vtopo {

inline constexpr double kLogClamp = 1e-7;

// ---------------------------------------------------------------------------
// Weight schedule

/// Per-radius weights w_r and increments eps_r, r = 1..r_max (index 0 unused).
/// w[r_max] = 1 and w[r] (2r - 1) = w[r+1] (2r + 2), so a gap that a
/// radius-r closing fills never weighs less in total than one that needs
/// radius r + 1. eps telescopes: sum_r eps[r] = w[1].
struct WeightSchedule {
    int r_max = 0;
    std::vector<double> w;
    std::vector<double> eps;

    [[nodiscard]] double weight(int r) const { return w.at(static_cast<std::size_t>(r)); }
    [[nodiscard]] double increment(int r) const { return eps.at(static_cast<std::size_t>(r)); }
};

[[nodiscard]] inline WeightSchedule weight_schedule(int r_max) {
    if (r_max < 1) {
        throw Error("weight_schedule: r_max must be >= 1, got " + std::to_string(r_max));
    }
    WeightSchedule s;
    s.r_max = r_max;
    s.w.assign(static_cast<std::size_t>(r_max) + 1, 0.0);
    s.eps.assign(static_cast<std::size_t>(r_max) + 1, 0.0);
    s.w[static_cast<std::size_t>(r_max)] = 1.0;
    for (int r = r_max - 1; r >= 1; --r) {
        s.w[static_cast<std::size_t>(r)] =
            s.w[static_cast<std::size_t>(r) + 1] * (2.0 * (r + 1)) / (2.0 * r - 1.0);
    }
    s.eps[static_cast<std::size_t>(r_max)] = s.w[static_cast<std::size_t>(r_max)];
    for (int r = 1; r < r_max; ++r) {
        s.eps[static_cast<std::size_t>(r)] = s.w[static_cast<std::size_t>(r)] - s.w[static_cast<std::size_t>(r) + 1];
    }
    return s;
}

// ---------------------------------------------------------------------------
// Branch signature: a hash of every discrete decision made while evaluating a
// loss (argmax/argmin choices, ReLU and clamp branches). Two evaluations with
// equal signatures lie on the same smooth piece of the loss.

class BranchSignature {
public:
    void mix(std::uint64_t v) noexcept {
        state_ ^= v + 0x9e3779b97f4a7c15ULL + (state_ << 6) + (state_ >> 2);
    }
    void mix(const MorphTrace& t) noexcept {
        for (auto s : t.source) {
            mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(s)));
        }
    }
    void mix_flag(bool b) noexcept { mix(b ? 0xa5a5ULL : 0x5a5aULL); }
    [[nodiscard]] std::uint64_t value() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

// ---------------------------------------------------------------------------
// Closing cascade with reverse-mode gradient

namespace detail {

/// Computes C_r(m) for r = 1..r_max (closings[r-1]). When `upstream` is
/// given (one grid per r), also returns sum_r upstream[r]^T dC_r/dm.
struct CascadeResult {
    std::vector<SoftMap> closings;
    std::optional<Grid<double>> gradient;
};

inline CascadeResult closing_cascade(const SoftMap& m, int r_max, const std::vector<Grid<double>>* upstream,
                                     BranchSignature* sig) {
    CascadeResult res;
    const bool grad = upstream != nullptr;
    std::vector<MorphTrace> dil_traces(static_cast<std::size_t>(r_max));
    std::vector<Grid<double>> grad_dilated;  // gradient w.r.t. D_r, r = 0..r_max
    if (grad) {
        grad_dilated.assign(static_cast<std::size_t>(r_max) + 1, Grid<double>(m.width(), m.height(), 0.0));
    }
    SoftMap dilated = m;
    MorphTrace scratch;
    std::vector<MorphTrace> ero_traces;
    for (int r = 1; r <= r_max; ++r) {
        auto& dt = dil_traces[static_cast<std::size_t>(r) - 1];
        dilated = dilate1(dilated, &dt);
        if (sig != nullptr) {
            sig->mix(dt);
        }
        SoftMap closed = dilated;
        ero_traces.assign(static_cast<std::size_t>(r), MorphTrace{});
        for (int k = 0; k < r; ++k) {
            closed = erode1(closed, &ero_traces[static_cast<std::size_t>(k)]);
            if (sig != nullptr) {
                sig->mix(ero_traces[static_cast<std::size_t>(k)]);
            }
        }
        if (grad) {
            Grid<double> g = (*upstream)[static_cast<std::size_t>(r) - 1];
            for (int k = r - 1; k >= 0; --k) {
                Grid<double> prev(m.width(), m.height(), 0.0);
                backprop(ero_traces[static_cast<std::size_t>(k)], g.values(), prev.values());
                g = std::move(prev);
            }
            auto& gd = grad_dilated[static_cast<std::size_t>(r)];
            for (std::size_t i = 0; i < g.size(); ++i) {
                gd[i] += g[i];
            }
        }
        res.closings.push_back(std::move(closed));
    }
    if (grad) {
        for (int r = r_max; r >= 1; --r) {
            backprop(dil_traces[static_cast<std::size_t>(r) - 1], grad_dilated[static_cast<std::size_t>(r)].values(),
                     grad_dilated[static_cast<std::size_t>(r) - 1].values());
        }
        res.gradient = std::move(grad_dilated[0]);
    }
    return res;
}

}  // namespace detail

/// sum_r eps_r * (C_r(P) - P)^2 * Y_s, pointwise.
[[nodiscard]] inline Grid<double> error_map(const SoftMap& prediction, const BinaryMask& truth_skeleton,
                                            const WeightSchedule& schedule) {
    require_same_shape(prediction, truth_skeleton, "error_map");
    const auto cascade = detail::closing_cascade(prediction, schedule.r_max, nullptr, nullptr);
    Grid<double> out(prediction.width(), prediction.height(), 0.0);
    for (int r = schedule.r_max; r >= 1; --r) {
        const auto& closed = cascade.closings[static_cast<std::size_t>(r) - 1];
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (truth_skeleton[i]) {
                const double d = closed[i] - prediction[i];
                out[i] += schedule.increment(r) * d * d;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Soft skeleton

namespace detail {

struct SoftSkeletonStage {
    MorphTrace shrink;        // x_j = erode1(x_{j-1}); empty for j = 0
    MorphTrace open_erode;    // erode1(x_j)
    MorphTrace open_dilate;   // dilate1(erode1(x_j))
    std::vector<std::uint8_t> residual_positive;  // x_j - open(x_j) > 0
    std::vector<double> delta;                    // relu(x_j - open(x_j))
    std::vector<double> skel_before;              // accumulator before this stage (j >= 1)
    std::vector<std::uint8_t> update_positive;    // delta - skel*delta > 0 (j >= 1)
};

struct SoftSkeletonTape {
    int width = 0;
    int height = 0;
    std::vector<SoftSkeletonStage> stages;
    SoftMap skeleton;
};

inline SoftSkeletonTape soft_skeleton_traced(const SoftMap& p, int iters, BranchSignature* sig) {
    SoftSkeletonTape tape;
    tape.width = p.width();
    tape.height = p.height();
    tape.stages.resize(static_cast<std::size_t>(iters) + 1);
    SoftMap x = p;
    SoftMap skel(p.width(), p.height(), 0.0);
    for (int j = 0; j <= iters; ++j) {
        auto& st = tape.stages[static_cast<std::size_t>(j)];
        if (j > 0) {
            x = erode1(x, &st.shrink);
        }
        const SoftMap opened = dilate1(erode1(x, &st.open_erode), &st.open_dilate);
        st.residual_positive.assign(x.size(), 0);
        st.delta.assign(x.size(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = x[i] - opened[i];
            if (v > 0.0) {
                st.residual_positive[i] = 1;
                st.delta[i] = v;
            }
        }
        if (j == 0) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                skel[i] = st.delta[i];
            }
        } else {
            st.skel_before.assign(skel.values().begin(), skel.values().end());
            st.update_positive.assign(x.size(), 0);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double u = st.delta[i] - skel[i] * st.delta[i];
                if (u > 0.0) {
                    st.update_positive[i] = 1;
                    skel[i] += u;
                }
            }
        }
        if (sig != nullptr) {
            sig->mix(st.shrink);
            sig->mix(st.open_erode);
            sig->mix(st.open_dilate);
            for (auto b : st.residual_positive) {
                sig->mix_flag(b != 0);
            }
            for (auto b : st.update_positive) {
                sig->mix_flag(b != 0);
            }
        }
    }
    tape.skeleton = std::move(skel);
    return tape;
}

/// Vector-Jacobian product of the soft skeleton.
inline Grid<double> soft_skeleton_vjp(const SoftSkeletonTape& tape, const Grid<double>& grad_skeleton) {
    const std::size_t n = grad_skeleton.size();
    std::vector<double> g_skel(grad_skeleton.values().begin(), grad_skeleton.values().end());
    std::vector<double> g_x(n, 0.0);
    std::vector<double> g_v(n, 0.0);
    std::vector<double> g_open(n, 0.0);
    std::vector<double> g_eroded(n, 0.0);
    for (auto j = static_cast<std::ptrdiff_t>(tape.stages.size()) - 1; j >= 0; --j) {
        const auto& st = tape.stages[static_cast<std::size_t>(j)];
        // Gradient reaching delta_j.
        std::vector<double> g_delta(n, 0.0);
        if (j == 0) {
            g_delta = g_skel;
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (st.update_positive[i]) {
                    const double g_u = g_skel[i];
                    g_delta[i] = g_u * (1.0 - st.skel_before[i]);
                    g_skel[i] += g_u * (-st.delta[i]);
                }
            }
        }
        // delta = relu(x - dilate1(erode1(x)))
        std::fill(g_open.begin(), g_open.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            g_v[i] = st.residual_positive[i] ? g_delta[i] : 0.0;
            g_x[i] += g_v[i];
            g_open[i] = -g_v[i];
        }
        std::fill(g_eroded.begin(), g_eroded.end(), 0.0);
        backprop(st.open_dilate, g_open, g_eroded);
        backprop(st.open_erode, g_eroded, g_x);
        if (j > 0) {
            std::vector<double> g_prev(n, 0.0);
            backprop(st.shrink, g_x, g_prev);
            g_x = std::move(g_prev);
        }
    }
    return Grid<double>(tape.width, tape.height, std::move(g_x));
}

}  // namespace detail

/// Iterative soft thinning: skel = relu(x - open(x)), then `iters` times
/// x <- erode1(x), delta = relu(x - open(x)), skel += relu(delta - skel*delta),
/// with open = dilate1 o erode1. On binary input the result lies inside the
/// foreground.
[[nodiscard]] inline SoftMap soft_skeleton(const SoftMap& p, int iters) {
    if (iters < 1) {
        throw Error("soft_skeleton: iteration count must be >= 1");
    }
    return detail::soft_skeleton_traced(p, iters, nullptr).skeleton;
}

// ---------------------------------------------------------------------------
// Losses

enum class LossKind { dice, bce, cldice, clbce, tsens, tprec, topo, propdice, propbce };

inline constexpr std::array<LossKind, 9> kAllLossKinds = {
    LossKind::dice, LossKind::bce,  LossKind::cldice,   LossKind::clbce,  LossKind::tsens,
    LossKind::tprec, LossKind::topo, LossKind::propdice, LossKind::propbce};

[[nodiscard]] constexpr std::string_view loss_name(LossKind k) noexcept {
    switch (k) {
        case LossKind::dice: return "dice";
        case LossKind::bce: return "bce";
        case LossKind::cldice: return "cldice";
        case LossKind::clbce: return "clbce";
        case LossKind::tsens: return "tsens";
        case LossKind::tprec: return "tprec";
        case LossKind::topo: return "topo";
        case LossKind::propdice: return "propdice";
        case LossKind::propbce: return "propbce";
    }
    return "?";
}

[[nodiscard]] inline std::optional<LossKind> loss_kind_from_name(std::string_view name) {
    if (name.starts_with("loss_")) {
        name.remove_prefix(5);
    }
    for (LossKind k : kAllLossKinds) {
        if (loss_name(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

struct LossParams {
    double alpha = 0.5;   // class weight (bce, clbce) / dice share (cldice)
    double alpha1 = 0.7;  // alpha of the cl* base inside propdice/propbce
    double alpha2 = 0.5;  // tsens share inside topo
    double beta = 0.5;    // centreline weight in clbce
    double c = 0.1;       // weight of topo inside propdice/propbce
    int r_max = 10;
    int skeleton_iters = 0;  // 0 = r_max

    [[nodiscard]] int soft_skeleton_iterations() const noexcept { return skeleton_iters > 0 ? skeleton_iters : r_max; }

    void validate() const {
        auto unit = [](double v, const char* name) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw Error(std::string("loss parameter ") + name + " must lie in [0,1]");
            }
        };
        unit(alpha, "alpha");
        unit(alpha1, "alpha1");
        unit(alpha2, "alpha2");
        unit(beta, "beta");
        if (!(c >= 0.0)) {
            throw Error("loss parameter c must be non-negative");
        }
        if (r_max < 1) {
            throw Error("loss parameter r_max must be >= 1");
        }
        if (skeleton_iters < 0) {
            throw Error("loss parameter skeleton_iters must be >= 0");
        }
    }
};

struct LossOptions {
    bool gradient = false;
    std::optional<double> frozen_skeleton_mass;
};

struct LossValue {
    double value = 0.0;
    std::optional<Grid<double>> gradient;
    bool degenerate = false;
    /// |P_s|_1 as observed, for losses containing the topological precision term.
    std::optional<double> skeleton_mass;
    std::uint64_t branch_signature = 0;
};

namespace detail {

class LossWorkspace {
public:
    LossWorkspace(const SoftMap& p, const BinaryMask& y, const LossParams& params, const LossOptions& opts)
        : p_(p), y_(y), params_(params), opts_(opts), schedule_(weight_schedule(params.r_max)) {
        require_same_shape(p, y, "loss");
        require_unit_range(p, "loss prediction");
        params.validate();
        if (opts.gradient) {
            grad_p_ = Grid<double>(p.width(), p.height(), 0.0);
        }
    }

    const SoftMap& p() const noexcept { return p_; }
    const BinaryMask& y() const noexcept { return y_; }
    const LossParams& params() const noexcept { return params_; }
    const WeightSchedule& schedule() const noexcept { return schedule_; }
    bool want_gradient() const noexcept { return opts_.gradient; }
    std::size_t size() const noexcept { return p_.size(); }
    Grid<double>& grad_p() { return *grad_p_; }
    BranchSignature& signature() noexcept { return sig_; }
    void mark_degenerate() noexcept { degenerate_ = true; }

    const BinaryMask& truth_skeleton() {
        if (!y_skel_) {
            y_skel_ = skeletonize(y_);
        }
        return *y_skel_;
    }

    const SoftMap& prediction_skeleton() {
        if (!p_skel_) {
            p_skel_ = soft_skeleton_traced(p_, params_.soft_skeleton_iterations(), &sig_);
            if (opts_.gradient) {
                grad_p_skel_ = Grid<double>(p_.width(), p_.height(), 0.0);
            }
        }
        return p_skel_->skeleton;
    }

    Grid<double>& grad_p_skeleton() { return *grad_p_skel_; }

    std::optional<double> frozen_skeleton_mass() const noexcept { return opts_.frozen_skeleton_mass; }
    void record_skeleton_mass(double m) noexcept { skeleton_mass_ = m; }

    /// Closings of the binary target, cached across terms.
    const std::vector<SoftMap>& truth_closings() {
        if (!y_closings_) {
            y_closings_ = closing_cascade(to_soft(y_), schedule_.r_max, nullptr, nullptr).closings;
        }
        return *y_closings_;
    }

    LossValue finish(double value) {
        LossValue out;
        out.value = value;
        out.degenerate = degenerate_;
        out.skeleton_mass = skeleton_mass_;
        if (opts_.gradient) {
            if (p_skel_) {
                const Grid<double> back = soft_skeleton_vjp(*p_skel_, *grad_p_skel_);
                for (std::size_t i = 0; i < back.size(); ++i) {
                    (*grad_p_)[i] += back[i];
                }
            }
            out.gradient = std::move(grad_p_);
        }
        out.branch_signature = sig_.value();
        return out;
    }

private:
    const SoftMap& p_;
    const BinaryMask& y_;
    const LossParams& params_;
    const LossOptions& opts_;
    WeightSchedule schedule_;
    std::optional<Grid<double>> grad_p_;
    std::optional<BinaryMask> y_skel_;
    std::optional<SoftSkeletonTape> p_skel_;
    std::optional<Grid<double>> grad_p_skel_;
    std::optional<std::vector<SoftMap>> y_closings_;
    std::optional<double> skeleton_mass_;
    BranchSignature sig_;
    bool degenerate_ = false;
};

// Each term returns its value and adds weight * d(term)/dP into the workspace.

inline double term_dice(LossWorkspace& ws, double weight) {
    const auto& p = ws.p();
    const auto& y = ws.y();
    double overlap = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        const double yi = y[i] ? 1.0 : 0.0;
        overlap += p[i] * yi;
        mass += p[i] * p[i] + yi * yi;
    }
    ws.signature().mix_flag(mass == 0.0);
    if (mass == 0.0) {
        ws.mark_degenerate();
        return 0.0;
    }
    if (ws.want_gradient() && weight != 0.0) {
        auto& g = ws.grad_p();
        for (std::size_t i = 0; i < ws.size(); ++i) {
            const double yi = y[i] ? 1.0 : 0.0;
            g[i] += weight * -2.0 * (yi * mass - overlap * 2.0 * p[i]) / (mass * mass);
        }
    }
    return 1.0 - 2.0 * overlap / mass;
}

// -(1/N) sum [pos_i log p_i + neg_i log(1 - p_i)] for given per-pixel weights;
// neg_skel_i multiplies P_s and contributes a gradient through the skeleton.
inline double weighted_log_loss(LossWorkspace& ws, std::span<const double> pos, std::span<const double> neg,
                                std::span<const double> neg_skel, double weight) {
    const auto& p = ws.p();
    const double n = static_cast<double>(ws.size());
    const SoftMap* ps = neg_skel.empty() ? nullptr : &ws.prediction_skeleton();
    double total = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        const bool pos_clamped = p[i] <= kLogClamp;
        const bool neg_clamped = 1.0 - p[i] <= kLogClamp;
        ws.signature().mix_flag(pos_clamped);
        ws.signature().mix_flag(neg_clamped);
        const double log_p = std::log(std::max(p[i], kLogClamp));
        const double log_q = std::log(std::max(1.0 - p[i], kLogClamp));
        double neg_w = neg[i];
        if (ps != nullptr) {
            neg_w += neg_skel[i] * (*ps)[i];
        }
        // Zero weights contribute exactly zero even where the log is clamped.
        if (pos[i] != 0.0) {
            total += pos[i] * log_p;
        }
        if (neg_w != 0.0) {
            total += neg_w * log_q;
        }
        if (ws.want_gradient() && weight != 0.0) {
            double d = 0.0;
            if (!pos_clamped) {
                d += pos[i] / p[i];
            }
            if (!neg_clamped) {
                d -= neg_w / (1.0 - p[i]);
            }
            ws.grad_p()[i] += weight * -d / n;
            if (ps != nullptr && neg_skel[i] != 0.0) {
                ws.grad_p_skeleton()[i] += weight * -(neg_skel[i] * log_q) / n;
            }
        }
    }
    return -total / n;
}

inline double term_bce(LossWorkspace& ws, double weight, double alpha) {
    std::vector<double> pos(ws.size());
    std::vector<double> neg(ws.size());
    for (std::size_t i = 0; i < ws.size(); ++i) {
        const double yi = ws.y()[i] ? 1.0 : 0.0;
        pos[i] = alpha * yi;
        neg[i] = (1.0 - alpha) * (1.0 - yi);
    }
    return weighted_log_loss(ws, pos, neg, {}, weight);
}

inline double term_clbce(LossWorkspace& ws, double weight, double alpha) {
    const double beta = ws.params().beta;
    const auto& ys = ws.truth_skeleton();
    std::vector<double> pos(ws.size());
    std::vector<double> neg(ws.size());
    std::vector<double> neg_skel(ws.size());
    for (std::size_t i = 0; i < ws.size(); ++i) {
        const double yi = ws.y()[i] ? 1.0 : 0.0;
        const double ysi = ys[i] ? 1.0 : 0.0;
        pos[i] = alpha * yi + beta * ysi;
        neg[i] = (1.0 - alpha) * (1.0 - yi);
        // Predicted centreline outside the reference counts as a false positive.
        neg_skel[i] = (1.0 - beta) * (1.0 - yi);
    }
    return weighted_log_loss(ws, pos, neg, neg_skel, weight);
}

/// 1 - soft clDice, with P_s the soft skeleton and Y_s the hard one.
inline double term_one_minus_soft_cldice(LossWorkspace& ws, double weight) {
    const auto& p = ws.p();
    const auto& y = ws.y();
    const auto& ys = ws.truth_skeleton();
    const auto& ps = ws.prediction_skeleton();
    double ps_sum = 0.0;
    double ps_in_y = 0.0;
    double ys_sum = 0.0;
    double ys_in_p = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        ps_sum += ps[i];
        ps_in_y += y[i] ? ps[i] : 0.0;
        if (ys[i]) {
            ys_sum += 1.0;
            ys_in_p += p[i];
        }
    }
    ws.signature().mix_flag(ps_sum == 0.0);
    ws.signature().mix_flag(ys_sum == 0.0);
    if (ps_sum == 0.0 || ys_sum == 0.0) {
        ws.mark_degenerate();
        return (ps_sum == 0.0 && ys_sum == 0.0) ? 0.0 : 1.0;
    }
    const double tprec = ps_in_y / ps_sum;
    const double tsens = ys_in_p / ys_sum;
    ws.signature().mix_flag(tprec + tsens == 0.0);
    if (tprec + tsens == 0.0) {
        ws.mark_degenerate();
        return 1.0;
    }
    const double denom = tprec + tsens;
    const double cl = 2.0 * tprec * tsens / denom;
    if (ws.want_gradient() && weight != 0.0) {
        const double dcl_dprec = 2.0 * tsens * tsens / (denom * denom);
        const double dcl_dsens = 2.0 * tprec * tprec / (denom * denom);
        auto& gp = ws.grad_p();
        auto& gs = ws.grad_p_skeleton();
        for (std::size_t i = 0; i < ws.size(); ++i) {
            const double yi = y[i] ? 1.0 : 0.0;
            gs[i] += weight * -dcl_dprec * (yi - tprec) / ps_sum;
            if (ys[i]) {
                gp[i] += weight * -dcl_dsens / ys_sum;
            }
        }
    }
    return 1.0 - cl;
}

inline double term_cldice(LossWorkspace& ws, double weight, double alpha) {
    const double dice = term_dice(ws, weight * alpha);
    const double rest = term_one_minus_soft_cldice(ws, weight * (1.0 - alpha));
    return alpha * dice + (1.0 - alpha) * rest;
}

inline double term_tsens(LossWorkspace& ws, double weight) {
    const auto& ys = ws.truth_skeleton();
    const auto& sched = ws.schedule();
    double norm = 0.0;
    for (auto v : ys.values()) {
        norm += v ? 1.0 : 0.0;
    }
    ws.signature().mix_flag(norm == 0.0);
    if (norm == 0.0) {
        ws.mark_degenerate();
        return 0.0;
    }
    const bool grad = ws.want_gradient() && weight != 0.0;
    std::vector<Grid<double>> upstream;
    if (grad) {
        for (int r = 1; r <= sched.r_max; ++r) {
            Grid<double> g(ys.width(), ys.height(), 0.0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] = ys[i] ? weight * sched.increment(r) / norm : 0.0;
            }
            upstream.push_back(std::move(g));
        }
    }
    const auto cascade = closing_cascade(ws.p(), sched.r_max, grad ? &upstream : nullptr, &ws.signature());
    double total = 0.0;
    double eps_sum = 0.0;
    for (int r = 1; r <= sched.r_max; ++r) {
        eps_sum += sched.increment(r);
    }
    for (std::size_t i = 0; i < ws.size(); ++i) {
        if (!ys[i]) {
            continue;
        }
        double e = 0.0;
        for (int r = sched.r_max; r >= 1; --r) {
            e += sched.increment(r) * (cascade.closings[static_cast<std::size_t>(r) - 1][i] - ws.p()[i]);
        }
        total += e;
    }
    if (grad) {
        auto& g = ws.grad_p();
        for (std::size_t i = 0; i < ws.size(); ++i) {
            g[i] += (*cascade.gradient)[i];
            if (ys[i]) {
                g[i] -= weight * eps_sum / norm;
            }
        }
    }
    return total / norm;
}

inline double term_tprec(LossWorkspace& ws, double weight) {
    const auto& sched = ws.schedule();
    const auto& closings = ws.truth_closings();
    const auto& y = ws.y();
    const auto& ps = ws.prediction_skeleton();
    double observed_mass = 0.0;
    for (double v : ps.values()) {
        observed_mass += v;
    }
    ws.record_skeleton_mass(observed_mass);
    const double norm = ws.frozen_skeleton_mass().value_or(observed_mass);
    ws.signature().mix_flag(norm == 0.0);
    if (norm == 0.0) {
        ws.mark_degenerate();
        return 0.0;
    }
    const bool grad = ws.want_gradient() && weight != 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        const double yi = y[i] ? 1.0 : 0.0;
        double e = 0.0;
        for (int r = sched.r_max; r >= 1; --r) {
            e += sched.increment(r) * (closings[static_cast<std::size_t>(r) - 1][i] - yi);
        }
        total += e * ps[i];
        if (grad) {
            ws.grad_p_skeleton()[i] += weight * e / norm;
        }
    }
    return total / norm;
}

inline double term_topo(LossWorkspace& ws, double weight) {
    const double a2 = ws.params().alpha2;
    const double sens = term_tsens(ws, weight * a2);
    const double prec = term_tprec(ws, weight * (1.0 - a2));
    return a2 * sens + (1.0 - a2) * prec;
}

}  // namespace detail

/// Evaluates one loss, optionally with its gradient w.r.t. P.
[[nodiscard]] inline LossValue evaluate_loss(LossKind kind, const SoftMap& prediction, const BinaryMask& truth,
                                             const LossParams& params, const LossOptions& opts = {}) {
    detail::LossWorkspace ws(prediction, truth, params, opts);
    double value = 0.0;
    switch (kind) {
        case LossKind::dice: value = detail::term_dice(ws, 1.0); break;
        case LossKind::bce: value = detail::term_bce(ws, 1.0, params.alpha); break;
        case LossKind::cldice: value = detail::term_cldice(ws, 1.0, params.alpha); break;
        case LossKind::clbce: value = detail::term_clbce(ws, 1.0, params.alpha); break;
        case LossKind::tsens: value = detail::term_tsens(ws, 1.0); break;
        case LossKind::tprec: value = detail::term_tprec(ws, 1.0); break;
        case LossKind::topo: value = detail::term_topo(ws, 1.0); break;
        case LossKind::propdice: {
            const double base = detail::term_cldice(ws, 1.0, params.alpha1);
            const double topo = detail::term_topo(ws, params.c);
            value = base + params.c * topo;
            break;
        }
        case LossKind::propbce: {
            const double base = detail::term_clbce(ws, 1.0, params.alpha1);
            const double topo = detail::term_topo(ws, params.c);
            value = base + params.c * topo;
            break;
        }
    }
    return ws.finish(value);
}

[[nodiscard]] inline LossValue loss_dice(const SoftMap& p, const BinaryMask& y, const LossParams& params = {},
                                         const LossOptions& opts = {}) {
    return evaluate_loss(LossKind::dice, p, y, params, opts);
}
[[nodiscard]] inline LossValue loss_bce(const SoftMap& p, const BinaryMask& y, const LossParams& params = {},
                                        const LossOptions& opts = {}) {
    return evaluate_loss(LossKind::bce, p, y, params, opts);
}
[[nodiscard]] inline LossValue loss_cldice(const SoftMap& p, const BinaryMask& y, const LossParams& params = {},
                                           const LossOptions& opts = {}) {
    return evaluate_loss(LossKind::cldice, p, y, params, opts);
}
[[nodiscard]] inline LossValue loss_clbce(const SoftMap& p, const BinaryMask& y, const LossParams& params = {},
                                          const LossOptions& opts = {}) {
    return evaluate_loss(LossKind::clbce, p, y, params, opts);
}
[[nodiscard]] inline LossValue loss_tsens(const SoftMap& p, const BinaryMask& y, const LossParams& params = {},
                                          const LossOptions& opts = {}) {
    return evaluate_loss(LossKind::tsens, p, y, params, opts);
}
[[nodiscard]] inline LossValue loss_tprec(const SoftMap& p, const BinaryMask& y, const LossParams& params = {},
                                          const LossOptions& opts = {}) {
    return evaluate_loss(LossKind::tprec, p, y, params, opts);
}
[[nodiscard]] inline LossValue loss_topo(const SoftMap& p, const BinaryMask& y, const LossParams& params = {},
                                         const LossOptions& opts = {}) {
    return evaluate_loss(LossKind::topo, p, y, params, opts);
}
[[nodiscard]] inline LossValue loss_propdice(const SoftMap& p, const BinaryMask& y, const LossParams& params = {},
                                             const LossOptions& opts = {}) {
    return evaluate_loss(LossKind::propdice, p, y, params, opts);
}
[[nodiscard]] inline LossValue loss_propbce(const SoftMap& p, const BinaryMask& y, const LossParams& params = {},
                                            const LossOptions& opts = {}) {
    return evaluate_loss(LossKind::propbce, p, y, params, opts);
}

}  // namespace vtopo
