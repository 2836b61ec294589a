// vtopo: batch evaluation, visit-frequency heatmaps and loss/gradient checks.
//
// Exit status: 0 success, 1 some images skipped or failed, 2 configuration
// or input error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vtopo/vtopo.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

vtopo::PathStrategy parse_strategy(const std::string& name, double exponent) {
    if (name == "centerline") {
        return vtopo::PathStrategy::centerline();
    }
    if (name == "weighted") {
        return vtopo::PathStrategy::weighted(exponent);
    }
    throw ConfigError("unknown strategy '" + name + "' (expected centerline or weighted)");
}

std::vector<vtopo::Metric> parse_metrics(const std::string& list) {
    std::vector<vtopo::Metric> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        const auto m = vtopo::metric_from_name(item);
        if (!m) {
            throw ConfigError("unknown metric '" + item + "' (expected auc, acc, sens, spec, cldice, mH, mF)");
        }
        out.push_back(*m);
    }
    if (out.empty()) {
        throw ConfigError("--metrics must name at least one metric");
    }
    return out;
}

json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    try {
        json j = json::parse(in);
        if (!j.is_object()) {
            throw ConfigError("config file must hold a JSON object");
        }
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write " + out_path);
    }
    out << text;
}

// Settings of `evaluate`; values come from --config first, then flags.
struct EvaluateSettings {
    std::string pred;
    std::string gt;
    std::string strategy = "centerline";
    double exponent = 2.0;
    std::string coherence;
    std::size_t samples = 1000;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    std::string metrics;
    std::string out;
    std::string format = "csv";
    std::string mode = "sampled";
    std::string config;
};

template <typename T>
void take(const json& cfg, const char* key, T& dst) {
    if (!cfg.contains(key)) {
        return;
    }
    try {
        dst = cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

int run_evaluate(EvaluateSettings s, const CLI::App& cmd) {
    if (!s.config.empty()) {
        const json cfg = read_config(s.config);
        EvaluateSettings from_file = s;
        take(cfg, "pred", from_file.pred);
        take(cfg, "gt", from_file.gt);
        take(cfg, "strategy", from_file.strategy);
        take(cfg, "exponent", from_file.exponent);
        take(cfg, "coherence", from_file.coherence);
        take(cfg, "samples", from_file.samples);
        take(cfg, "seed", from_file.seed);
        take(cfg, "threshold", from_file.threshold);
        take(cfg, "out", from_file.out);
        take(cfg, "format", from_file.format);
        take(cfg, "mode", from_file.mode);
        if (cfg.contains("metrics")) {
            const json& m = cfg.at("metrics");
            if (m.is_array()) {
                from_file.metrics.clear();
                for (const auto& item : m) {
                    from_file.metrics += (from_file.metrics.empty() ? "" : ",") + item.get<std::string>();
                }
            } else {
                take(cfg, "metrics", from_file.metrics);
            }
        }
        auto keep_flag = [&](const char* flag, auto& dst, const auto& flag_value) {
            if (cmd.count(flag) == 0) {
                dst = flag_value;
            }
        };
        // Flags given on the command line win over the file.
        keep_flag("--pred", s.pred, from_file.pred);
        keep_flag("--gt", s.gt, from_file.gt);
        keep_flag("--strategy", s.strategy, from_file.strategy);
        keep_flag("--exponent", s.exponent, from_file.exponent);
        keep_flag("--coherence", s.coherence, from_file.coherence);
        keep_flag("--samples", s.samples, from_file.samples);
        keep_flag("--seed", s.seed, from_file.seed);
        keep_flag("--threshold", s.threshold, from_file.threshold);
        keep_flag("--metrics", s.metrics, from_file.metrics);
        keep_flag("--out", s.out, from_file.out);
        keep_flag("--format", s.format, from_file.format);
        keep_flag("--mode", s.mode, from_file.mode);
    }
    if (s.pred.empty() || s.gt.empty()) {
        throw ConfigError("--pred and --gt are required");
    }
    if (s.format != "csv" && s.format != "json") {
        throw ConfigError("unknown format '" + s.format + "' (expected csv or json)");
    }
    if (s.mode != "sampled" && s.mode != "exact") {
        throw ConfigError("unknown mode '" + s.mode + "' (expected sampled or exact)");
    }

    vtopo::EvalConfig config;
    config.prediction_dir = s.pred;
    config.groundtruth_dir = s.gt;
    config.strategy = parse_strategy(s.strategy, s.exponent);
    config.n_samples = s.samples;
    config.seed = s.seed;
    config.threshold = s.threshold;
    config.index_mode = s.mode == "exact" ? vtopo::IndexMode::exact : vtopo::IndexMode::sampled;
    if (!s.metrics.empty()) {
        config.metrics = parse_metrics(s.metrics);
    } else if (!s.coherence.empty()) {
        // Without an explicit list, --coherence selects which index column is reported.
        if (s.coherence != "hamming" && s.coherence != "feasible") {
            throw ConfigError("unknown coherence '" + s.coherence + "' (expected hamming or feasible)");
        }
        config.metrics = {vtopo::Metric::auc, vtopo::Metric::acc, vtopo::Metric::sens, vtopo::Metric::spec,
                          vtopo::Metric::cldice,
                          s.coherence == "hamming" ? vtopo::Metric::mH : vtopo::Metric::mF};
    }
    if (!std::filesystem::is_directory(config.prediction_dir)) {
        throw ConfigError("prediction directory does not exist: " + s.pred);
    }
    if (!std::filesystem::is_directory(config.groundtruth_dir)) {
        throw ConfigError("ground-truth directory does not exist: " + s.gt);
    }
    try {
        config.validate();
    } catch (const vtopo::Error& e) {
        throw ConfigError(e.what());
    }

    const vtopo::BatchReport report = vtopo::evaluate_batch(config);
    for (const auto& f : report.unmatched) {
        std::cerr << "skipped (no same-stem partner): " << f << '\n';
    }
    for (const auto& row : report.rows) {
        if (!row.error.empty()) {
            std::cerr << "failed " << row.image_id << ": " << row.error << '\n';
        }
    }
    const std::string text =
        s.format == "csv" ? vtopo::format_csv(report, config.metrics) : vtopo::format_json(report, config.metrics);
    write_output(text, s.out);
    return report.complete() ? kExitOk : kExitPartial;
}

struct FreqmapSettings {
    std::string mask;
    std::string strategy = "centerline";
    double exponent = 2.0;
    std::string mode = "exact";
    std::size_t samples = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

int run_freqmap(const FreqmapSettings& s) {
    const vtopo::PathStrategy strategy = parse_strategy(s.strategy, s.exponent);
    vtopo::FrequencyMode mode;
    if (s.mode == "exact") {
        mode = vtopo::FrequencyMode::exact();
    } else if (s.mode == "sampled") {
        mode = vtopo::FrequencyMode::sampled(s.samples, s.seed);
    } else {
        throw ConfigError("unknown mode '" + s.mode + "' (expected exact or sampled)");
    }
    const vtopo::BinaryMask mask = vtopo::load_mask(std::filesystem::path(s.mask));
    const auto counts = vtopo::visit_frequency_map(mask, strategy, mode);
    vtopo::save_heatmap(counts, s.out);
    double peak = 0.0;
    for (double v : counts.values()) {
        peak = std::max(peak, v);
    }
    json summary;
    summary["width"] = counts.width();
    summary["height"] = counts.height();
    summary["max_count"] = peak;
    summary["out"] = s.out;
    std::cout << summary.dump() << '\n';
    return kExitOk;
}

struct LossCheckSettings {
    std::string pred;
    std::string gt;
    std::string loss;
    vtopo::LossParams params;
    double step = 1e-5;
    std::size_t fd_pixels = 0;
};

// Evenly spaced flat indices; every pixel when n is 0 or covers the image.
std::vector<std::size_t> fd_subset(std::size_t total, std::size_t n) {
    std::vector<std::size_t> out;
    if (n == 0 || n >= total) {
        return out;
    }
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back(k * total / n);
    }
    return out;
}

int run_loss_check(const LossCheckSettings& s) {
    const auto kind = vtopo::loss_kind_from_name(s.loss);
    if (!kind) {
        throw ConfigError("unknown loss '" + s.loss +
                          "' (expected dice, bce, cldice, clbce, tsens, tprec, topo, propdice, propbce)");
    }
    try {
        s.params.validate();
    } catch (const vtopo::Error& e) {
        throw ConfigError(e.what());
    }
    const vtopo::ProbMap p = vtopo::load_probmap(std::filesystem::path(s.pred));
    const vtopo::BinaryMask y = vtopo::load_mask(std::filesystem::path(s.gt));
    if (!p.same_shape(y)) {
        throw ConfigError("prediction and ground truth differ in size");
    }
    const vtopo::LossValue lv = vtopo::evaluate_loss(*kind, p, y, s.params, {true, std::nullopt});
    const auto& g = *lv.gradient;
    double gmin = g[0];
    double gmax = g[0];
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (double v : g.values()) {
        gmin = std::min(gmin, v);
        gmax = std::max(gmax, v);
        abs_sum += std::abs(v);
        sq_sum += v * v;
    }
    vtopo::GradientCheckOptions gc_opts;
    gc_opts.step = s.step;
    gc_opts.pixels = fd_subset(p.size(), s.fd_pixels);
    const vtopo::GradientCheckResult gc = vtopo::gradient_check(*kind, p, y, s.params, gc_opts);

    nlohmann::ordered_json out;
    out["loss"] = std::string(vtopo::loss_name(*kind));
    out["value"] = lv.value;
    out["degenerate"] = lv.degenerate;
    if (*kind == vtopo::LossKind::propdice || *kind == vtopo::LossKind::propbce) {
        vtopo::LossParams base_params = s.params;
        base_params.alpha = s.params.alpha1;
        const auto base_kind =
            *kind == vtopo::LossKind::propdice ? vtopo::LossKind::cldice : vtopo::LossKind::clbce;
        out["terms"] = {
            {std::string(vtopo::loss_name(base_kind)), vtopo::evaluate_loss(base_kind, p, y, base_params).value},
            {"topo", vtopo::evaluate_loss(vtopo::LossKind::topo, p, y, s.params).value},
            {"c", s.params.c}};
    }
    out["grad_stats"] = {{"min", gmin},
                         {"max", gmax},
                         {"mean_abs", abs_sum / static_cast<double>(g.size())},
                         {"l2", std::sqrt(sq_sum)}};
    out["fd_max_rel_err"] = gc.max_rel_error;
    out["fd_checked"] = gc.checked;
    out["excluded"] = gc.excluded;
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topological similarity index and closing-based losses for vessel segmentation"};
    app.require_subcommand(1);

    EvaluateSettings ev;
    auto* evaluate = app.add_subcommand("evaluate", "Score a directory of predictions against ground truth");
    evaluate->add_option("--pred", ev.pred, "Prediction directory (8-bit PGM/PNG, value/255 = probability)");
    evaluate->add_option("--gt", ev.gt, "Ground-truth directory, paired by filename stem");
    evaluate->add_option("--strategy", ev.strategy, "Path strategy: centerline or weighted")->capture_default_str();
    evaluate->add_option("--exponent", ev.exponent, "Cost exponent of the weighted strategy")->capture_default_str();
    evaluate->add_option("--coherence", ev.coherence,
                         "Index column to report when --metrics is absent: hamming (mH) or feasible (mF)");
    evaluate->add_option("--samples", ev.samples, "Sampled paths per index term")->capture_default_str();
    evaluate->add_option("--seed", ev.seed, "Base seed; each image uses seed XOR hash(stem)")->capture_default_str();
    evaluate->add_option("--threshold", ev.threshold, "Binarisation threshold for predictions")->capture_default_str();
    evaluate->add_option("--metrics", ev.metrics, "Comma-separated subset of auc,acc,sens,spec,cldice,mH,mF");
    evaluate->add_option("--mode", ev.mode, "Index computation: sampled or exact")->capture_default_str();
    evaluate->add_option("--out", ev.out, "Output file (stdout when absent)");
    evaluate->add_option("--format", ev.format, "csv or json")->capture_default_str();
    evaluate->add_option("--config", ev.config, "JSON config file; command-line flags override it");

    FreqmapSettings fm;
    auto* freqmap = app.add_subcommand("freqmap", "Render how often each pixel lies on a minimum-cost path");
    freqmap->add_option("--mask", fm.mask, "Binary mask image")->required();
    freqmap->add_option("--strategy", fm.strategy, "centerline or weighted")->capture_default_str();
    freqmap->add_option("--exponent", fm.exponent, "Cost exponent of the weighted strategy")->capture_default_str();
    freqmap->add_option("--mode", fm.mode, "exact or sampled")->capture_default_str();
    freqmap->add_option("--samples", fm.samples, "Sampled paths in sampled mode")->capture_default_str();
    freqmap->add_option("--seed", fm.seed, "Seed in sampled mode")->capture_default_str();
    freqmap->add_option("--out", fm.out, "Heatmap image (.png or .pgm)")->required();

    LossCheckSettings lc;
    auto* loss_check = app.add_subcommand("loss-check", "Evaluate a loss and verify its gradient numerically");
    loss_check->add_option("--pred", lc.pred, "Soft prediction image")->required();
    loss_check->add_option("--gt", lc.gt, "Binary ground-truth image")->required();
    loss_check->add_option("--loss", lc.loss, "dice, bce, cldice, clbce, tsens, tprec, topo, propdice, propbce")
        ->required();
    loss_check->add_option("--alpha", lc.params.alpha)->capture_default_str();
    loss_check->add_option("--alpha1", lc.params.alpha1)->capture_default_str();
    loss_check->add_option("--alpha2", lc.params.alpha2)->capture_default_str();
    loss_check->add_option("--beta", lc.params.beta)->capture_default_str();
    loss_check->add_option("-c,--c", lc.params.c)->capture_default_str();
    loss_check->add_option("--r-max", lc.params.r_max)->capture_default_str();
    loss_check->add_option("--skeleton-iters", lc.params.skeleton_iters, "Soft-skeleton iterations (0 = r-max)")
        ->capture_default_str();
    loss_check->add_option("--step", lc.step, "Finite-difference step")->capture_default_str();
    loss_check->add_option("--fd-pixels", lc.fd_pixels,
                           "Check this many evenly spaced pixels instead of all (0 = all)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*evaluate) {
            return run_evaluate(ev, *evaluate);
        }
        if (*freqmap) {
            return run_freqmap(fm);
        }
        if (*loss_check) {
            return run_loss_check(lc);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
