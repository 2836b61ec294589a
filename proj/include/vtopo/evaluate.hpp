#pragma once

// Batch evaluation of prediction/ground-truth image pairs and report
// formatting shared by the command-line tool and the tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtopo/grid.hpp"
#include "vtopo/image_io.hpp"
#include "vtopo/metrics.hpp"
#include "vtopo/parallel.hpp"
#include "vtopo/pathfind.hpp"
#include "vtopo/similarity.hpp"

namespace vtopo {

enum class Metric { auc, acc, sens, spec, cldice, mH, mF };

inline constexpr std::array<Metric, 7> kAllMetrics = {Metric::auc,    Metric::acc, Metric::sens, Metric::spec,
                                                      Metric::cldice, Metric::mH,  Metric::mF};

[[nodiscard]] constexpr std::string_view metric_name(Metric m) noexcept {
    switch (m) {
        case Metric::auc: return "auc";
        case Metric::acc: return "acc";
        case Metric::sens: return "sens";
        case Metric::spec: return "spec";
        case Metric::cldice: return "cldice";
        case Metric::mH: return "mH";
        case Metric::mF: return "mF";
    }
    return "?";
}

[[nodiscard]] inline std::optional<Metric> metric_from_name(std::string_view name) {
    for (Metric m : kAllMetrics) {
        if (metric_name(m) == name) {
            return m;
        }
    }
    return std::nullopt;
}

enum class IndexMode { sampled, exact };

struct EvalConfig {
    std::filesystem::path prediction_dir;
    std::filesystem::path groundtruth_dir;
    PathStrategy strategy = PathStrategy::centerline();
    std::size_t n_samples = 1000;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    IndexMode index_mode = IndexMode::sampled;
    std::vector<Metric> metrics{kAllMetrics.begin(), kAllMetrics.end()};

    void validate() const {
        if (n_samples < 1) {
            throw Error("samples must be >= 1");
        }
        if (!(threshold >= 0.0 && threshold <= 1.0)) {
            throw Error("threshold must lie in [0,1]");
        }
        if (metrics.empty()) {
            throw Error("at least one metric must be requested");
        }
    }
};

struct MetricCell {
    std::optional<double> value;
    std::string reason;                 // set when value is absent
    std::optional<double> stderr_total;  // index metrics in sampled mode
    std::optional<double> recall;
    std::optional<double> precision;
    std::optional<double> recall_stderr;
    std::optional<double> precision_stderr;
    bool degenerate = false;
};

struct ReportRow {
    std::string image_id;
    std::map<Metric, MetricCell> cells;
    std::string error;  // per-image failure, cells empty
};

/// FNV-1a, 64-bit.
[[nodiscard]] constexpr std::uint64_t stable_hash(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : s) {
        h ^= static_cast<std::uint8_t>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

[[nodiscard]] inline std::uint64_t image_seed(std::uint64_t seed, std::string_view stem) noexcept {
    return seed ^ stable_hash(stem);
}

/// Metrics of one pair. `seed` is the per-image seed.
[[nodiscard]] inline ReportRow evaluate_pair(std::string image_id, const ProbMap& prediction,
                                             const BinaryMask& truth, const EvalConfig& config, std::uint64_t seed) {
    ReportRow row;
    row.image_id = std::move(image_id);
    if (!prediction.same_shape(truth)) {
        row.error = "dimension mismatch: prediction " + std::to_string(prediction.width()) + "x" +
                    std::to_string(prediction.height()) + ", ground truth " + std::to_string(truth.width()) + "x" +
                    std::to_string(truth.height());
        return row;
    }
    const BinaryMask binary = threshold(prediction, config.threshold);
    auto wants = [&](Metric m) { return std::find(config.metrics.begin(), config.metrics.end(), m) != config.metrics.end(); };

    if (wants(Metric::auc)) {
        MetricCell cell;
        const std::size_t fg = count_foreground(truth);
        if (fg == 0 || fg == truth.size()) {
            cell.reason = "ground truth has a single class";
        } else {
            cell.value = auc(prediction, truth);
        }
        row.cells[Metric::auc] = cell;
    }
    if (wants(Metric::acc) || wants(Metric::sens) || wants(Metric::spec)) {
        const PixelMetricReport rep = pixel_metrics(prediction, truth, config.threshold);
        if (wants(Metric::acc)) {
            row.cells[Metric::acc].value = rep.accuracy;
        }
        if (wants(Metric::sens)) {
            auto& cell = row.cells[Metric::sens];
            cell.value = rep.sensitivity;
            cell.degenerate = rep.sensitivity_degenerate;
        }
        if (wants(Metric::spec)) {
            auto& cell = row.cells[Metric::spec];
            cell.value = rep.specificity;
            cell.degenerate = rep.specificity_degenerate;
        }
    }
    if (wants(Metric::cldice)) {
        row.cells[Metric::cldice].value = cl_dice(binary, truth);
    }
    for (Metric m : {Metric::mH, Metric::mF}) {
        if (!wants(m)) {
            continue;
        }
        const Coherence f = m == Metric::mH ? Coherence::hamming : Coherence::feasible;
        MetricCell cell;
        try {
            const SimilarityResult r = config.index_mode == IndexMode::exact
                                           ? exact_similarity(binary, truth, f, config.strategy)
                                           : mc_similarity(binary, truth, f, config.strategy, config.n_samples, seed);
            cell.value = r.value;
            cell.recall = r.recall_term;
            cell.precision = r.precision_term;
            cell.stderr_total = r.estimator_stderr;
            cell.recall_stderr = r.recall_stderr;
            cell.precision_stderr = r.precision_stderr;
            cell.degenerate = r.degenerate_warning;
        } catch (const Error& e) {
            cell.reason = e.what();
        }
        row.cells[m] = cell;
    }
    return row;
}

struct ImagePair {
    std::string stem;
    std::filesystem::path prediction;
    std::filesystem::path groundtruth;
};

struct Pairing {
    std::vector<ImagePair> pairs;         // lexicographic stem order
    std::vector<std::string> unmatched;  // files without a same-stem partner
};

namespace detail {

inline bool is_image_file(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".pgm" || ext == ".png" || ext == ".PGM" || ext == ".PNG";
}

inline std::map<std::string, std::filesystem::path> images_by_stem(const std::filesystem::path& dir,
                                                                   std::vector<std::string>& duplicates) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::map<std::string, std::filesystem::path> out;
    for (const auto& f : files) {
        const std::string stem = f.stem().string();
        if (!out.emplace(stem, f).second) {
            duplicates.push_back(f.string());
        }
    }
    return out;
}

}  // namespace detail

/// Pairs image files of the two directories by filename stem. A stem present
/// twice in one directory keeps the lexicographically first file; the others
/// are reported as unmatched.
[[nodiscard]] inline Pairing pair_by_stem(const std::filesystem::path& prediction_dir,
                                          const std::filesystem::path& groundtruth_dir) {
    Pairing out;
    const auto preds = detail::images_by_stem(prediction_dir, out.unmatched);
    const auto gts = detail::images_by_stem(groundtruth_dir, out.unmatched);
    for (const auto& [stem, path] : preds) {
        const auto it = gts.find(stem);
        if (it == gts.end()) {
            out.unmatched.push_back(path.string());
        } else {
            out.pairs.push_back({stem, path, it->second});
        }
    }
    for (const auto& [stem, path] : gts) {
        if (!preds.contains(stem)) {
            out.unmatched.push_back(path.string());
        }
    }
    std::sort(out.unmatched.begin(), out.unmatched.end());
    return out;
}

struct BatchReport {
    std::vector<ReportRow> rows;  // lexicographic stem order
    ReportRow mean;
    std::vector<std::string> unmatched;

    [[nodiscard]] bool complete() const {
        return unmatched.empty() &&
               std::none_of(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.error.empty(); });
    }
};

[[nodiscard]] inline ReportRow mean_row(const std::vector<ReportRow>& rows, const std::vector<Metric>& metrics) {
    ReportRow mean;
    mean.image_id = "mean";
    for (Metric m : metrics) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : rows) {
            const auto it = r.cells.find(m);
            if (it != r.cells.end() && it->second.value) {
                sum += *it->second.value;
                ++count;
            }
        }
        MetricCell cell;
        if (count > 0) {
            cell.value = sum / static_cast<double>(count);
        } else {
            cell.reason = "no image has a value";
        }
        mean.cells[m] = cell;
    }
    return mean;
}

[[nodiscard]] inline BatchReport evaluate_batch(const EvalConfig& config) {
    config.validate();
    const Pairing pairing = pair_by_stem(config.prediction_dir, config.groundtruth_dir);
    BatchReport report;
    report.unmatched = pairing.unmatched;
    report.rows.resize(pairing.pairs.size());
    detail::parallel_for(pairing.pairs.size(), [&](std::size_t i) {
        const ImagePair& p = pairing.pairs[i];
        try {
            const ProbMap pred = load_probmap(p.prediction);
            const BinaryMask gt = load_mask(p.groundtruth);
            report.rows[i] = evaluate_pair(p.stem, pred, gt, config, image_seed(config.seed, p.stem));
        } catch (const std::exception& e) {
            report.rows[i].image_id = p.stem;
            report.rows[i].error = e.what();
        }
    });
    report.mean = mean_row(report.rows, config.metrics);
    return report;
}

/// Requested metrics in canonical column order.
[[nodiscard]] inline std::vector<Metric> canonical_metrics(const std::vector<Metric>& requested) {
    std::vector<Metric> out;
    for (Metric m : kAllMetrics) {
        if (std::find(requested.begin(), requested.end(), m) != requested.end()) {
            out.push_back(m);
        }
    }
    return out;
}

[[nodiscard]] inline std::string format_fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

/// image_id followed by one column per metric; absent values are empty cells.
[[nodiscard]] inline std::string format_csv(const BatchReport& report, const std::vector<Metric>& requested) {
    const auto metrics = canonical_metrics(requested);
    std::string out = "image_id";
    for (Metric m : metrics) {
        out += ',';
        out += metric_name(m);
    }
    out += '\n';
    auto emit = [&](const ReportRow& row) {
        out += row.image_id;
        for (Metric m : metrics) {
            out += ',';
            const auto it = row.cells.find(m);
            if (it != row.cells.end() && it->second.value) {
                out += format_fixed6(*it->second.value);
            }
        }
        out += '\n';
    };
    for (const auto& row : report.rows) {
        emit(row);
    }
    emit(report.mean);
    return out;
}

namespace detail {

inline nlohmann::ordered_json fixed_or_null(const std::optional<double>& v) {
    if (!v) {
        return nullptr;
    }
    // Values round-trip through the same 6-decimal text as the CSV.
    return nlohmann::ordered_json::parse(format_fixed6(*v));
}

inline nlohmann::ordered_json row_json(const ReportRow& row, const std::vector<Metric>& metrics) {
    nlohmann::ordered_json j;
    j["image_id"] = row.image_id;
    if (!row.error.empty()) {
        j["error"] = row.error;
        return j;
    }
    for (Metric m : metrics) {
        const std::string name(metric_name(m));
        const auto it = row.cells.find(m);
        const MetricCell cell = it == row.cells.end() ? MetricCell{} : it->second;
        j[name] = fixed_or_null(cell.value);
        if (!cell.value && !cell.reason.empty()) {
            j[name + "_reason"] = cell.reason;
        }
        if (m == Metric::mH || m == Metric::mF) {
            if (cell.recall) {
                j[name + "_recall"] = fixed_or_null(cell.recall);
                j[name + "_precision"] = fixed_or_null(cell.precision);
            }
            if (cell.stderr_total || cell.recall_stderr) {
                j[name + "_stderr"] = fixed_or_null(cell.stderr_total);
                j[name + "_recall_stderr"] = fixed_or_null(cell.recall_stderr);
                j[name + "_precision_stderr"] = fixed_or_null(cell.precision_stderr);
            }
        }
        if (cell.degenerate) {
            j[name + "_degenerate"] = true;
        }
    }
    return j;
}

}  // namespace detail

[[nodiscard]] inline std::string format_json(const BatchReport& report, const std::vector<Metric>& requested) {
    const auto metrics = canonical_metrics(requested);
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        j["rows"].push_back(detail::row_json(row, metrics));
    }
    j["mean"] = detail::row_json(report.mean, metrics);
    j["unmatched"] = report.unmatched;
    return j.dump(2) + "\n";
}

}  // namespace vtopo
