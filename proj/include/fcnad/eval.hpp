#ifndef FCNAD_EVAL_HPP
#define FCNAD_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fcnad/error.hpp"
#include "fcnad/localization.hpp"
#include "fcnad/rfgeom.hpp"

namespace fcnad {

/// A frame is abnormal when any pixel is flagged.
inline bool frame_level_label(const DetectionMask& mask) noexcept { return mask.any(); }

inline constexpr double kPixelCoverage = 0.4;

/// True when the prediction covers at least 40% of a non-empty ground truth.
inline bool pixel_level_match(const DetectionMask& pred, const DetectionMask& gt) {
    if (pred.height != gt.height || pred.width != gt.width) {
        throw Error(ErrorCode::Shape, "prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                                          " vs ground truth " + std::to_string(gt.height) + "x" +
                                          std::to_string(gt.width));
    }
    std::size_t truth = 0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < gt.pixels.size(); ++i) {
        if (!gt.pixels[i]) continue;
        ++truth;
        if (pred.pixels[i]) ++covered;
    }
    // covered >= 0.4 * truth, in integers
    return truth > 0 && 10 * covered >= 4 * truth;
}

struct LabeledScore {
    std::int64_t frame_index = 0;
    double score = 0.0;
    bool positive = false;
};

struct RocPoint {
    double threshold = 0.0;  ///< +inf for the (0,0) end
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
    double eer = 0.0;
    double eer_threshold = 0.0;  ///< interpolated threshold at the EER crossing
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// AUC by trapezoid, EER by linear interpolation where fpr = 1 - tpr.
inline void finish_curve(RocCurve& curve) {
    auto& pts = curve.points;
    curve.auc = 0.0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        curve.auc += (pts[k].fpr - pts[k - 1].fpr) * (pts[k].tpr + pts[k - 1].tpr) * 0.5;
    }
    curve.eer = 1.0;
    curve.eer_threshold = pts.back().threshold;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        const double f0 = pts[k - 1].fpr + pts[k - 1].tpr - 1.0;
        const double f1 = pts[k].fpr + pts[k].tpr - 1.0;
        if (f1 < 0.0) continue;
        const double s = f1 == f0 ? 0.0 : -f0 / (f1 - f0);
        curve.eer = pts[k - 1].fpr + s * (pts[k].fpr - pts[k - 1].fpr);
        const double t0 = pts[k - 1].threshold;
        const double t1 = pts[k].threshold;
        curve.eer_threshold = std::isinf(t0) ? t1 : t0 + s * (t1 - t0);
        break;
    }
}

/// Sweeps one threshold per distinct score (predict positive when score >= threshold).
inline RocCurve roc(std::vector<LabeledScore> scores) {
    RocCurve curve;
    for (const auto& s : scores) {
        if (!std::isfinite(s.score)) throw Error(ErrorCode::NonFinite, "frame " + std::to_string(s.frame_index) +
                                                                           " has a non-finite score");
        (s.positive ? curve.positives : curve.negatives)++;
    }
    if (curve.positives == 0 || curve.negatives == 0) {
        throw Error(ErrorCode::UndefinedMetric, "ROC needs both classes (positives " +
                                                    std::to_string(curve.positives) + ", negatives " +
                                                    std::to_string(curve.negatives) + ")");
    }
    std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    const double p = static_cast<double>(curve.positives);
    const double n = static_cast<double>(curve.negatives);
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < scores.size();) {
        const double threshold = scores[k].score;
        while (k < scores.size() && scores[k].score == threshold) {
            (scores[k].positive ? tp : fp)++;
            ++k;
        }
        curve.points.push_back({threshold, static_cast<double>(fp) / n, static_cast<double>(tp) / p});
    }
    finish_curve(curve);
    return curve;
}

/// One evaluated frame for the pixel-level protocol: its cell score grid and ground truth.
struct PixelFrame {
    std::int64_t frame_index = 0;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    std::vector<double> cell_scores;  ///< row-major
    DetectionMask truth;
};

/// Distinct descending thresholds, thinned to at most `cap` by even index spacing
/// (the largest and smallest values are always kept).
inline std::vector<double> sweep_thresholds(std::vector<double> values, std::size_t cap) {
    std::sort(values.begin(), values.end(), std::greater<>());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    if (cap < 2 || values.size() <= cap) return values;
    std::vector<double> thinned;
    thinned.reserve(cap);
    for (std::size_t k = 0; k < cap; ++k) {
        thinned.push_back(values[k * (values.size() - 1) / (cap - 1)]);
    }
    thinned.erase(std::unique(thinned.begin(), thinned.end()), thinned.end());
    return thinned;
}

/// Pixel-level ROC: at each threshold cells with score >= t vote, pixels with more than
/// zeta votes form the mask; a frame with ground truth is a true positive when the 40%
/// rule holds, a frame without ground truth is a false positive when the mask is non-empty.
inline RocCurve pixel_level_roc(const std::vector<PixelFrame>& frames, const RfGeometry& geometry,
                                std::uint32_t zeta, std::size_t max_thresholds = 512) {
    RocCurve curve;
    std::vector<double> all;
    for (const auto& f : frames) {
        (f.truth.any() ? curve.positives : curve.negatives)++;
        all.insert(all.end(), f.cell_scores.begin(), f.cell_scores.end());
    }
    if (curve.positives == 0 || curve.negatives == 0) {
        throw Error(ErrorCode::UndefinedMetric, "pixel-level ROC needs frames with and without ground truth");
    }
    const auto thresholds = sweep_thresholds(std::move(all), max_thresholds);
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    for (double t : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (const auto& f : frames) {
            const auto cells = [&] {
                std::vector<Cell> out;
                for (std::size_t k = 0; k < f.cell_scores.size(); ++k) {
                    if (f.cell_scores[k] >= t) out.emplace_back(k / f.grid_w, k % f.grid_w);
                }
                return out;
            }();
            if (cells.empty()) continue;
            const auto mask = threshold_votes(
                accumulate(cells, geometry, f.grid_h, f.grid_w, f.truth.height, f.truth.width), zeta);
            if (f.truth.any()) {
                if (pixel_level_match(mask, f.truth)) ++tp;
            } else if (mask.any()) {
                ++fp;
            }
        }
        curve.points.push_back({t, static_cast<double>(fp) / static_cast<double>(curve.negatives),
                                static_cast<double>(tp) / static_cast<double>(curve.positives)});
    }
    // the 40% rule can leave tpr < 1 at the lowest threshold; close the curve at (1,1)
    if (curve.points.back().fpr < 1.0 || curve.points.back().tpr < 1.0) {
        curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
    }
    finish_curve(curve);
    return curve;
}

inline std::string roc_csv(const RocCurve& curve) {
    std::ostringstream out;
    out << "threshold,fpr,tpr\n" << std::setprecision(17);
    for (const auto& p : curve.points) out << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
    return out.str();
}

inline nlohmann::json roc_json(const RocCurve& curve, const std::string& level) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : curve.points) {
        nlohmann::json t = std::isfinite(p.threshold) ? nlohmann::json(p.threshold)
                                                      : nlohmann::json(p.threshold > 0 ? "inf" : "-inf");
        pts.push_back({{"threshold", t}, {"fpr", p.fpr}, {"tpr", p.tpr}});
    }
    return {{"level", level},        {"auc", curve.auc},           {"eer", curve.eer},
            {"eer_threshold", curve.eer_threshold}, {"positives", curve.positives},
            {"negatives", curve.negatives}, {"points", pts}};
}

inline std::string roc_text(const RocCurve& curve, const std::string& level) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "level" << level << '\n'
        << std::setw(12) << "frames" << curve.positives + curve.negatives << " (" << curve.positives
        << " positive, " << curve.negatives << " negative)\n"
        << std::setw(12) << "AUC" << std::fixed << std::setprecision(4) << curve.auc << '\n'
        << std::setw(12) << "EER" << curve.eer << " (" << std::setprecision(2) << 100.0 * curve.eer << "%)\n"
        << std::setw(12) << "points" << curve.points.size() << '\n';
    return out.str();
}

} // namespace fcnad

#endif
