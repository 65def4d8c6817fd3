#ifndef FCNAD_RESULTS_IO_HPP
#define FCNAD_RESULTS_IO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fcnad/error.hpp"
#include "fcnad/eval.hpp"
#include "fcnad/fixture.hpp"
#include "fcnad/image_io.hpp"
#include "fcnad/localization.hpp"
#include "fcnad/pipeline.hpp"
#include "fcnad/rfgeom.hpp"

namespace fcnad {

// Detection output directory:
//   meta.json         tap geometry, zeta, frame size
//   detections.jsonl  one object per frame: index, warmup, score, escalated,
//                     abnormal_cells, grid [h, w], cell_scores, mask (RLE)
//   masks/frame_NNNNNN.pgm  0/255 detection masks
//   heat/frame_NNNNNN.pgm   vote counts scaled to 0..255

inline nlohmann::json geometry_json(const RfGeometry& g) {
    return {{"layer", g.layer},   {"layer_count", g.layer_count}, {"size_h", g.size_h}, {"size_w", g.size_w},
            {"jump", g.jump},     {"offset_y", g.offset_y},       {"offset_x", g.offset_x}};
}

inline RfGeometry geometry_from_json(const nlohmann::json& j) {
    RfGeometry g;
    g.layer = j.at("layer");
    g.layer_count = j.at("layer_count");
    g.size_h = j.at("size_h");
    g.size_w = j.at("size_w");
    g.jump = j.at("jump");
    g.offset_y = j.at("offset_y");
    g.offset_x = j.at("offset_x");
    return g;
}

class DetectionWriter {
public:
    DetectionWriter(const std::filesystem::path& dir, const Detector& detector) : dir_(dir), detector_(detector) {
        std::filesystem::create_directories(dir_ / "masks");
        std::filesystem::create_directories(dir_ / "heat");
        lines_.open(dir_ / "detections.jsonl", std::ios::trunc);
        if (!lines_) throw Error(ErrorCode::Io, "cannot write " + (dir_ / "detections.jsonl").string());
    }

    void operator()(const FrameResult& r) {
        if (!meta_written_) {
            const nlohmann::json meta = {{"geometry", geometry_json(detector_.geometry())},
                                         {"zeta", detector_.bundle().zeta},
                                         {"frame_height", r.mask.height},
                                         {"frame_width", r.mask.width}};
            std::ofstream(dir_ / "meta.json") << meta.dump(2) << '\n';
            meta_written_ = true;
        }
        const auto name = frame_file_name(static_cast<std::size_t>(r.frame_index));
        write_pgm(dir_ / "masks" / name, mask_image(r.mask));
        write_pgm(dir_ / "heat" / name, heat_map(r.votes));
        const nlohmann::json line = {{"index", r.frame_index},         {"warmup", r.warmup},
                                     {"score", r.score},               {"escalated", r.escalated},
                                     {"abnormal_cells", r.abnormal_cells}, {"grid", {r.grid_h, r.grid_w}},
                                     {"cell_scores", r.cell_scores},   {"mask", mask_to_rle(r.mask)}};
        lines_ << line.dump() << '\n';
        ++count_;
    }

    std::size_t count() const noexcept { return count_; }

private:
    std::filesystem::path dir_;
    const Detector& detector_;
    std::ofstream lines_;
    bool meta_written_ = false;
    std::size_t count_ = 0;
};

struct FramePrediction {
    std::int64_t index = 0;
    bool warmup = false;
    double score = 0.0;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    std::vector<double> cell_scores;
};

struct PredictionSet {
    RfGeometry geometry;
    std::uint32_t zeta = 3;
    std::size_t frame_h = 0;
    std::size_t frame_w = 0;
    std::vector<FramePrediction> frames;
};

inline PredictionSet load_predictions(const std::filesystem::path& dir) {
    PredictionSet set;
    std::ifstream meta_in(dir / "meta.json");
    if (!meta_in) throw Error(ErrorCode::Io, "missing " + (dir / "meta.json").string());
    const auto meta = nlohmann::json::parse(meta_in);
    set.geometry = geometry_from_json(meta.at("geometry"));
    set.zeta = meta.at("zeta");
    set.frame_h = meta.at("frame_height");
    set.frame_w = meta.at("frame_width");
    std::ifstream lines(dir / "detections.jsonl");
    if (!lines) throw Error(ErrorCode::Io, "missing " + (dir / "detections.jsonl").string());
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        FramePrediction p;
        p.index = j.at("index");
        p.warmup = j.at("warmup");
        p.score = j.at("score");
        p.grid_h = j.at("grid").at(0);
        p.grid_w = j.at("grid").at(1);
        p.cell_scores = j.at("cell_scores").get<std::vector<double>>();
        set.frames.push_back(std::move(p));
    }
    return set;
}

/// Ground-truth masks in lexicographic file order; frame index = position.
inline std::vector<DetectionMask> load_truth(const std::filesystem::path& dir) {
    std::vector<DetectionMask> masks;
    std::int64_t index = 0;
    for (const auto& file : list_pgm(dir)) masks.push_back(mask_from_image(read_pgm(file), index++));
    return masks;
}

/// Frame-level samples: warmup frames are skipped; label = ground truth non-empty.
inline void append_frame_samples(const PredictionSet& preds, const std::vector<DetectionMask>& truth,
                                 std::vector<LabeledScore>& out) {
    for (const auto& p : preds.frames) {
        if (p.warmup) continue;
        if (p.index < 0 || static_cast<std::size_t>(p.index) >= truth.size()) {
            throw Error(ErrorCode::Bounds, "no ground truth for frame " + std::to_string(p.index));
        }
        out.push_back({p.index, p.score, truth[static_cast<std::size_t>(p.index)].any()});
    }
}

inline void append_pixel_frames(const PredictionSet& preds, const std::vector<DetectionMask>& truth,
                                std::vector<PixelFrame>& out) {
    for (const auto& p : preds.frames) {
        if (p.warmup) continue;
        if (p.index < 0 || static_cast<std::size_t>(p.index) >= truth.size()) {
            throw Error(ErrorCode::Bounds, "no ground truth for frame " + std::to_string(p.index));
        }
        const auto& gt = truth[static_cast<std::size_t>(p.index)];
        if (gt.height != preds.frame_h || gt.width != preds.frame_w) {
            throw Error(ErrorCode::Shape, "ground truth size differs from detection frame size");
        }
        out.push_back({p.index, p.grid_h, p.grid_w, p.cell_scores, gt});
    }
}

} // namespace fcnad

#endif
