#ifndef FCNAD_PIPELINE_HPP
#define FCNAD_PIPELINE_HPP

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <iomanip>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "fcnad/autoencoder.hpp"
#include "fcnad/bundle.hpp"
#include "fcnad/cascade.hpp"
#include "fcnad/config.hpp"
#include "fcnad/error.hpp"
#include "fcnad/gaussian.hpp"
#include "fcnad/image_io.hpp"
#include "fcnad/localization.hpp"
#include "fcnad/netcore.hpp"
#include "fcnad/preproc.hpp"
#include "fcnad/rfgeom.hpp"

namespace fcnad {

/// Video directories under `data`: `data` itself when it holds P5 frames, otherwise every
/// subdirectory that does (sorted).
inline std::vector<std::filesystem::path> video_dirs(const std::filesystem::path& data) {
    if (!std::filesystem::is_directory(data)) throw Error(ErrorCode::Io, data.string() + " is not a directory");
    if (!list_pgm(data).empty()) return {data};
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(data)) {
        if (entry.is_directory() && !list_pgm(entry.path()).empty()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw Error(ErrorCode::Io, data.string() + " contains no .pgm frames");
    return dirs;
}

inline Frame conform_frame(Frame frame, std::size_t resize_h, std::size_t resize_w) {
    if (resize_h == 0) return frame;
    return resize_bilinear(frame, resize_h, resize_w);
}

/// All regional vectors (one column each) of every non-warmup frame of a stream.
inline Eigen::MatrixXd extract_regional_vectors(const NetworkSpec& net, FrameSource& source,
                                                const PreprocOptions& preproc = {}, std::size_t resize_h = 0,
                                                std::size_t resize_w = 0, std::size_t* frames_used = nullptr) {
    FrameWindow window(preproc);
    std::vector<Eigen::MatrixXd> blocks;
    Eigen::Index total = 0;
    while (auto frame = source.next()) {
        window.push(conform_frame(std::move(*frame), resize_h, resize_w));
        if (!window.ready()) continue;
        const FeatureGrid grid = forward_to_tap(net, window.build());
        blocks.push_back(grid_vectors(grid));
        total += blocks.back().cols();
    }
    if (frames_used) *frames_used += blocks.size();
    const Eigen::Index rows = blocks.empty() ? static_cast<Eigen::Index>(net.channels_after(net.tap_index))
                                             : blocks.front().rows();
    Eigen::MatrixXd all(rows, total);
    Eigen::Index col = 0;
    for (const auto& b : blocks) {
        all.middleCols(col, b.cols()) = b;
        col += b.cols();
    }
    return all;
}

struct TrainSummary {
    std::size_t frames = 0;
    std::size_t vectors = 0;
    TrainingReport autoencoder;
    std::vector<std::pair<std::string, double>> stage_seconds;
};

namespace detail {

template <typename Fn>
auto run_stage(const char* stage, TrainSummary& summary, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
        if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
            fn();
            summary.stage_seconds.emplace_back(
                stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        } else {
            auto result = fn();
            summary.stage_seconds.emplace_back(
                stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
            return result;
        }
    } catch (const Error& e) {
        throw Error(e.code(), std::string("stage ") + stage + ": " + e.what());
    }
}

inline Eigen::MatrixXd subsample_columns(const Eigen::MatrixXd& all, std::size_t limit, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(all.cols());
    if (limit == 0 || limit >= n) return all;
    Rng rng(seed ^ 0x5bd1e995ULL);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < limit; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
    Eigen::MatrixXd out(all.rows(), static_cast<Eigen::Index>(limit));
    for (std::size_t i = 0; i < limit; ++i) out.col(static_cast<Eigen::Index>(i)) = all.col(static_cast<Eigen::Index>(idx[i]));
    return out;
}

/// Number of distinct columns, counting stops once `limit` is exceeded.
inline std::size_t distinct_columns(const Eigen::MatrixXd& m, std::size_t limit) {
    std::unordered_set<std::string_view> seen;
    const std::size_t bytes = static_cast<std::size_t>(m.rows()) * sizeof(double);
    for (Eigen::Index c = 0; c < m.cols() && seen.size() <= limit; ++c) {
        seen.emplace(reinterpret_cast<const char*>(m.col(c).data()), bytes);
    }
    return seen.size();
}

} // namespace detail

/// Fits the whole model from normal videos: extract vectors, fit G1, train the autoencoder,
/// fit G2 on encoded vectors, calibrate thresholds. Errors carry the failing stage name.
inline ModelBundle train_pipeline(const RunConfig& config, NetworkSpec network,
                                  std::vector<std::unique_ptr<FrameSource>>& videos, TrainSummary* summary_out = nullptr) {
    TrainSummary local;
    TrainSummary& summary = summary_out ? *summary_out : local;
    config.validate();
    ModelBundle bundle;
    detail::run_stage("configure", summary, [&] {
        network.tap_index = network.tap_after(config.tap);
        network.validate();
    });
    bundle.network = network;
    bundle.preproc = config.preproc;
    bundle.resize_h = config.resize_h;
    bundle.resize_w = config.resize_w;
    bundle.zeta = config.zeta;
    bundle.quantiles = config.quantiles;
    bundle.autoencoder = config.autoencoder;
    bundle.autoencoder.seed = config.seed;

    const Eigen::MatrixXd raw = detail::run_stage("extract", summary, [&] {
        std::vector<Eigen::MatrixXd> parts;
        Eigen::Index total = 0;
        for (auto& video : videos) {
            parts.push_back(extract_regional_vectors(bundle.network, *video, config.preproc, config.resize_h,
                                                     config.resize_w, &summary.frames));
            total += parts.back().cols();
        }
        if (summary.frames == 0) {
            throw Error(ErrorCode::InsufficientHistory, "training videos need at least 6 frames");
        }
        Eigen::MatrixXd all(parts.front().rows(), total);
        Eigen::Index col = 0;
        for (const auto& p : parts) {
            all.middleCols(col, p.cols()) = p;
            col += p.cols();
        }
        return detail::subsample_columns(all, config.max_training_vectors, config.seed);
    });
    summary.vectors = static_cast<std::size_t>(raw.cols());

    const Eigen::MatrixXd standardized = detail::run_stage("fit-g1", summary, [&] {
        const auto d = static_cast<std::size_t>(raw.rows());
        const std::size_t distinct = detail::distinct_columns(raw, d);
        if (distinct <= d) {
            throw Error(ErrorCode::DegenerateData, "only " + std::to_string(distinct) + " distinct regional vectors for a " +
                                                       std::to_string(d) + "-dimensional Gaussian; training frames are (near-)identical");
        }
        bundle.transform = FeatureTransform::fit(raw, config.standardize);
        Eigen::MatrixXd z = bundle.transform.standardize(raw);
        bundle.g1 = fit_gaussian(z, config.gaussian);
        return z;
    });

    const Eigen::MatrixXd squashed = bundle.transform.squash(standardized);
    detail::run_stage("train-autoencoder", summary, [&] {
        AutoencoderHyper hyper = config.autoencoder;
        hyper.seed = config.seed;
        const SparseAutoencoder ae = train_autoencoder(squashed, hyper, &summary.autoencoder);
        bundle.ct = as_conv_layer(ae);
    });

    detail::run_stage("fit-g2", summary, [&] {
        // encode with the float-rounded C_T weights that detection will use
        const Eigen::MatrixXd encoded = encode_batch(encoder_from_conv(bundle.ct), squashed);
        bundle.g2 = fit_gaussian(encoded, config.gaussian);
        // phi is read off the regions that actually reach stage 2
        const double beta = sorted_quantile(bundle.g1.distance_quantiles, config.quantiles.q_beta);
        const double alpha = sorted_quantile(bundle.g1.distance_quantiles, config.quantiles.q_alpha);
        const Eigen::VectorXd d1 = mahalanobis_batch(bundle.g1, standardized);
        std::vector<Eigen::Index> escalated;
        for (Eigen::Index i = 0; i < d1.size(); ++i) {
            if (d1[i] > beta && d1[i] < alpha) escalated.push_back(i);
        }
        if (!escalated.empty()) {
            Eigen::MatrixXd picked(encoded.rows(), static_cast<Eigen::Index>(escalated.size()));
            for (std::size_t s = 0; s < escalated.size(); ++s) {
                picked.col(static_cast<Eigen::Index>(s)) = encoded.col(escalated[s]);
            }
            const Eigen::VectorXd d2 = mahalanobis_batch(bundle.g2, picked);
            bundle.g2.distance_quantiles = quantile_table(std::vector<double>(d2.begin(), d2.end()));
        }
    });

    detail::run_stage("calibrate", summary, [&] {
        bundle.cascade = calibrate(bundle.g1, bundle.g2, config.quantiles);
        bundle.validate();
    });
    return bundle;
}

inline ModelBundle train_pipeline(const RunConfig& config, const NetworkSpec& network,
                                  const std::vector<std::filesystem::path>& video_paths,
                                  TrainSummary* summary = nullptr) {
    std::vector<std::unique_ptr<FrameSource>> sources;
    for (const auto& dir : video_paths) sources.push_back(std::make_unique<PgmDirectorySource>(dir));
    return train_pipeline(config, network, sources, summary);
}

struct StageTiming {
    std::chrono::nanoseconds preprocessing{0};
    std::chrono::nanoseconds representation{0};
    std::chrono::nanoseconds classifying{0};
};

/// Detection output for one frame. Warmup frames carry score 0 and an empty mask.
struct FrameResult {
    std::int64_t frame_index = 0;
    bool warmup = false;
    double score = 0.0;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    std::vector<double> cell_scores;
    std::size_t escalated = 0;
    std::size_t abnormal_cells = 0;
    VoteMap votes;
    DetectionMask mask;
};

/// Immutable per-bundle detection state; `process` is reentrant.
class Detector {
public:
    explicit Detector(ModelBundle bundle)
        : bundle_(std::move(bundle)), model_(bundle_.cascade_model()),
          geometry_(geometry_of(bundle_.network, bundle_.network.tap_index)) {
        bundle_.validate();
    }

    const ModelBundle& bundle() const noexcept { return bundle_; }
    const RfGeometry& geometry() const noexcept { return geometry_; }

    FrameResult process(const TemporalInput& input, StageTiming* timing = nullptr) const {
        using Clock = std::chrono::steady_clock;
        const auto t0 = Clock::now();
        const FeatureGrid grid = forward_to_tap(bundle_.network, input);
        const auto t1 = Clock::now();
        CascadeTiming cascade_timing;
        const VerdictGrid verdicts = classify_grid(grid, model_, &cascade_timing);
        const auto t2 = Clock::now();

        FrameResult r;
        r.frame_index = input.frame_index;
        r.grid_h = verdicts.height;
        r.grid_w = verdicts.width;
        r.cell_scores = verdicts.scores();
        r.score = verdicts.frame_score();
        r.escalated = verdicts.escalated;
        const auto abnormal = verdicts.abnormal_cells();
        r.abnormal_cells = abnormal.size();
        const std::size_t h = input.tensor.height();
        const std::size_t w = input.tensor.width();
        r.votes = accumulate(abnormal, geometry_, r.grid_h, r.grid_w, h, w);
        r.mask = threshold_votes(r.votes, bundle_.zeta, input.frame_index);
        const auto t3 = Clock::now();
        if (timing) {
            timing->representation += (t1 - t0) + cascade_timing.representation;
            timing->classifying += cascade_timing.classifying + (t3 - t2);
        }
        return r;
    }

    FrameResult warmup_result(std::int64_t index, std::size_t h, std::size_t w) const {
        FrameResult r;
        r.frame_index = index;
        r.warmup = true;
        r.votes = VoteMap(h, w);
        r.mask = DetectionMask(h, w, index);
        return r;
    }

private:
    ModelBundle bundle_;
    CascadeModel model_;
    RfGeometry geometry_;
};

struct DetectOptions {
    std::size_t workers = 1;
    bool strict = false;
    std::ostream* log = nullptr;
};

struct DetectStats {
    std::size_t frames = 0;
    std::size_t warmup = 0;
    std::size_t skipped = 0;
    std::size_t peak_buffered_frames = 0;
    std::size_t peak_pending_inputs = 0;
};

/// Streams a video through the detector, calling `sink` once per frame in frame order.
/// Up to `workers` temporal inputs are processed concurrently.
inline DetectStats detect(const Detector& detector, FrameSource& source, const std::function<void(FrameResult&&)>& sink,
                          const DetectOptions& options = {}) {
    const ModelBundle& b = detector.bundle();
    FrameWindow window(b.preproc);
    DetectStats stats;
    std::vector<TemporalInput> pending;
    const std::size_t workers = std::max<std::size_t>(options.workers, 1);
    const auto flush = [&] {
        if (pending.empty()) return;
        stats.peak_pending_inputs = std::max(stats.peak_pending_inputs, pending.size());
        if (pending.size() == 1) {
            sink(detector.process(pending.front()));
        } else {
            std::vector<std::future<FrameResult>> futures;
            for (const auto& in : pending) {
                futures.push_back(std::async(std::launch::async, [&detector, &in] { return detector.process(in); }));
            }
            for (auto& f : futures) sink(f.get());
        }
        pending.clear();
    };
    std::int64_t position = -1;
    while (true) {
        std::optional<Frame> frame;
        ++position;
        try {
            frame = source.next();
        } catch (const Error& e) {
            if (options.strict || e.code() != ErrorCode::Decode) throw;
            if (options.log) *options.log << "skipping " << source.last_name() << ": " << e.what() << '\n';
            source.skip();
            ++stats.skipped;
            continue;
        }
        if (!frame) break;
        ++stats.frames;
        const std::size_t h = b.resize_h ? b.resize_h : frame->height;
        const std::size_t w = b.resize_w ? b.resize_w : frame->width;
        window.push(conform_frame(std::move(*frame), b.resize_h, b.resize_w));
        if (!window.ready()) {
            flush();
            ++stats.warmup;
            sink(detector.warmup_result(position, h, w));
            continue;
        }
        TemporalInput input = window.build();
        input.frame_index = position;
        pending.push_back(std::move(input));
        if (pending.size() >= workers) flush();
    }
    flush();
    stats.peak_buffered_frames = window.peak_size();
    return stats;
}

struct BenchReport {
    std::size_t frames = 0;     ///< frames with detection output
    std::size_t decoded = 0;    ///< all frames read, warmup included
    double preprocessing = 0.0; ///< mean seconds per output frame
    double representation = 0.0;
    double classifying = 0.0;
    double total = 0.0;
    double fps = 0.0;

    double stage_sum() const noexcept { return preprocessing + representation + classifying; }

    nlohmann::json to_json() const {
        return {{"frames", frames},
                {"decoded", decoded},
                {"seconds_per_frame",
                 {{"Pre-processing", preprocessing},
                  {"Representation", representation},
                  {"Classifying", classifying},
                  {"Total", total}}},
                {"fps", fps},
                {"stage_sum_over_total", total > 0 ? stage_sum() / total : 0.0}};
    }

    std::string to_text() const {
        std::ostringstream out;
        out << std::left << std::setw(16) << "" << std::setw(16) << "Pre-processing" << std::setw(16)
            << "Representation" << std::setw(14) << "Classifying" << "Total\n"
            << std::setw(16) << "Time (in sec)" << std::fixed << std::setprecision(6) << std::setw(16)
            << preprocessing << std::setw(16) << representation << std::setw(14) << classifying << total << '\n'
            << "frames " << frames << " (" << decoded << " decoded), " << std::setprecision(1) << fps << " fps\n";
        return out.str();
    }
};

/// Times the three stages per frame: pre-processing (decode, temporal averaging, stacking),
/// representation (forward pass and C_T on escalated cells), classifying (distances,
/// verdicts, votes). Means are per output frame.
inline BenchReport bench(const Detector& detector, FrameSource& source) {
    using Clock = std::chrono::steady_clock;
    const ModelBundle& b = detector.bundle();
    FrameWindow window(b.preproc);
    StageTiming timing;
    BenchReport report;
    const auto start = Clock::now();
    while (true) {
        const auto t0 = Clock::now();
        auto frame = source.next();
        if (!frame) break;
        ++report.decoded;
        window.push(conform_frame(std::move(*frame), b.resize_h, b.resize_w));
        if (!window.ready()) {
            timing.preprocessing += Clock::now() - t0;
            continue;
        }
        const TemporalInput input = window.build();
        timing.preprocessing += Clock::now() - t0;
        const FrameResult r = detector.process(input, &timing);
        ++report.frames;
    }
    const double total = std::chrono::duration<double>(Clock::now() - start).count();
    if (report.frames == 0) return report;
    const double n = static_cast<double>(report.frames);
    report.preprocessing = std::chrono::duration<double>(timing.preprocessing).count() / n;
    report.representation = std::chrono::duration<double>(timing.representation).count() / n;
    report.classifying = std::chrono::duration<double>(timing.classifying).count() / n;
    report.total = total / n;
    report.fps = report.total > 0 ? 1.0 / report.total : 0.0;
    return report;
}

} // namespace fcnad

#endif
