#ifndef FCNAD_FIXTURE_HPP
#define FCNAD_FIXTURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fcnad/fcnw.hpp"
#include "fcnad/image_io.hpp"
#include "fcnad/localization.hpp"
#include "fcnad/netcore.hpp"
#include "fcnad/preproc.hpp"
#include "fcnad/random.hpp"

namespace fcnad {

enum class AnomalyKind { None, Large, Fast, Reverse, Crossing };

inline std::string_view to_string(AnomalyKind k) {
    switch (k) {
    case AnomalyKind::None: return "none";
    case AnomalyKind::Large: return "large";
    case AnomalyKind::Fast: return "fast";
    case AnomalyKind::Reverse: return "reverse";
    case AnomalyKind::Crossing: return "crossing";
    }
    return "?";
}

/// Desk-scale "walking squares" scene: small bright squares cross the frame left to right
/// in fixed lanes; test videos inject one anomalous object (oversized, fast, wrong-way or
/// lane-crossing) for a contiguous frame range.
struct FixtureSpec {
    std::size_t height = 120;
    std::size_t width = 160;
    std::size_t frames_per_video = 60;
    std::size_t train_videos = 10;
    std::size_t test_videos = 3;
    std::size_t holdout_videos = 2;
    std::size_t lanes = 2;              ///< evenly spread; 60 px apart at the default height
    std::size_t squares_per_lane = 2;   ///< evenly spaced along the lane
    int square_size = 8;
    int speed = 2;
    float background = 0.1f;
    float foreground = 0.8f;
    double noise_sigma = 0.02;
    std::size_t anomaly_start = 20;
    std::size_t anomaly_length = 24;
    int anomaly_size = 20;  ///< side of the Large object
    int fast_speed = 8;
    int fast_size = 14;      ///< side of the Fast object
    int reverse_size = 14;   ///< side of the Reverse object
    int crossing_size = 14;  ///< side of the Crossing object
    int reverse_speed = 4;
    /// Kinds assigned to test videos in turn; empty means anomaly-free test videos.
    std::vector<AnomalyKind> anomalies{AnomalyKind::Large, AnomalyKind::Fast, AnomalyKind::Reverse};
};

struct FixtureVideo {
    std::string name;
    AnomalyKind anomaly = AnomalyKind::None;
    std::vector<Frame> frames;
    std::vector<DetectionMask> truth;  ///< one per frame
};

namespace detail {

inline void paint(Frame& f, DetectionMask* mask, int y0, int x0, int size, float value) {
    for (int y = std::max(y0, 0); y < std::min<int>(y0 + size, static_cast<int>(f.height)); ++y) {
        for (int x = std::max(x0, 0); x < std::min<int>(x0 + size, static_cast<int>(f.width)); ++x) {
            f.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = value;
            if (mask) mask->pixels[static_cast<std::size_t>(y) * mask->width + static_cast<std::size_t>(x)] = 1;
        }
    }
}

inline int lane_y(const FixtureSpec& s, std::size_t lane) {
    return static_cast<int>((2 * lane + 1) * s.height / (2 * s.lanes)) - s.square_size / 2;
}

} // namespace detail

/// Generates one video. `stream` separates videos drawn from the same seed.
inline FixtureVideo generate_video(const FixtureSpec& spec, std::uint64_t seed, std::uint64_t stream,
                                   AnomalyKind anomaly, std::string name) {
    Rng rng(seed * 0x100000001b3ULL + stream * 0x9e3779b97f4a7c15ULL + 17);
    FixtureVideo video{std::move(name), anomaly, {}, {}};
    const int period = static_cast<int>(spec.width) + spec.square_size;
    std::vector<std::vector<int>> phases(spec.lanes);
    for (std::size_t l = 0; l < spec.lanes; ++l) {
        const int offset = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(period)));
        for (std::size_t k = 0; k < spec.squares_per_lane; ++k) {
            phases[l].push_back(offset + static_cast<int>(k * period / spec.squares_per_lane));
        }
    }
    // the anomalous object shares the first lane with normal traffic
    const int anomaly_lane = detail::lane_y(spec, 0);
    for (std::size_t t = 0; t < spec.frames_per_video; ++t) {
        Frame f(spec.height, spec.width, spec.background);
        DetectionMask truth(spec.height, spec.width, static_cast<std::int64_t>(t));
        for (std::size_t l = 0; l < spec.lanes; ++l) {
            for (int phase : phases[l]) {
                const int x = (phase + spec.speed * static_cast<int>(t)) % period - spec.square_size;
                detail::paint(f, nullptr, detail::lane_y(spec, l), x, spec.square_size, spec.foreground);
            }
        }
        const bool active = anomaly != AnomalyKind::None && t >= spec.anomaly_start &&
                            t < spec.anomaly_start + spec.anomaly_length;
        if (active) {
            const int dt = static_cast<int>(t - spec.anomaly_start);
            switch (anomaly) {
            case AnomalyKind::Large:
                detail::paint(f, &truth, anomaly_lane + spec.square_size / 2 - spec.anomaly_size / 2,
                              20 + spec.speed * dt, spec.anomaly_size, spec.foreground);
                break;
            case AnomalyKind::Fast:
                detail::paint(f, &truth, anomaly_lane + spec.square_size / 2 - spec.fast_size / 2, 2 + spec.fast_speed * dt,
                              spec.fast_size, spec.foreground);
                break;
            case AnomalyKind::Reverse:
                detail::paint(f, &truth, anomaly_lane + spec.square_size / 2 - spec.reverse_size / 2,
                              static_cast<int>(spec.width) - 20 - spec.reverse_size - spec.reverse_speed * dt,
                              spec.reverse_size, spec.foreground);
                break;
            case AnomalyKind::Crossing:
                // walks down across the lanes through the empty band between them
                detail::paint(f, &truth, anomaly_lane + spec.speed * dt, static_cast<int>(spec.width) / 2,
                              spec.crossing_size, spec.foreground);
                break;
            case AnomalyKind::None: break;
            }
        }
        for (auto& v : f.data) {
            const double noisy = v + spec.noise_sigma * standard_normal(rng);
            v = static_cast<float>(std::lround(std::clamp(noisy, 0.0, 1.0) * 255.0)) / 255.0f;
        }
        video.frames.push_back(std::move(f));
        video.truth.push_back(std::move(truth));
    }
    return video;
}

struct FixtureSet {
    std::vector<FixtureVideo> train;
    std::vector<FixtureVideo> test;
    std::vector<FixtureVideo> holdout;
};

inline std::string video_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "video_%02zu", i);
    return buf;
}

inline std::string frame_file_name(std::size_t t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06zu.pgm", t);
    return buf;
}

inline FixtureSet make_fixture(std::uint64_t seed, const FixtureSpec& spec = {}) {
    FixtureSet set;
    std::uint64_t stream = 0;
    for (std::size_t i = 0; i < spec.train_videos; ++i) {
        set.train.push_back(generate_video(spec, seed, stream++, AnomalyKind::None, video_name(i)));
    }
    for (std::size_t i = 0; i < spec.test_videos; ++i) {
        const AnomalyKind kind = spec.anomalies.empty() ? AnomalyKind::None : spec.anomalies[i % spec.anomalies.size()];
        set.test.push_back(generate_video(spec, seed, stream++, kind, video_name(i)));
    }
    for (std::size_t i = 0; i < spec.holdout_videos; ++i) {
        set.holdout.push_back(generate_video(spec, seed, stream++, AnomalyKind::None, video_name(i)));
    }
    return set;
}

inline void write_video(const FixtureVideo& video, const std::filesystem::path& frames_dir,
                        const std::filesystem::path* truth_dir) {
    std::filesystem::create_directories(frames_dir / video.name);
    if (truth_dir) std::filesystem::create_directories(*truth_dir / video.name);
    for (std::size_t t = 0; t < video.frames.size(); ++t) {
        write_pgm(frames_dir / video.name / frame_file_name(t), to_gray(video.frames[t]));
        if (truth_dir) write_pgm(*truth_dir / video.name / frame_file_name(t), mask_image(video.truth[t]));
    }
}

/// Writes train/, test/, test_gt/, holdout/ video directories, a seeded default-architecture
/// weight file net.fcnw and a desk-scale run.toml under `out`.
inline void write_fixture(const FixtureSet& set, std::uint64_t seed, const std::filesystem::path& out) {
    std::filesystem::create_directories(out);
    for (const auto& v : set.train) write_video(v, out / "train", nullptr);
    const auto gt = out / "test_gt";
    for (const auto& v : set.test) write_video(v, out / "test", &gt);
    for (const auto& v : set.holdout) write_video(v, out / "holdout", nullptr);
    save_weights(default_network(seed), out / "net.fcnw");
    std::ofstream toml(out / "run.toml");
    toml << "# desk-scale settings for the synthetic fixture\n"
            "[data]\ntrain = \"train\"\nweights = \"net.fcnw\"\n\n"
            "[network]\ntap = \"C2\"\n\n"
            "[autoencoder]\nhidden = 64\nepochs = 8\nbatch_size = 256\n\n"
            "[cascade]\nq_beta = 0.95\nq_alpha = 0.999\nq_phi = 0.99\n\n"
            "[localization]\nzeta = 3\n\n"
            "[run]\nseed = "
         << seed << "\n";
}

} // namespace fcnad

#endif
