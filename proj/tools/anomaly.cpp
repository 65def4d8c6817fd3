// anomaly: command-line front end for the fcnad library.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fcnad/fcnad.hpp"

namespace fs = std::filesystem;
using namespace fcnad;

namespace {

std::pair<std::size_t, std::size_t> parse_dims(const std::string& text, const char* flag) {
    unsigned long w = 0, h = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lux%lu%c", &w, &h, &tail) != 2 || w == 0 || h == 0) {
        throw Error(ErrorCode::Config, std::string(flag) + " expects WxH, got '" + text + "'");
    }
    return {w, h};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
}

struct VideoJob {
    std::string name;
    std::unique_ptr<FrameSource> source;
};

std::vector<VideoJob> open_videos(const fs::path& data, const std::string& raw) {
    std::vector<VideoJob> jobs;
    if (!raw.empty()) {
        const auto [w, h] = parse_dims(raw, "--raw");
        jobs.push_back({data.stem().string(), std::make_unique<RawSource>(data, w, h)});
        return jobs;
    }
    const auto dirs = video_dirs(data);
    for (const auto& dir : dirs) {
        const std::string name = dirs.size() == 1 && dir == data ? std::string{} : dir.filename().string();
        jobs.push_back({name, std::make_unique<PgmDirectorySource>(dir)});
    }
    return jobs;
}

int run_train(const std::string& config_path, std::string weights, std::string data, const fs::path& out,
              std::optional<std::uint64_t> seed, std::string resize) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!weights.empty()) cfg.weights = weights;
    if (!data.empty()) cfg.data = data;
    if (seed) {
        cfg.seed = *seed;
        cfg.autoencoder.seed = *seed;
    }
    if (!resize.empty()) std::tie(cfg.resize_w, cfg.resize_h) = parse_dims(resize, "--resize");
    if (cfg.weights.empty()) throw Error(ErrorCode::Config, "no weight file (--weights or [data].weights)");
    if (cfg.data.empty()) throw Error(ErrorCode::Config, "no training data (--data or [data].train)");
    cfg.validate();

    const NetworkSpec net = load_weights(cfg.weights);
    TrainSummary summary;
    const ModelBundle bundle = train_pipeline(cfg, net, video_dirs(cfg.data), &summary);
    save_bundle(bundle, out);
    std::cout << "frames " << summary.frames << ", regional vectors " << summary.vectors << '\n';
    for (const auto& [stage, seconds] : summary.stage_seconds) {
        std::cout << "  " << stage << ": " << seconds << " s\n";
    }
    for (const auto& w : summary.autoencoder.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "alpha " << bundle.cascade.alpha << ", beta " << bundle.cascade.beta << ", phi " << bundle.cascade.phi
              << "\nwrote " << out.string() << '\n';
    return 0;
}

int run_detect(const fs::path& bundle_path, const fs::path& data, const fs::path& out_dir, bool strict,
               std::size_t workers, const std::string& raw) {
    const Detector detector(load_bundle(bundle_path));
    for (auto& job : open_videos(data, raw)) {
        const fs::path dir = job.name.empty() ? out_dir : out_dir / job.name;
        DetectionWriter writer(dir, detector);
        std::size_t abnormal_frames = 0;
        const DetectStats stats = detect(
            detector, *job.source,
            [&](FrameResult&& r) {
                if (r.mask.any()) ++abnormal_frames;
                writer(r);
            },
            {workers, strict, &std::cerr});
        std::cout << (job.name.empty() ? data.string() : job.name) << ": " << stats.frames << " frames ("
                  << stats.warmup << " warmup, " << stats.skipped << " skipped), " << abnormal_frames
                  << " with detections -> " << dir.string() << '\n';
    }
    return 0;
}

int run_eval(const fs::path& pred_dir, const fs::path& gt_dir, const std::string& level, const fs::path& out,
             std::size_t max_thresholds) {
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (fs::exists(pred_dir / "meta.json")) {
        pairs.emplace_back(pred_dir, gt_dir);
    } else {
        for (const auto& entry : fs::directory_iterator(pred_dir)) {
            if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) {
                pairs.emplace_back(entry.path(), gt_dir / entry.path().filename());
            }
        }
        std::sort(pairs.begin(), pairs.end());
    }
    if (pairs.empty()) throw Error(ErrorCode::Io, pred_dir.string() + " holds no detection output");

    RocCurve curve;
    if (level == "frame") {
        std::vector<LabeledScore> samples;
        for (const auto& [p, g] : pairs) append_frame_samples(load_predictions(p), load_truth(g), samples);
        curve = roc(samples);
    } else {
        std::vector<PixelFrame> frames;
        std::optional<PredictionSet> first;
        for (const auto& [p, g] : pairs) {
            auto preds = load_predictions(p);
            append_pixel_frames(preds, load_truth(g), frames);
            if (!first) first = std::move(preds);
        }
        curve = pixel_level_roc(frames, first->geometry, first->zeta, max_thresholds);
    }
    std::cout << roc_text(curve, level);
    if (!out.empty()) {
        write_text(out, roc_json(curve, level).dump(2) + "\n");
        fs::path csv = out;
        csv.replace_extension(".csv");
        write_text(csv, roc_csv(curve));
        std::cout << "wrote " << out.string() << " and " << csv.string() << '\n';
    }
    return 0;
}

int run_bench(const fs::path& bundle_path, const fs::path& data, const std::string& raw, const fs::path& out) {
    const Detector detector(load_bundle(bundle_path));
    auto jobs = open_videos(data, raw);
    // first video only, the numbers are per frame
    const BenchReport report = bench(detector, *jobs.front().source);
    std::cout << report.to_text();
    if (!out.empty()) write_text(out, report.to_json().dump(2) + "\n");
    return 0;
}

int run_rfgeom(const fs::path& weights, bool json) {
    const NetworkSpec net = load_weights(weights);
    const auto table = geometry_table(net);
    if (json) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& g : table) rows.push_back(geometry_json(g));
        std::cout << rows.dump(2) << '\n';
        return 0;
    }
    std::printf("%-8s %-10s %-6s %-10s\n", "layer", "size", "jump", "offset");
    for (const auto& g : table) {
        const std::string size = std::to_string(g.size_h) + "x" + std::to_string(g.size_w);
        const std::string offset = std::to_string(g.offset_y) + "," + std::to_string(g.offset_x);
        std::printf("%-8s %-10s %-6lld %-10s\n", g.layer.c_str(), size.c_str(), static_cast<long long>(g.jump),
                    offset.c_str());
    }
    return 0;
}

int run_fixture(std::uint64_t seed, const fs::path& out, std::size_t frames, const std::string& size) {
    FixtureSpec spec;
    if (frames) spec.frames_per_video = frames;
    if (!size.empty()) std::tie(spec.width, spec.height) = parse_dims(size, "--size");
    write_fixture(make_fixture(seed, spec), seed, out);
    std::cout << "wrote fixture to " << out.string() << '\n';
    return 0;
}

int run_weights(std::uint64_t seed, const fs::path& out, bool deep, const std::string& pool) {
    DefaultNetworkOptions options;
    options.include_deep_layers = deep;
    if (pool == "max") {
        options.pool_mode = PoolMode::Max;
    } else if (pool != "mean") {
        throw Error(ErrorCode::Config, "--pool must be mean or max");
    }
    save_weights(default_network(seed, options), out);
    std::cout << "wrote " << out.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fully convolutional video anomaly detection"};
    app.require_subcommand(1);

    std::string config, weights, data, resize, raw, pool, level = "frame", size;
    fs::path out, bundle, out_dir, pred_dir, gt_dir;
    std::optional<std::uint64_t> seed;
    std::uint64_t fixture_seed = 1;
    bool strict = false, json = false, deep = false;
    std::size_t workers = 1, frames = 0, max_thresholds = 512;

    auto* train = app.add_subcommand("train", "fit G1, the autoencoder, G2 and thresholds from normal video");
    train->add_option("--config", config, "TOML run configuration");
    train->add_option("--weights", weights, "FCNW file with the frozen layers");
    train->add_option("--data", data, "directory of P5 frames or of video subdirectories");
    train->add_option("--out", out, "output bundle (.fab)")->required();
    train->add_option("--seed", seed, "overrides [run].seed");
    train->add_option("--resize", resize, "resize frames to WxH");

    auto* det = app.add_subcommand("detect", "per-frame scores, masks and heat maps");
    det->add_option("--bundle", bundle, "model bundle")->required();
    det->add_option("--data", data, "frames directory, or raw file with --raw")->required();
    det->add_option("--out-dir", out_dir, "output directory")->required();
    det->add_flag("--strict", strict, "abort on undecodable frames instead of skipping");
    det->add_option("--workers", workers, "frames processed concurrently")->check(CLI::PositiveNumber);
    det->add_option("--raw", raw, "treat --data as concatenated WxH 8-bit frames");

    auto* ev = app.add_subcommand("eval", "frame- or pixel-level ROC, AUC and EER");
    ev->add_option("--pred-dir", pred_dir, "detect output directory")->required();
    ev->add_option("--gt-dir", gt_dir, "ground-truth mask directory")->required();
    ev->add_option("--level", level, "frame or pixel")->check(CLI::IsMember({"frame", "pixel"}));
    ev->add_option("--out", out, "report.json (ROC points also written as .csv)");
    ev->add_option("--max-thresholds", max_thresholds, "pixel-level sweep size");

    auto* be = app.add_subcommand("bench", "per-stage timing");
    be->add_option("--bundle", bundle, "model bundle")->required();
    be->add_option("--data", data, "frames directory, or raw file with --raw")->required();
    be->add_option("--raw", raw, "treat --data as concatenated WxH 8-bit frames");
    be->add_option("--out", out, "JSON report");

    auto* rf = app.add_subcommand("rfgeom", "receptive-field size/jump/offset per layer");
    rf->add_option("--weights", weights, "FCNW file")->required();
    rf->add_flag("--json", json, "JSON output");

    auto* fx = app.add_subcommand("fixture", "generate the synthetic walking-squares dataset");
    fx->add_option("--seed", fixture_seed, "generator seed");
    fx->add_option("--out", out, "output directory")->required();
    fx->add_option("--frames", frames, "frames per video");
    fx->add_option("--size", size, "frame size WxH");

    auto* wt = app.add_subcommand("weights", "write a seeded default-architecture FCNW file");
    wt->add_option("--seed", fixture_seed, "initialization seed");
    wt->add_option("--out", out, "output .fcnw")->required();
    wt->add_flag("--deep", deep, "append S2 and C3");
    wt->add_option("--pool", pool, "mean or max")->default_val("mean");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train) return run_train(config, weights, data, out, seed, resize);
        if (*det) return run_detect(bundle, data, out_dir, strict, workers, raw);
        if (*ev) return run_eval(pred_dir, gt_dir, level, out, max_thresholds);
        if (*be) return run_bench(bundle, data, raw, out);
        if (*rf) return run_rfgeom(weights, json);
        if (*fx) return run_fixture(fixture_seed, out, frames, size);
        if (*wt) return run_weights(fixture_seed, out, deep, pool);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
