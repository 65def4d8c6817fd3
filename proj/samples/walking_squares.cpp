// End-to-end run on an in-memory synthetic fixture: train, detect, frame-level ROC.
#include <iostream>
#include <memory>

#include "fcnad/fcnad.hpp"

int main(int argc, char** argv) {
    const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 7;
    const auto set = fcnad::make_fixture(seed);

    fcnad::RunConfig cfg;
    cfg.seed = seed;
    cfg.autoencoder.hidden = 64;
    cfg.autoencoder.epochs = 8;

    std::vector<std::unique_ptr<fcnad::FrameSource>> train;
    for (const auto& v : set.train) train.push_back(std::make_unique<fcnad::MemorySource>(v.frames, v.name));
    const fcnad::Detector detector(fcnad::train_pipeline(cfg, fcnad::default_network(seed), train));

    std::vector<fcnad::LabeledScore> samples;
    for (const auto& v : set.test) {
        fcnad::MemorySource source(v.frames, v.name);
        fcnad::detect(detector, source, [&](fcnad::FrameResult&& r) {
            if (!r.warmup) samples.push_back({r.frame_index, r.score, v.truth[r.frame_index].any()});
        });
    }
    std::cout << fcnad::roc_text(fcnad::roc(samples), "frame");
}
