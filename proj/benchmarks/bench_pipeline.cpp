// Microbenchmarks for the hot paths: feature extraction, the three
// classifiers, and stream merging.
#include <benchmark/benchmark.h>

#include <vector>

#include "aal/features.hpp"
#include "aal/gateway.hpp"
#include "aal/learners.hpp"
#include "aal/rng.hpp"
#include "aal/sim.hpp"

namespace {

using namespace aal;

ActivityZoneMap four_zones() {
    return ActivityZoneMap{{
        {"bedroom", "Bedroom", {0, 0, 4, 4}},
        {"kitchen", "Kitchen", {4, 0, 8, 4}},
        {"office", "Office", {0, 4, 4, 8}},
        {"toilet", "Toilet", {4, 4, 8, 8}},
    }};
}

std::vector<ImuSample> walking_minute() {
    Rng rng(1);
    return generate_segment(BehaviorLabel::Walking, 60.0, 50.0, 0.03, 2.0, rng);
}

Dataset random_dataset(std::size_t n, std::size_t d, int classes,
                       std::uint64_t seed) {
    Rng rng(seed);
    Dataset data;
    data.class_count = classes;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(d);
        for (auto& v : row) v = rng.uniform();
        data.add(std::move(row), static_cast<int>(rng.uniform_index(classes)));
    }
    return data;
}

void bm_window_features(benchmark::State& state) {
    const auto samples = walking_minute();
    const auto windows = make_windows(samples, 2.0, 1.0);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(window_features(windows[i]));
        i = (i + 1) % windows.size();
    }
}
BENCHMARK(bm_window_features);

void bm_make_windows(benchmark::State& state) {
    const auto samples = walking_minute();
    for (auto _ : state) {
        benchmark::DoNotOptimize(make_windows(samples, 2.0, 1.0));
    }
}
BENCHMARK(bm_make_windows);

void bm_knn_predict(benchmark::State& state) {
    const auto data = random_dataset(static_cast<std::size_t>(state.range(0)),
                                     kFeatureDim, 2, 3);
    const auto model = knn_fit(data, 5);
    Rng rng(9);
    std::vector<double> q(kFeatureDim);
    for (auto& v : q) v = rng.uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(knn_predict(model, q));
    }
}
BENCHMARK(bm_knn_predict)->Arg(500)->Arg(2000);

void bm_forest_predict(benchmark::State& state) {
    const auto data = random_dataset(1000, kFeatureDim, 4, 5);
    const auto model =
        forest_fit(data, static_cast<int>(state.range(0)), 12, 5, true, 7);
    Rng rng(9);
    std::vector<double> q(kFeatureDim);
    for (auto& v : q) v = rng.uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(forest_predict(model, q));
    }
}
BENCHMARK(bm_forest_predict)->Arg(20)->Arg(100);

void bm_forest_fit(benchmark::State& state) {
    const auto data = random_dataset(500, kFeatureDim, 4, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forest_fit(data, 20, 12, 5, true, 7));
    }
}
BENCHMARK(bm_forest_fit);

void bm_merge_streams(benchmark::State& state) {
    const auto map = four_zones();
    const Scenario scn{{{BehaviorLabel::Walking, 60.0, "kitchen"},
                        {BehaviorLabel::Sitting, 60.0, "office"}},
                       50.0, 0.03, 2.0, 11};
    const auto sim = simulate_session(scn, map);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            merge_streams(sim.imu_frames, sim.beacon_frames, map));
    }
}
BENCHMARK(bm_merge_streams);

void bm_parse_frame(benchmark::State& state) {
    StreamFrame f;
    f.src = "imu0";
    f.t_ms = 123456;
    f.payload = ImuPayload{{0.013, 0.981, -0.042}, {1.5, -0.3, 0.8}};
    const auto line = frame_to_line(f);
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_frame(line));
    }
}
BENCHMARK(bm_parse_frame);

}  // namespace

BENCHMARK_MAIN();
