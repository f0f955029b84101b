#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aal/core.hpp"
#include "aal/gateway.hpp"
#include "aal/rng.hpp"

namespace aal {

struct ScenarioStep {
    BehaviorLabel behavior;
    double duration_s = 0.0;
    std::string zone_id;
};

struct Scenario {
    std::vector<ScenarioStep> steps;
    double sample_rate_hz = 50.0;
    double noise_sigma_g = 0.03;
    double noise_sigma_dps = 2.0;
    std::uint64_t seed = 0;
};

// Throws Error on invalid fields or zones missing from the map.
void validate_scenario(const Scenario& scn, const ActivityZoneMap& map);

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

struct FallInterval {
    std::int64_t t_start_ms = 0;
    std::int64_t t_end_ms = 0;
    std::string zone_id;
};

struct GroundTruth {
    // Parallel to the emitted IMU frames.
    std::vector<std::int64_t> sample_times_ms;
    std::vector<BehaviorLabel> labels;
    std::vector<std::string> zones;
    std::vector<FallInterval> fall_intervals;

    BehaviorLabel label_at(std::int64_t t_ms) const;
    std::string zone_at(std::int64_t t_ms) const;
};

struct SimOutput {
    std::vector<StreamFrame> imu_frames;
    std::vector<StreamFrame> beacon_frames;
    GroundTruth truth;
};

// Chest-mounted sensor axis convention: X lateral, Y vertical when standing,
// Z anterior. Standing rests at (0,1,0) g and lying at (0,0,1) g, so the
// upright/flat postures map to exact axis-aligned vectors when noise is off.
std::vector<ImuSample> generate_segment(BehaviorLabel behavior, double duration_s,
                                        double rate_hz, double noise_sigma_g,
                                        double noise_sigma_dps, Rng& rng,
                                        std::int64_t t0_ms = 0);

// Concatenates segments, emits beacon present/absent reports on every zone
// change plus a 1 Hz heartbeat, and records per-sample ground truth.
SimOutput simulate_session(const Scenario& scn, const ActivityZoneMap& map);

// Truth label for a window [start, end): a fall label when the window
// contains a fall's impact instant, otherwise the label at the window
// midpoint.
BehaviorLabel window_truth_label(const GroundTruth& truth,
                                 std::int64_t w_start_ms, std::int64_t w_end_ms);

// Ground-truth sidecar file (per-sample labels + fall intervals).
std::string truth_to_text(const GroundTruth& truth,
                          const std::vector<StreamFrame>& imu_frames);
GroundTruth parse_truth(const std::string& text);

}  // namespace aal
