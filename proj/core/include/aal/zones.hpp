#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aal/features.hpp"
#include "aal/learners.hpp"

namespace aal {

struct ZoneTimelineEntry {
    Timestamp t;
    std::string zone_id;  // kUnknownZone when no beacon claims presence
};

struct ZoneTimeline {
    std::vector<ZoneTimelineEntry> entries;  // time-sorted, no repeats
    std::size_t conflict_count = 0;          // simultaneous-presence claims

    // Zone active at t (left-closed: an entry at exactly t applies).
    // kUnknownZone before the first entry.
    std::string zone_at(std::int64_t t_ms) const;
};

// Debounce horizon for zone transitions.
inline constexpr std::int64_t kZoneDebounceMs = 500;

// Collapses per-zone presence reports into a single active-zone timeline.
// Simultaneous presence claims resolve to the earliest zone in map order and
// bump conflict_count; transitions shorter than the debounce horizon are
// suppressed. Throws Error("UnknownZoneId: ...") for unmapped zones.
ZoneTimeline fuse_beacons(std::span<const BeaconEvent> events,
                          const ActivityZoneMap& map);

struct ZoneTrainConfig {
    int n_trees = 100;
    int max_depth = 12;
    std::size_t feature_subset_size = 0;  // 0 = ceil(sqrt(dim))
    bool bootstrap = true;
    int cv_folds = 5;
    int smoothing_windows = 3;
    std::uint64_t seed = 0;
};

struct ZoneModel {
    ForestModel forest;
    std::vector<std::string> zone_ids;  // class index -> zone id
    int smoothing_windows = 3;
    ConfusionMatrix cv_matrix;  // training metadata
};

struct ZoneLabeledWindow {
    FeatureVector features;
    std::string zone_id;
};

// Random-forest fit of features -> zone index, with a cross-validated
// confusion matrix stored as metadata. Throws Error("InsufficientData")
// when fewer than 2 zones are represented or any zone has < 10 windows.
ZoneModel train_zone_model(const std::vector<ZoneLabeledWindow>& windows,
                           const ActivityZoneMap& map,
                           const ZoneTrainConfig& config);

struct ZoneEstimate {
    std::string zone_id;
    double confidence = 0.0;
    std::vector<double> fractions;  // averaged vote fractions per zone
};

// Averages forest votes over the last min(N, available) windows.
ZoneEstimate locate(const ZoneModel& model,
                    std::span<const FeatureVector> recent_windows);

struct ReconcileResult {
    std::string zone_id;
    bool disagreement = false;  // beacon and model both resolved, and differ
};

// Beacon zone wins when known; the model covers beacon dropout.
ReconcileResult reconcile(const ZoneTimeline& beacon_timeline,
                          const ZoneEstimate& model_zone, std::int64_t t_ms);

std::string serialize(const ZoneModel& model);
ZoneModel parse_zone_model(const std::string& text);
void save_zone_model(const ZoneModel& model, const std::string& path);
ZoneModel load_zone_model(const std::string& path);

}  // namespace aal
