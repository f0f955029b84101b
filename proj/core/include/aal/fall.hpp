#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aal/features.hpp"
#include "aal/learners.hpp"

namespace aal {

struct ZoneTimeline;  // zones.hpp

struct FallEvent {
    Timestamp t_start;
    Timestamp t_end;
    double confidence = 0.0;          // [0, 1]
    std::string zone_id = kUnknownZone;
    double rapid_change_score = 0.0;  // deg per sample step
    double peak_magnitude = 0.0;      // g
};

struct PreFilter {
    double magnitude_g = 1.8;
    double angle_deg_per_step = 25.0;
};

struct FallTrainConfig {
    int boost_rounds = 10;
    int k_neighbors = 5;
    int cv_folds = 5;
    PreFilter pre_filter;
    std::uint64_t seed = 0;
};

struct FallModel {
    BoostedEnsemble ensemble;  // binary: class 0 = NonFall, 1 = Fall
    int positive_class = 1;
    PreFilter pre_filter;
    ConfusionMatrix cv_matrix;  // training metadata
};

struct LabeledWindow {
    FeatureVector features;
    BehaviorLabel label;
};

// Collapses labels to {NonFall, Fall}, cross-validates for the metadata
// matrix, then fits the final ensemble on all data. Throws Error
// ("SingleClass" / "InsufficientData") per the training preconditions.
FallModel train_fall_model(const std::vector<LabeledWindow>& windows,
                           const FallTrainConfig& config);

// Pre-filter gate followed by ensemble classification. nullopt when the gate
// rejects or the classifier says NonFall. Throws Error("AllDegenerate") when
// the window has no angle-bearing samples.
std::optional<FallEvent> detect(const FallModel& model, const Window& window);

// Runs detect over consecutive windows and merges contiguous positives
// (gaps under one stride) into single events.
std::vector<FallEvent> detect_events(const FallModel& model,
                                     const std::vector<Window>& windows,
                                     double stride_s);

// Stamps the zone active at t_start (left-closed rule) from the fused
// timeline; kUnknownZone if none.
FallEvent annotate_zone(FallEvent event, const ZoneTimeline& timeline);

std::string serialize(const FallModel& model);
FallModel parse_fall_model(const std::string& text);
void save_fall_model(const FallModel& model, const std::string& path);
FallModel load_fall_model(const std::string& path);

}  // namespace aal
