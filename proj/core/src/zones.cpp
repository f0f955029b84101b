#include "aal/zones.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace aal {

std::string ZoneTimeline::zone_at(std::int64_t t_ms) const {
    std::string zone = kUnknownZone;
    for (const auto& e : entries) {
        if (e.t.millis > t_ms) break;
        zone = e.zone_id;
    }
    return zone;
}

ZoneTimeline fuse_beacons(std::span<const BeaconEvent> events,
                          const ActivityZoneMap& map) {
    for (const auto& e : events) {
        if (!map.index_of(e.zone_id)) throw Error("UnknownZoneId: " + e.zone_id);
    }

    // Events grouped by timestamp so simultaneous claims are visible.
    std::vector<const BeaconEvent*> order;
    order.reserve(events.size());
    for (const auto& e : events) order.push_back(&e);
    std::stable_sort(order.begin(), order.end(),
                     [](const BeaconEvent* a, const BeaconEvent* b) {
                         return a->t.millis < b->t.millis;
                     });

    ZoneTimeline timeline;
    std::vector<bool> present(map.zones.size(), false);
    std::string committed = kUnknownZone;
    bool have_committed = false;
    std::string pending;
    std::int64_t pending_since = 0;
    bool have_pending = false;

    auto active_zone = [&]() -> std::string {
        std::size_t claims = 0;
        std::size_t first = map.zones.size();
        for (std::size_t i = 0; i < present.size(); ++i) {
            if (present[i]) {
                ++claims;
                if (first == map.zones.size()) first = i;
            }
        }
        if (claims > 1) ++timeline.conflict_count;
        return claims == 0 ? kUnknownZone : map.zones[first].id;
    };

    auto commit = [&](const std::string& zone, std::int64_t at_ms) {
        if (have_committed && zone == committed) return;
        committed = zone;
        have_committed = true;
        timeline.entries.push_back({make_timestamp(at_ms), zone});
    };

    std::size_t i = 0;
    while (i < order.size()) {
        const std::int64_t t = order[i]->t.millis;
        // Flush a pending transition that outlived the debounce horizon.
        if (have_pending && t - pending_since >= kZoneDebounceMs) {
            commit(pending, pending_since);
            have_pending = false;
        }
        while (i < order.size() && order[i]->t.millis == t) {
            present[*map.index_of(order[i]->zone_id)] = order[i]->present;
            ++i;
        }
        const std::string zone = active_zone();
        if (!have_committed) {
            commit(zone, t);  // initial state is not debounced
        } else if (zone == committed) {
            have_pending = false;
        } else if (!have_pending || pending != zone) {
            pending = zone;
            pending_since = t;
            have_pending = true;
        }
    }
    if (have_pending) commit(pending, pending_since);
    return timeline;
}

ZoneModel train_zone_model(const std::vector<ZoneLabeledWindow>& windows,
                           const ActivityZoneMap& map,
                           const ZoneTrainConfig& config) {
    std::map<std::string, std::size_t> counts;
    for (const auto& w : windows) ++counts[w.zone_id];
    if (counts.size() < 2) throw Error("InsufficientData");
    for (const auto& [zone, count] : counts) {
        if (count < 10) throw Error("InsufficientData");
    }

    ZoneModel model;
    model.smoothing_windows = config.smoothing_windows;
    std::map<std::string, int> index;
    for (const auto& z : map.zones) {
        index[z.id] = static_cast<int>(model.zone_ids.size());
        model.zone_ids.push_back(z.id);
    }

    Dataset data;
    data.class_count = static_cast<int>(model.zone_ids.size());
    for (const auto& w : windows) {
        auto it = index.find(w.zone_id);
        if (it == index.end()) throw Error("UnknownZoneId: " + w.zone_id);
        data.add(std::vector<double>(w.features.begin(), w.features.end()),
                 it->second);
    }

    const std::size_t m =
        config.feature_subset_size > 0
            ? config.feature_subset_size
            : static_cast<std::size_t>(
                  std::ceil(std::sqrt(static_cast<double>(data.dim()))));

    const TrainFn train = [&](const Dataset& fold) {
        auto forest = forest_fit(fold, config.n_trees, config.max_depth, m,
                                 config.bootstrap, config.seed);
        return [forest = std::move(forest)](std::span<const double> q) {
            return forest_predict(forest, q).cls;
        };
    };
    model.cv_matrix = cross_validate(data, config.cv_folds, train, config.seed);
    model.forest = forest_fit(data, config.n_trees, config.max_depth, m,
                              config.bootstrap, config.seed);
    return model;
}

ZoneEstimate locate(const ZoneModel& model,
                    std::span<const FeatureVector> recent_windows) {
    if (recent_windows.empty()) throw Error("locate: need at least one window");
    const std::size_t n = std::min<std::size_t>(
        recent_windows.size(), static_cast<std::size_t>(model.smoothing_windows));

    ZoneEstimate estimate;
    estimate.fractions.assign(model.zone_ids.size(), 0.0);
    for (std::size_t i = recent_windows.size() - n; i < recent_windows.size(); ++i) {
        const std::vector<double> q(recent_windows[i].begin(),
                                    recent_windows[i].end());
        const auto vote = forest_predict(model.forest, q);
        for (std::size_t c = 0; c < estimate.fractions.size(); ++c) {
            estimate.fractions[c] += vote.fractions[c];
        }
    }
    std::size_t best = 0;
    for (auto& f : estimate.fractions) f /= static_cast<double>(n);
    for (std::size_t c = 1; c < estimate.fractions.size(); ++c) {
        if (estimate.fractions[c] > estimate.fractions[best]) best = c;
    }
    estimate.zone_id = model.zone_ids[best];
    estimate.confidence = estimate.fractions[best];
    return estimate;
}

ReconcileResult reconcile(const ZoneTimeline& beacon_timeline,
                          const ZoneEstimate& model_zone, std::int64_t t_ms) {
    const std::string beacon = beacon_timeline.zone_at(t_ms);
    if (beacon != kUnknownZone) {
        return ReconcileResult{
            beacon, model_zone.zone_id != kUnknownZone && model_zone.zone_id != beacon};
    }
    return ReconcileResult{model_zone.zone_id, false};
}

std::string serialize(const ZoneModel& model) {
    std::ostringstream out;
    out << "AAL-ZONE v1\n";
    out << model.smoothing_windows << ' ' << model.zone_ids.size();
    for (const auto& id : model.zone_ids) out << ' ' << id;
    out << '\n';
    out << "cv " << model.cv_matrix.class_count();
    for (int t = 0; t < model.cv_matrix.class_count(); ++t) {
        for (int p = 0; p < model.cv_matrix.class_count(); ++p) {
            out << ' ' << model.cv_matrix.at(t, p);
        }
    }
    out << '\n' << serialize(model.forest);
    return out.str();
}

ZoneModel parse_zone_model(const std::string& text) {
    std::istringstream in(text);
    std::string header, version;
    in >> header >> version;
    if (header != "AAL-ZONE" || version != "v1") {
        throw Error("zone model: unsupported format/version");
    }
    ZoneModel model;
    std::size_t n_zones = 0;
    in >> model.smoothing_windows >> n_zones;
    for (std::size_t i = 0; i < n_zones; ++i) {
        std::string id;
        in >> id;
        model.zone_ids.push_back(id);
    }
    std::string tag;
    int k = 0;
    in >> tag >> k;
    if (tag != "cv" || !in) throw Error("zone model: bad cv block");
    model.cv_matrix = ConfusionMatrix(k);
    for (int t = 0; t < k; ++t) {
        for (int p = 0; p < k; ++p) {
            std::int64_t count;
            in >> count;
            for (std::int64_t i = 0; i < count; ++i) model.cv_matrix.add(t, p);
        }
    }
    std::string rest((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    const auto start = rest.find("AAL-FOREST");
    if (start == std::string::npos) throw Error("zone model: missing forest");
    model.forest = parse_forest(rest.substr(start));
    if (model.forest.dim != kFeatureDim) {
        throw Error("zone model: feature dimension mismatch");
    }
    if (model.forest.class_count != static_cast<int>(model.zone_ids.size())) {
        throw Error("zone model: class/zone count mismatch");
    }
    return model;
}

void save_zone_model(const ZoneModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write model: " + path);
    f << serialize(model);
}

ZoneModel load_zone_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read model: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_zone_model(buf.str());
}

}  // namespace aal
