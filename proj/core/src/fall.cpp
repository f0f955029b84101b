#include "aal/fall.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "aal/zones.hpp"

namespace aal {

FallModel train_fall_model(const std::vector<LabeledWindow>& windows,
                           const FallTrainConfig& config) {
    std::size_t fall_count = 0;
    for (const auto& w : windows) {
        if (is_fall(w.label)) ++fall_count;
    }
    const std::size_t nonfall_count = windows.size() - fall_count;
    if (fall_count == 0 || nonfall_count == 0) throw Error("SingleClass");
    if (fall_count < 10 || nonfall_count < 10) throw Error("InsufficientData");

    Dataset data;
    data.class_count = 2;
    for (const auto& w : windows) {
        data.add(std::vector<double>(w.features.begin(), w.features.end()),
                 is_fall(w.label) ? 1 : 0);
    }

    FallModel model;
    model.pre_filter = config.pre_filter;
    const TrainFn train = [&](const Dataset& fold) {
        auto ensemble = adaboost_fit(fold, config.boost_rounds,
                                     config.k_neighbors, config.seed);
        return [ensemble = std::move(ensemble)](std::span<const double> q) {
            return adaboost_predict(ensemble, q);
        };
    };
    model.cv_matrix = cross_validate(data, config.cv_folds, train, config.seed);
    model.ensemble = adaboost_fit(data, config.boost_rounds, config.k_neighbors,
                                  config.seed);
    return model;
}

std::optional<FallEvent> detect(const FallModel& model, const Window& window) {
    const auto features = window_features(window);
    if (!features) throw Error("AllDegenerate");

    const double peak_mag = (*features)[kMagMax];
    const double rapid = (*features)[kRapidChange];
    if (peak_mag < model.pre_filter.magnitude_g &&
        rapid < model.pre_filter.angle_deg_per_step) {
        return std::nullopt;  // gate rejects; classifier never consulted
    }

    const std::vector<double> q(features->begin(), features->end());
    const auto scores = adaboost_scores(model.ensemble, q);
    if (adaboost_predict(model.ensemble, q) != model.positive_class) {
        return std::nullopt;
    }
    FallEvent event;
    event.t_start = window.start;
    event.t_end = make_timestamp(window.samples.back().t.millis);
    event.confidence = scores[model.positive_class];
    event.rapid_change_score = rapid;
    event.peak_magnitude = peak_mag;
    return event;
}

std::vector<FallEvent> detect_events(const FallModel& model,
                                     const std::vector<Window>& windows,
                                     double stride_s) {
    const std::int64_t merge_gap_ms =
        static_cast<std::int64_t>(stride_s * 1000.0 + 0.5);
    std::vector<FallEvent> events;
    for (const auto& w : windows) {
        std::optional<FallEvent> hit;
        try {
            hit = detect(model, w);
        } catch (const Error&) {
            continue;  // all-degenerate window; nothing to classify
        }
        if (!hit) continue;
        if (!events.empty() &&
            hit->t_start.millis - events.back().t_end.millis < merge_gap_ms) {
            auto& open = events.back();
            open.t_end = hit->t_end;
            open.confidence = std::max(open.confidence, hit->confidence);
            open.rapid_change_score =
                std::max(open.rapid_change_score, hit->rapid_change_score);
            open.peak_magnitude = std::max(open.peak_magnitude, hit->peak_magnitude);
        } else {
            events.push_back(*hit);
        }
    }
    return events;
}

FallEvent annotate_zone(FallEvent event, const ZoneTimeline& timeline) {
    event.zone_id = timeline.zone_at(event.t_start.millis);
    return event;
}

namespace {

std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string serialize(const FallModel& model) {
    std::ostringstream out;
    out << "AAL-FALL v1\n";
    out << model.positive_class << ' ' << shortest(model.pre_filter.magnitude_g)
        << ' ' << shortest(model.pre_filter.angle_deg_per_step) << '\n';
    out << "cv " << model.cv_matrix.class_count();
    for (int t = 0; t < model.cv_matrix.class_count(); ++t) {
        for (int p = 0; p < model.cv_matrix.class_count(); ++p) {
            out << ' ' << model.cv_matrix.at(t, p);
        }
    }
    out << '\n' << serialize(model.ensemble);
    return out.str();
}

FallModel parse_fall_model(const std::string& text) {
    std::istringstream in(text);
    std::string header, version;
    in >> header >> version;
    if (header != "AAL-FALL" || version != "v1") {
        throw Error("fall model: unsupported format/version");
    }
    FallModel model;
    in >> model.positive_class >> model.pre_filter.magnitude_g >>
        model.pre_filter.angle_deg_per_step;
    std::string tag;
    int k = 0;
    in >> tag >> k;
    if (tag != "cv" || !in) throw Error("fall model: bad cv block");
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
    const auto start = rest.find("AAL-BOOST");
    if (start == std::string::npos) throw Error("fall model: missing ensemble");
    model.ensemble = parse_ensemble(rest.substr(start));
    if (model.ensemble.dim != kFeatureDim) {
        throw Error("fall model: feature dimension mismatch");
    }
    return model;
}

void save_fall_model(const FallModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write model: " + path);
    f << serialize(model);
}

FallModel load_fall_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read model: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_fall_model(buf.str());
}

}  // namespace aal
