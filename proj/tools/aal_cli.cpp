// Command-line front end wiring the pipeline together: simulate sensor
// streams, ingest or serve them into a session log, train the fall and zone
// models, run detection, and evaluate against ground truth.
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "aal/fall.hpp"
#include "aal/features.hpp"
#include "aal/gateway.hpp"
#include "aal/sim.hpp"
#include "aal/zones.hpp"

namespace {

using namespace aal;

std::vector<StreamFrame> load_frames(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open frame file: " + path);
    std::vector<StreamFrame> frames;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        frames.push_back(parse_frame(line));
    }
    return frames;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("IoFailure: cannot write " + path);
    for (const auto& l : lines) f << l << '\n';
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("IoFailure: cannot write " + path);
    f << text;
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::vector<ImuSample> samples_from_frames(const std::vector<StreamFrame>& frames) {
    std::vector<ImuSample> out;
    for (const auto& f : frames) {
        if (!f.is_imu()) continue;
        const auto& p = std::get<ImuPayload>(f.payload);
        ImuSample s;
        s.t = make_timestamp(f.t_ms);
        s.accel = p.accel;
        s.gyro = p.gyro;
        s.source_id = f.src;
        out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.t.millis < b.t.millis;
    });
    return out;
}

std::vector<BeaconEvent> beacons_from_frames(const std::vector<StreamFrame>& frames) {
    std::vector<BeaconEvent> out;
    for (const auto& f : frames) {
        if (f.is_imu()) continue;
        const auto& p = std::get<BeaconPayload>(f.payload);
        BeaconEvent e;
        e.t = make_timestamp(f.t_ms);
        e.zone_id = p.zone;
        e.present = p.present;
        e.source_id = f.src;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<ImuSample> samples_from_log(const SessionLog& log) {
    std::vector<ImuSample> out;
    for (const auto& r : log.records) {
        ImuSample s;
        s.t = r.t;
        s.accel = r.accel;
        s.gyro = r.gyro;
        s.source_id = "log";
        out.push_back(std::move(s));
    }
    return out;
}

// Beacon-derived zone timeline, reconstructed from the per-record presence
// columns of a finalized log.
ZoneTimeline timeline_from_log(const SessionLog& log) {
    ZoneTimeline timeline;
    std::string last;
    for (const auto& r : log.records) {
        const std::string zone = r.active_zone();
        if (zone != last || timeline.entries.empty()) {
            timeline.entries.push_back({r.t, zone});
            last = zone;
        }
    }
    return timeline;
}

void print_confusion(const ConfusionMatrix& cm,
                     const std::vector<std::string>& names, std::ostream& out) {
    out << "confusion matrix (rows = truth, cols = predicted):\n";
    out << "              ";
    for (const auto& n : names) out << ' ' << n.substr(0, 12);
    out << '\n';
    for (int t = 0; t < cm.class_count(); ++t) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%-14s", names[t].substr(0, 12).c_str());
        out << buf;
        for (int p = 0; p < cm.class_count(); ++p) {
            std::snprintf(buf, sizeof(buf), " %12lld",
                          static_cast<long long>(cm.at(t, p)));
            out << buf;
        }
        out << '\n';
    }
    out << "accuracy: " << cm.accuracy() << '\n';
}

struct CommonOpts {
    std::string zone_map_path;
    double window_s = 2.0;
    double stride_s = 1.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& scenario_path, const CommonOpts& common,
                 const std::string& out_prefix) {
    const auto map = load_zone_map(common.zone_map_path);
    auto scn = load_scenario(scenario_path);
    if (common.seed_set) scn.seed = common.seed;
    std::cout << "seed: " << scn.seed << '\n';

    const auto sim = simulate_session(scn, map);
    std::vector<std::string> imu_lines, beacon_lines;
    for (const auto& f : sim.imu_frames) imu_lines.push_back(frame_to_line(f));
    for (const auto& f : sim.beacon_frames) beacon_lines.push_back(frame_to_line(f));
    write_lines(out_prefix + ".imu.jsonl", imu_lines);
    write_lines(out_prefix + ".beacon.jsonl", beacon_lines);
    write_text(out_prefix + ".truth.txt", truth_to_text(sim.truth, sim.imu_frames));
    std::cout << "imu frames: " << sim.imu_frames.size()
              << "\nbeacon frames: " << sim.beacon_frames.size()
              << "\nfall intervals: " << sim.truth.fall_intervals.size() << '\n';
    return 0;
}

int cmd_ingest(const CommonOpts& common, const std::string& imu_path,
               const std::string& beacon_path, const std::string& out_path,
               std::int64_t tolerance_ms, const std::string& session_id) {
    const auto map = load_zone_map(common.zone_map_path);
    const auto imu = load_frames(imu_path);
    const auto beacons = beacon_path.empty() ? std::vector<StreamFrame>{}
                                             : load_frames(beacon_path);
    auto log = merge_streams(imu, beacons, map, tolerance_ms);
    log.session_id = session_id;
    save_log(log, out_path);
    std::cout << "records: " << log.records.size()
              << "\nreceived: " << log.counters.frames_received
              << "\ndropped: " << log.counters.frames_dropped
              << "\nreordered: " << log.counters.frames_reordered
              << "\nconflicts: " << log.counters.beacon_conflicts << '\n';
    return 0;
}

int cmd_serve(const CommonOpts& common, const std::string& listen,
              const std::string& out_path, std::int64_t tolerance_ms,
              int min_connections, const std::string& session_id) {
    const auto map = load_zone_map(common.zone_map_path);
    ServeConfig config;
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw Error("listen must be host:port");
    config.host = listen.substr(0, colon);
    config.port = std::stoi(listen.substr(colon + 1));
    config.tolerance_ms = tolerance_ms;
    config.min_connections = min_connections;
    config.session_id = session_id;

    GatewayServer server(config, map);
    server.bind();
    std::cout << "listening on " << config.host << ':' << server.port()
              << std::endl;
    const auto log = server.run();
    save_log(log, out_path);
    std::cout << "records: " << log.records.size()
              << "\nparse errors: " << log.counters.parse_errors << '\n';
    return 0;
}

int cmd_export(const CommonOpts& common, const std::string& log_path,
               const std::string& out_path) {
    const auto map = load_zone_map(common.zone_map_path);
    const auto log = load_log(log_path);
    const auto rows = export_table(log, map, out_path);
    std::cout << "rows: " << rows << '\n';
    return 0;
}

struct WindowedSession {
    std::vector<Window> windows;
    std::vector<FeatureVector> features;  // parallel; windows w/o features skipped
};

WindowedSession window_session(const std::vector<ImuSample>& samples,
                               const CommonOpts& common) {
    WindowedSession out;
    for (auto& w : make_windows(samples, common.window_s, common.stride_s)) {
        const auto f = window_features(w);
        if (!f) continue;  // all-degenerate window
        out.windows.push_back(std::move(w));
        out.features.push_back(*f);
    }
    return out;
}

std::int64_t window_end_ms(const Window& w) {
    return w.start.millis + static_cast<std::int64_t>(w.duration_s * 1000.0 + 0.5);
}

int cmd_train_fall(const CommonOpts& common, const std::string& imu_path,
                   const std::string& truth_path, const std::string& out_path,
                   int k, int rounds) {
    const auto samples = samples_from_frames(load_frames(imu_path));
    const auto truth = parse_truth(read_text(truth_path));
    const auto ws = window_session(samples, common);

    std::vector<LabeledWindow> labeled;
    for (std::size_t i = 0; i < ws.windows.size(); ++i) {
        labeled.push_back({ws.features[i],
                           window_truth_label(truth, ws.windows[i].start.millis,
                                              window_end_ms(ws.windows[i]))});
    }
    FallTrainConfig config;
    config.k_neighbors = k;
    config.boost_rounds = rounds;
    config.seed = common.seed;
    std::cout << "seed: " << config.seed << '\n';
    const auto model = train_fall_model(labeled, config);
    save_fall_model(model, out_path);
    print_confusion(model.cv_matrix, {"NonFall", "Fall"}, std::cout);
    return 0;
}

int cmd_train_zone(const CommonOpts& common, const std::string& imu_path,
                   const std::string& beacon_path, const std::string& out_path,
                   int trees, int depth) {
    const auto map = load_zone_map(common.zone_map_path);
    const auto samples = samples_from_frames(load_frames(imu_path));
    const auto beacons = beacons_from_frames(load_frames(beacon_path));
    const auto timeline = fuse_beacons(beacons, map);
    const auto ws = window_session(samples, common);

    std::vector<ZoneLabeledWindow> labeled;
    for (std::size_t i = 0; i < ws.windows.size(); ++i) {
        const std::int64_t mid =
            (ws.windows[i].start.millis + window_end_ms(ws.windows[i])) / 2;
        const std::string zone = timeline.zone_at(mid);
        if (zone == kUnknownZone) continue;
        labeled.push_back({ws.features[i], zone});
    }
    ZoneTrainConfig config;
    config.n_trees = trees;
    config.max_depth = depth;
    config.seed = common.seed;
    std::cout << "seed: " << config.seed << '\n';
    const auto model = train_zone_model(labeled, map, config);
    save_zone_model(model, out_path);
    std::vector<std::string> names = model.zone_ids;
    print_confusion(model.cv_matrix, names, std::cout);
    return 0;
}

int cmd_detect(const CommonOpts& common, const std::string& log_path,
               const std::string& fall_model_path,
               const std::string& zone_model_path, const std::string& out_path) {
    const auto log = load_log(log_path);
    const auto samples = samples_from_log(log);
    const auto beacon_timeline = timeline_from_log(log);
    const auto ws = window_session(samples, common);

    std::vector<std::string> lines;

    std::optional<ZoneModel> zone_model;
    if (!zone_model_path.empty()) zone_model = load_zone_model(zone_model_path);

    // Reconciled zone timeline over windows.
    std::string last_zone;
    if (zone_model) {
        for (std::size_t i = 0; i < ws.features.size(); ++i) {
            const std::size_t lo =
                i + 1 >= static_cast<std::size_t>(zone_model->smoothing_windows)
                    ? i + 1 - static_cast<std::size_t>(zone_model->smoothing_windows)
                    : 0;
            const std::span<const FeatureVector> recent(ws.features.data() + lo,
                                                        i - lo + 1);
            const auto estimate = locate(*zone_model, recent);
            const std::int64_t t = window_end_ms(ws.windows[i]);
            const auto r = reconcile(beacon_timeline, estimate, t);
            if (r.zone_id != last_zone) {
                lines.push_back("ZONE " + std::to_string(t) + " " + r.zone_id);
                last_zone = r.zone_id;
            }
        }
    }

    if (!fall_model_path.empty()) {
        const auto fall_model = load_fall_model(fall_model_path);
        auto events = detect_events(fall_model, ws.windows, common.stride_s);
        for (auto& e : events) {
            e = annotate_zone(e, beacon_timeline);
            char buf[160];
            std::snprintf(buf, sizeof(buf), "FALL %lld %lld %s %.3f",
                          static_cast<long long>(e.t_start.millis),
                          static_cast<long long>(e.t_end.millis),
                          e.zone_id.c_str(), e.confidence);
            lines.push_back(buf);
        }
        std::cout << "fall events: " << events.size() << '\n';
    }

    write_lines(out_path, lines);
    return 0;
}

struct EventFile {
    std::vector<FallEvent> falls;
    std::vector<ZoneTimelineEntry> zones;
};

EventFile parse_events(const std::string& text) {
    EventFile out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string tag;
        fields >> tag;
        if (tag == "FALL") {
            std::int64_t t0, t1;
            std::string zone;
            double conf;
            fields >> t0 >> t1 >> zone >> conf;
            if (!fields) throw Error("events: bad FALL line");
            FallEvent e;
            e.t_start = make_timestamp(t0);
            e.t_end = make_timestamp(t1);
            e.zone_id = zone;
            e.confidence = conf;
            out.falls.push_back(std::move(e));
        } else if (tag == "ZONE") {
            std::int64_t t;
            std::string zone;
            fields >> t >> zone;
            if (!fields) throw Error("events: bad ZONE line");
            out.zones.push_back({make_timestamp(t), zone});
        } else {
            throw Error("events: unknown tag " + tag);
        }
    }
    return out;
}

int cmd_eval(const CommonOpts& common, const std::string& events_path,
             const std::string& truth_path, const std::string& out_path) {
    const auto map = load_zone_map(common.zone_map_path);
    const auto events = parse_events(read_text(events_path));
    const auto truth = parse_truth(read_text(truth_path));

    // Event-level fall metrics: a truth interval is recalled when any
    // emitted event overlaps it; an event is precise when it overlaps some
    // truth interval.
    std::size_t matched_truth = 0;
    for (const auto& iv : truth.fall_intervals) {
        for (const auto& e : events.falls) {
            if (e.t_start.millis < iv.t_end_ms && iv.t_start_ms <= e.t_end.millis) {
                ++matched_truth;
                break;
            }
        }
    }
    std::size_t matched_events = 0;
    for (const auto& e : events.falls) {
        for (const auto& iv : truth.fall_intervals) {
            if (e.t_start.millis < iv.t_end_ms && iv.t_start_ms <= e.t_end.millis) {
                ++matched_events;
                break;
            }
        }
    }
    const double recall =
        truth.fall_intervals.empty()
            ? 1.0
            : static_cast<double>(matched_truth) / truth.fall_intervals.size();
    const double precision =
        events.falls.empty()
            ? 1.0
            : static_cast<double>(matched_events) / events.falls.size();
    const double f1 = (precision + recall) > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;

    // Zone accuracy sampled once per stride across the session.
    ZoneTimeline predicted;
    predicted.entries = events.zones;
    ConfusionMatrix zone_cm(static_cast<int>(map.zones.size()));
    std::size_t zone_total = 0, zone_correct = 0, zone_unknown = 0;
    const std::int64_t stride_ms =
        static_cast<std::int64_t>(common.stride_s * 1000.0 + 0.5);
    if (!truth.sample_times_ms.empty() && !events.zones.empty()) {
        const std::int64_t t_end = truth.sample_times_ms.back();
        for (std::int64_t t = stride_ms; t <= t_end; t += stride_ms) {
            const std::string expect = truth.zone_at(t);
            const std::string got = predicted.zone_at(t);
            ++zone_total;
            if (got == expect) ++zone_correct;
            if (got == kUnknownZone) {
                ++zone_unknown;
            } else if (map.index_of(expect) && map.index_of(got)) {
                zone_cm.add(static_cast<int>(*map.index_of(expect)),
                            static_cast<int>(*map.index_of(got)));
            }
        }
    }
    const double zone_accuracy =
        zone_total == 0 ? 0.0
                        : static_cast<double>(zone_correct) /
                              static_cast<double>(zone_total);

    std::ostringstream report;
    report << "fall_precision=" << precision << '\n'
           << "fall_recall=" << recall << '\n'
           << "fall_f1=" << f1 << '\n'
           << "fall_events=" << events.falls.size() << '\n'
           << "fall_truth_intervals=" << truth.fall_intervals.size() << '\n'
           << "zone_accuracy=" << zone_accuracy << '\n'
           << "zone_samples=" << zone_total << '\n'
           << "zone_unknown=" << zone_unknown << '\n';

    std::cout << report.str();
    if (zone_cm.total() > 0) {
        std::vector<std::string> names;
        for (const auto& z : map.zones) names.push_back(z.id);
        print_confusion(zone_cm, names, std::cout);
        for (std::size_t z = 0; z < map.zones.size(); ++z) {
            report << "zone_precision_" << map.zones[z].id << '='
                   << zone_cm.precision(static_cast<int>(z)) << '\n';
            report << "zone_recall_" << map.zones[z].id << '='
                   << zone_cm.recall(static_cast<int>(z)) << '\n';
        }
    }
    if (!out_path.empty()) write_text(out_path, report.str());
    return 0;
}

int cmd_plot_data(const std::string& log_path, const std::string& out_path) {
    const auto log = load_log(log_path);
    std::ostringstream out;
    out << "t_ms,accel_x,accel_y,accel_z,gyro_x,gyro_y,gyro_z\n";
    char buf[256];
    for (const auto& r : log.records) {
        std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      static_cast<long long>(r.t.millis), r.accel.x, r.accel.y,
                      r.accel.z, r.gyro.x, r.gyro.y, r.gyro.z);
        out << buf;
    }
    write_text(out_path, out.str());
    std::cout << "rows: " << log.records.size() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wearable fall detection and beacon-fused indoor zone "
                 "localization pipeline"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string scenario_path, imu_path, beacon_path, log_path, out_path;
    std::string truth_path, events_path, fall_model_path, zone_model_path;
    std::string listen = "127.0.0.1:7070", session_id = "session";
    std::int64_t tolerance_ms = kDefaultToleranceMs;
    int k = 5, rounds = 10, trees = 100, depth = 12, min_connections = 1;

    auto add_common = [&](CLI::App* cmd, bool needs_map) {
        auto* opt = cmd->add_option("--zone-map", common.zone_map_path,
                                    "Zone map file (tab-separated)");
        if (needs_map) opt->required()->check(CLI::ExistingFile);
        cmd->add_option("--window-s", common.window_s, "Window length, seconds");
        cmd->add_option("--stride-s", common.stride_s, "Window stride, seconds");
        cmd->add_option("--seed", common.seed, "Deterministic seed")
            ->each([&](const std::string&) { common.seed_set = true; });
    };

    auto* simulate = app.add_subcommand("simulate", "Generate a session");
    add_common(simulate, true);
    simulate->add_option("--scenario", scenario_path)->required()
        ->check(CLI::ExistingFile);
    simulate->add_option("--out", out_path, "Output prefix")->required();

    auto* ingest = app.add_subcommand("ingest", "Merge frame files into a log");
    add_common(ingest, true);
    ingest->add_option("--imu", imu_path)->required()->check(CLI::ExistingFile);
    ingest->add_option("--beacon", beacon_path)->check(CLI::ExistingFile);
    ingest->add_option("--out", out_path)->required();
    ingest->add_option("--tolerance-ms", tolerance_ms);
    ingest->add_option("--session", session_id);

    auto* serve = app.add_subcommand("serve", "Live gateway over TCP");
    add_common(serve, true);
    serve->add_option("--listen", listen, "host:port");
    serve->add_option("--out", out_path)->required();
    serve->add_option("--tolerance-ms", tolerance_ms);
    serve->add_option("--min-connections", min_connections);
    serve->add_option("--session", session_id);

    auto* export_cmd = app.add_subcommand("export", "Log to CSV table");
    add_common(export_cmd, true);
    export_cmd->add_option("--log", log_path)->required()->check(CLI::ExistingFile);
    export_cmd->add_option("--out", out_path)->required();

    auto* train_fall = app.add_subcommand("train-fall", "Train the fall model");
    add_common(train_fall, false);
    train_fall->add_option("--imu", imu_path)->required()->check(CLI::ExistingFile);
    train_fall->add_option("--truth", truth_path)->required()
        ->check(CLI::ExistingFile);
    train_fall->add_option("--out", out_path)->required();
    train_fall->add_option("--k", k, "kNN neighbors");
    train_fall->add_option("--rounds", rounds, "Boosting rounds");

    auto* train_zone = app.add_subcommand("train-zone", "Train the zone model");
    add_common(train_zone, true);
    train_zone->add_option("--imu", imu_path)->required()->check(CLI::ExistingFile);
    train_zone->add_option("--beacon", beacon_path)->required()
        ->check(CLI::ExistingFile);
    train_zone->add_option("--out", out_path)->required();
    train_zone->add_option("--trees", trees, "Forest size");
    train_zone->add_option("--depth", depth, "Max tree depth");

    auto* detect_cmd = app.add_subcommand("detect", "Run detection over a log");
    add_common(detect_cmd, false);
    detect_cmd->add_option("--log", log_path)->required()->check(CLI::ExistingFile);
    detect_cmd->add_option("--fall-model", fall_model_path)
        ->check(CLI::ExistingFile);
    detect_cmd->add_option("--zone-model", zone_model_path)
        ->check(CLI::ExistingFile);
    detect_cmd->add_option("--out", out_path)->required();

    auto* eval = app.add_subcommand("eval", "Score events against ground truth");
    add_common(eval, true);
    eval->add_option("--events", events_path)->required()->check(CLI::ExistingFile);
    eval->add_option("--truth", truth_path)->required()->check(CLI::ExistingFile);
    eval->add_option("--out", out_path, "Machine-readable report path");

    auto* plot = app.add_subcommand("plot-data", "Per-axis time series CSV");
    plot->add_option("--log", log_path)->required()->check(CLI::ExistingFile);
    plot->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;  // usage errors normalize to 1
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(scenario_path, common, out_path);
        }
        if (ingest->parsed()) {
            return cmd_ingest(common, imu_path, beacon_path, out_path,
                              tolerance_ms, session_id);
        }
        if (serve->parsed()) {
            return cmd_serve(common, listen, out_path, tolerance_ms,
                             min_connections, session_id);
        }
        if (export_cmd->parsed()) return cmd_export(common, log_path, out_path);
        if (train_fall->parsed()) {
            return cmd_train_fall(common, imu_path, truth_path, out_path, k,
                                  rounds);
        }
        if (train_zone->parsed()) {
            return cmd_train_zone(common, imu_path, beacon_path, out_path, trees,
                                  depth);
        }
        if (detect_cmd->parsed()) {
            if (fall_model_path.empty() && zone_model_path.empty()) {
                std::cerr << "detect: need --fall-model and/or --zone-model\n";
                return 1;
            }
            return cmd_detect(common, log_path, fall_model_path, zone_model_path,
                              out_path);
        }
        if (eval->parsed()) {
            return cmd_eval(common, events_path, truth_path, out_path);
        }
        if (plot->parsed()) return cmd_plot_data(log_path, out_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
