#include "aal/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace aal {

void validate_scenario(const Scenario& scn, const ActivityZoneMap& map) {
    if (scn.steps.empty()) throw Error("scenario: no steps");
    if (scn.sample_rate_hz < 10.0 || scn.sample_rate_hz > 200.0) {
        throw Error("scenario: sample rate must be in [10, 200] Hz");
    }
    for (const auto& step : scn.steps) {
        if (step.duration_s <= 0.0) throw Error("scenario: duration must be > 0");
        if (!map.index_of(step.zone_id)) {
            throw Error("UnknownZoneId: " + step.zone_id);
        }
    }
}

Scenario parse_scenario(const std::string& text) {
    Scenario scn;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '@') {
            std::istringstream fields(line);
            std::string key;
            fields >> key;
            if (key == "@rate") {
                fields >> scn.sample_rate_hz;
            } else if (key == "@noise_g") {
                fields >> scn.noise_sigma_g;
            } else if (key == "@noise_dps") {
                fields >> scn.noise_sigma_dps;
            } else if (key == "@seed") {
                fields >> scn.seed;
            } else {
                throw Error("scenario line " + std::to_string(lineno) +
                            ": unknown directive " + key);
            }
            if (!fields) {
                throw Error("scenario line " + std::to_string(lineno) +
                            ": bad directive value");
            }
            continue;
        }
        std::istringstream fields(line);
        std::string behavior, duration, zone;
        if (!std::getline(fields, behavior, '\t') ||
            !std::getline(fields, duration, '\t') ||
            !std::getline(fields, zone, '\t')) {
            throw Error("scenario line " + std::to_string(lineno) +
                        ": expected behavior<TAB>duration_s<TAB>zone_id");
        }
        const auto label = parse_behavior(behavior);
        if (!label) {
            throw Error("scenario line " + std::to_string(lineno) +
                        ": unknown behavior " + behavior);
        }
        double dur = 0.0;
        try {
            dur = std::stod(duration);
        } catch (const std::exception&) {
            throw Error("scenario line " + std::to_string(lineno) + ": bad duration");
        }
        scn.steps.push_back({*label, dur, zone});
    }
    if (scn.steps.empty()) throw Error("scenario: no steps");
    return scn;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open scenario: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_scenario(buf.str());
}

namespace {

const Vec3 kUpright{0.0, 1.0, 0.0};
const Vec3 kLying{0.0, 0.0, 1.0};
const Vec3 kSideways{1.0, 0.0, 0.0};

Vec3 add_noise(const Vec3& v, double sigma, Rng& rng) {
    if (sigma <= 0.0) return v;
    return Vec3{v.x + rng.normal(sigma), v.y + rng.normal(sigma),
                v.z + rng.normal(sigma)};
}

// Constant-rate rotation between unit vectors.
Vec3 slerp(const Vec3& a, const Vec3& b, double t) {
    const double dot = std::clamp(a.x * b.x + a.y * b.y + a.z * b.z, -1.0, 1.0);
    const double omega = std::acos(dot);
    if (omega < 1e-9) return a;
    const double s = std::sin(omega);
    const double wa = std::sin((1.0 - t) * omega) / s;
    const double wb = std::sin(t * omega) / s;
    return Vec3{wa * a.x + wb * b.x, wa * a.y + wb * b.y, wa * a.z + wb * b.z};
}

struct FallProfile {
    Vec3 target;
    Vec3 impact_dir;      // unit direction of the impact spike
    int gyro_axis;        // dominant rotation axis
};

FallProfile fall_profile(BehaviorLabel b) {
    if (b == BehaviorLabel::FallForward) {
        // Chest rotates about the lateral (X) axis; impact jolt mixes the
        // anterior direction with a downward component.
        return {kLying, Vec3{0.0, -0.6, 0.8}, 0};
    }
    return {kSideways, Vec3{0.8, -0.6, 0.0}, 2};
}

}  // namespace

std::vector<ImuSample> generate_segment(BehaviorLabel behavior, double duration_s,
                                        double rate_hz, double noise_sigma_g,
                                        double noise_sigma_dps, Rng& rng,
                                        std::int64_t t0_ms) {
    const std::size_t n =
        static_cast<std::size_t>(std::llround(duration_s * rate_hz));
    std::vector<ImuSample> out;
    out.reserve(n);

    const double fall_interp_s = std::min(0.5, duration_s);
    const double getup_interp_s = std::min(2.0, duration_s);
    const double liedown_interp_s = std::min(3.0, duration_s * 0.5);
    const auto profile = is_fall(behavior) ? fall_profile(behavior) : FallProfile{};

    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate_hz;
        Vec3 accel = kUpright;
        Vec3 gyro{};
        double gyro_noise = noise_sigma_dps;

        switch (behavior) {
            case BehaviorLabel::Standing:
            case BehaviorLabel::Stopping:
                break;
            case BehaviorLabel::Sitting:
                gyro_noise *= 0.3;
                break;
            case BehaviorLabel::Walking:
                accel.y += 0.25 * std::sin(2.0 * M_PI * 2.0 * t);
                gyro.x = 40.0 * std::sin(2.0 * M_PI * 2.0 * t);
                break;
            case BehaviorLabel::LyingDown: {
                const double u = std::min(1.0, t / liedown_interp_s);
                accel = slerp(kUpright, kLying, u);
                if (u < 1.0) gyro.x = -90.0 / liedown_interp_s;
                break;
            }
            case BehaviorLabel::GettingUp: {
                const double u = std::min(1.0, t / getup_interp_s);
                accel = slerp(kLying, kUpright, u);
                if (u < 1.0) gyro.x = 90.0 / getup_interp_s;
                break;
            }
            case BehaviorLabel::FallForward:
            case BehaviorLabel::FallSideways: {
                const std::size_t interp_n = std::max<std::size_t>(
                    2, static_cast<std::size_t>(std::llround(fall_interp_s * rate_hz)));
                if (i < interp_n) {
                    const double u =
                        static_cast<double>(i) / static_cast<double>(interp_n - 1);
                    accel = slerp(kUpright, profile.target, u);
                    // Impact spike over the final two interpolation samples.
                    if (i + 2 >= interp_n) {
                        accel = Vec3{profile.impact_dir.x * 2.5,
                                     profile.impact_dir.y * 2.5,
                                     profile.impact_dir.z * 2.5};
                    }
                    gyro[profile.gyro_axis] = 90.0 / fall_interp_s;  // >= 150 dps
                } else {
                    accel = profile.target;
                }
                break;
            }
        }

        ImuSample s;
        s.t = make_timestamp(t0_ms + static_cast<std::int64_t>(
                                         std::llround(t * 1000.0)));
        s.accel = add_noise(accel, noise_sigma_g, rng);
        s.gyro = add_noise(gyro, gyro_noise, rng);
        s.source_id = "imu0";
        out.push_back(std::move(s));
    }
    return out;
}

SimOutput simulate_session(const Scenario& scn, const ActivityZoneMap& map) {
    validate_scenario(scn, map);

    SimOutput out;
    Rng rng(scn.seed);
    std::int64_t t_ms = 0;
    std::string current_zone;
    std::int64_t next_heartbeat_ms = 0;

    auto emit_beacon = [&](const std::string& zone, bool present,
                           std::int64_t at_ms) {
        StreamFrame f;
        f.src = "beacon-" + zone;
        f.t_ms = at_ms;
        f.payload = BeaconPayload{zone, present};
        out.beacon_frames.push_back(std::move(f));
    };

    for (std::size_t step_i = 0; step_i < scn.steps.size(); ++step_i) {
        const auto& step = scn.steps[step_i];
        if (step.zone_id != current_zone) {
            if (!current_zone.empty()) emit_beacon(current_zone, false, t_ms);
            emit_beacon(step.zone_id, true, t_ms);
            current_zone = step.zone_id;
            next_heartbeat_ms = t_ms + 1000;
        }

        Rng seg_rng = rng.derive(step_i);
        auto samples = generate_segment(step.behavior, step.duration_s,
                                        scn.sample_rate_hz, scn.noise_sigma_g,
                                        scn.noise_sigma_dps, seg_rng, t_ms);
        const std::int64_t seg_end_ms =
            t_ms + static_cast<std::int64_t>(std::llround(step.duration_s * 1000.0));
        if (is_fall(step.behavior)) {
            out.truth.fall_intervals.push_back({t_ms, seg_end_ms, step.zone_id});
        }
        for (auto& s : samples) {
            while (next_heartbeat_ms <= s.t.millis) {
                emit_beacon(current_zone, true, next_heartbeat_ms);
                next_heartbeat_ms += 1000;
            }
            StreamFrame f;
            f.src = s.source_id;
            f.t_ms = s.t.millis;
            f.payload = ImuPayload{s.accel, s.gyro};
            out.imu_frames.push_back(std::move(f));
            out.truth.sample_times_ms.push_back(s.t.millis);
            out.truth.labels.push_back(step.behavior);
            out.truth.zones.push_back(step.zone_id);
        }
        t_ms = seg_end_ms;
    }
    return out;
}

namespace {

std::size_t index_at(const std::vector<std::int64_t>& times, std::int64_t t_ms) {
    // Last sample at or before t_ms; clamps at the ends.
    const auto it = std::upper_bound(times.begin(), times.end(), t_ms);
    if (it == times.begin()) return 0;
    return static_cast<std::size_t>(it - times.begin()) - 1;
}

}  // namespace

BehaviorLabel GroundTruth::label_at(std::int64_t t_ms) const {
    if (labels.empty()) throw Error("truth: empty");
    return labels[index_at(sample_times_ms, t_ms)];
}

std::string GroundTruth::zone_at(std::int64_t t_ms) const {
    if (zones.empty()) throw Error("truth: empty");
    return zones[index_at(sample_times_ms, t_ms)];
}

BehaviorLabel window_truth_label(const GroundTruth& truth,
                                 std::int64_t w_start_ms, std::int64_t w_end_ms) {
    for (const auto& f : truth.fall_intervals) {
        const std::int64_t impact = f.t_end_ms - 1;
        if (w_start_ms <= impact && impact < w_end_ms) {
            return truth.label_at(f.t_start_ms);
        }
    }
    return truth.label_at((w_start_ms + w_end_ms) / 2);
}

std::string truth_to_text(const GroundTruth& truth,
                          const std::vector<StreamFrame>& imu_frames) {
    if (truth.labels.size() != imu_frames.size()) {
        throw Error("truth: label count does not match frame count");
    }
    std::ostringstream out;
    out << "AAL-TRUTH v1\n";
    out << "samples " << truth.labels.size() << '\n';
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
        out << imu_frames[i].t_ms << ' ' << to_string(truth.labels[i]) << ' '
            << truth.zones[i] << '\n';
    }
    out << "falls " << truth.fall_intervals.size() << '\n';
    for (const auto& f : truth.fall_intervals) {
        out << f.t_start_ms << ' ' << f.t_end_ms << ' ' << f.zone_id << '\n';
    }
    return out.str();
}

GroundTruth parse_truth(const std::string& text) {
    std::istringstream in(text);
    std::string header, version, tag;
    in >> header >> version;
    if (header != "AAL-TRUTH" || version != "v1") {
        throw Error("truth: unsupported format/version");
    }
    GroundTruth truth;
    std::size_t n = 0;
    in >> tag >> n;
    if (tag != "samples") throw Error("truth: expected samples block");
    truth.sample_times_ms.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::int64_t t_ms;
        std::string behavior, zone;
        in >> t_ms >> behavior >> zone;
        const auto label = parse_behavior(behavior);
        if (!in || !label) throw Error("truth: bad sample line");
        truth.sample_times_ms.push_back(t_ms);
        truth.labels.push_back(*label);
        truth.zones.push_back(zone);
    }
    std::size_t k = 0;
    in >> tag >> k;
    if (tag != "falls") throw Error("truth: expected falls block");
    for (std::size_t i = 0; i < k; ++i) {
        FallInterval f;
        in >> f.t_start_ms >> f.t_end_ms >> f.zone_id;
        if (!in) throw Error("truth: bad fall line");
        truth.fall_intervals.push_back(std::move(f));
    }
    return truth;
}

}  // namespace aal
