#include <doctest.h>

#include <cmath>

#include "aal/features.hpp"
#include "aal/sim.hpp"
#include "aal/zones.hpp"

using namespace aal;

namespace {

ActivityZoneMap four_zones() {
    return ActivityZoneMap{{
        {"bedroom", "Bedroom", {0, 0, 4, 4}},
        {"kitchen", "Kitchen", {4, 0, 8, 4}},
        {"office", "Office", {0, 4, 4, 8}},
        {"toilet", "Toilet", {4, 4, 8, 8}},
    }};
}

std::vector<ImuSample> segment(BehaviorLabel b, double dur, double noise_g,
                               std::uint64_t seed = 1, double rate = 50.0) {
    Rng rng(seed);
    return generate_segment(b, dur, rate, noise_g, noise_g > 0 ? 2.0 : 0.0, rng);
}

}  // namespace

TEST_CASE("standing: sample count and mean near upright") {
    const auto samples = segment(BehaviorLabel::Standing, 1.0, 0.03, 3);
    REQUIRE(samples.size() == 50);
    Vec3 mean{};
    for (const auto& s : samples) {
        mean.x += s.accel.x;
        mean.y += s.accel.y;
        mean.z += s.accel.z;
    }
    const double bound = 3.0 * 0.03 / std::sqrt(50.0);
    CHECK(std::abs(mean.x / 50.0) < bound * 2);
    CHECK(std::abs(mean.y / 50.0 - 1.0) < bound * 2);
    CHECK(std::abs(mean.z / 50.0) < bound * 2);
}

TEST_CASE("noise-free standing gives exactly zero theta_y") {
    for (const auto& s : segment(BehaviorLabel::Standing, 1.0, 0.0)) {
        const auto a = orientation_angles(s);
        REQUIRE(a);
        CHECK(a->theta_y == 0.0);
    }
}

TEST_CASE("noise-free lying tail gives exactly zero theta_z") {
    const auto samples = segment(BehaviorLabel::LyingDown, 8.0, 0.0);
    // Posture settles after the transition phase.
    for (std::size_t i = samples.size() / 2 + 10; i < samples.size(); ++i) {
        const auto a = orientation_angles(samples[i]);
        REQUIRE(a);
        CHECK(a->theta_z == 0.0);
    }
}

TEST_CASE("forward fall contains an impact and a rapid-change window") {
    const auto samples = segment(BehaviorLabel::FallForward, 1.0, 0.03, 11);
    double peak = 0.0;
    for (const auto& s : samples) peak = std::max(peak, magnitude(s));
    CHECK(peak >= 2.2);

    const auto windows = make_windows(samples, 2.0, 1.0);
    REQUIRE(!windows.empty());
    const auto f = window_features(windows.front());
    REQUIRE(f);
    CHECK((*f)[kRapidChange] >= 25.0);
}

TEST_CASE("sideways fall tips toward lateral axis") {
    const auto samples = segment(BehaviorLabel::FallSideways, 1.0, 0.0);
    const auto& last = samples.back();
    CHECK(last.accel.x == doctest::Approx(1.0));
    CHECK(last.accel.y == doctest::Approx(0.0));
}

TEST_CASE("getting up never spikes") {
    const auto samples = segment(BehaviorLabel::GettingUp, 3.0, 0.03, 17);
    for (const auto& s : samples) CHECK(magnitude(s) < 1.8);
}

TEST_CASE("walking bobs at 2 Hz without tripping the gates") {
    const auto samples = segment(BehaviorLabel::Walking, 10.0, 0.05, 23);
    double peak = 0.0;
    for (const auto& s : samples) peak = std::max(peak, magnitude(s));
    CHECK(peak < 1.8);
    for (const auto& w : make_windows(samples, 2.0, 1.0)) {
        const auto f = window_features(w);
        REQUIRE(f);
        CHECK((*f)[kRapidChange] < 25.0);
    }
}

TEST_CASE("scenario parsing with directives") {
    const auto scn = parse_scenario(
        "# demo\n"
        "@rate 100\n"
        "@noise_g 0.01\n"
        "@noise_dps 1.5\n"
        "@seed 99\n"
        "Standing\t5\tbedroom\n"
        "FallForward\t1\tkitchen\n");
    CHECK(scn.sample_rate_hz == 100.0);
    CHECK(scn.seed == 99);
    REQUIRE(scn.steps.size() == 2);
    CHECK(scn.steps[1].behavior == BehaviorLabel::FallForward);
    CHECK(scn.steps[1].zone_id == "kitchen");

    CHECK_THROWS_AS(parse_scenario("Flying\t3\tbedroom\n"), Error);
    CHECK_THROWS_AS(parse_scenario("@warp 9\n"), Error);
    CHECK_THROWS_AS(parse_scenario(""), Error);
}

TEST_CASE("scenario validation") {
    const auto map = four_zones();
    Scenario scn{{{BehaviorLabel::Standing, 5.0, "garage"}}, 50.0, 0.03, 2.0, 1};
    CHECK_THROWS_AS(validate_scenario(scn, map), Error);
    scn.steps[0].zone_id = "bedroom";
    scn.sample_rate_hz = 500.0;
    CHECK_THROWS_AS(validate_scenario(scn, map), Error);
    scn.sample_rate_hz = 50.0;
    CHECK_NOTHROW(validate_scenario(scn, map));
}

TEST_CASE("simulate_session: ground truth and beacon sequence") {
    const auto map = four_zones();
    const Scenario scn{{{BehaviorLabel::Standing, 5.0, "bedroom"},
                        {BehaviorLabel::Walking, 5.0, "kitchen"},
                        {BehaviorLabel::FallForward, 1.0, "kitchen"}},
                       50.0, 0.03, 2.0, 7};
    const auto out = simulate_session(scn, map);

    REQUIRE(out.truth.fall_intervals.size() == 1);
    CHECK(out.truth.fall_intervals[0].zone_id == "kitchen");
    CHECK(out.truth.fall_intervals[0].t_start_ms == 10000);
    CHECK(out.imu_frames.size() == out.truth.labels.size());

    // Fused beacon timeline reproduces the scripted zone sequence.
    std::vector<BeaconEvent> events;
    for (const auto& f : out.beacon_frames) {
        const auto& p = std::get<BeaconPayload>(f.payload);
        BeaconEvent e;
        e.t = make_timestamp(f.t_ms);
        e.zone_id = p.zone;
        e.present = p.present;
        events.push_back(std::move(e));
    }
    const auto timeline = fuse_beacons(events, map);
    REQUIRE(timeline.entries.size() == 2);
    CHECK(timeline.entries[0].zone_id == "bedroom");
    CHECK(timeline.entries[1].zone_id == "kitchen");
    CHECK(timeline.entries[1].t.millis == 5000);
}

TEST_CASE("simulate_session determinism") {
    const auto map = four_zones();
    const Scenario scn{{{BehaviorLabel::Walking, 3.0, "office"},
                        {BehaviorLabel::FallSideways, 1.0, "office"}},
                       50.0, 0.03, 2.0, 7};
    const auto a = simulate_session(scn, map);
    const auto b = simulate_session(scn, map);

    REQUIRE(a.imu_frames.size() == b.imu_frames.size());
    for (std::size_t i = 0; i < a.imu_frames.size(); ++i) {
        CHECK(frame_to_line(a.imu_frames[i]) == frame_to_line(b.imu_frames[i]));
    }
    REQUIRE(a.beacon_frames.size() == b.beacon_frames.size());
    for (std::size_t i = 0; i < a.beacon_frames.size(); ++i) {
        CHECK(frame_to_line(a.beacon_frames[i]) == frame_to_line(b.beacon_frames[i]));
    }
}

TEST_CASE("truth sidecar round trip") {
    const auto map = four_zones();
    const Scenario scn{{{BehaviorLabel::Standing, 2.0, "toilet"},
                        {BehaviorLabel::FallForward, 1.0, "toilet"}},
                       50.0, 0.03, 2.0, 13};
    const auto out = simulate_session(scn, map);
    const auto text = truth_to_text(out.truth, out.imu_frames);
    const auto truth = parse_truth(text);

    CHECK(truth.labels == out.truth.labels);
    CHECK(truth.zones == out.truth.zones);
    REQUIRE(truth.fall_intervals.size() == 1);
    CHECK(truth.fall_intervals[0].t_start_ms ==
          out.truth.fall_intervals[0].t_start_ms);
    CHECK(truth.label_at(0) == BehaviorLabel::Standing);
    CHECK(truth.zone_at(2500) == "toilet");
    CHECK_THROWS_AS(parse_truth("junk"), Error);
}
