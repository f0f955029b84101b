#include <doctest.h>

#include <limits>

#include "aal/core.hpp"

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

}  // namespace

TEST_CASE("four disjoint zones validate") {
    CHECK(!validate_zone_map(four_zones()));
}

TEST_CASE("identical rectangles overlap") {
    ActivityZoneMap map{{
        {"a", "A", {0, 0, 2, 2}},
        {"b", "B", {0, 0, 2, 2}},
    }};
    const auto issue = validate_zone_map(map);
    REQUIRE(issue);
    CHECK(issue->kind == ZoneMapIssue::Kind::OverlappingZones);
    CHECK(issue->zone_a == "a");
    CHECK(issue->zone_b == "b");
}

TEST_CASE("empty map rejected") {
    const auto issue = validate_zone_map(ActivityZoneMap{});
    REQUIRE(issue);
    CHECK(issue->kind == ZoneMapIssue::Kind::EmptyMap);
}

TEST_CASE("duplicate zone id detected before overlap") {
    ActivityZoneMap map{{
        {"a", "A", {0, 0, 2, 2}},
        {"a", "A again", {10, 10, 12, 12}},
    }};
    const auto issue = validate_zone_map(map);
    REQUIRE(issue);
    CHECK(issue->kind == ZoneMapIssue::Kind::DuplicateZoneId);
}

TEST_CASE("touching rectangles do not overlap") {
    ActivityZoneMap map{{
        {"a", "A", {0, 0, 2, 2}},
        {"b", "B", {2, 0, 4, 2}},
    }};
    CHECK(!validate_zone_map(map));
}

TEST_CASE("zone map file round trip") {
    const std::string text =
        "# floor plan\n"
        "bedroom\tBedroom\t0\t0\t4\t4\n"
        "kitchen\tKitchen\t4\t0\t8\t4\n";
    const auto map = parse_zone_map(text);
    REQUIRE(map.zones.size() == 2);
    CHECK(map.zones[0].id == "bedroom");
    CHECK(map.zones[1].rect.x0 == 4.0);
    CHECK(map.index_of("kitchen") == 1);
    CHECK(!map.index_of("garage"));
}

TEST_CASE("zone map file errors") {
    CHECK_THROWS_AS(parse_zone_map("bedroom\tB\t0\t0\n"), Error);
    CHECK_THROWS_AS(parse_zone_map("bedroom\tB\t4\t0\t0\t4\n"), Error);
    CHECK_THROWS_AS(parse_zone_map(""), Error);
}

TEST_CASE("timestamp formatting") {
    const auto t = make_timestamp(0);
    CHECK(t.wall_clock == "2026-01-01T00:00:00.000Z");
    CHECK(make_timestamp(61234).wall_clock == "2026-01-01T00:01:01.234Z");
    CHECK_THROWS_AS(make_timestamp(-1), Error);
}

TEST_CASE("elapsed seconds reconstruction") {
    for (std::int64_t ms : {0L, 1L, 999L, 1000L, 86399999L}) {
        UnifiedRecord r;
        r.t = make_timestamp(ms);
        r.elapsed_s = static_cast<double>(ms) / 1000.0;
        CHECK(std::abs(r.elapsed_s - static_cast<double>(r.t.millis) / 1000.0) <
              1e-6);
    }
}

TEST_CASE("imu sample validity") {
    ImuSample s;
    s.accel = {0, 1, 0};
    CHECK(imu_sample_valid(s));
    s.accel = {20, 0, 0};
    CHECK(!imu_sample_valid(s));
    s.accel = {0, std::numeric_limits<double>::quiet_NaN(), 0};
    CHECK(!imu_sample_valid(s));
}

TEST_CASE("behavior labels") {
    CHECK(is_fall(BehaviorLabel::FallForward));
    CHECK(is_fall(BehaviorLabel::FallSideways));
    CHECK(!is_fall(BehaviorLabel::LyingDown));
    CHECK(parse_behavior("Walking") == BehaviorLabel::Walking);
    CHECK(!parse_behavior("Flying"));
    for (int i = 0; i < kBehaviorCount; ++i) {
        const auto b = static_cast<BehaviorLabel>(i);
        CHECK(parse_behavior(to_string(b)) == b);
    }
}

TEST_CASE("unified record zone accessors") {
    UnifiedRecord r;
    r.zone_presence = {{"bedroom", false}, {"kitchen", true}};
    CHECK(r.zone_known());
    CHECK(r.active_zone() == "kitchen");
    r.zone_presence["kitchen"] = false;
    CHECK(!r.zone_known());
    CHECK(r.active_zone() == kUnknownZone);
}
