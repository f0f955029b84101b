#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <sys/socket.h>
#include <netinet/in.h>
#include <arpa/inet.h>
#include <unistd.h>

#include "aal/gateway.hpp"
#include "aal/sim.hpp"

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

StreamFrame imu_frame(std::int64_t t_ms, Vec3 accel = {0, 1, 0}, Vec3 gyro = {}) {
    StreamFrame f;
    f.src = "imu0";
    f.t_ms = t_ms;
    f.payload = ImuPayload{accel, gyro};
    return f;
}

StreamFrame beacon_frame(std::int64_t t_ms, const std::string& zone, bool present) {
    StreamFrame f;
    f.src = "beacon-" + zone;
    f.t_ms = t_ms;
    f.payload = BeaconPayload{zone, present};
    return f;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("parse_frame accepts valid lines and ignores unknown fields") {
    const auto f = parse_frame(
        R"({"src":"imu0","t_ms":120,"kind":"imu","ax":0.1,"ay":0.9,"az":-0.05,)"
        R"("gx":1.5,"gy":-2.0,"gz":0.0,"extra":"ignored"})");
    CHECK(f.src == "imu0");
    CHECK(f.t_ms == 120);
    REQUIRE(f.is_imu());
    CHECK(std::get<ImuPayload>(f.payload).accel.y == doctest::Approx(0.9));

    const auto b = parse_frame(
        R"({"src":"b1","t_ms":0,"kind":"beacon","zone":"kitchen","present":true})");
    REQUIRE(!b.is_imu());
    CHECK(std::get<BeaconPayload>(b.payload).zone == "kitchen");
}

TEST_CASE("parse_frame rejects malformed input") {
    CHECK_THROWS_AS(parse_frame("{\"src\":\"x\""), Error);           // truncated
    CHECK_THROWS_AS(parse_frame("{}"), Error);                        // missing fields
    CHECK_THROWS_AS(
        parse_frame(R"({"src":"cam","t_ms":0,"kind":"video"})"), Error);
    CHECK_THROWS_AS(parse_frame(std::string(5000, 'x')), Error);      // too long
}

TEST_CASE("frame wire round trip") {
    const auto f = imu_frame(42, {0.25, 0.5, -0.125}, {1, 2, 3});
    const auto g = parse_frame(frame_to_line(f));
    CHECK(g.t_ms == 42);
    CHECK(std::get<ImuPayload>(g.payload).accel.x == doctest::Approx(0.25));
    CHECK(frame_to_line(g) == frame_to_line(f));
}

TEST_CASE("merge: forward fill beacon state") {
    const auto map = four_zones();
    std::vector<StreamFrame> imu;
    for (int i = 0; i < 50; ++i) imu.push_back(imu_frame(i * 20));
    std::vector<StreamFrame> beacons{beacon_frame(0, "bedroom", true)};

    const auto log = merge_streams(imu, beacons, map);
    REQUIRE(log.records.size() == 50);
    for (const auto& r : log.records) {
        CHECK(r.active_zone() == "bedroom");
        CHECK(r.zone_presence.at("kitchen") == false);
    }
}

TEST_CASE("merge: unknown before first beacon report") {
    const auto map = four_zones();
    std::vector<StreamFrame> imu{imu_frame(0), imu_frame(20), imu_frame(1000)};
    std::vector<StreamFrame> beacons{beacon_frame(500, "office", true)};
    const auto log = merge_streams(imu, beacons, map);
    CHECK(log.records[0].active_zone() == kUnknownZone);
    CHECK(log.records[1].active_zone() == kUnknownZone);
    CHECK(log.records[2].active_zone() == "office");
}

TEST_CASE("merge: empty inputs") {
    const auto log = merge_streams({}, {}, four_zones());
    CHECK(log.records.empty());
    CHECK(log.counters == SessionCounters{});
}

TEST_CASE("merge: stale frames dropped, late-but-tolerable kept") {
    const auto map = four_zones();
    std::vector<StreamFrame> imu;
    for (int i = 0; i < 10; ++i) imu.push_back(imu_frame(10000 + i * 20));
    imu.push_back(imu_frame(0));      // 10 s stale: dropped
    imu.push_back(imu_frame(9000));   // 1.2 s late: reordered but kept

    const auto log = merge_streams(imu, {}, map, 2000);
    CHECK(log.records.size() == 11);
    CHECK(log.counters.frames_dropped == 1);
    CHECK(log.counters.frames_reordered == 1);
    CHECK(log.records.front().t.millis == 9000);  // sorted output
}

TEST_CASE("merge: record conservation and invariants") {
    const auto map = four_zones();
    const Scenario scn{{{BehaviorLabel::Standing, 5.0, "bedroom"},
                        {BehaviorLabel::Walking, 5.0, "kitchen"},
                        {BehaviorLabel::Sitting, 5.0, "office"}},
                       50.0, 0.03, 2.0, 99};
    const auto sim = simulate_session(scn, map);
    const auto log = merge_streams(sim.imu_frames, sim.beacon_frames, map);
    CHECK(log.records.size() == sim.imu_frames.size());
    for (const auto& r : log.records) {
        int active = 0;
        for (const auto& [zone, present] : r.zone_presence) active += present;
        CHECK(active <= 1);
        CHECK(std::abs(r.elapsed_s - static_cast<double>(r.t.millis) / 1000.0) <
              1e-6);
    }
}

TEST_CASE("query_range") {
    const auto map = four_zones();
    std::vector<StreamFrame> imu;
    for (int i = 0; i < 100; ++i) imu.push_back(imu_frame(i * 10));
    const auto log = merge_streams(imu, {}, map);

    CHECK(query_range(log, 0, 1000).size() == 100);
    CHECK(query_range(log, 500, 500).empty());
    CHECK_THROWS_AS(query_range(log, 10, 5), Error);

    // Half-open slice matches a linear scan.
    const auto slice = query_range(log, 200, 400);
    std::size_t expect = 0;
    for (const auto& r : log.records) {
        if (r.t.millis >= 200 && r.t.millis < 400) ++expect;
    }
    CHECK(slice.size() == expect);
    CHECK(expect == 20);
}

TEST_CASE("export: header plus one row per record") {
    const auto map = four_zones();
    std::vector<StreamFrame> imu;
    for (int i = 0; i < 11; ++i) imu.push_back(imu_frame(i * 20));
    const auto log =
        merge_streams(imu, std::vector{beacon_frame(0, "bedroom", true)}, map);

    const auto text = export_table_text(log, map);
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    CHECK(lines == 12);
    CHECK(text.starts_with(
        "wall_clock,t_ms,elapsed_s,accel_x,accel_y,accel_z,"
        "gyro_x,gyro_y,gyro_z,bedroom,kitchen,office,toilet,label\n"));

    const auto path = temp_path("aal_export_test.csv");
    CHECK(export_table(log, map, path) == 11);
    std::filesystem::remove(path);
}

TEST_CASE("export of an empty log is header only") {
    const auto map = four_zones();
    SessionLog log;
    const auto text = export_table_text(log, map);
    CHECK(text.find('\n') == text.size() - 1);
}

TEST_CASE("export -> import -> export is byte identical") {
    const auto map = four_zones();
    const Scenario scn{{{BehaviorLabel::Walking, 4.0, "kitchen"},
                        {BehaviorLabel::FallForward, 1.0, "kitchen"}},
                       50.0, 0.03, 2.0, 5};
    const auto sim = simulate_session(scn, map);
    auto log = merge_streams(sim.imu_frames, sim.beacon_frames, map);
    log.records[3].label = BehaviorLabel::Walking;  // exercise the label column

    const auto text1 = export_table_text(log, map);
    const auto imported = import_table_text(text1, map);
    const auto text2 = export_table_text(imported, map);
    CHECK(text1 == text2);
}

TEST_CASE("import rejects mismatched headers") {
    const auto map = four_zones();
    CHECK_THROWS_AS(import_table_text("bogus,header\n", map), Error);
    CHECK_THROWS_AS(import_table_text("", map), Error);
}

TEST_CASE("binary log round trip") {
    const auto map = four_zones();
    const Scenario scn{{{BehaviorLabel::Standing, 3.0, "office"}}, 50.0, 0.02,
                       1.0, 8};
    const auto sim = simulate_session(scn, map);
    auto log = merge_streams(sim.imu_frames, sim.beacon_frames, map);
    log.session_id = "roundtrip";
    log.records[0].label = BehaviorLabel::Standing;

    const auto path = temp_path("aal_log_test.bin");
    save_log(log, path);
    const auto restored = load_log(path);
    std::filesystem::remove(path);

    CHECK(restored.session_id == "roundtrip");
    CHECK(restored.counters == log.counters);
    REQUIRE(restored.records.size() == log.records.size());
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        CHECK(restored.records[i].t.millis == log.records[i].t.millis);
        CHECK(restored.records[i].accel == log.records[i].accel);
        CHECK(restored.records[i].gyro == log.records[i].gyro);
        CHECK(restored.records[i].zone_presence == log.records[i].zone_presence);
        CHECK(restored.records[i].label == log.records[i].label);
    }
    CHECK_THROWS_AS(load_log("/nonexistent/path.bin"), Error);
}

namespace {

void stream_lines(int port, const std::vector<std::string>& lines) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    for (const auto& line : lines) {
        std::string out = line + "\n";
        std::size_t off = 0;
        while (off < out.size()) {
            const ssize_t n = ::write(fd, out.data() + off, out.size() - off);
            REQUIRE(n > 0);
            off += static_cast<std::size_t>(n);
        }
    }
    ::close(fd);
}

}  // namespace

TEST_CASE("serve: online merge equals offline merge") {
    const auto map = four_zones();
    const Scenario scn{{{BehaviorLabel::Standing, 2.0, "bedroom"},
                        {BehaviorLabel::Walking, 2.0, "kitchen"}},
                       50.0, 0.03, 2.0, 77};
    const auto sim = simulate_session(scn, map);

    // Two clients stream concurrently; the session must not close until both
    // have connected and drained.
    GatewayServer server(ServeConfig{"127.0.0.1", 0, 2000, "online", 2}, map);
    server.bind();
    const int port = server.port();

    std::vector<std::string> imu_lines, beacon_lines;
    for (const auto& f : sim.imu_frames) imu_lines.push_back(frame_to_line(f));
    for (const auto& f : sim.beacon_frames) beacon_lines.push_back(frame_to_line(f));

    std::thread imu_client([&] { stream_lines(port, imu_lines); });
    std::thread beacon_client([&] { stream_lines(port, beacon_lines); });
    const auto online = server.run();
    imu_client.join();
    beacon_client.join();

    const auto offline = merge_streams(sim.imu_frames, sim.beacon_frames, map);
    REQUIRE(online.records.size() == offline.records.size());
    for (std::size_t i = 0; i < online.records.size(); ++i) {
        CHECK(online.records[i].t.millis == offline.records[i].t.millis);
        CHECK(online.records[i].accel == offline.records[i].accel);
        CHECK(online.records[i].zone_presence == offline.records[i].zone_presence);
    }
}

TEST_CASE("serve: garbage connection yields zero records and parse errors") {
    const auto map = four_zones();
    GatewayServer server(ServeConfig{"127.0.0.1", 0, 2000, "garbage"}, map);
    server.bind();
    std::thread client([&] {
        stream_lines(server.port(), {"not json", "also { not : json"});
    });
    const auto log = server.run();
    client.join();
    CHECK(log.records.empty());
    CHECK(log.counters.parse_errors >= 2);
}
