#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "aal/core.hpp"

namespace aal {

struct ImuPayload {
    Vec3 accel;
    Vec3 gyro;
};

struct BeaconPayload {
    std::string zone;
    bool present = false;
};

struct StreamFrame {
    std::string src;
    std::int64_t t_ms = 0;
    std::variant<ImuPayload, BeaconPayload> payload;

    bool is_imu() const { return std::holds_alternative<ImuPayload>(payload); }
};

inline constexpr std::size_t kMaxFrameLine = 4096;
inline constexpr std::int64_t kDefaultToleranceMs = 2000;

// One newline-framed wire record (JSON object). Unknown fields ignored.
// Throws Error with a FrameParse/UnknownKind message on malformed input.
StreamFrame parse_frame(const std::string& line);
std::string frame_to_line(const StreamFrame& frame);  // no trailing newline

struct SessionCounters {
    std::size_t frames_received = 0;
    std::size_t frames_dropped = 0;   // beyond the reorder tolerance
    std::size_t frames_reordered = 0; // late but within tolerance
    std::size_t parse_errors = 0;
    std::size_t beacon_conflicts = 0;

    bool operator==(const SessionCounters&) const = default;
};

struct SessionLog {
    std::string session_id;
    std::vector<UnifiedRecord> records;  // time-sorted
    SessionCounters counters;
};

// Merges one IMU stream and one beacon stream into UnifiedRecords: one
// record per accepted IMU frame, beacon state forward-filled (Unknown before
// the first report). Frames arriving more than tolerance_ms behind the
// newest frame of their stream are dropped and counted; a session never
// aborts on bad input.
SessionLog merge_streams(std::span<const StreamFrame> imu,
                         std::span<const StreamFrame> beacons,
                         const ActivityZoneMap& map,
                         std::int64_t tolerance_ms = kDefaultToleranceMs);

// Records with t0 <= t.millis < t1, in time order.
std::vector<UnifiedRecord> query_range(const SessionLog& log, std::int64_t t0_ms,
                                       std::int64_t t1_ms);

// Tabular view: header plus one CSV row per record, zone presence as
// 0/1 columns in map order. Returns data rows written.
std::size_t export_table(const SessionLog& log, const ActivityZoneMap& map,
                         const std::string& path);
std::string export_table_text(const SessionLog& log, const ActivityZoneMap& map);
SessionLog import_table(const std::string& path, const ActivityZoneMap& map);
SessionLog import_table_text(const std::string& text, const ActivityZoneMap& map);

// Append-only binary session log (magic + version header).
void save_log(const SessionLog& log, const std::string& path);
SessionLog load_log(const std::string& path);

struct ServeConfig {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 = ephemeral
    std::int64_t tolerance_ms = kDefaultToleranceMs;
    std::string session_id = "session";
    // Session closes once at least min_connections clients have connected
    // and all connections have drained.
    int min_connections = 1;
    int idle_poll_ms = 50;
};

// Accepts concurrent newline-framed connections, preserves per-connection
// order, and merges the union of frames identically to merge_streams.
class GatewayServer {
public:
    GatewayServer(ServeConfig config, ActivityZoneMap map);
    ~GatewayServer();

    // Binds and listens; throws Error("BindFailure: ...") on failure.
    void bind();
    int port() const { return bound_port_; }

    // Runs the accept/read loop until the session closes; returns the
    // merged log.
    SessionLog run();

private:
    ServeConfig config_;
    ActivityZoneMap map_;
    int listen_fd_ = -1;
    int bound_port_ = 0;
};

}  // namespace aal
