#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aal {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    bool operator==(const Vec3&) const = default;
};

// Session-relative time plus the wall-clock text it maps to. The wall clock
// is derived from a fixed session epoch so identical inputs always format
// identically.
struct Timestamp {
    std::int64_t millis = 0;       // since session start, >= 0
    std::string wall_clock;        // ISO-8601 UTC

    bool operator==(const Timestamp&) const = default;
};

// Session epoch used to render wall-clock text from session-relative millis.
inline constexpr std::int64_t kSessionEpochUnixMs = 1767225600000LL;  // 2026-01-01T00:00:00Z

std::string format_wall_clock(std::int64_t session_millis);
Timestamp make_timestamp(std::int64_t session_millis);

struct ImuSample {
    Timestamp t;
    Vec3 accel;  // g
    Vec3 gyro;   // deg/s
    std::string source_id;
};

// Sensor full-scale guard; anything past this is a malformed sample.
inline constexpr double kAccelFullScaleG = 16.0;

bool imu_sample_valid(const ImuSample& s);

struct BeaconEvent {
    Timestamp t;
    std::string zone_id;
    bool present = false;
    std::string source_id;
};

enum class BehaviorLabel {
    Standing,
    Walking,
    Stopping,
    Sitting,
    LyingDown,
    GettingUp,
    FallForward,
    FallSideways,
};

inline constexpr int kBehaviorCount = 8;

bool is_fall(BehaviorLabel b);
std::string to_string(BehaviorLabel b);
std::optional<BehaviorLabel> parse_behavior(const std::string& name);

struct ZoneRect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;  // meters, x0<x1, y0<y1
};

struct Zone {
    std::string id;
    std::string label;
    ZoneRect rect;
};

struct ActivityZoneMap {
    std::vector<Zone> zones;  // order defines tie-break precedence

    std::optional<std::size_t> index_of(const std::string& zone_id) const;
};

struct ZoneMapIssue {
    enum class Kind { EmptyMap, DuplicateZoneId, OverlappingZones };
    Kind kind;
    std::string zone_a;
    std::string zone_b;  // set only for OverlappingZones

    std::string describe() const;
};

// Returns the first violated invariant, or nullopt if the map is valid.
std::optional<ZoneMapIssue> validate_zone_map(const ActivityZoneMap& map);

// Parses the tab-separated zone map file format. Throws Error on malformed
// lines or if the parsed map fails validation.
ActivityZoneMap load_zone_map(const std::string& path);
ActivityZoneMap parse_zone_map(const std::string& text);

// Sentinel used wherever a zone is unresolved (beacon dropout etc.).
inline const std::string kUnknownZone = "UNKNOWN";

struct UnifiedRecord {
    std::string wall_clock;
    Timestamp t;
    double elapsed_s = 0.0;
    Vec3 accel;
    Vec3 gyro;
    // Keyed by zone id; at most one value true. All-false means Unknown.
    std::map<std::string, bool> zone_presence;
    std::optional<BehaviorLabel> label;

    bool zone_known() const;
    // Active zone id, or kUnknownZone.
    std::string active_zone() const;
};

}  // namespace aal
