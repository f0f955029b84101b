#include "aal/core.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace aal {

std::string format_wall_clock(std::int64_t session_millis) {
    const std::int64_t unix_ms = kSessionEpochUnixMs + session_millis;
    const std::time_t secs = static_cast<std::time_t>(unix_ms / 1000);
    const int ms = static_cast<int>(unix_ms % 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
    return buf;
}

Timestamp make_timestamp(std::int64_t session_millis) {
    if (session_millis < 0) throw Error("timestamp millis must be >= 0");
    return Timestamp{session_millis, format_wall_clock(session_millis)};
}

bool imu_sample_valid(const ImuSample& s) {
    const double comps[6] = {s.accel.x, s.accel.y, s.accel.z,
                             s.gyro.x, s.gyro.y, s.gyro.z};
    for (double c : comps) {
        if (!std::isfinite(c)) return false;
    }
    const double mag = std::sqrt(s.accel.x * s.accel.x + s.accel.y * s.accel.y +
                                 s.accel.z * s.accel.z);
    return mag <= kAccelFullScaleG;
}

bool is_fall(BehaviorLabel b) {
    return b == BehaviorLabel::FallForward || b == BehaviorLabel::FallSideways;
}

std::string to_string(BehaviorLabel b) {
    switch (b) {
        case BehaviorLabel::Standing: return "Standing";
        case BehaviorLabel::Walking: return "Walking";
        case BehaviorLabel::Stopping: return "Stopping";
        case BehaviorLabel::Sitting: return "Sitting";
        case BehaviorLabel::LyingDown: return "LyingDown";
        case BehaviorLabel::GettingUp: return "GettingUp";
        case BehaviorLabel::FallForward: return "FallForward";
        case BehaviorLabel::FallSideways: return "FallSideways";
    }
    return "?";
}

std::optional<BehaviorLabel> parse_behavior(const std::string& name) {
    for (int i = 0; i < kBehaviorCount; ++i) {
        const auto b = static_cast<BehaviorLabel>(i);
        if (to_string(b) == name) return b;
    }
    return std::nullopt;
}

std::optional<std::size_t> ActivityZoneMap::index_of(const std::string& zone_id) const {
    for (std::size_t i = 0; i < zones.size(); ++i) {
        if (zones[i].id == zone_id) return i;
    }
    return std::nullopt;
}

std::string ZoneMapIssue::describe() const {
    switch (kind) {
        case Kind::EmptyMap: return "EmptyMap";
        case Kind::DuplicateZoneId: return "DuplicateZoneId(" + zone_a + ")";
        case Kind::OverlappingZones:
            return "OverlappingZones(" + zone_a + ", " + zone_b + ")";
    }
    return "?";
}

namespace {

bool rects_overlap(const ZoneRect& a, const ZoneRect& b) {
    return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

}  // namespace

std::optional<ZoneMapIssue> validate_zone_map(const ActivityZoneMap& map) {
    if (map.zones.empty()) {
        return ZoneMapIssue{ZoneMapIssue::Kind::EmptyMap, "", ""};
    }
    for (std::size_t i = 0; i < map.zones.size(); ++i) {
        for (std::size_t j = i + 1; j < map.zones.size(); ++j) {
            if (map.zones[i].id == map.zones[j].id) {
                return ZoneMapIssue{ZoneMapIssue::Kind::DuplicateZoneId,
                                    map.zones[i].id, ""};
            }
        }
    }
    for (std::size_t i = 0; i < map.zones.size(); ++i) {
        for (std::size_t j = i + 1; j < map.zones.size(); ++j) {
            if (rects_overlap(map.zones[i].rect, map.zones[j].rect)) {
                return ZoneMapIssue{ZoneMapIssue::Kind::OverlappingZones,
                                    map.zones[i].id, map.zones[j].id};
            }
        }
    }
    return std::nullopt;
}

ActivityZoneMap parse_zone_map(const std::string& text) {
    ActivityZoneMap map;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        Zone z;
        std::string x0, y0, x1, y1;
        if (!std::getline(fields, z.id, '\t') ||
            !std::getline(fields, z.label, '\t') ||
            !std::getline(fields, x0, '\t') || !std::getline(fields, y0, '\t') ||
            !std::getline(fields, x1, '\t') || !std::getline(fields, y1, '\t')) {
            throw Error("zone map line " + std::to_string(lineno) +
                        ": expected 6 tab-separated fields");
        }
        try {
            z.rect = ZoneRect{std::stod(x0), std::stod(y0), std::stod(x1), std::stod(y1)};
        } catch (const std::exception&) {
            throw Error("zone map line " + std::to_string(lineno) + ": bad number");
        }
        if (!(z.rect.x0 < z.rect.x1 && z.rect.y0 < z.rect.y1)) {
            throw Error("zone map line " + std::to_string(lineno) +
                        ": rectangle must satisfy x0<x1, y0<y1");
        }
        map.zones.push_back(std::move(z));
    }
    if (auto issue = validate_zone_map(map)) {
        throw Error("invalid zone map: " + issue->describe());
    }
    return map;
}

ActivityZoneMap load_zone_map(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open zone map: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_zone_map(buf.str());
}

bool UnifiedRecord::zone_known() const {
    for (const auto& [id, present] : zone_presence) {
        if (present) return true;
    }
    return false;
}

std::string UnifiedRecord::active_zone() const {
    for (const auto& [id, present] : zone_presence) {
        if (present) return id;
    }
    return kUnknownZone;
}

}  // namespace aal
