#include "aal/gateway.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

namespace aal {

using json = nlohmann::json;

StreamFrame parse_frame(const std::string& line) {
    if (line.size() > kMaxFrameLine) {
        throw Error("FrameParse(0, line exceeds " + std::to_string(kMaxFrameLine) +
                    " bytes)");
    }
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw Error("FrameParse(" + std::to_string(e.byte) + ", " +
                    std::string(e.what()) + ")");
    }
    if (!j.is_object()) throw Error("FrameParse(0, frame must be an object)");

    StreamFrame frame;
    try {
        frame.src = j.at("src").get<std::string>();
        frame.t_ms = j.at("t_ms").get<std::int64_t>();
        const std::string kind = j.at("kind").get<std::string>();
        if (frame.t_ms < 0) throw Error("FrameParse(0, t_ms must be >= 0)");
        if (kind == "imu") {
            ImuPayload p;
            p.accel = {j.at("ax").get<double>(), j.at("ay").get<double>(),
                       j.at("az").get<double>()};
            p.gyro = {j.at("gx").get<double>(), j.at("gy").get<double>(),
                      j.at("gz").get<double>()};
            frame.payload = p;
        } else if (kind == "beacon") {
            BeaconPayload p;
            p.zone = j.at("zone").get<std::string>();
            p.present = j.at("present").get<bool>();
            frame.payload = p;
        } else {
            throw Error("UnknownKind: " + kind);
        }
    } catch (const json::exception& e) {
        throw Error("FrameParse(0, " + std::string(e.what()) + ")");
    }
    return frame;
}

std::string frame_to_line(const StreamFrame& frame) {
    json j;
    j["src"] = frame.src;
    j["t_ms"] = frame.t_ms;
    if (frame.is_imu()) {
        const auto& p = std::get<ImuPayload>(frame.payload);
        j["kind"] = "imu";
        j["ax"] = p.accel.x;
        j["ay"] = p.accel.y;
        j["az"] = p.accel.z;
        j["gx"] = p.gyro.x;
        j["gy"] = p.gyro.y;
        j["gz"] = p.gyro.z;
    } else {
        const auto& p = std::get<BeaconPayload>(frame.payload);
        j["kind"] = "beacon";
        j["zone"] = p.zone;
        j["present"] = p.present;
    }
    return j.dump();
}

namespace {

// Drops frames later than tolerance behind the newest frame seen on the
// stream, then sorts the survivors (stable for equal keys).
std::vector<StreamFrame> bound_reorder(std::span<const StreamFrame> frames,
                                       std::int64_t tolerance_ms,
                                       SessionCounters& counters) {
    std::vector<StreamFrame> kept;
    kept.reserve(frames.size());
    std::int64_t max_t = -1;
    for (const auto& f : frames) {
        if (max_t >= 0 && f.t_ms < max_t - tolerance_ms) {
            ++counters.frames_dropped;
            continue;
        }
        if (f.t_ms < max_t) ++counters.frames_reordered;
        max_t = std::max(max_t, f.t_ms);
        kept.push_back(f);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const StreamFrame& a, const StreamFrame& b) {
                         return a.t_ms < b.t_ms;
                     });
    return kept;
}

}  // namespace

SessionLog merge_streams(std::span<const StreamFrame> imu,
                         std::span<const StreamFrame> beacons,
                         const ActivityZoneMap& map,
                         std::int64_t tolerance_ms) {
    SessionLog log;
    log.counters.frames_received = imu.size() + beacons.size();

    const auto imu_sorted = bound_reorder(imu, tolerance_ms, log.counters);
    const auto beacon_sorted = bound_reorder(beacons, tolerance_ms, log.counters);

    std::vector<bool> present(map.zones.size(), false);
    std::size_t bi = 0;

    auto apply_beacon = [&](const StreamFrame& f) {
        const auto& p = std::get<BeaconPayload>(f.payload);
        const auto idx = map.index_of(p.zone);
        if (!idx) {
            ++log.counters.parse_errors;  // unmapped zone; frame ignored
            return;
        }
        present[*idx] = p.present;
        std::size_t claims = 0;
        for (bool b : present) claims += b ? 1 : 0;
        if (claims > 1) ++log.counters.beacon_conflicts;
    };

    for (const auto& f : imu_sorted) {
        // Forward fill: beacon state at or before the sample time.
        while (bi < beacon_sorted.size() && beacon_sorted[bi].t_ms <= f.t_ms) {
            apply_beacon(beacon_sorted[bi]);
            ++bi;
        }
        const auto& p = std::get<ImuPayload>(f.payload);
        UnifiedRecord rec;
        rec.t = make_timestamp(f.t_ms);
        rec.wall_clock = rec.t.wall_clock;
        rec.elapsed_s = static_cast<double>(f.t_ms) / 1000.0;
        rec.accel = p.accel;
        rec.gyro = p.gyro;
        std::size_t first_claim = map.zones.size();
        for (std::size_t z = 0; z < map.zones.size(); ++z) {
            if (present[z] && first_claim == map.zones.size()) first_claim = z;
            rec.zone_presence[map.zones[z].id] = false;
        }
        if (first_claim < map.zones.size()) {
            rec.zone_presence[map.zones[first_claim].id] = true;
        }
        log.records.push_back(std::move(rec));
    }
    return log;
}

std::vector<UnifiedRecord> query_range(const SessionLog& log, std::int64_t t0_ms,
                                       std::int64_t t1_ms) {
    if (t0_ms > t1_ms) throw Error("InvertedRange");
    std::vector<UnifiedRecord> out;
    for (const auto& r : log.records) {
        if (r.t.millis >= t0_ms && r.t.millis < t1_ms) out.push_back(r);
    }
    return out;
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string export_table_text(const SessionLog& log, const ActivityZoneMap& map) {
    std::ostringstream out;
    out << "wall_clock,t_ms,elapsed_s,accel_x,accel_y,accel_z,gyro_x,gyro_y,gyro_z";
    for (const auto& z : map.zones) out << ',' << z.id;
    out << ",label\n";
    for (const auto& r : log.records) {
        out << r.wall_clock << ',' << r.t.millis << ',' << fixed6(r.elapsed_s)
            << ',' << fixed6(r.accel.x) << ',' << fixed6(r.accel.y) << ','
            << fixed6(r.accel.z) << ',' << fixed6(r.gyro.x) << ','
            << fixed6(r.gyro.y) << ',' << fixed6(r.gyro.z);
        for (const auto& z : map.zones) {
            const auto it = r.zone_presence.find(z.id);
            out << ',' << (it != r.zone_presence.end() && it->second ? 1 : 0);
        }
        out << ',' << (r.label ? to_string(*r.label) : "") << '\n';
    }
    return out.str();
}

std::size_t export_table(const SessionLog& log, const ActivityZoneMap& map,
                         const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("IoFailure: cannot write " + path);
    f << export_table_text(log, map);
    if (!f) throw Error("IoFailure: write failed for " + path);
    return log.records.size();
}

SessionLog import_table_text(const std::string& text, const ActivityZoneMap& map) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error("table import: missing header");

    std::vector<std::string> header;
    {
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) header.push_back(field);
    }
    const std::size_t expected = 9 + map.zones.size() + 1;
    if (header.size() != expected) {
        throw Error("table import: header has " + std::to_string(header.size()) +
                    " columns, expected " + std::to_string(expected));
    }
    for (std::size_t z = 0; z < map.zones.size(); ++z) {
        if (header[9 + z] != map.zones[z].id) {
            throw Error("table import: zone column '" + header[9 + z] +
                        "' does not match map order");
        }
    }

    SessionLog log;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream fs(line);
        std::string field;
        while (std::getline(fs, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");
        if (fields.size() != expected) {
            throw Error("table import: line " + std::to_string(lineno) +
                        " has wrong column count");
        }
        UnifiedRecord rec;
        rec.wall_clock = fields[0];
        rec.t = make_timestamp(std::stoll(fields[1]));
        rec.elapsed_s = std::stod(fields[2]);
        rec.accel = {std::stod(fields[3]), std::stod(fields[4]), std::stod(fields[5])};
        rec.gyro = {std::stod(fields[6]), std::stod(fields[7]), std::stod(fields[8])};
        for (std::size_t z = 0; z < map.zones.size(); ++z) {
            rec.zone_presence[map.zones[z].id] = fields[9 + z] == "1";
        }
        if (!fields.back().empty()) {
            const auto label = parse_behavior(fields.back());
            if (!label) {
                throw Error("table import: unknown label '" + fields.back() + "'");
            }
            rec.label = label;
        }
        log.records.push_back(std::move(rec));
    }
    return log;
}

SessionLog import_table(const std::string& path, const ActivityZoneMap& map) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("IoFailure: cannot read " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return import_table_text(buf.str(), map);
}

// ---------------------------------------------------------------------------
// Binary log

namespace {

constexpr char kLogMagic[8] = {'A', 'A', 'L', 'O', 'G', '\0', 'v', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw Error("log: truncated file");
    return v;
}

void put_str(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw Error("log: truncated string");
    return s;
}

}  // namespace

void save_log(const SessionLog& log, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("IoFailure: cannot write " + path);
    f.write(kLogMagic, sizeof(kLogMagic));
    put_str(f, log.session_id);
    put<std::uint64_t>(f, log.counters.frames_received);
    put<std::uint64_t>(f, log.counters.frames_dropped);
    put<std::uint64_t>(f, log.counters.frames_reordered);
    put<std::uint64_t>(f, log.counters.parse_errors);
    put<std::uint64_t>(f, log.counters.beacon_conflicts);

    // Zone id table from the first record (std::map key order).
    std::vector<std::string> zone_ids;
    if (!log.records.empty()) {
        for (const auto& [id, present] : log.records.front().zone_presence) {
            zone_ids.push_back(id);
        }
    }
    put<std::uint32_t>(f, static_cast<std::uint32_t>(zone_ids.size()));
    for (const auto& id : zone_ids) put_str(f, id);

    put<std::uint64_t>(f, log.records.size());
    for (const auto& r : log.records) {
        put<std::int64_t>(f, r.t.millis);
        put(f, r.accel.x); put(f, r.accel.y); put(f, r.accel.z);
        put(f, r.gyro.x); put(f, r.gyro.y); put(f, r.gyro.z);
        std::int32_t active = -1;
        for (std::size_t z = 0; z < zone_ids.size(); ++z) {
            const auto it = r.zone_presence.find(zone_ids[z]);
            if (it != r.zone_presence.end() && it->second) {
                active = static_cast<std::int32_t>(z);
            }
        }
        put(f, active);
        put<std::int8_t>(f, r.label ? static_cast<std::int8_t>(*r.label) : -1);
    }
    if (!f) throw Error("IoFailure: write failed for " + path);
}

SessionLog load_log(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("IoFailure: cannot read " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kLogMagic, sizeof(magic)) != 0) {
        throw Error("log: bad magic or unsupported version");
    }
    SessionLog log;
    log.session_id = get_str(f);
    log.counters.frames_received = get<std::uint64_t>(f);
    log.counters.frames_dropped = get<std::uint64_t>(f);
    log.counters.frames_reordered = get<std::uint64_t>(f);
    log.counters.parse_errors = get<std::uint64_t>(f);
    log.counters.beacon_conflicts = get<std::uint64_t>(f);

    std::vector<std::string> zone_ids;
    const auto n_zones = get<std::uint32_t>(f);
    for (std::uint32_t i = 0; i < n_zones; ++i) zone_ids.push_back(get_str(f));

    const auto n_records = get<std::uint64_t>(f);
    for (std::uint64_t i = 0; i < n_records; ++i) {
        UnifiedRecord r;
        r.t = make_timestamp(get<std::int64_t>(f));
        r.wall_clock = r.t.wall_clock;
        r.elapsed_s = static_cast<double>(r.t.millis) / 1000.0;
        r.accel = {get<double>(f), get<double>(f), get<double>(f)};
        r.gyro = {get<double>(f), get<double>(f), get<double>(f)};
        const auto active = get<std::int32_t>(f);
        for (std::size_t z = 0; z < zone_ids.size(); ++z) {
            r.zone_presence[zone_ids[z]] = static_cast<std::int32_t>(z) == active;
        }
        const auto label = get<std::int8_t>(f);
        if (label >= 0) r.label = static_cast<BehaviorLabel>(label);
        log.records.push_back(std::move(r));
    }
    return log;
}

// ---------------------------------------------------------------------------
// Live gateway

GatewayServer::GatewayServer(ServeConfig config, ActivityZoneMap map)
    : config_(std::move(config)), map_(std::move(map)) {}

GatewayServer::~GatewayServer() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void GatewayServer::bind() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("BindFailure: socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(config_.port));
    if (::inet_pton(AF_INET, config_.host.c_str(), &addr.sin_addr) != 1) {
        throw Error("BindFailure: bad host " + config_.host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        throw Error("BindFailure: cannot bind " + config_.host + ":" +
                    std::to_string(config_.port));
    }
    if (::listen(listen_fd_, 16) != 0) throw Error("BindFailure: listen() failed");

    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    bound_port_ = ntohs(bound.sin_port);
}

SessionLog GatewayServer::run() {
    if (listen_fd_ < 0) bind();

    struct Connection {
        int fd;
        std::string buffer;
    };
    std::vector<Connection> conns;
    std::vector<StreamFrame> imu, beacons;
    std::size_t parse_errors = 0;
    int accepted = 0;

    auto consume = [&](Connection& c, bool eof) {
        std::size_t start = 0;
        for (;;) {
            const auto nl = c.buffer.find('\n', start);
            if (nl == std::string::npos) break;
            const std::string line = c.buffer.substr(start, nl - start);
            start = nl + 1;
            if (line.empty()) continue;
            try {
                StreamFrame f = parse_frame(line);
                (f.is_imu() ? imu : beacons).push_back(std::move(f));
            } catch (const Error&) {
                ++parse_errors;
            }
        }
        c.buffer.erase(0, start);
        if (eof && !c.buffer.empty()) ++parse_errors;  // trailing partial line
    };

    for (;;) {
        std::vector<pollfd> fds;
        fds.push_back({listen_fd_, POLLIN, 0});
        for (const auto& c : conns) fds.push_back({c.fd, POLLIN, 0});
        const int ready = ::poll(fds.data(), fds.size(), config_.idle_poll_ms);
        if (ready < 0) throw Error("serve: poll() failed");

        if (fds[0].revents & POLLIN) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd >= 0) {
                conns.push_back({fd, {}});
                ++accepted;
                continue;  // re-poll with the new connection included
            }
        }
        for (std::size_t i = 0; i < conns.size();) {
            auto& c = conns[i];
            const short revents = fds[i + 1].revents;
            bool closed = false;
            if (revents & (POLLIN | POLLHUP | POLLERR)) {
                char buf[4096];
                const ssize_t n = ::read(c.fd, buf, sizeof(buf));
                if (n > 0) {
                    c.buffer.append(buf, static_cast<std::size_t>(n));
                    consume(c, false);
                } else {
                    closed = true;
                }
            }
            if (closed) {
                consume(c, true);
                ::close(c.fd);
                conns.erase(conns.begin() + static_cast<std::ptrdiff_t>(i));
            } else {
                ++i;
            }
        }
        if (accepted >= config_.min_connections && conns.empty()) break;
    }

    SessionLog log = merge_streams(imu, beacons, map_, config_.tolerance_ms);
    log.session_id = config_.session_id;
    log.counters.parse_errors += parse_errors;
    return log;
}

}  // namespace aal
