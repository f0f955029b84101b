#include "aal/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aal {

double magnitude(const Vec3& accel) {
    return std::sqrt(accel.x * accel.x + accel.y * accel.y + accel.z * accel.z);
}

double magnitude(const ImuSample& s) { return magnitude(s.accel); }

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

double safe_acos_deg(double c) {
    return std::acos(std::clamp(c, -1.0, 1.0)) * kRadToDeg;
}

}  // namespace

std::optional<OrientationAngles> orientation_angles(const Vec3& accel) {
    const double mag = magnitude(accel);
    if (mag <= kDegeneracyThresholdG) return std::nullopt;
    return OrientationAngles{
        safe_acos_deg(accel.x / mag),
        safe_acos_deg(accel.y / mag),
        safe_acos_deg(accel.z / mag),
    };
}

std::optional<OrientationAngles> orientation_angles(const ImuSample& s) {
    return orientation_angles(s.accel);
}

std::vector<Window> make_windows(std::span<const ImuSample> stream,
                                 double window_s, double stride_s) {
    if (stride_s <= 0.0 || window_s < stride_s) {
        throw Error("make_windows: require window_s >= stride_s > 0");
    }
    for (std::size_t i = 1; i < stream.size(); ++i) {
        if (stream[i].t.millis < stream[i - 1].t.millis) {
            throw Error("UnsortedStream: sample " + std::to_string(i) +
                        " precedes its predecessor");
        }
    }
    std::vector<Window> out;
    if (stream.empty()) return out;

    constexpr std::size_t kMinSamples = 4;
    const std::int64_t last_ms = stream.back().t.millis;
    const std::int64_t window_ms = static_cast<std::int64_t>(window_s * 1000.0 + 0.5);
    const std::int64_t stride_ms = static_cast<std::int64_t>(stride_s * 1000.0 + 0.5);

    std::size_t lo = 0;  // first sample with t >= window start
    for (std::int64_t start = 0; start <= last_ms; start += stride_ms) {
        const std::int64_t end = start + window_ms;
        while (lo < stream.size() && stream[lo].t.millis < start) ++lo;
        std::size_t hi = lo;
        while (hi < stream.size() && stream[hi].t.millis < end) ++hi;
        if (hi - lo >= kMinSamples) {
            Window w;
            w.samples.assign(stream.begin() + lo, stream.begin() + hi);
            w.start = make_timestamp(start);
            w.duration_s = window_s;
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::optional<FeatureVector> window_features(const Window& w) {
    FeatureVector f{};
    const std::size_t n = w.samples.size();
    if (n == 0) return std::nullopt;

    // Accel / gyro / magnitude statistics over all samples.
    Vec3 a_sum{}, a_sq{}, g_sum{}, g_sq{};
    Vec3 a_min{std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::infinity()};
    Vec3 a_max{-std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity()};
    double mag_sum = 0.0, mag_max = 0.0;
    for (const auto& s : w.samples) {
        for (int i = 0; i < 3; ++i) {
            a_sum[i] += s.accel[i];
            a_sq[i] += s.accel[i] * s.accel[i];
            g_sum[i] += s.gyro[i];
            g_sq[i] += s.gyro[i] * s.gyro[i];
            a_min[i] = std::min(a_min[i], s.accel[i]);
            a_max[i] = std::max(a_max[i], s.accel[i]);
        }
        const double mag = magnitude(s);
        mag_sum += mag;
        mag_max = std::max(mag_max, mag);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int i = 0; i < 3; ++i) {
        const double am = a_sum[i] * inv_n;
        const double gm = g_sum[i] * inv_n;
        f[kAccelMeanX + i] = am;
        f[kAccelStdX + i] = std::sqrt(std::max(0.0, a_sq[i] * inv_n - am * am));
        f[kAccelMinX + i] = a_min[i];
        f[kAccelMaxX + i] = a_max[i];
        f[kGyroMeanX + i] = gm;
        f[kGyroStdX + i] = std::sqrt(std::max(0.0, g_sq[i] * inv_n - gm * gm));
    }
    f[kMagMean] = mag_sum * inv_n;
    f[kMagMax] = mag_max;

    // Angle statistics over non-degenerate samples only; the rapid-change
    // score is the max per-step axis angle change between consecutive
    // angle-bearing samples.
    double ang_sum[3] = {0.0, 0.0, 0.0};
    std::size_t ang_n = 0;
    bool have_prev = false;
    OrientationAngles prev{};
    double rapid = 0.0;
    for (const auto& s : w.samples) {
        const auto ang = orientation_angles(s);
        if (!ang) continue;
        ang_sum[0] += ang->theta_x;
        ang_sum[1] += ang->theta_y;
        ang_sum[2] += ang->theta_z;
        ++ang_n;
        if (have_prev) {
            rapid = std::max({rapid,
                              std::abs(ang->theta_x - prev.theta_x),
                              std::abs(ang->theta_y - prev.theta_y),
                              std::abs(ang->theta_z - prev.theta_z)});
        }
        prev = *ang;
        have_prev = true;
    }
    if (ang_n == 0) return std::nullopt;  // AllDegenerate
    for (int i = 0; i < 3; ++i) {
        f[kAngleMeanX + i] = ang_sum[i] / static_cast<double>(ang_n);
    }
    f[kRapidChange] = rapid;
    return f;
}

}  // namespace aal
