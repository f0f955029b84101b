#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "aal/core.hpp"

namespace aal {

// Direction-cosine angles of the acceleration vector, degrees in [0, 180].
struct OrientationAngles {
    double theta_x = 0.0;
    double theta_y = 0.0;
    double theta_z = 0.0;
};

// |a| below this is treated as degenerate (free fall / dead sensor) and
// excluded from angle statistics.
inline constexpr double kDegeneracyThresholdG = 0.05;

double magnitude(const ImuSample& s);
double magnitude(const Vec3& accel);

// theta_i = arccos(a_i / |a|). nullopt when |a| <= kDegeneracyThresholdG.
std::optional<OrientationAngles> orientation_angles(const Vec3& accel);
std::optional<OrientationAngles> orientation_angles(const ImuSample& s);

struct Window {
    std::vector<ImuSample> samples;  // time-sorted, non-empty
    Timestamp start;
    double duration_s = 0.0;
};

struct WindowConfig {
    double window_s = 2.0;
    double stride_s = 1.0;
};

// Half-open windows [k*stride, k*stride + window_s); windows with fewer than
// 4 samples are dropped. Throws Error on an unsorted stream or if
// stride_s <= 0 or window_s < stride_s.
std::vector<Window> make_windows(std::span<const ImuSample> stream,
                                 double window_s, double stride_s);

// Fixed feature layout: per-axis accel mean/std/min/max, per-axis gyro
// mean/std, magnitude mean/max, per-axis angle mean, and the rapid-change
// score — 24 entries.
inline constexpr std::size_t kFeatureDim = 24;

enum FeatureIndex : std::size_t {
    kAccelMeanX = 0, kAccelMeanY, kAccelMeanZ,
    kAccelStdX, kAccelStdY, kAccelStdZ,
    kAccelMinX, kAccelMinY, kAccelMinZ,
    kAccelMaxX, kAccelMaxY, kAccelMaxZ,
    kGyroMeanX, kGyroMeanY, kGyroMeanZ,
    kGyroStdX, kGyroStdY, kGyroStdZ,
    kMagMean, kMagMax,
    kAngleMeanX, kAngleMeanY, kAngleMeanZ,
    kRapidChange,
};

using FeatureVector = std::array<double, kFeatureDim>;

// Window statistics. Degenerate samples are excluded from the angle mean and
// rapid-change score but still contribute to magnitude and accel statistics.
// nullopt when no sample in the window yields orientation angles.
std::optional<FeatureVector> window_features(const Window& w);

}  // namespace aal
