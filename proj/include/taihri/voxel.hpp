#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "taihri/camera.hpp"
#include "taihri/errors.hpp"

namespace taihri {

inline constexpr int kVoxelGrid = 1000; // indices run 0..999 per axis

// Cuboid region of camera space over which 3D keypoints are quantized.
// `origin_mm` is the minimum corner; the volume is half-open on every axis:
// a point is encodable iff origin <= p < origin + extent componentwise.
struct InteractionVolume {
    double width_mm = 0.0;  // x extent
    double height_mm = 0.0; // y extent
    double depth_mm = 0.0;  // z extent
    std::array<double, 3> origin_mm = {0.0, 0.0, 0.0};

    void validate() const {
        if (!(width_mm > 0.0) || !(height_mm > 0.0) || !(depth_mm > 0.0))
            throw ConfigError("interaction volume extents must be positive");
        for (double o : origin_mm)
            if (!std::isfinite(o)) throw ConfigError("interaction volume origin must be finite");
    }

    double extent(int axis) const {
        return axis == 0 ? width_mm : (axis == 1 ? height_mm : depth_mm);
    }

    bool contains(const Point3Cam &p) const {
        const std::array<double, 3> c = {p.x, p.y, p.z};
        for (int a = 0; a < 3; ++a) {
            const double local = c[static_cast<std::size_t>(a)] - origin_mm[static_cast<std::size_t>(a)];
            if (!(local >= 0.0) || !(local < extent(a))) return false;
        }
        return true;
    }

    // Cuboid in front of the camera covering a 0.5-3 m working range with
    // margin: 4000x3000x4000 mm with its minimum corner at (-2000,-1500,0).
    static InteractionVolume default_volume() {
        return {4000.0, 3000.0, 4000.0, {-2000.0, -1500.0, 0.0}};
    }
};

struct VoxelToken {
    int x = 0;
    int y = 0;
    int z = 0;

    friend bool operator==(const VoxelToken &, const VoxelToken &) = default;
};

namespace detail {

inline int quantize_axis(double local, double extent) {
    int idx = static_cast<int>(std::floor(local / extent * kVoxelGrid));
    // local/extent can round up to exactly 1.0 for local just below extent;
    // the half-open precondition still guarantees index 999.
    return std::clamp(idx, 0, kVoxelGrid - 1);
}

} // namespace detail

// Quantize a camera-frame point to integer voxel indices in [0, 999]^3:
// index = floor(local / extent * 1000) with local = p - origin.
inline VoxelToken encode_voxel(const Point3Cam &p, const InteractionVolume &vol) {
    vol.validate();
    const std::array<double, 3> c = {p.x, p.y, p.z};
    std::array<int, 3> idx{};
    constexpr std::array<char, 3> axis_name = {'x', 'y', 'z'};
    for (int a = 0; a < 3; ++a) {
        const std::size_t ai = static_cast<std::size_t>(a);
        const double local = c[ai] - vol.origin_mm[ai];
        if (!(local >= 0.0) || !(local < vol.extent(a)))
            throw OutOfVolume(axis_name[ai], local, vol.extent(a));
        idx[ai] = detail::quantize_axis(local, vol.extent(a));
    }
    return {idx[0], idx[1], idx[2]};
}

struct ClampedToken {
    VoxelToken token;
    bool clamped = false; // true when any coordinate fell outside the volume
};

// Clamping variant for training pipelines: out-of-volume coordinates snap to
// the nearest valid index instead of raising OutOfVolume.
inline ClampedToken encode_voxel_clamped(const Point3Cam &p, const InteractionVolume &vol) {
    vol.validate();
    const std::array<double, 3> c = {p.x, p.y, p.z};
    std::array<int, 3> idx{};
    bool clamped = false;
    for (int a = 0; a < 3; ++a) {
        const std::size_t ai = static_cast<std::size_t>(a);
        const double local = c[ai] - vol.origin_mm[ai];
        if (!(local >= 0.0)) {
            idx[ai] = 0;
            clamped = true;
        } else if (!(local < vol.extent(a))) {
            idx[ai] = kVoxelGrid - 1;
            clamped = true;
        } else {
            idx[ai] = detail::quantize_axis(local, vol.extent(a));
        }
    }
    return {{idx[0], idx[1], idx[2]}, clamped};
}

// Reconstruct the voxel-center point: local = (index + 0.5) / 1000 * extent.
// Worst-case per-axis error of decode(encode(p)) is extent / 2000.
inline Point3Cam decode_voxel(const VoxelToken &t, const InteractionVolume &vol) {
    vol.validate();
    const std::array<int, 3> idx = {t.x, t.y, t.z};
    constexpr std::array<char, 3> axis_name = {'x', 'y', 'z'};
    std::array<double, 3> c{};
    for (int a = 0; a < 3; ++a) {
        const std::size_t ai = static_cast<std::size_t>(a);
        if (idx[ai] < 0 || idx[ai] >= kVoxelGrid) throw TokenOutOfRange(axis_name[ai], idx[ai]);
        c[ai] = (idx[ai] + 0.5) / kVoxelGrid * vol.extent(a) + vol.origin_mm[ai];
    }
    return {c[0], c[1], c[2]};
}

} // namespace taihri
