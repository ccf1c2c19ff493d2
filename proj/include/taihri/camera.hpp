#pragma once

#include <cmath>

#include "taihri/errors.hpp"

namespace taihri {

// Image coordinates in pixels. Real-valued; quantized to integers only at
// sequence serialization.
struct Pixel {
    double u = 0.0;
    double v = 0.0;
};

// Camera-frame point in millimeters. Axis convention: +z forward along the
// optical axis, +x right, +y down (image-aligned, so projection is sign-free).
struct Point3Cam {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct CameraIntrinsics {
    double fx = 0.0; // focal length, pixels
    double fy = 0.0;
    double cx = 0.0; // principal point, pixels (may lie outside the image after crops)
    double cy = 0.0;
    int width = 0; // image dimensions, pixels
    int height = 0;

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0))
            throw ConfigError("intrinsics need positive focal lengths");
        if (width < 1 || height < 1)
            throw ConfigError("intrinsics need width/height >= 1");
        if (!std::isfinite(cx) || !std::isfinite(cy))
            throw ConfigError("intrinsics principal point must be finite");
    }
};

inline Pixel project(const Point3Cam &p, const CameraIntrinsics &k) {
    if (!(p.z > 0.0)) throw NonPositiveDepth(p.z);
    return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
}

inline Point3Cam backproject(const Pixel &px, double depth_mm, const CameraIntrinsics &k) {
    if (!(depth_mm > 0.0)) throw NonPositiveDepth(depth_mm);
    return {(px.u - k.cx) * depth_mm / k.fx, (px.v - k.cy) * depth_mm / k.fy, depth_mm};
}

struct UnifiedIntrinsics {
    CameraIntrinsics intrinsics;
    double scale = 1.0;
};

// Rescale intrinsics so fx equals `target_focal`. The scale is anchored on fx;
// fy is scaled by the same factor, preserving any anisotropy. Only the
// coordinate transform is performed here; image resampling is the caller's
// concern. Projections commute: project(p, k') == scale * project(p, k).
inline UnifiedIntrinsics unify_focal(const CameraIntrinsics &k, double target_focal) {
    k.validate();
    if (!(target_focal > 0.0)) throw ConfigError("target focal must be positive");
    const double scale = target_focal / k.fx;
    CameraIntrinsics out;
    out.fx = target_focal;
    out.fy = k.fy * scale;
    out.cx = k.cx * scale;
    out.cy = k.cy * scale;
    // Degenerate targets could round a dimension to zero; keep it a legal image.
    out.width = std::max(1, static_cast<int>(std::lround(k.width * scale)));
    out.height = std::max(1, static_cast<int>(std::lround(k.height * scale)));
    return {out, scale};
}

// Shift the principal point for a crop whose top-left corner is
// `crop_origin`. The crop may extend past the source image; callers pad.
inline CameraIntrinsics apply_crop(const CameraIntrinsics &k, const Pixel &crop_origin,
                                   int crop_w, int crop_h) {
    if (crop_w < 1 || crop_h < 1) throw ConfigError("crop dimensions must be >= 1");
    CameraIntrinsics out = k;
    out.cx = k.cx - crop_origin.u;
    out.cy = k.cy - crop_origin.v;
    out.width = crop_w;
    out.height = crop_h;
    return out;
}

inline bool in_image(const Pixel &px, const CameraIntrinsics &k) {
    return px.u >= 0.0 && px.u < static_cast<double>(k.width) && px.v >= 0.0 &&
           px.v < static_cast<double>(k.height);
}

} // namespace taihri
