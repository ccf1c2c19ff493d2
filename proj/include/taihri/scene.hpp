#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "taihri/camera.hpp"
#include "taihri/eigen_util.hpp"
#include "taihri/errors.hpp"
#include "taihri/joints.hpp"
#include "taihri/keypoints.hpp"
#include "taihri/parallel.hpp"
#include "taihri/rng.hpp"

namespace taihri {

// One bone of the stick figure: child joint, parent joint, rest offset in the
// body frame (T-pose), and the articulation limit applied per Euler axis.
struct BoneSpec {
    int parent;
    int child;
    Eigen::Vector3d rest_offset_mm;
    double angle_limit_deg;
};

// 16-bone spanning tree over the 17-joint vocabulary, rooted at left_hip.
// Body frame matches the camera frame at identity placement (+x right, +y
// down, +z away from the camera); the figure faces the camera.
inline const std::vector<BoneSpec> &skeleton_bones() {
    auto make = [] {
        const Eigen::Vector3d t_pose[kJointCount] = {
            {0, -700, -60},   // nose
            {35, -730, -70},  // left_eye
            {-35, -730, -70}, // right_eye
            {70, -720, -20},  // left_ear
            {-70, -720, -20}, // right_ear
            {175, -520, 0},   // left_shoulder
            {-175, -520, 0},  // right_shoulder
            {455, -520, 0},   // left_elbow
            {-455, -520, 0},  // right_elbow
            {705, -520, 0},   // left_wrist
            {-705, -520, 0},  // right_wrist
            {95, 0, 0},       // left_hip
            {-95, 0, 0},      // right_hip
            {95, 420, 0},     // left_knee
            {-95, 420, 0},    // right_knee
            {95, 820, 0},     // left_ankle
            {-95, 820, 0},    // right_ankle
        };
        struct Edge {
            int parent, child;
            double limit_deg;
        };
        const Edge edges[16] = {
            {11, 12, 10.0}, // pelvis
            {11, 13, 45.0}, {13, 15, 45.0}, // left leg
            {12, 14, 45.0}, {14, 16, 45.0}, // right leg
            {11, 5, 20.0},  {12, 6, 20.0},  // torso
            {5, 7, 60.0},   {7, 9, 60.0},   // left arm
            {6, 8, 60.0},   {8, 10, 60.0},  // right arm
            {5, 0, 20.0},                   // neck
            {0, 1, 5.0},    {0, 2, 5.0},    // eyes
            {1, 3, 5.0},    {2, 4, 5.0},    // ears
        };
        std::vector<BoneSpec> bones;
        bones.reserve(16);
        for (const Edge &e : edges)
            bones.push_back({e.parent, e.child, t_pose[e.child] - t_pose[e.parent], e.limit_deg});
        return bones;
    };
    static const std::vector<BoneSpec> bones = make();
    return bones;
}

inline constexpr int kSkeletonRoot = 11; // left_hip

// Articulated skeleton in a body-local frame (pelvis midpoint near origin).
struct SkeletonPose {
    std::array<Point3Cam, kJointCount> joints;
};

struct SceneConfig {
    CameraIntrinsics intrinsics{1000.0, 1000.0, 640.0, 360.0, 1280, 720};
    double min_distance_mm = 500.0; // pelvis depth range (camera placement)
    double max_distance_mm = 3000.0;
    double yaw_limit_deg = 180.0; // body orientation relative to the camera
    double pitch_limit_deg = 25.0;
    double roll_limit_deg = 15.0;
    double articulation = 1.0; // scales the per-bone angle limits; 0 keeps the T-pose
    double bone_scale_min = 0.9; // per-bone length multiplier range
    double bone_scale_max = 1.1;
    double lateral_fraction = 0.35; // pelvis offset as a fraction of the frustum half-extent
    double min_visible_fraction = 0.4; // dataset quality gate (segmentation-stage stand-in)
    double noise_px = 0.0;             // 2D annotation noise used by generate_dataset
    double filter_threshold_px = 15.0; // reprojection-error filter (strict <)
    int max_attempts = 200;            // sample_scene retries for >=1 visible joint

    void validate() const {
        intrinsics.validate();
        if (!(min_distance_mm > 0.0) || !(max_distance_mm >= min_distance_mm))
            throw ConfigError("scene distance range must satisfy 0 < min <= max");
        if (!(articulation >= 0.0)) throw ConfigError("articulation must be >= 0");
        if (!(bone_scale_min > 0.0) || !(bone_scale_max >= bone_scale_min))
            throw ConfigError("bone scale range must satisfy 0 < min <= max");
        if (!(min_visible_fraction >= 0.0) || !(min_visible_fraction <= 1.0))
            throw ConfigError("min visible fraction must be in [0, 1]");
        if (!(noise_px >= 0.0)) throw ConfigError("annotation noise must be >= 0");
        if (!(filter_threshold_px > 0.0)) throw ConfigError("filter threshold must be > 0");
        if (max_attempts < 1) throw ConfigError("max attempts must be >= 1");
    }
};

struct SceneSample {
    std::int64_t id = 0;
    std::uint64_t seed = 0; // per-sample stream seed; noise is reconstructable from it
    CameraIntrinsics intrinsics;
    std::array<Point3Cam, kJointCount> joints_3d; // camera frame, mm
    std::array<Pixel, kJointCount> joints_2d;     // annotated 2D (projection + optional noise)
    std::array<bool, kJointCount> visible{};
    double pelvis_depth_mm = 0.0;

    int visible_count() const {
        int n = 0;
        for (bool v : visible)
            if (v) ++n;
        return n;
    }

    KeypointSet keypoints() const {
        KeypointSet out;
        for (int j = 0; j < kJointCount; ++j)
            out.set(kJointNames[static_cast<std::size_t>(j)], joints_3d[static_cast<std::size_t>(j)],
                    visible[static_cast<std::size_t>(j)]);
        return out;
    }
};

namespace detail {

inline Eigen::Matrix3d euler_zyx(double yaw_rad, double pitch_rad, double roll_rad) {
    return (Eigen::AngleAxisd(roll_rad, Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxisd(pitch_rad, Eigen::Vector3d::UnitX()) *
            Eigen::AngleAxisd(yaw_rad, Eigen::Vector3d::UnitY()))
        .toRotationMatrix();
}

} // namespace detail

// Forward kinematics over the bone tree. `bone_scales` multiplies each bone's
// rest length; `bone_angles_rad` are per-bone Euler rotations composed down
// the chain. Zero angles with unit scales reproduce the canonical T-pose.
inline SkeletonPose make_skeleton(std::span<const double> bone_scales,
                                  std::span<const Eigen::Vector3d> bone_angles_rad) {
    const std::vector<BoneSpec> &bones = skeleton_bones();
    if (bone_scales.size() != bones.size() || bone_angles_rad.size() != bones.size())
        throw ConfigError("skeleton parameters must match the bone count");
    std::array<Eigen::Vector3d, kJointCount> pos;
    std::array<Eigen::Matrix3d, kJointCount> acc;
    pos[kSkeletonRoot] = Eigen::Vector3d::Zero();
    acc[kSkeletonRoot] = Eigen::Matrix3d::Identity();
    for (std::size_t b = 0; b < bones.size(); ++b) {
        const BoneSpec &bone = bones[b];
        const Eigen::Vector3d &a = bone_angles_rad[b];
        const Eigen::Matrix3d local = detail::euler_zyx(a.y(), a.x(), a.z());
        const std::size_t parent = static_cast<std::size_t>(bone.parent);
        const std::size_t child = static_cast<std::size_t>(bone.child);
        acc[child] = acc[parent] * local;
        pos[child] = pos[parent] + acc[child] * (bone.rest_offset_mm * bone_scales[b]);
    }
    SkeletonPose out;
    for (int j = 0; j < kJointCount; ++j) {
        const std::size_t ji = static_cast<std::size_t>(j);
        out.joints[ji] = from_eigen(pos[ji]);
    }
    return out;
}

// Draws one close-range scene: articulated skeleton, pelvis depth uniform in
// the configured range, randomized orientation and lateral offset, per-joint
// frustum visibility. Resamples until at least one joint is visible.
inline SceneSample sample_scene(Rng &rng, const SceneConfig &cfg) {
    cfg.validate();
    const std::vector<BoneSpec> &bones = skeleton_bones();
    constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        std::vector<double> scales(bones.size());
        std::vector<Eigen::Vector3d> angles(bones.size());
        for (std::size_t b = 0; b < bones.size(); ++b) {
            scales[b] = rng.uniform(cfg.bone_scale_min, cfg.bone_scale_max);
            const double limit = bones[b].angle_limit_deg * cfg.articulation * kDegToRad;
            angles[b] = {rng.uniform(-limit, limit), rng.uniform(-limit, limit),
                         rng.uniform(-limit, limit)};
        }
        const SkeletonPose skeleton = make_skeleton(scales, angles);

        const double depth = rng.uniform(cfg.min_distance_mm, cfg.max_distance_mm);
        const double yaw = rng.uniform(-cfg.yaw_limit_deg, cfg.yaw_limit_deg) * kDegToRad;
        const double pitch = rng.uniform(-cfg.pitch_limit_deg, cfg.pitch_limit_deg) * kDegToRad;
        const double roll = rng.uniform(-cfg.roll_limit_deg, cfg.roll_limit_deg) * kDegToRad;
        const Eigen::Matrix3d placement = detail::euler_zyx(yaw, pitch, roll);

        const double half_w = depth * (cfg.intrinsics.width * 0.5) / cfg.intrinsics.fx;
        const double half_h = depth * (cfg.intrinsics.height * 0.5) / cfg.intrinsics.fy;
        const Eigen::Vector3d offset = {
            cfg.lateral_fraction * half_w * rng.uniform(-1.0, 1.0),
            cfg.lateral_fraction * half_h * rng.uniform(-1.0, 1.0), depth};

        SceneSample sample;
        sample.intrinsics = cfg.intrinsics;
        sample.pelvis_depth_mm = depth;
        // Pelvis (hip midpoint) maps to `offset`, pinning its depth.
        const Eigen::Vector3d mid_hip =
            0.5 * (to_eigen(skeleton.joints[11]) + to_eigen(skeleton.joints[12]));
        bool any_visible = false;
        for (int j = 0; j < kJointCount; ++j) {
            const std::size_t ji = static_cast<std::size_t>(j);
            const Eigen::Vector3d body = to_eigen(skeleton.joints[ji]);
            const Eigen::Vector3d cam = placement * (body - mid_hip) + offset;
            sample.joints_3d[ji] = from_eigen(cam);
            if (cam.z() > 0.0) {
                const Pixel px = project(sample.joints_3d[ji], cfg.intrinsics);
                sample.joints_2d[ji] = px;
                sample.visible[ji] = in_image(px, cfg.intrinsics);
            } else {
                sample.joints_2d[ji] = {0.0, 0.0};
                sample.visible[ji] = false;
            }
            any_visible = any_visible || sample.visible[ji];
        }
        if (any_visible) return sample;
    }
    throw DegenerateConfig("no visible joint after " + std::to_string(cfg.max_attempts) +
                           " scene attempts; check orientation/offset limits");
}

// Isotropic Gaussian pixel noise (std = noise_px) on visible joints only;
// the 3D joints and invisible annotations are untouched.
inline SceneSample perturb_annotations(const SceneSample &sample, double noise_px, Rng &rng) {
    if (!(noise_px >= 0.0)) throw ConfigError("annotation noise must be >= 0");
    SceneSample out = sample;
    if (noise_px == 0.0) return out;
    for (int j = 0; j < kJointCount; ++j) {
        const std::size_t ji = static_cast<std::size_t>(j);
        if (!out.visible[ji]) continue;
        out.joints_2d[ji].u += rng.normal(0.0, noise_px);
        out.joints_2d[ji].v += rng.normal(0.0, noise_px);
    }
    return out;
}

struct FilterResult {
    bool pass = false;
    double max_error_px = 0.0;
};

// Max reprojection error over visible joints; passes iff strictly below the
// threshold.
inline FilterResult reprojection_filter(const SceneSample &sample, double threshold_px) {
    double max_err = 0.0;
    bool any = false;
    for (int j = 0; j < kJointCount; ++j) {
        const std::size_t ji = static_cast<std::size_t>(j);
        if (!sample.visible[ji]) continue;
        any = true;
        const Pixel reproj = project(sample.joints_3d[ji], sample.intrinsics);
        const double du = sample.joints_2d[ji].u - reproj.u;
        const double dv = sample.joints_2d[ji].v - reproj.v;
        max_err = std::max(max_err, std::sqrt(du * du + dv * dv));
    }
    if (!any) throw NoVisibleJoints();
    return {max_err < threshold_px, max_err};
}

struct DatasetStats {
    std::int64_t attempted = 0;
    std::int64_t rejected_by_visibility = 0;
    std::int64_t rejected_by_filter = 0;
};

namespace detail {

struct AttemptOutcome {
    std::optional<SceneSample> sample; // engaged only for accepted attempts
    bool rejected_visibility = false;
    bool rejected_filter = false;
};

inline AttemptOutcome run_attempt(std::uint64_t master_seed, std::int64_t attempt,
                                  const SceneConfig &cfg) {
    const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(attempt));
    Rng rng(seed);
    SceneSample sample = sample_scene(rng, cfg);
    sample.seed = seed;
    AttemptOutcome out;
    if (sample.visible_count() <
        static_cast<int>(std::ceil(cfg.min_visible_fraction * kJointCount))) {
        out.rejected_visibility = true;
        return out;
    }
    sample = perturb_annotations(sample, cfg.noise_px, rng);
    const FilterResult filter = reprojection_filter(sample, cfg.filter_threshold_px);
    if (!filter.pass) {
        out.rejected_filter = true;
        return out;
    }
    out.sample = std::move(sample);
    return out;
}

} // namespace detail

// Produces exactly n accepted samples. Attempts are numbered from zero and
// seeded independently via derive_seed(master, attempt), so the output is
// byte-identical for a fixed seed regardless of worker count; ids are the
// acceptance order. Throws DegenerateConfig when the attempt budget runs out.
inline std::vector<SceneSample> generate_dataset(int n, const SceneConfig &cfg,
                                                 std::uint64_t master_seed,
                                                 DatasetStats *stats_out = nullptr,
                                                 std::int64_t max_total_attempts = -1) {
    if (n < 1) throw ConfigError("dataset size must be >= 1");
    cfg.validate();
    if (max_total_attempts < 0)
        max_total_attempts = std::max<std::int64_t>(10000, 1000LL * n);

    std::vector<SceneSample> accepted;
    accepted.reserve(static_cast<std::size_t>(n));
    DatasetStats stats;
    const std::size_t chunk = std::max<std::size_t>(64, 8 * worker_count());
    std::int64_t next_attempt = 0;
    while (static_cast<int>(accepted.size()) < n) {
        if (next_attempt >= max_total_attempts)
            throw DegenerateConfig("attempt budget exhausted after " +
                                   std::to_string(next_attempt) + " attempts (" +
                                   std::to_string(accepted.size()) + "/" + std::to_string(n) +
                                   " accepted)");
        const std::size_t batch = static_cast<std::size_t>(
            std::min<std::int64_t>(static_cast<std::int64_t>(chunk), max_total_attempts - next_attempt));
        std::vector<detail::AttemptOutcome> outcomes(batch);
        parallel_for(batch, [&](std::size_t i) {
            outcomes[i] = detail::run_attempt(master_seed, next_attempt + static_cast<std::int64_t>(i), cfg);
        });
        for (std::size_t i = 0; i < batch && static_cast<int>(accepted.size()) < n; ++i) {
            ++stats.attempted;
            detail::AttemptOutcome &o = outcomes[i];
            if (o.rejected_visibility) {
                ++stats.rejected_by_visibility;
            } else if (o.rejected_filter) {
                ++stats.rejected_by_filter;
            } else {
                o.sample->id = static_cast<std::int64_t>(accepted.size());
                accepted.push_back(std::move(*o.sample));
            }
        }
        next_attempt += static_cast<std::int64_t>(batch);
    }
    if (stats_out) *stats_out = stats;
    return accepted;
}

} // namespace taihri
