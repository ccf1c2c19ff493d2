#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "taihri/scene.hpp"

using namespace taihri;

namespace {

SceneConfig default_config() { return SceneConfig{}; }

} // namespace

TEST_CASE("zero articulation reproduces the T-pose with exact bone lengths") {
    const std::vector<BoneSpec> &bones = skeleton_bones();
    std::vector<double> scales(bones.size(), 1.0);
    std::vector<Eigen::Vector3d> angles(bones.size(), Eigen::Vector3d::Zero());
    const SkeletonPose pose = make_skeleton(scales, angles);
    for (std::size_t b = 0; b < bones.size(); ++b) {
        const Point3Cam &parent = pose.joints[static_cast<std::size_t>(bones[b].parent)];
        const Point3Cam &child = pose.joints[static_cast<std::size_t>(bones[b].child)];
        const double dx = child.x - parent.x, dy = child.y - parent.y, dz = child.z - parent.z;
        const double length = std::sqrt(dx * dx + dy * dy + dz * dz);
        REQUIRE(std::abs(length - bones[b].rest_offset_mm.norm()) < 1e-6);
    }
    // Joints are rooted at left_hip; the hips stay symmetric about their midpoint.
    CHECK(pose.joints[12].x - pose.joints[11].x == Catch::Approx(-190.0));
    CHECK(pose.joints[12].y == Catch::Approx(pose.joints[11].y));
}

TEST_CASE("articulated skeletons keep configured bone lengths") {
    const std::vector<BoneSpec> &bones = skeleton_bones();
    Rng rng(51);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scales(bones.size());
        std::vector<Eigen::Vector3d> angles(bones.size());
        for (std::size_t b = 0; b < bones.size(); ++b) {
            scales[b] = rng.uniform(0.8, 1.2);
            angles[b] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        }
        const SkeletonPose pose = make_skeleton(scales, angles);
        for (std::size_t b = 0; b < bones.size(); ++b) {
            const Point3Cam &parent = pose.joints[static_cast<std::size_t>(bones[b].parent)];
            const Point3Cam &child = pose.joints[static_cast<std::size_t>(bones[b].child)];
            const double dx = child.x - parent.x, dy = child.y - parent.y, dz = child.z - parent.z;
            const double length = std::sqrt(dx * dx + dy * dy + dz * dz);
            REQUIRE(std::abs(length - scales[b] * bones[b].rest_offset_mm.norm()) < 1e-6);
        }
    }
}

TEST_CASE("sample_scene keeps pelvis depth in the configured range") {
    const SceneConfig cfg = default_config();
    Rng rng(52);
    for (int i = 0; i < 2000; ++i) {
        const SceneSample sample = sample_scene(rng, cfg);
        REQUIRE(sample.pelvis_depth_mm >= cfg.min_distance_mm);
        REQUIRE(sample.pelvis_depth_mm <= cfg.max_distance_mm);
        REQUIRE(sample.visible_count() >= 1);
    }
}

TEST_CASE("sample_scene visible joints project inside the image") {
    const SceneConfig cfg = default_config();
    Rng rng(53);
    for (int i = 0; i < 500; ++i) {
        const SceneSample sample = sample_scene(rng, cfg);
        for (int j = 0; j < kJointCount; ++j) {
            const std::size_t ji = static_cast<std::size_t>(j);
            if (!sample.visible[ji]) continue;
            REQUIRE(in_image(sample.joints_2d[ji], cfg.intrinsics));
            const Pixel reproj = project(sample.joints_3d[ji], cfg.intrinsics);
            REQUIRE(sample.joints_2d[ji].u == reproj.u);
            REQUIRE(sample.joints_2d[ji].v == reproj.v);
        }
    }
}

TEST_CASE("sample_scene raises DegenerateConfig when the subject cannot be seen") {
    SceneConfig cfg = default_config();
    cfg.lateral_fraction = 200.0; // pelvis offset far outside the frustum
    cfg.max_attempts = 50;
    Rng rng(54);
    CHECK_THROWS_AS(sample_scene(rng, cfg), DegenerateConfig);
}

TEST_CASE("perturb_annotations with zero noise is the identity") {
    const SceneConfig cfg = default_config();
    Rng rng(55);
    const SceneSample sample = sample_scene(rng, cfg);
    Rng noise_rng(56);
    const SceneSample out = perturb_annotations(sample, 0.0, noise_rng);
    for (int j = 0; j < kJointCount; ++j) {
        const std::size_t ji = static_cast<std::size_t>(j);
        REQUIRE(out.joints_2d[ji].u == sample.joints_2d[ji].u);
        REQUIRE(out.joints_2d[ji].v == sample.joints_2d[ji].v);
    }
}

TEST_CASE("perturb_annotations leaves invisible joints and 3D untouched") {
    const SceneConfig cfg = default_config();
    Rng rng(57);
    const SceneSample sample = sample_scene(rng, cfg);
    Rng noise_rng(58);
    const SceneSample out = perturb_annotations(sample, 25.0, noise_rng);
    for (int j = 0; j < kJointCount; ++j) {
        const std::size_t ji = static_cast<std::size_t>(j);
        REQUIRE(out.joints_3d[ji].x == sample.joints_3d[ji].x);
        REQUIRE(out.joints_3d[ji].z == sample.joints_3d[ji].z);
        if (!sample.visible[ji]) {
            REQUIRE(out.joints_2d[ji].u == sample.joints_2d[ji].u);
            REQUIRE(out.joints_2d[ji].v == sample.joints_2d[ji].v);
        }
    }
}

TEST_CASE("perturb_annotations noise has the requested standard deviation") {
    SceneSample sample;
    sample.intrinsics = default_config().intrinsics;
    for (int j = 0; j < kJointCount; ++j) {
        sample.joints_3d[static_cast<std::size_t>(j)] = {0.0, 0.0, 1000.0};
        sample.joints_2d[static_cast<std::size_t>(j)] = {640.0, 360.0};
        sample.visible[static_cast<std::size_t>(j)] = true;
    }
    Rng rng(59);
    double sq_sum = 0.0;
    std::int64_t count = 0;
    for (int trial = 0; trial < 600; ++trial) {
        const SceneSample out = perturb_annotations(sample, 5.0, rng);
        for (int j = 0; j < kJointCount; ++j) {
            const std::size_t ji = static_cast<std::size_t>(j);
            const double du = out.joints_2d[ji].u - 640.0;
            const double dv = out.joints_2d[ji].v - 360.0;
            sq_sum += du * du + dv * dv;
            count += 2;
        }
    }
    const double std_hat = std::sqrt(sq_sum / static_cast<double>(count));
    CHECK(std_hat == Catch::Approx(5.0).epsilon(0.05));
}

TEST_CASE("reprojection_filter passes exact annotations with zero error") {
    const SceneConfig cfg = default_config();
    Rng rng(60);
    const SceneSample sample = sample_scene(rng, cfg);
    const FilterResult result = reprojection_filter(sample, 15.0);
    CHECK(result.pass);
    CHECK(result.max_error_px == 0.0);
}

TEST_CASE("reprojection_filter reports the displaced joint") {
    const SceneConfig cfg = default_config();
    Rng rng(61);
    SceneSample sample = sample_scene(rng, cfg);
    int target = -1;
    for (int j = 0; j < kJointCount; ++j)
        if (sample.visible[static_cast<std::size_t>(j)]) {
            target = j;
            break;
        }
    REQUIRE(target >= 0);
    sample.joints_2d[static_cast<std::size_t>(target)].u += 20.0;
    const FilterResult result = reprojection_filter(sample, 15.0);
    CHECK_FALSE(result.pass);
    CHECK(result.max_error_px == Catch::Approx(20.0));
}

TEST_CASE("reprojection_filter needs a visible joint") {
    SceneSample sample;
    sample.intrinsics = default_config().intrinsics;
    for (int j = 0; j < kJointCount; ++j) {
        sample.joints_3d[static_cast<std::size_t>(j)] = {0.0, 0.0, 1000.0};
        sample.joints_2d[static_cast<std::size_t>(j)] = {0.0, 0.0};
    }
    CHECK_THROWS_AS(reprojection_filter(sample, 15.0), NoVisibleJoints);
}

TEST_CASE("generate_dataset emits exactly n clean samples without noise") {
    const SceneConfig cfg = default_config();
    DatasetStats stats;
    const std::vector<SceneSample> data = generate_dataset(100, cfg, 7, &stats);
    REQUIRE(data.size() == 100);
    CHECK(stats.rejected_by_filter == 0);
    CHECK(stats.attempted >= 100);
    for (std::size_t i = 0; i < data.size(); ++i) {
        REQUIRE(data[i].id == static_cast<std::int64_t>(i));
        REQUIRE(data[i].pelvis_depth_mm >= 500.0);
        REQUIRE(data[i].pelvis_depth_mm <= 3000.0);
        REQUIRE(data[i].visible_count() >= 7); // 40% visibility gate
    }
}

TEST_CASE("generate_dataset rejects n < 1") {
    const SceneConfig cfg = default_config();
    CHECK_THROWS_AS(generate_dataset(0, cfg, 7), ConfigError);
}

TEST_CASE("generate_dataset gives up when the filter rejects everything") {
    SceneConfig cfg = default_config();
    cfg.noise_px = 30.0; // essentially every sample fails the 15 px filter
    CHECK_THROWS_AS(generate_dataset(10, cfg, 7, nullptr, 2000), DegenerateConfig);
}

TEST_CASE("generate_dataset is deterministic per seed and differs across seeds") {
    const SceneConfig cfg = default_config();
    const std::vector<SceneSample> a = generate_dataset(25, cfg, 7);
    const std::vector<SceneSample> b = generate_dataset(25, cfg, 7);
    const std::vector<SceneSample> c = generate_dataset(25, cfg, 8);
    REQUIRE(a.size() == b.size());
    bool differs_from_c = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].seed == b[i].seed);
        REQUIRE(a[i].pelvis_depth_mm == b[i].pelvis_depth_mm);
        for (int j = 0; j < kJointCount; ++j) {
            const std::size_t ji = static_cast<std::size_t>(j);
            REQUIRE(a[i].joints_3d[ji].x == b[i].joints_3d[ji].x);
            REQUIRE(a[i].joints_2d[ji].u == b[i].joints_2d[ji].u);
            REQUIRE(a[i].visible[ji] == b[i].visible[ji]);
        }
        differs_from_c |= a[i].pelvis_depth_mm != c[i].pelvis_depth_mm;
    }
    CHECK(differs_from_c);
}

TEST_CASE("worker count honors TAIHRI_KIT_THREADS") {
    setenv("TAIHRI_KIT_THREADS", "3", 1);
    CHECK(worker_count() == 3);
    setenv("TAIHRI_KIT_THREADS", "0", 1); // invalid values fall back to hardware
    CHECK(worker_count() >= 1);
    unsetenv("TAIHRI_KIT_THREADS");
}

TEST_CASE("generate_dataset output does not depend on the worker count") {
    const SceneConfig cfg = default_config();
    setenv("TAIHRI_KIT_THREADS", "1", 1);
    const std::vector<SceneSample> serial = generate_dataset(30, cfg, 7);
    setenv("TAIHRI_KIT_THREADS", "4", 1);
    const std::vector<SceneSample> parallel = generate_dataset(30, cfg, 7);
    unsetenv("TAIHRI_KIT_THREADS");
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        REQUIRE(serial[i].seed == parallel[i].seed);
        REQUIRE(serial[i].pelvis_depth_mm == parallel[i].pelvis_depth_mm);
        for (int j = 0; j < kJointCount; ++j) {
            const std::size_t ji = static_cast<std::size_t>(j);
            REQUIRE(serial[i].joints_2d[ji].u == parallel[i].joints_2d[ji].u);
            REQUIRE(serial[i].joints_3d[ji].z == parallel[i].joints_3d[ji].z);
        }
    }
}

TEST_CASE("noise is reconstructable from the stored per-sample seed") {
    SceneConfig cfg = default_config();
    cfg.noise_px = 3.0;
    cfg.filter_threshold_px = 1e9; // accept everything; isolate the noise path
    DatasetStats stats;
    const std::vector<SceneSample> data = generate_dataset(5, cfg, 42, &stats);
    for (const SceneSample &sample : data) {
        Rng replay(sample.seed);
        SceneSample clean = sample_scene(replay, cfg);
        clean.seed = sample.seed;
        const SceneSample reperturbed = perturb_annotations(clean, cfg.noise_px, replay);
        for (int j = 0; j < kJointCount; ++j) {
            const std::size_t ji = static_cast<std::size_t>(j);
            REQUIRE(reperturbed.joints_2d[ji].u == sample.joints_2d[ji].u);
            REQUIRE(reperturbed.joints_2d[ji].v == sample.joints_2d[ji].v);
        }
    }
}
