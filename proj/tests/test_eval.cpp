#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>

#include "taihri/eval.hpp"
#include "taihri/scene.hpp"

using namespace taihri;

namespace {

KeypointSet full_set(const Point3Cam &base, double spacing) {
    KeypointSet set;
    for (int j = 0; j < kJointCount; ++j)
        set.set(kJointNames[static_cast<std::size_t>(j)],
                {base.x + spacing * j, base.y, base.z + 1000.0});
    return set;
}

std::vector<SceneSample> small_dataset(std::uint64_t seed, int n) {
    SceneConfig cfg;
    return generate_dataset(n, cfg, seed);
}

} // namespace

TEST_CASE("the four part configurations carry their defining joints") {
    CHECK(part_config("upper").joints ==
          std::vector<std::string>{"left_shoulder", "right_shoulder", "left_elbow", "right_elbow"});
    CHECK(part_config("lower").joints ==
          std::vector<std::string>{"left_hip", "right_hip", "left_knee", "right_knee"});
    CHECK(part_config("l_upper").joints ==
          std::vector<std::string>{"left_shoulder", "left_elbow", "left_wrist"});
    CHECK(part_config("r_upper").joints ==
          std::vector<std::string>{"right_shoulder", "right_elbow", "right_wrist"});
    CHECK_THROWS_AS(part_config("torso"), ConfigError);
}

TEST_CASE("gmpjpe of identical sets is zero") {
    const KeypointSet set = full_set({0.0, 0.0, 0.0}, 10.0);
    CHECK(gmpjpe(set, set, part_config("upper").joints) == 0.0);
}

TEST_CASE("gmpjpe averages one displaced joint over the subset") {
    const KeypointSet gt = full_set({0.0, 0.0, 0.0}, 10.0);
    KeypointSet pred = gt;
    const Keypoint &shoulder = gt.at("left_shoulder");
    pred.set("left_shoulder",
             {shoulder.position.x + 3.0, shoulder.position.y + 4.0, shoulder.position.z});
    CHECK(gmpjpe(pred, gt, part_config("upper").joints) == Catch::Approx(1.25));
}

TEST_CASE("gmpjpe raises MissingJoint for absent subset joints") {
    const KeypointSet gt = full_set({0.0, 0.0, 0.0}, 10.0);
    KeypointSet pred;
    pred.set("left_shoulder", {0.0, 0.0, 1000.0});
    CHECK_THROWS_AS(gmpjpe(pred, gt, part_config("upper").joints), MissingJoint);
}

TEST_CASE("gmpjpe skips invisible ground-truth joints") {
    KeypointSet gt = full_set({0.0, 0.0, 0.0}, 10.0);
    KeypointSet pred = gt;
    gt.set("left_shoulder", gt.at("left_shoulder").position, false);
    pred.set("left_shoulder", {1e6, 1e6, 1e6});
    CHECK(gmpjpe(pred, gt, part_config("upper").joints) == 0.0);

    KeypointSet all_hidden = gt;
    for (const std::string &j : part_config("upper").joints)
        all_hidden.set(j, gt.at(j).position, false);
    CHECK_THROWS_AS(gmpjpe(pred, all_hidden, part_config("upper").joints), NoVisibleJoints);
}

TEST_CASE("gmpjpe is translation sensitive by exactly the offset norm") {
    const KeypointSet gt = full_set({0.0, 0.0, 0.0}, 10.0);
    KeypointSet pred;
    gt.for_each([&](std::string_view name, const Keypoint &kp) {
        pred.set(name, {kp.position.x + 3.0, kp.position.y - 6.0, kp.position.z + 2.0}, kp.visible);
    });
    const double expected = std::sqrt(3.0 * 3.0 + 6.0 * 6.0 + 2.0 * 2.0);
    for (const PartConfig &config : standard_part_configs())
        CHECK(gmpjpe(pred, gt, config.joints) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("resolve_task maps a handshake instruction to the right arm") {
    const TaskResolution res =
        resolve_task("please shake hands with the user", default_task_registry());
    CHECK(res.resolved);
    CHECK(res.task_id == "handshake");
    CHECK(res.joints == part_config("r_upper").joints);
}

TEST_CASE("resolve_task folds case") {
    const TaskResolution res = resolve_task("LIFT THE PERSON carefully", default_task_registry());
    CHECK(res.resolved);
    CHECK(res.task_id == "wheelchair_lift");
}

TEST_CASE("resolve_task prefers the longest matching keyword") {
    const std::vector<TaskSpec> registry = {
        {"generic", {"hand"}, {"left_wrist"}},
        {"specific", {"shake hands"}, {"right_wrist"}},
    };
    const TaskResolution res = resolve_task("let us shake hands", registry);
    CHECK(res.task_id == "specific");
}

TEST_CASE("resolve_task falls back to the full vocabulary") {
    const TaskResolution res = resolve_task("do something unmapped", default_task_registry());
    CHECK_FALSE(res.resolved);
    CHECK(res.joints.size() == kJointNames.size());

    const std::vector<TaskSpec> empty_registry;
    const TaskResolution empty = resolve_task("shake hands", empty_registry);
    CHECK_FALSE(empty.resolved);
    CHECK(empty.joints.size() == kJointNames.size());
}

TEST_CASE("run_benchmark scores the identity predictor at zero") {
    const std::vector<SceneSample> data = small_dataset(7, 40);
    const EvalReport report = run_benchmark(
        data, [](const SceneSample &s) { return s.keypoints(); }, standard_part_configs());
    REQUIRE(report.configs.size() == 4);
    for (const ConfigResult &c : report.configs) {
        CHECK(c.gmpjpe_mm == 0.0);
        CHECK(c.samples_evaluated + c.samples_excluded == 40);
    }
}

TEST_CASE("run_benchmark scores a uniform offset at exactly its norm") {
    const std::vector<SceneSample> data = small_dataset(8, 40);
    const Predictor offset = [](const SceneSample &s) {
        KeypointSet out;
        s.keypoints().for_each([&](std::string_view name, const Keypoint &kp) {
            out.set(name, {kp.position.x + 10.0, kp.position.y, kp.position.z}, kp.visible);
        });
        return out;
    };
    const EvalReport report = run_benchmark(data, offset, standard_part_configs());
    for (const ConfigResult &c : report.configs) {
        if (c.samples_evaluated == 0) continue;
        CHECK(c.gmpjpe_mm == Catch::Approx(10.0).epsilon(1e-12));
    }
}

TEST_CASE("run_benchmark subset consistency on a single sample") {
    const std::vector<SceneSample> data = small_dataset(9, 1);
    const KeypointSet gt = data[0].keypoints();
    KeypointSet pred = gt;
    const PartConfig &upper = part_config("upper");
    double expected = 0.0;
    int visible = 0;
    for (const std::string &name : upper.joints) {
        const Keypoint &kp = gt.at(name);
        if (!kp.visible) continue;
        pred.set(name, {kp.position.x + 2.0 * (visible + 1), kp.position.y, kp.position.z});
        expected += 2.0 * (visible + 1);
        ++visible;
    }
    if (visible == 0) return; // this seed has no visible upper joints; nothing to check
    expected /= visible;
    CHECK(gmpjpe(pred, gt, upper.joints) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("run_benchmark is invariant to dataset order") {
    std::vector<SceneSample> data = small_dataset(10, 30);
    const Predictor predictor = [](const SceneSample &s) {
        KeypointSet out;
        s.keypoints().for_each([&](std::string_view name, const Keypoint &kp) {
            out.set(name, {kp.position.x + 5.0, kp.position.y - 2.0, kp.position.z}, kp.visible);
        });
        return out;
    };
    const EvalReport before = run_benchmark(data, predictor, standard_part_configs());
    std::reverse(data.begin(), data.end());
    const EvalReport after = run_benchmark(data, predictor, standard_part_configs());
    for (std::size_t c = 0; c < before.configs.size(); ++c) {
        REQUIRE(before.configs[c].gmpjpe_mm == after.configs[c].gmpjpe_mm);
        REQUIRE(before.configs[c].samples_evaluated == after.configs[c].samples_evaluated);
    }
    REQUIRE(before.per_joint_mean_mm == after.per_joint_mean_mm);
}
