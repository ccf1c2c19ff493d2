#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taihri/errors.hpp"
#include "taihri/joints.hpp"
#include "taihri/keypoints.hpp"
#include "taihri/scene.hpp"

namespace taihri {

// Named joint subset used for task-focused evaluation.
struct PartConfig {
    std::string name;
    std::vector<std::string> joints;
};

// The four standard body-part configurations.
inline const std::vector<PartConfig> &standard_part_configs() {
    static const std::vector<PartConfig> configs = {
        {"upper", {"left_shoulder", "right_shoulder", "left_elbow", "right_elbow"}},
        {"lower", {"left_hip", "right_hip", "left_knee", "right_knee"}},
        {"l_upper", {"left_shoulder", "left_elbow", "left_wrist"}},
        {"r_upper", {"right_shoulder", "right_elbow", "right_wrist"}},
    };
    return configs;
}

inline const PartConfig &part_config(std::string_view name) {
    for (const PartConfig &c : standard_part_configs())
        if (c.name == name) return c;
    throw ConfigError("unknown part config '" + std::string(name) + "'");
}

// Mean camera-frame Euclidean error in millimeters over the ground-truth
// visible joints of `subset`. No root alignment, no rigid fitting: a uniform
// translation of the predictions shifts the metric by exactly its norm.
inline double gmpjpe(const KeypointSet &pred, const KeypointSet &gt,
                     std::span<const std::string> subset) {
    std::vector<double> errors;
    for (const std::string &name : subset) {
        const Keypoint &g = gt.at(name);
        const Keypoint &p = pred.at(name); // MissingJoint when absent
        if (!g.visible) continue;
        const double dx = p.position.x - g.position.x;
        const double dy = p.position.y - g.position.y;
        const double dz = p.position.z - g.position.z;
        errors.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    if (errors.empty()) throw NoVisibleJoints();
    std::sort(errors.begin(), errors.end());
    double total = 0.0;
    for (double e : errors) total += e;
    return total / static_cast<double>(errors.size());
}

// Rule-table realization of instruction-conditioned keypoint selection.
struct TaskSpec {
    std::string task_id;
    std::vector<std::string> keywords; // lowercase
    std::vector<std::string> joints;
};

struct TaskResolution {
    std::vector<std::string> joints;
    bool resolved = false;
    std::string task_id; // empty when unresolved
};

// Seed registry of interaction tasks mapping instruction keywords onto the
// part configurations (or custom joint sets).
inline const std::vector<TaskSpec> &default_task_registry() {
    auto joints_of = [](std::string_view config) { return part_config(config).joints; };
    static const std::vector<TaskSpec> registry = {
        {"handshake", {"shake hands", "handshake", "shaking hands"}, joints_of("r_upper")},
        {"handover", {"hand over", "handover", "take the object"}, joints_of("r_upper")},
        {"high_five", {"high five"}, {"right_wrist", "right_elbow"}},
        {"shoulder_massage", {"shoulder massage", "massage"}, joints_of("upper")},
        {"wheelchair_lift", {"lift the person", "wheelchair"}, joints_of("upper")},
        {"stand_assist_left", {"stand from left", "assist from the left"}, joints_of("l_upper")},
        {"stand_assist_right", {"stand from right", "assist from the right"}, joints_of("r_upper")},
        {"walk_support", {"support walking", "walking support"},
         {"left_elbow", "left_wrist", "right_elbow", "right_wrist"}},
        {"sit_assist", {"assist to sit", "sit down"}, joints_of("lower")},
        {"gait_check", {"gait"}, joints_of("lower")},
        {"carry_together", {"carry together", "carry the stretcher"},
         {"left_wrist", "right_wrist"}},
        {"head_care", {"comb", "wash hair"},
         {"nose", "left_eye", "right_eye", "left_ear", "right_ear"}},
    };
    return registry;
}

namespace detail {

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char &c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

} // namespace detail

// Case-folded keyword matching, longest keyword first. Unmatched instructions
// fall back to the full vocabulary with resolved = false; the function is
// total.
inline TaskResolution resolve_task(std::string_view instruction,
                                   std::span<const TaskSpec> registry) {
    const std::string folded = detail::ascii_lower(instruction);
    const TaskSpec *best = nullptr;
    std::size_t best_len = 0;
    for (const TaskSpec &spec : registry) {
        for (const std::string &keyword : spec.keywords) {
            if (keyword.empty() || keyword.size() < best_len) continue;
            if (folded.find(keyword) == std::string::npos) continue;
            if (keyword.size() > best_len) {
                best = &spec;
                best_len = keyword.size();
            }
        }
    }
    if (best) return {best->joints, true, best->task_id};
    TaskResolution fallback;
    fallback.joints.reserve(kJointNames.size());
    for (std::string_view name : kJointNames) fallback.joints.emplace_back(name);
    return fallback;
}

struct ConfigResult {
    std::string name;
    double gmpjpe_mm = 0.0;
    std::int64_t samples_evaluated = 0;
    std::int64_t samples_excluded = 0; // no visible subset joint in the ground truth
    std::int64_t joints_evaluated = 0;
};

struct EvalReport {
    std::vector<ConfigResult> configs;
    std::map<std::string, double> per_joint_mean_mm; // joints with >= 1 visible evaluation
    std::int64_t sample_count = 0;
};

using Predictor = std::function<KeypointSet(const SceneSample &)>;

// Per-config G-MPJPE aggregated sample-by-sample: joints are weighted equally
// within a sample, then samples are averaged. Aggregation is order-canonical,
// so shuffling the dataset leaves the report bit-identical.
inline EvalReport run_benchmark(std::span<const SceneSample> dataset, const Predictor &predictor,
                                std::span<const PartConfig> configs) {
    EvalReport report;
    report.sample_count = static_cast<std::int64_t>(dataset.size());

    std::vector<KeypointSet> predictions;
    predictions.reserve(dataset.size());
    std::vector<KeypointSet> truths;
    truths.reserve(dataset.size());
    for (const SceneSample &sample : dataset) {
        predictions.push_back(predictor(sample));
        truths.push_back(sample.keypoints());
    }

    for (const PartConfig &config : configs) {
        ConfigResult result;
        result.name = config.name;
        std::vector<double> sample_means;
        for (std::size_t s = 0; s < dataset.size(); ++s) {
            try {
                sample_means.push_back(gmpjpe(predictions[s], truths[s], config.joints));
                std::int64_t visible = 0;
                for (const std::string &j : config.joints)
                    if (truths[s].at(j).visible) ++visible;
                result.joints_evaluated += visible;
            } catch (const NoVisibleJoints &) {
                ++result.samples_excluded;
            }
        }
        result.samples_evaluated = static_cast<std::int64_t>(sample_means.size());
        if (!sample_means.empty()) {
            std::sort(sample_means.begin(), sample_means.end());
            double total = 0.0;
            for (double m : sample_means) total += m;
            result.gmpjpe_mm = total / static_cast<double>(sample_means.size());
        }
        report.configs.push_back(std::move(result));
    }

    // Per-joint means over samples where the joint is ground-truth visible.
    for (std::string_view name : kJointNames) {
        std::vector<double> errors;
        for (std::size_t s = 0; s < dataset.size(); ++s) {
            if (!truths[s].has(name) || !truths[s].at(name).visible) continue;
            if (!predictions[s].has(name)) continue;
            const Point3Cam &g = truths[s].at(name).position;
            const Point3Cam &p = predictions[s].at(name).position;
            const double dx = p.x - g.x, dy = p.y - g.y, dz = p.z - g.z;
            errors.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
        }
        if (errors.empty()) continue;
        std::sort(errors.begin(), errors.end());
        double total = 0.0;
        for (double e : errors) total += e;
        report.per_joint_mean_mm[std::string(name)] = total / static_cast<double>(errors.size());
    }
    return report;
}

} // namespace taihri
