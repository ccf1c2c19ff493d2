#pragma once

#include <array>
#include <string_view>

namespace taihri {

// Canonical 17-joint vocabulary (COCO order). All name-keyed containers in
// the library iterate in this order.
inline constexpr std::array<std::string_view, 17> kJointNames = {
    "nose",          "left_eye",      "right_eye",  "left_ear",    "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
    "right_wrist",   "left_hip",      "right_hip",  "left_knee",   "right_knee",
    "left_ankle",    "right_ankle"};

inline constexpr int kJointCount = static_cast<int>(kJointNames.size());

// Index of `name` in the vocabulary, or -1 if unknown.
inline int joint_index(std::string_view name) {
    for (int i = 0; i < kJointCount; ++i) {
        if (kJointNames[static_cast<std::size_t>(i)] == name) return i;
    }
    return -1;
}

inline bool is_joint_name(std::string_view name) { return joint_index(name) >= 0; }

} // namespace taihri
