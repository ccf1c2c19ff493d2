#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "taihri/camera.hpp"
#include "taihri/errors.hpp"
#include "taihri/joints.hpp"

namespace taihri {

struct Keypoint {
    Point3Cam position; // camera frame, millimeters
    bool visible = true;
};

// Named 3D joints with per-joint visibility. Slots follow the canonical
// vocabulary order; a joint may be absent entirely (never observed) which is
// distinct from present-but-invisible.
class KeypointSet {
  public:
    bool has(std::string_view name) const {
        const int i = joint_index(name);
        return i >= 0 && slots_[static_cast<std::size_t>(i)].has_value();
    }

    void set(std::string_view name, const Point3Cam &p, bool visible = true) {
        slots_[slot_of(name)] = Keypoint{p, visible};
    }

    const Keypoint &at(std::string_view name) const {
        const auto &slot = slots_[slot_of(name)];
        if (!slot) throw MissingJoint(std::string(name));
        return *slot;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto &s : slots_)
            if (s) ++n;
        return n;
    }

    // Iteration in vocabulary order over present joints.
    template <typename Fn> void for_each(Fn &&fn) const {
        for (std::size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i]) fn(kJointNames[i], *slots_[i]);
    }

  private:
    static std::size_t slot_of(std::string_view name) {
        const int i = joint_index(name);
        if (i < 0) throw MissingJoint(std::string(name));
        return static_cast<std::size_t>(i);
    }

    std::array<std::optional<Keypoint>, kJointNames.size()> slots_;
};

} // namespace taihri
