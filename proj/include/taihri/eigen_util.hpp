#pragma once

#include <Eigen/Core>

#include "taihri/camera.hpp"

namespace taihri {

inline Eigen::Vector3d to_eigen(const Point3Cam &p) { return {p.x, p.y, p.z}; }
inline Point3Cam from_eigen(const Eigen::Vector3d &v) { return {v.x(), v.y(), v.z()}; }

} // namespace taihri
