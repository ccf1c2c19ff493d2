#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <string>
#include <vector>

#include "taihri/camera.hpp"
#include "taihri/eigen_util.hpp"
#include "taihri/errors.hpp"
#include "taihri/keypoints.hpp"

namespace taihri {

// Proper rigid motion: p' = R p + t, with R orthonormal and det(R) = +1.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    void validate() const {
        const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
                                 .cwiseAbs()
                                 .maxCoeff();
        if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
            throw ConfigError("rotation must be orthonormal with determinant +1");
    }

    Point3Cam apply(const Point3Cam &p) const { return from_eigen(rotation * to_eigen(p) + translation); }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        return inv;
    }

    static RigidTransform identity() { return {}; }
};

// Name-matched anchor pairs: `source` in the root-relative frame, `target`
// the predicted camera-frame points.
struct AnchorCorrespondence {
    std::vector<std::string> names;
    std::vector<Point3Cam> source;
    std::vector<Point3Cam> target;

    std::size_t size() const { return source.size(); }

    void validate() const {
        if (source.size() != target.size() || source.size() != names.size())
            throw ConfigError("anchor correspondence arrays must have equal length");
        if (source.empty()) throw TooFewAnchors(0, 1);
    }
};

namespace detail {

inline Eigen::Vector3d centroid(const std::vector<Point3Cam> &pts) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const Point3Cam &p : pts) c += to_eigen(p);
    return c / static_cast<double>(pts.size());
}

// Smallest rotation taking unit vector `a` onto unit vector `b`. Antiparallel
// inputs rotate pi about an arbitrary perpendicular axis.
inline Eigen::Matrix3d rotation_between(const Eigen::Vector3d &a, const Eigen::Vector3d &b) {
    const Eigen::Vector3d axis = a.cross(b);
    const double sin_angle = axis.norm();
    const double cos_angle = a.dot(b);
    if (sin_angle < 1e-12) {
        if (cos_angle > 0.0) return Eigen::Matrix3d::Identity();
        Eigen::Vector3d perp = a.unitOrthogonal();
        return Eigen::AngleAxisd(3.14159265358979323846, perp).toRotationMatrix();
    }
    return Eigen::AngleAxisd(std::atan2(sin_angle, cos_angle), axis / sin_angle).toRotationMatrix();
}

} // namespace detail

// Least-squares rigid transform (rotation + translation, no scale) minimizing
// sum ||R s_i + t - d_i||^2: centroid subtraction, SVD of the cross-covariance,
// reflection correction via the determinant sign.
inline RigidTransform kabsch(const AnchorCorrespondence &corr) {
    corr.validate();
    const std::size_t n = corr.size();
    if (n < 3) throw TooFewAnchors(n, 3);

    const Eigen::Vector3d mu_s = detail::centroid(corr.source);
    const Eigen::Vector3d mu_d = detail::centroid(corr.target);

    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d s = to_eigen(corr.source[i]) - mu_s;
        cross += (to_eigen(corr.target[i]) - mu_d) * s.transpose();
        spread = std::max(spread, s.norm());
    }

    // Collinear sources leave a one-dimensional null space: the rotation about
    // the line is unconstrained. Detect via the second singular value of the
    // centered source spread.
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d s = to_eigen(corr.source[i]) - mu_s;
        scatter += s * s.transpose();
    }
    Eigen::JacobiSVD<Eigen::Matrix3d> scatter_svd(scatter);
    const double s0 = scatter_svd.singularValues()(0);
    const double s1 = scatter_svd.singularValues()(1);
    if (!(s0 > 0.0) || s1 <= 1e-12 * s0) throw CollinearAnchors();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d sign = Eigen::Matrix3d::Identity();
    sign(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;

    RigidTransform out;
    out.rotation = svd.matrixU() * sign * svd.matrixV().transpose();
    out.translation = mu_d - out.rotation * mu_s;
    return out;
}

// Anchor-count dispatch:
//   N = 1  pure translation;
//   N = 2  midpoint translation plus the minimal-angle rotation taking the
//          source segment direction onto the target direction (no roll about
//          the segment axis -- that degree of freedom is unobservable);
//   N >= 3 full Kabsch.
inline RigidTransform align_with_anchors(const AnchorCorrespondence &corr) {
    corr.validate();
    const std::size_t n = corr.size();
    if (n == 1) {
        RigidTransform out;
        out.translation = to_eigen(corr.target[0]) - to_eigen(corr.source[0]);
        return out;
    }
    if (n == 2) {
        const Eigen::Vector3d ds = to_eigen(corr.source[1]) - to_eigen(corr.source[0]);
        const Eigen::Vector3d dd = to_eigen(corr.target[1]) - to_eigen(corr.target[0]);
        if (ds.norm() < 1e-9 || dd.norm() < 1e-9) throw CoincidentPair();
        RigidTransform out;
        out.rotation = detail::rotation_between(ds.normalized(), dd.normalized());
        const Eigen::Vector3d mid_s = 0.5 * (to_eigen(corr.source[0]) + to_eigen(corr.source[1]));
        const Eigen::Vector3d mid_d = 0.5 * (to_eigen(corr.target[0]) + to_eigen(corr.target[1]));
        out.translation = mid_d - out.rotation * mid_s;
        return out;
    }
    return kabsch(corr);
}

// Similarity extension for ablation: p' = scale * R * p + t. The rigid path
// is the default; predicted keypoints and the mesh are both metric, so the
// scale is off unless explicitly requested.
struct ScaledTransform {
    RigidTransform transform;
    double scale = 1.0;

    Point3Cam apply(const Point3Cam &p) const {
        return from_eigen(scale * (transform.rotation * to_eigen(p)) + transform.translation);
    }
};

// Umeyama-style least-squares similarity: the Kabsch rotation plus the
// closed-form scale sum <d_i - mu_d, R (s_i - mu_s)> / sum |s_i - mu_s|^2.
inline ScaledTransform kabsch_with_scale(const AnchorCorrespondence &corr) {
    ScaledTransform out;
    out.transform = kabsch(corr);
    const Eigen::Vector3d mu_s = detail::centroid(corr.source);
    const Eigen::Vector3d mu_d = detail::centroid(corr.target);
    double numer = 0.0, denom = 0.0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const Eigen::Vector3d s = to_eigen(corr.source[i]) - mu_s;
        const Eigen::Vector3d d = to_eigen(corr.target[i]) - mu_d;
        numer += d.dot(out.transform.rotation * s);
        denom += s.squaredNorm();
    }
    if (!(numer > 0.0) || !(denom > 0.0))
        throw ConfigError("similarity fit needs a positive optimal scale");
    out.scale = numer / denom;
    out.transform.translation = mu_d - out.scale * (out.transform.rotation * mu_s);
    return out;
}

// p' = R p + t for every joint; visibility flags are untouched.
inline KeypointSet apply_transform(const RigidTransform &transform, const KeypointSet &points) {
    transform.validate();
    KeypointSet out;
    points.for_each([&](std::string_view name, const Keypoint &kp) {
        out.set(name, transform.apply(kp.position), kp.visible);
    });
    return out;
}

inline KeypointSet apply_transform(const ScaledTransform &transform, const KeypointSet &points) {
    transform.transform.validate();
    KeypointSet out;
    points.for_each([&](std::string_view name, const Keypoint &kp) {
        out.set(name, transform.apply(kp.position), kp.visible);
    });
    return out;
}

// Root-mean-square residual of the correspondence under `transform`.
inline double anchor_residual(const RigidTransform &transform, const AnchorCorrespondence &corr) {
    corr.validate();
    double total = 0.0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const Eigen::Vector3d r =
            transform.rotation * to_eigen(corr.source[i]) + transform.translation -
            to_eigen(corr.target[i]);
        total += r.squaredNorm();
    }
    return std::sqrt(total / static_cast<double>(corr.size()));
}

} // namespace taihri
