#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "taihri/errors.hpp"

namespace taihri {

// Pose-aware reward parameters. Units follow the error modality: millimeters
// for 3D configs, pixels for 2D ones. tau carries the units of the Huber
// aggregate E (quadratic below delta), not of raw distance.
struct RewardConfig {
    double delta = 0.0;  // Huber knee
    double kappa = 0.0;  // PCK success threshold (strict <)
    double tau = 0.0;    // temperature of the exp(-E/tau) term
    double lambda = 0.0; // mixing weight of the exp term, in [0, 1]

    void validate() const {
        if (!(delta > 0.0) || !(kappa > 0.0) || !(tau > 0.0))
            throw ConfigError("reward config needs delta, kappa, tau > 0");
        if (!(lambda >= 0.0) || !(lambda <= 1.0))
            throw ConfigError("reward config needs lambda in [0, 1]");
    }

    static RewardConfig default_3d() { return {100.0, 150.0, 2500.0, 0.5}; }
    static RewardConfig default_2d() { return {10.0, 15.0, 250.0, 0.5}; }
};

// Per-joint errors with the visibility mask V. Invisible joints never
// contribute to any term.
struct JointErrors {
    std::vector<double> distances;
    std::vector<bool> visibility;

    std::size_t size() const { return distances.size(); }

    void validate() const {
        if (distances.size() != visibility.size())
            throw ConfigError("joint errors and visibility differ in length");
        for (std::size_t i = 0; i < distances.size(); ++i)
            if (!(std::isfinite(distances[i]) && distances[i] >= 0.0))
                throw ConfigError("joint distances must be finite and nonnegative");
    }
};

// rho_delta(d) = d^2/2 for d <= delta, delta*(d - delta/2) above. Continuous
// with continuous first derivative at the knee.
inline double huber(double d, double delta) {
    if (d <= delta) return 0.5 * d * d;
    return delta * (d - 0.5 * delta);
}

namespace detail {

// Sum in value order so the result does not depend on joint order.
inline double ordered_sum(std::vector<double> &values) {
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) total += v;
    return total;
}

} // namespace detail

// E = mean of huber(d_j, delta) over visible joints.
inline double aggregate_error(const JointErrors &errs, double delta) {
    errs.validate();
    std::vector<double> terms;
    for (std::size_t i = 0; i < errs.size(); ++i)
        if (errs.visibility[i]) terms.push_back(huber(errs.distances[i], delta));
    if (terms.empty()) throw NoVisibleJoints();
    return detail::ordered_sum(terms) / static_cast<double>(terms.size());
}

// r = lambda * exp(-E / tau) + (1 - lambda) * (1/|V|) sum 1(d_j < kappa).
// Strictly positive whenever lambda > 0; always <= 1. The PCK test is a
// strict inequality: a distance exactly at kappa counts as failure.
inline double pose_reward(const JointErrors &errs, const RewardConfig &cfg) {
    cfg.validate();
    errs.validate();
    std::size_t visible = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < errs.size(); ++i) {
        if (!errs.visibility[i]) continue;
        ++visible;
        if (errs.distances[i] < cfg.kappa) ++hits;
    }
    if (visible == 0) throw NoVisibleJoints();
    const double energy = aggregate_error(errs, cfg.delta);
    const double pck = static_cast<double>(hits) / static_cast<double>(visible);
    return cfg.lambda * std::exp(-energy / cfg.tau) + (1.0 - cfg.lambda) * pck;
}

// Equal-weight combination of the 3D and 2D rewards. The split between the
// modalities is a declared convention; both components are also exposed.
inline double combined_reward(const JointErrors &errs_3d, const RewardConfig &cfg_3d,
                              const JointErrors &errs_2d, const RewardConfig &cfg_2d) {
    return 0.5 * pose_reward(errs_3d, cfg_3d) + 0.5 * pose_reward(errs_2d, cfg_2d);
}

} // namespace taihri
