#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "taihri/errors.hpp"
#include "taihri/joints.hpp"
#include "taihri/reward.hpp"
#include "taihri/rng.hpp"
#include "taihri/voxel.hpp"

namespace taihri {

struct GrpoConfig {
    int group_size = 8;        // K responses sampled per prompt
    double clip_epsilon = 0.2; // ratio clipping threshold
    double kl_beta = 0.01;     // weight of the KL penalty to the reference policy
    // The objective normalizes by prompts, group size, and response length,
    // so the raw gradient on the toy logits is small; 20 is tuned to converge
    // within a couple hundred steps at desk scale.
    double learning_rate = 20.0;
    int steps = 200;
    std::uint64_t seed = 7;

    void validate() const {
        if (group_size < 2) throw GroupTooSmall(static_cast<std::size_t>(group_size));
        if (!(clip_epsilon > 0.0)) throw ConfigError("clip epsilon must be > 0");
        if (!(kl_beta >= 0.0)) throw ConfigError("kl beta must be >= 0");
        if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
        if (steps < 0) throw ConfigError("step count must be >= 0");
    }
};

namespace detail {

// Neumaier compensated summation.
inline double compensated_sum(std::span<const double> values) {
    double sum = 0.0, comp = 0.0;
    for (double v : values) {
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    return sum + comp;
}

} // namespace detail

// Group-relative advantages A_i = r_i - mean(r). The mean uses compensated
// summation and the last element absorbs the floating-point residual, so the
// returned values sum to exactly zero.
inline std::vector<double> group_advantages(std::span<const double> rewards) {
    if (rewards.size() < 2) throw GroupTooSmall(rewards.size());
    bool all_equal = true;
    for (double r : rewards) all_equal = all_equal && r == rewards[0];
    if (all_equal) return std::vector<double>(rewards.size(), 0.0);
    const double mean = detail::compensated_sum(rewards) / static_cast<double>(rewards.size());
    std::vector<double> adv(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
    double prefix = 0.0;
    for (std::size_t i = 0; i + 1 < adv.size(); ++i) prefix += adv[i];
    adv.back() = prefix == 0.0 ? 0.0 : -prefix;
    return adv;
}

// One token's contribution to the clipped surrogate:
// min(rho * A, clip(rho, 1 - eps, 1 + eps) * A).
inline double clipped_term(double rho, double advantage, double eps) {
    const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps);
    return std::min(rho * advantage, clipped * advantage);
}

// k3 estimator of D_KL(current || ref) over sampled tokens: mean of
// exp(delta) - delta - 1 with delta = logp_ref - logp_current. Nonnegative,
// zero iff the two agree on every sampled token.
inline double kl_penalty(std::span<const double> logp_current, std::span<const double> logp_ref) {
    if (logp_current.size() != logp_ref.size())
        throw ConfigError("kl penalty needs length-matched log-prob arrays");
    if (logp_current.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t t = 0; t < logp_current.size(); ++t) {
        const double delta = logp_ref[t] - logp_current[t];
        total += std::exp(delta) - delta - 1.0;
    }
    return total / static_cast<double>(logp_current.size());
}

// K sampled responses for one prompt with the per-token log-probabilities
// needed by the objective. The sequence-level advantage A_i is broadcast to
// every token of response i.
struct RolloutGroup {
    std::vector<std::vector<int>> responses;
    std::vector<std::vector<double>> logp_current;
    std::vector<std::vector<double>> logp_old;
    std::vector<std::vector<double>> logp_ref;
    std::vector<double> rewards;

    void validate() const {
        const std::size_t k = responses.size();
        if (logp_current.size() != k || logp_old.size() != k || logp_ref.size() != k ||
            rewards.size() != k)
            throw ConfigError("rollout group arrays must have matching group size");
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t len = responses[i].size();
            if (logp_current[i].size() != len || logp_old[i].size() != len ||
                logp_ref[i].size() != len)
                throw ConfigError("log-prob arrays must match their response length");
        }
    }
};

// (1/G) sum_i (1/|o_i|) sum_t min(rho A_i, clip(rho) A_i) with
// rho = exp(logp_current - logp_old). At rho == 1 everywhere this equals the
// mean advantage, which is zero by construction.
inline double clipped_surrogate(const RolloutGroup &group, double eps) {
    group.validate();
    const std::vector<double> adv = group_advantages(group.rewards);
    double total = 0.0;
    for (std::size_t i = 0; i < group.responses.size(); ++i) {
        if (group.responses[i].empty()) continue;
        double inner = 0.0;
        for (std::size_t t = 0; t < group.responses[i].size(); ++t) {
            const double rho = std::exp(group.logp_current[i][t] - group.logp_old[i][t]);
            inner += clipped_term(rho, adv[i], eps);
        }
        total += inner / static_cast<double>(group.responses[i].size());
    }
    return total / static_cast<double>(group.responses.size());
}

// Categorical token policy standing in for the VLM: independent logits per
// (context, position) over a reduced voxel alphabet.
class ToyPolicy {
  public:
    ToyPolicy(int contexts, int positions, int alphabet)
        : contexts_(contexts), positions_(positions), alphabet_(alphabet),
          logits_(static_cast<std::size_t>(contexts) * static_cast<std::size_t>(positions) *
                      static_cast<std::size_t>(alphabet),
                  0.0) {
        if (contexts < 1 || positions < 1 || alphabet < 2)
            throw ConfigError("toy policy needs contexts, positions >= 1 and alphabet >= 2");
    }

    int contexts() const { return contexts_; }
    int positions() const { return positions_; }
    int alphabet() const { return alphabet_; }

    double logit(int c, int t, int a) const { return logits_[index(c, t, a)]; }
    double &logit(int c, int t, int a) { return logits_[index(c, t, a)]; }

    std::span<const double> flat_logits() const { return logits_; }
    std::span<double> flat_logits() { return logits_; }

    // Log-softmax over the alphabet at (context, position).
    std::vector<double> log_probs(int c, int t) const {
        std::vector<double> lp(static_cast<std::size_t>(alphabet_));
        double max_logit = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < alphabet_; ++a) max_logit = std::max(max_logit, logit(c, t, a));
        double denom = 0.0;
        for (int a = 0; a < alphabet_; ++a) denom += std::exp(logit(c, t, a) - max_logit);
        const double log_denom = std::log(denom) + max_logit;
        for (int a = 0; a < alphabet_; ++a)
            lp[static_cast<std::size_t>(a)] = logit(c, t, a) - log_denom;
        return lp;
    }

    std::vector<double> probs(int c, int t) const {
        std::vector<double> p = log_probs(c, t);
        for (double &v : p) v = std::exp(v);
        return p;
    }

    // One response: a token drawn independently at every position.
    std::vector<int> sample_response(int c, Rng &rng) const {
        std::vector<int> response(static_cast<std::size_t>(positions_));
        for (int t = 0; t < positions_; ++t) {
            const std::vector<double> p = probs(c, t);
            response[static_cast<std::size_t>(t)] = static_cast<int>(rng.categorical(p));
        }
        return response;
    }

    std::vector<double> token_logps(int c, std::span<const int> response) const {
        if (static_cast<int>(response.size()) != positions_)
            throw ConfigError("response length must match the policy position count");
        std::vector<double> lp(response.size());
        for (int t = 0; t < positions_; ++t) {
            const std::vector<double> row = log_probs(c, t);
            const int token = response[static_cast<std::size_t>(t)];
            if (token < 0 || token >= alphabet_)
                throw ConfigError("response token outside the policy alphabet");
            lp[static_cast<std::size_t>(t)] = row[static_cast<std::size_t>(token)];
        }
        return lp;
    }

  private:
    std::size_t index(int c, int t, int a) const {
        return (static_cast<std::size_t>(c) * static_cast<std::size_t>(positions_) +
                static_cast<std::size_t>(t)) *
                   static_cast<std::size_t>(alphabet_) +
               static_cast<std::size_t>(a);
    }

    int contexts_;
    int positions_;
    int alphabet_;
    std::vector<double> logits_;
};

// Sampled rollouts for one prompt, with precomputed advantages.
struct PromptRollouts {
    int context = 0;
    RolloutGroup group;
    std::vector<double> advantages;
};

struct ObjectiveStats {
    double value = 0.0;     // surrogate - beta * kl
    double surrogate = 0.0; // clipped surrogate alone
    double kl = 0.0;        // mean k3 estimate
    double clip_fraction = 0.0;
    double mean_abs_advantage = 0.0;
    double mean_reward = 0.0;
};

// J(theta) = mean over prompts of (1/K) sum_i (1/|o_i|) sum_t
// [min(rho A_i, clip(rho) A_i) - beta * k3]. logp_current is recomputed from
// `policy`; logp_old / logp_ref / advantages come from the rollouts.
inline double grpo_objective(const ToyPolicy &policy, std::span<const PromptRollouts> rollouts,
                             double eps, double beta, ObjectiveStats *stats_out = nullptr) {
    if (rollouts.empty()) throw ConfigError("grpo objective needs at least one prompt rollout");
    double surrogate_total = 0.0, kl_total = 0.0;
    double reward_sum = 0.0, adv_sum = 0.0;
    std::int64_t responses = 0, tokens = 0, clipped_tokens = 0;
    for (const PromptRollouts &pr : rollouts) {
        pr.group.validate();
        double prompt_surrogate = 0.0, prompt_kl = 0.0;
        const std::size_t k = pr.group.responses.size();
        for (std::size_t i = 0; i < k; ++i) {
            const std::vector<int> &resp = pr.group.responses[i];
            const std::vector<double> lp_cur = policy.token_logps(pr.context, resp);
            double inner_surrogate = 0.0, inner_kl = 0.0;
            for (std::size_t t = 0; t < resp.size(); ++t) {
                const double rho = std::exp(lp_cur[t] - pr.group.logp_old[i][t]);
                const double delta = pr.group.logp_ref[i][t] - lp_cur[t];
                inner_surrogate += clipped_term(rho, pr.advantages[i], eps);
                inner_kl += std::exp(delta) - delta - 1.0;
                ++tokens;
                if (rho < 1.0 - eps || rho > 1.0 + eps) ++clipped_tokens;
            }
            prompt_surrogate += inner_surrogate / static_cast<double>(resp.size());
            prompt_kl += inner_kl / static_cast<double>(resp.size());
            reward_sum += pr.group.rewards[i];
            adv_sum += std::abs(pr.advantages[i]);
            ++responses;
        }
        surrogate_total += prompt_surrogate / static_cast<double>(k);
        kl_total += prompt_kl / static_cast<double>(k);
    }
    const double surrogate = surrogate_total / static_cast<double>(rollouts.size());
    const double kl = kl_total / static_cast<double>(rollouts.size());
    const double value = surrogate - beta * kl;
    if (stats_out) {
        stats_out->value = value;
        stats_out->surrogate = surrogate;
        stats_out->kl = kl;
        stats_out->clip_fraction =
            tokens > 0 ? static_cast<double>(clipped_tokens) / static_cast<double>(tokens) : 0.0;
        stats_out->mean_abs_advantage =
            responses > 0 ? adv_sum / static_cast<double>(responses) : 0.0;
        stats_out->mean_reward = responses > 0 ? reward_sum / static_cast<double>(responses) : 0.0;
    }
    return value;
}

// Analytic gradient of grpo_objective with respect to the policy logits.
// Per token the surrogate contributes rho * A_i through the unclipped branch
// only (the saturated branch is constant), and the KL penalty contributes
// beta * (exp(delta) - 1); both flow through d logp / d logit =
// indicator - softmax.
inline std::vector<double> grpo_objective_gradient(const ToyPolicy &policy,
                                                   std::span<const PromptRollouts> rollouts,
                                                   double eps, double beta,
                                                   ObjectiveStats *stats_out = nullptr) {
    std::vector<double> grad(policy.flat_logits().size(), 0.0);
    const int alphabet = policy.alphabet();
    const double prompt_norm = 1.0 / static_cast<double>(rollouts.size());
    for (const PromptRollouts &pr : rollouts) {
        pr.group.validate();
        const std::size_t k = pr.group.responses.size();
        const double group_norm = prompt_norm / static_cast<double>(k);
        for (std::size_t i = 0; i < k; ++i) {
            const std::vector<int> &resp = pr.group.responses[i];
            const std::vector<double> lp_cur = policy.token_logps(pr.context, resp);
            const double token_norm = group_norm / static_cast<double>(resp.size());
            for (std::size_t t = 0; t < resp.size(); ++t) {
                const double rho = std::exp(lp_cur[t] - pr.group.logp_old[i][t]);
                const double adv = pr.advantages[i];
                const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps);
                const bool unclipped_active = rho * adv <= clipped * adv;
                double coeff = unclipped_active ? rho * adv : 0.0;
                const double delta = pr.group.logp_ref[i][t] - lp_cur[t];
                coeff += beta * (std::exp(delta) - 1.0);
                coeff *= token_norm;

                const std::vector<double> p = policy.probs(pr.context, static_cast<int>(t));
                const int token = resp[t];
                for (int a = 0; a < alphabet; ++a) {
                    const double indicator = (a == token) ? 1.0 : 0.0;
                    grad[(static_cast<std::size_t>(pr.context) *
                              static_cast<std::size_t>(policy.positions()) +
                          t) *
                             static_cast<std::size_t>(alphabet) +
                         static_cast<std::size_t>(a)] +=
                        coeff * (indicator - p[static_cast<std::size_t>(a)]);
                }
            }
        }
    }
    if (stats_out) grpo_objective(policy, rollouts, eps, beta, stats_out);
    return grad;
}

struct StepStats {
    int step = 0;
    double mean_reward = 0.0;
    double mean_abs_advantage = 0.0;
    double clip_fraction = 0.0;
    double kl = 0.0;
};

using RewardFn = std::function<double(int context, std::span<const int> response)>;

// Samples K responses per prompt from the current policy (each response draws
// from its own seed-derived stream), forms group-relative advantages, and
// takes one ascent step on the analytic gradient of the clipped surrogate
// minus beta * KL(current || ref).
inline StepStats grpo_step(ToyPolicy &policy, const ToyPolicy &reference,
                           std::span<const int> prompts, const RewardFn &reward_fn,
                           const GrpoConfig &cfg, int step_index) {
    cfg.validate();
    if (prompts.empty()) throw ConfigError("grpo step needs at least one prompt");
    const std::uint64_t step_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(step_index));

    std::vector<PromptRollouts> rollouts;
    rollouts.reserve(prompts.size());
    for (std::size_t p = 0; p < prompts.size(); ++p) {
        PromptRollouts pr;
        pr.context = prompts[p];
        const std::size_t k = static_cast<std::size_t>(cfg.group_size);
        pr.group.responses.resize(k);
        pr.group.logp_current.resize(k);
        pr.group.logp_old.resize(k);
        pr.group.logp_ref.resize(k);
        pr.group.rewards.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            Rng stream(derive_seed(step_seed, p * k + i));
            std::vector<int> resp = policy.sample_response(pr.context, stream);
            pr.group.logp_current[i] = policy.token_logps(pr.context, resp);
            pr.group.logp_old[i] = pr.group.logp_current[i]; // on-policy, single inner epoch
            pr.group.logp_ref[i] = reference.token_logps(pr.context, resp);
            pr.group.rewards[i] = reward_fn(pr.context, resp);
            pr.group.responses[i] = std::move(resp);
        }
        pr.advantages = group_advantages(pr.group.rewards);
        rollouts.push_back(std::move(pr));
    }

    ObjectiveStats obj;
    const std::vector<double> grad =
        grpo_objective_gradient(policy, rollouts, cfg.clip_epsilon, cfg.kl_beta, &obj);
    std::span<double> logits = policy.flat_logits();
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += cfg.learning_rate * grad[i];

    StepStats stats;
    stats.step = step_index;
    stats.mean_reward = obj.mean_reward;
    stats.mean_abs_advantage = obj.mean_abs_advantage;
    stats.clip_fraction = obj.clip_fraction;
    stats.kl = obj.kl;
    return stats;
}

// ---------------------------------------------------------------------------
// Toy localization task: contexts carry ground-truth points inside an
// interaction volume; the policy emits one coarse voxel token per axis per
// joint and is rewarded through the real codec grid.

struct ToyJoint {
    std::string name;
    Point3Cam target_mm;
};

struct ToyContext {
    std::vector<ToyJoint> joints;
};

struct ToyLocalizationTask {
    InteractionVolume volume = InteractionVolume::default_volume();
    // Toy-scale reward: kappa exceeds the worst-case half-cell diagonal of
    // the coarse grid (320 mm at alphabet 10 over the default volume) so the
    // correct cell always clears the PCK test, and tau spreads exp(-E/tau)
    // over the in-volume error range instead of flattening it to zero.
    RewardConfig reward = {100.0, 350.0, 200000.0, 0.5};
    int alphabet = 10; // coarse voxel resolution per axis
    std::vector<ToyContext> contexts;

    int joints_per_context() const {
        return contexts.empty() ? 0 : static_cast<int>(contexts.front().joints.size());
    }
    int positions() const { return 3 * joints_per_context(); }

    void validate() const {
        volume.validate();
        reward.validate();
        if (alphabet < 2 || alphabet > kVoxelGrid)
            throw ConfigError("toy task alphabet must be in [2, 1000]");
        if (contexts.empty()) throw ConfigError("toy task needs at least one context");
        for (const ToyContext &c : contexts) {
            if (c.joints.empty()) throw ConfigError("toy task contexts need at least one joint");
            if (static_cast<int>(c.joints.size()) != joints_per_context())
                throw ConfigError("toy task contexts must share one joint count");
            for (const ToyJoint &j : c.joints) {
                if (!is_joint_name(j.name))
                    throw ConfigError("unknown joint name '" + j.name + "' in toy task");
                if (!volume.contains(j.target_mm))
                    throw ConfigError("toy task target outside the interaction volume");
            }
        }
    }
};

// Coarse token -> fine voxel index: the center subcell of the coarse cell.
inline int coarse_to_fine_index(int coarse, int alphabet) {
    const int fine = static_cast<int>(
        std::floor((coarse + 0.5) * static_cast<double>(kVoxelGrid) / alphabet));
    return std::clamp(fine, 0, kVoxelGrid - 1);
}

inline double toy_response_reward(const ToyLocalizationTask &task, int context,
                                  std::span<const int> response) {
    const ToyContext &ctx = task.contexts.at(static_cast<std::size_t>(context));
    if (response.size() != ctx.joints.size() * 3)
        throw ConfigError("toy response length must be 3 tokens per joint");
    JointErrors errs;
    for (std::size_t j = 0; j < ctx.joints.size(); ++j) {
        const VoxelToken token = {coarse_to_fine_index(response[3 * j], task.alphabet),
                                  coarse_to_fine_index(response[3 * j + 1], task.alphabet),
                                  coarse_to_fine_index(response[3 * j + 2], task.alphabet)};
        const Point3Cam decoded = decode_voxel(token, task.volume);
        const Point3Cam &gt = ctx.joints[j].target_mm;
        const double dx = decoded.x - gt.x, dy = decoded.y - gt.y, dz = decoded.z - gt.z;
        errs.distances.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
        errs.visibility.push_back(true);
    }
    return pose_reward(errs, task.reward);
}

// Exact expected reward under the uniform token policy. Joints are
// independent, and exp(-E/tau) factorizes over joints, so the expectation
// reduces to per-joint sums over the alphabet^3 token triples.
inline double uniform_policy_expected_reward(const ToyLocalizationTask &task) {
    task.validate();
    const int a = task.alphabet;
    const double triples = static_cast<double>(a) * a * a;
    const double joints = static_cast<double>(task.joints_per_context());
    double total = 0.0;
    for (const ToyContext &ctx : task.contexts) {
        double exp_product = 1.0;
        double pck_mean = 0.0;
        for (const ToyJoint &joint : ctx.joints) {
            double exp_sum = 0.0;
            double pck_sum = 0.0;
            for (int x = 0; x < a; ++x)
                for (int y = 0; y < a; ++y)
                    for (int z = 0; z < a; ++z) {
                        const VoxelToken token = {coarse_to_fine_index(x, a),
                                                  coarse_to_fine_index(y, a),
                                                  coarse_to_fine_index(z, a)};
                        const Point3Cam decoded = decode_voxel(token, task.volume);
                        const double dx = decoded.x - joint.target_mm.x;
                        const double dy = decoded.y - joint.target_mm.y;
                        const double dz = decoded.z - joint.target_mm.z;
                        const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
                        exp_sum += std::exp(-huber(d, task.reward.delta) / (joints * task.reward.tau));
                        if (d < task.reward.kappa) pck_sum += 1.0;
                    }
            exp_product *= exp_sum / triples;
            pck_mean += pck_sum / triples;
        }
        pck_mean /= joints;
        total += task.reward.lambda * exp_product + (1.0 - task.reward.lambda) * pck_mean;
    }
    return total / static_cast<double>(task.contexts.size());
}

// Random toy task: ground-truth points drawn uniformly inside the volume.
inline ToyLocalizationTask make_toy_task(int num_contexts, int joints_per_context, int alphabet,
                                         std::uint64_t seed) {
    if (num_contexts < 1 || joints_per_context < 1)
        throw ConfigError("toy task needs >= 1 context and >= 1 joint per context");
    ToyLocalizationTask task;
    task.alphabet = alphabet;
    Rng rng(derive_seed(seed, 0x746f79));
    for (int c = 0; c < num_contexts; ++c) {
        ToyContext ctx;
        for (int j = 0; j < joints_per_context; ++j) {
            ToyJoint joint;
            joint.name = std::string(
                kJointNames[static_cast<std::size_t>((c * joints_per_context + j) % kJointCount)]);
            joint.target_mm = {
                rng.uniform(task.volume.origin_mm[0], task.volume.origin_mm[0] + task.volume.width_mm),
                rng.uniform(task.volume.origin_mm[1], task.volume.origin_mm[1] + task.volume.height_mm),
                rng.uniform(task.volume.origin_mm[2], task.volume.origin_mm[2] + task.volume.depth_mm)};
            ctx.joints.push_back(std::move(joint));
        }
        task.contexts.push_back(std::move(ctx));
    }
    task.validate();
    return task;
}

using LearningCurve = std::vector<StepStats>;

// Runs `cfg.steps` GRPO steps of the toy policy on `task`, starting from the
// uniform policy with the initial policy as KL reference. Returns the
// per-step statistics.
inline LearningCurve train_toy(const ToyLocalizationTask &task, const GrpoConfig &cfg) {
    task.validate();
    cfg.validate();
    ToyPolicy policy(static_cast<int>(task.contexts.size()), task.positions(), task.alphabet);
    const ToyPolicy reference = policy;
    std::vector<int> prompts(task.contexts.size());
    for (std::size_t c = 0; c < prompts.size(); ++c) prompts[c] = static_cast<int>(c);
    const RewardFn reward_fn = [&task](int context, std::span<const int> response) {
        return toy_response_reward(task, context, response);
    };
    LearningCurve curve;
    curve.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step)
        curve.push_back(grpo_step(policy, reference, prompts, reward_fn, cfg, step));
    return curve;
}

} // namespace taihri
