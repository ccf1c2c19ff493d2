#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "taihri/align.hpp"
#include "taihri/camera.hpp"
#include "taihri/errors.hpp"
#include "taihri/eval.hpp"
#include "taihri/grpo.hpp"
#include "taihri/keypoints.hpp"
#include "taihri/reward.hpp"
#include "taihri/scene.hpp"
#include "taihri/version.hpp"
#include "taihri/voxel.hpp"

namespace taihri {

using json = nlohmann::json;

namespace io_detail {

// Fail-closed object check: every key must be either required or optional,
// and every required key must be present.
inline void require_keys(const json &obj, const std::string &what,
                         std::initializer_list<const char *> required,
                         std::initializer_list<const char *> optional = {}) {
    if (!obj.is_object()) throw ConfigError(what + " must be a JSON object");
    for (const char *key : required)
        if (!obj.contains(key)) throw ConfigError(what + " is missing field '" + key + "'");
    for (const auto &item : obj.items()) {
        bool known = false;
        for (const char *key : required)
            if (item.key() == key) known = true;
        for (const char *key : optional)
            if (item.key() == key) known = true;
        if (!known) throw ConfigError("unknown field '" + item.key() + "' in " + what);
    }
}

inline double get_number(const json &obj, const char *key, const std::string &what) {
    const json &v = obj.at(key);
    if (!v.is_number()) throw ConfigError(what + " field '" + key + "' must be a number");
    return v.get<double>();
}

inline int get_int(const json &obj, const char *key, const std::string &what) {
    const json &v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(what + " field '" + key + "' must be an integer");
    return v.get<int>();
}

inline std::array<double, 3> get_vec3(const json &v, const std::string &what) {
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
        !v[2].is_number())
        throw ConfigError(what + " must be a 3-element number array");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

} // namespace io_detail

inline json parse_json_text(const std::string &text, const std::string &what) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded()) throw ConfigError("invalid JSON in " + what);
    return parsed;
}

// --------------------------------------------------------------------------
// Camera intrinsics: {fx, fy, cx, cy, width, height}

inline json to_json(const CameraIntrinsics &k) {
    return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
            {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

inline CameraIntrinsics intrinsics_from_json(const json &obj) {
    io_detail::require_keys(obj, "intrinsics", {"fx", "fy", "cx", "cy", "width", "height"});
    CameraIntrinsics k;
    k.fx = io_detail::get_number(obj, "fx", "intrinsics");
    k.fy = io_detail::get_number(obj, "fy", "intrinsics");
    k.cx = io_detail::get_number(obj, "cx", "intrinsics");
    k.cy = io_detail::get_number(obj, "cy", "intrinsics");
    k.width = io_detail::get_int(obj, "width", "intrinsics");
    k.height = io_detail::get_int(obj, "height", "intrinsics");
    k.validate();
    return k;
}

// --------------------------------------------------------------------------
// Interaction volume: {width_mm, height_mm, depth_mm, origin_mm: [x, y, z]}

inline json to_json(const InteractionVolume &vol) {
    return {{"width_mm", vol.width_mm},
            {"height_mm", vol.height_mm},
            {"depth_mm", vol.depth_mm},
            {"origin_mm", {vol.origin_mm[0], vol.origin_mm[1], vol.origin_mm[2]}}};
}

inline InteractionVolume volume_from_json(const json &obj) {
    io_detail::require_keys(obj, "volume", {"width_mm", "height_mm", "depth_mm", "origin_mm"});
    InteractionVolume vol;
    vol.width_mm = io_detail::get_number(obj, "width_mm", "volume");
    vol.height_mm = io_detail::get_number(obj, "height_mm", "volume");
    vol.depth_mm = io_detail::get_number(obj, "depth_mm", "volume");
    vol.origin_mm = io_detail::get_vec3(obj.at("origin_mm"), "volume origin_mm");
    vol.validate();
    return vol;
}

// --------------------------------------------------------------------------
// Reward config: {delta, kappa, tau, lambda}

inline json to_json(const RewardConfig &cfg) {
    return {{"delta", cfg.delta}, {"kappa", cfg.kappa}, {"tau", cfg.tau}, {"lambda", cfg.lambda}};
}

inline RewardConfig reward_config_from_json(const json &obj) {
    io_detail::require_keys(obj, "reward config", {"delta", "kappa", "tau", "lambda"});
    RewardConfig cfg;
    cfg.delta = io_detail::get_number(obj, "delta", "reward config");
    cfg.kappa = io_detail::get_number(obj, "kappa", "reward config");
    cfg.tau = io_detail::get_number(obj, "tau", "reward config");
    cfg.lambda = io_detail::get_number(obj, "lambda", "reward config");
    cfg.validate();
    return cfg;
}

// --------------------------------------------------------------------------
// GRPO config: all fields optional, defaults as in GrpoConfig.

inline json to_json(const GrpoConfig &cfg) {
    return {{"group_size", cfg.group_size}, {"clip_epsilon", cfg.clip_epsilon},
            {"kl_beta", cfg.kl_beta},       {"learning_rate", cfg.learning_rate},
            {"steps", cfg.steps},           {"seed", cfg.seed}};
}

inline GrpoConfig grpo_config_from_json(const json &obj) {
    io_detail::require_keys(obj, "grpo config", {},
                            {"group_size", "clip_epsilon", "kl_beta", "learning_rate", "steps",
                             "seed"});
    GrpoConfig cfg;
    if (obj.contains("group_size")) cfg.group_size = io_detail::get_int(obj, "group_size", "grpo config");
    if (obj.contains("clip_epsilon"))
        cfg.clip_epsilon = io_detail::get_number(obj, "clip_epsilon", "grpo config");
    if (obj.contains("kl_beta")) cfg.kl_beta = io_detail::get_number(obj, "kl_beta", "grpo config");
    if (obj.contains("learning_rate"))
        cfg.learning_rate = io_detail::get_number(obj, "learning_rate", "grpo config");
    if (obj.contains("steps")) cfg.steps = io_detail::get_int(obj, "steps", "grpo config");
    if (obj.contains("seed")) {
        if (!obj.at("seed").is_number_integer())
            throw ConfigError("grpo config field 'seed' must be an integer");
        cfg.seed = obj.at("seed").get<std::uint64_t>();
    }
    cfg.validate();
    return cfg;
}

// --------------------------------------------------------------------------
// Scene config: all fields optional, defaults as in SceneConfig.

inline json to_json(const SceneConfig &cfg) {
    return {{"intrinsics", to_json(cfg.intrinsics)},
            {"distance_mm", {cfg.min_distance_mm, cfg.max_distance_mm}},
            {"yaw_limit_deg", cfg.yaw_limit_deg},
            {"pitch_limit_deg", cfg.pitch_limit_deg},
            {"roll_limit_deg", cfg.roll_limit_deg},
            {"articulation", cfg.articulation},
            {"bone_scale", {cfg.bone_scale_min, cfg.bone_scale_max}},
            {"lateral_fraction", cfg.lateral_fraction},
            {"min_visible_fraction", cfg.min_visible_fraction},
            {"noise_px", cfg.noise_px},
            {"filter_threshold_px", cfg.filter_threshold_px},
            {"max_attempts", cfg.max_attempts}};
}

inline SceneConfig scene_config_from_json(const json &obj) {
    io_detail::require_keys(obj, "scene config", {},
                            {"intrinsics", "distance_mm", "yaw_limit_deg", "pitch_limit_deg",
                             "roll_limit_deg", "articulation", "bone_scale", "lateral_fraction",
                             "min_visible_fraction", "noise_px", "filter_threshold_px",
                             "max_attempts"});
    SceneConfig cfg;
    if (obj.contains("intrinsics")) cfg.intrinsics = intrinsics_from_json(obj.at("intrinsics"));
    if (obj.contains("distance_mm")) {
        const json &v = obj.at("distance_mm");
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError("scene config field 'distance_mm' must be [min, max]");
        cfg.min_distance_mm = v[0].get<double>();
        cfg.max_distance_mm = v[1].get<double>();
    }
    if (obj.contains("yaw_limit_deg"))
        cfg.yaw_limit_deg = io_detail::get_number(obj, "yaw_limit_deg", "scene config");
    if (obj.contains("pitch_limit_deg"))
        cfg.pitch_limit_deg = io_detail::get_number(obj, "pitch_limit_deg", "scene config");
    if (obj.contains("roll_limit_deg"))
        cfg.roll_limit_deg = io_detail::get_number(obj, "roll_limit_deg", "scene config");
    if (obj.contains("articulation"))
        cfg.articulation = io_detail::get_number(obj, "articulation", "scene config");
    if (obj.contains("bone_scale")) {
        const json &v = obj.at("bone_scale");
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError("scene config field 'bone_scale' must be [min, max]");
        cfg.bone_scale_min = v[0].get<double>();
        cfg.bone_scale_max = v[1].get<double>();
    }
    if (obj.contains("lateral_fraction"))
        cfg.lateral_fraction = io_detail::get_number(obj, "lateral_fraction", "scene config");
    if (obj.contains("min_visible_fraction"))
        cfg.min_visible_fraction = io_detail::get_number(obj, "min_visible_fraction", "scene config");
    if (obj.contains("noise_px")) cfg.noise_px = io_detail::get_number(obj, "noise_px", "scene config");
    if (obj.contains("filter_threshold_px"))
        cfg.filter_threshold_px = io_detail::get_number(obj, "filter_threshold_px", "scene config");
    if (obj.contains("max_attempts"))
        cfg.max_attempts = io_detail::get_int(obj, "max_attempts", "scene config");
    cfg.validate();
    return cfg;
}

// --------------------------------------------------------------------------
// Toy localization task.

inline json to_json(const ToyLocalizationTask &task) {
    json contexts = json::array();
    for (const ToyContext &ctx : task.contexts) {
        json joints = json::array();
        for (const ToyJoint &j : ctx.joints)
            joints.push_back({{"name", j.name},
                              {"xyz_mm", {j.target_mm.x, j.target_mm.y, j.target_mm.z}}});
        contexts.push_back({{"joints", joints}});
    }
    return {{"volume", to_json(task.volume)},
            {"reward", to_json(task.reward)},
            {"alphabet", task.alphabet},
            {"contexts", contexts}};
}

inline ToyLocalizationTask task_from_json(const json &obj) {
    io_detail::require_keys(obj, "task", {"contexts"}, {"volume", "reward", "alphabet"});
    ToyLocalizationTask task;
    if (obj.contains("volume")) task.volume = volume_from_json(obj.at("volume"));
    if (obj.contains("reward")) task.reward = reward_config_from_json(obj.at("reward"));
    if (obj.contains("alphabet")) task.alphabet = io_detail::get_int(obj, "alphabet", "task");
    if (!obj.at("contexts").is_array() || obj.at("contexts").empty())
        throw ConfigError("task field 'contexts' must be a non-empty array");
    for (const json &ctx_json : obj.at("contexts")) {
        io_detail::require_keys(ctx_json, "task context", {"joints"});
        ToyContext ctx;
        if (!ctx_json.at("joints").is_array() || ctx_json.at("joints").empty())
            throw ConfigError("task context field 'joints' must be a non-empty array");
        for (const json &joint_json : ctx_json.at("joints")) {
            io_detail::require_keys(joint_json, "task joint", {"name", "xyz_mm"});
            ToyJoint joint;
            if (!joint_json.at("name").is_string())
                throw ConfigError("task joint field 'name' must be a string");
            joint.name = joint_json.at("name").get<std::string>();
            const std::array<double, 3> p =
                io_detail::get_vec3(joint_json.at("xyz_mm"), "task joint xyz_mm");
            joint.target_mm = {p[0], p[1], p[2]};
            ctx.joints.push_back(std::move(joint));
        }
        task.contexts.push_back(std::move(ctx));
    }
    task.validate();
    return task;
}

// --------------------------------------------------------------------------
// Dataset sample (one JSONL record):
// {id, intrinsics, joints: [{name, xyz_mm, uv_px, visible}], pelvis_depth_mm, seed}

inline json sample_to_json(const SceneSample &sample) {
    json joints = json::array();
    for (int j = 0; j < kJointCount; ++j) {
        const std::size_t ji = static_cast<std::size_t>(j);
        joints.push_back({{"name", std::string(kJointNames[ji])},
                          {"xyz_mm",
                           {sample.joints_3d[ji].x, sample.joints_3d[ji].y, sample.joints_3d[ji].z}},
                          {"uv_px", {sample.joints_2d[ji].u, sample.joints_2d[ji].v}},
                          {"visible", sample.visible[ji]}});
    }
    return {{"id", sample.id},
            {"intrinsics", to_json(sample.intrinsics)},
            {"joints", joints},
            {"pelvis_depth_mm", sample.pelvis_depth_mm},
            {"seed", sample.seed}};
}

inline SceneSample sample_from_json(const json &obj) {
    io_detail::require_keys(obj, "dataset record",
                            {"id", "intrinsics", "joints", "pelvis_depth_mm", "seed"});
    SceneSample sample;
    if (!obj.at("id").is_number_integer())
        throw ConfigError("dataset record field 'id' must be an integer");
    sample.id = obj.at("id").get<std::int64_t>();
    sample.intrinsics = intrinsics_from_json(obj.at("intrinsics"));
    sample.pelvis_depth_mm = io_detail::get_number(obj, "pelvis_depth_mm", "dataset record");
    if (!obj.at("seed").is_number_integer())
        throw ConfigError("dataset record field 'seed' must be an integer");
    sample.seed = obj.at("seed").get<std::uint64_t>();
    if (!obj.at("joints").is_array())
        throw ConfigError("dataset record field 'joints' must be an array");
    std::array<bool, kJointCount> seen{};
    for (const json &joint_json : obj.at("joints")) {
        io_detail::require_keys(joint_json, "dataset joint", {"name", "xyz_mm", "uv_px", "visible"});
        const std::string name = joint_json.at("name").get<std::string>();
        const int idx = joint_index(name);
        if (idx < 0) throw ConfigError("unknown joint name '" + name + "' in dataset record");
        const std::size_t ji = static_cast<std::size_t>(idx);
        const std::array<double, 3> p = io_detail::get_vec3(joint_json.at("xyz_mm"), "joint xyz_mm");
        sample.joints_3d[ji] = {p[0], p[1], p[2]};
        const json &uv = joint_json.at("uv_px");
        if (!uv.is_array() || uv.size() != 2 || !uv[0].is_number() || !uv[1].is_number())
            throw ConfigError("joint uv_px must be a 2-element number array");
        sample.joints_2d[ji] = {uv[0].get<double>(), uv[1].get<double>()};
        if (!joint_json.at("visible").is_boolean())
            throw ConfigError("joint field 'visible' must be a boolean");
        sample.visible[ji] = joint_json.at("visible").get<bool>();
        seen[ji] = true;
    }
    for (int j = 0; j < kJointCount; ++j)
        if (!seen[static_cast<std::size_t>(j)])
            throw ConfigError("dataset record is missing joint '" +
                              std::string(kJointNames[static_cast<std::size_t>(j)]) + "'");
    return sample;
}

// --------------------------------------------------------------------------
// Generic pose record (prediction files mirror the dataset joint schema but
// only name + xyz_mm are required per joint).

struct PoseRecord {
    std::int64_t id = 0;
    KeypointSet keypoints;
    std::map<std::string, Pixel> pixels; // present only when uv_px was given
};

inline PoseRecord pose_record_from_json(const json &obj) {
    io_detail::require_keys(obj, "pose record", {"id", "joints"},
                            {"intrinsics", "pelvis_depth_mm", "seed"});
    PoseRecord rec;
    if (!obj.at("id").is_number_integer())
        throw ConfigError("pose record field 'id' must be an integer");
    rec.id = obj.at("id").get<std::int64_t>();
    if (!obj.at("joints").is_array())
        throw ConfigError("pose record field 'joints' must be an array");
    for (const json &joint_json : obj.at("joints")) {
        io_detail::require_keys(joint_json, "pose joint", {"name", "xyz_mm"},
                                {"uv_px", "visible"});
        const std::string name = joint_json.at("name").get<std::string>();
        if (!is_joint_name(name))
            throw ConfigError("unknown joint name '" + name + "' in pose record");
        const std::array<double, 3> p = io_detail::get_vec3(joint_json.at("xyz_mm"), "joint xyz_mm");
        bool visible = true;
        if (joint_json.contains("visible")) {
            if (!joint_json.at("visible").is_boolean())
                throw ConfigError("joint field 'visible' must be a boolean");
            visible = joint_json.at("visible").get<bool>();
        }
        rec.keypoints.set(name, {p[0], p[1], p[2]}, visible);
        if (joint_json.contains("uv_px")) {
            const json &uv = joint_json.at("uv_px");
            if (!uv.is_array() || uv.size() != 2 || !uv[0].is_number() || !uv[1].is_number())
                throw ConfigError("joint uv_px must be a 2-element number array");
            rec.pixels[name] = {uv[0].get<double>(), uv[1].get<double>()};
        }
    }
    return rec;
}

inline json pose_record_to_json(const PoseRecord &rec) {
    json joints = json::array();
    rec.keypoints.for_each([&](std::string_view name, const Keypoint &kp) {
        json j = {{"name", std::string(name)},
                  {"xyz_mm", {kp.position.x, kp.position.y, kp.position.z}},
                  {"visible", kp.visible}};
        const auto it = rec.pixels.find(std::string(name));
        if (it != rec.pixels.end()) j["uv_px"] = {it->second.u, it->second.v};
        joints.push_back(std::move(j));
    });
    return {{"id", rec.id}, {"joints", joints}};
}

// --------------------------------------------------------------------------
// Anchor correspondences:
// {"anchors": [{"name", "source_mm": [x,y,z], "target_mm": [x,y,z]}, ...]}

inline AnchorCorrespondence anchors_from_json(const json &obj) {
    io_detail::require_keys(obj, "anchors file", {"anchors"});
    if (!obj.at("anchors").is_array() || obj.at("anchors").empty())
        throw ConfigError("anchors file field 'anchors' must be a non-empty array");
    AnchorCorrespondence corr;
    for (const json &a : obj.at("anchors")) {
        io_detail::require_keys(a, "anchor", {"name", "source_mm", "target_mm"});
        corr.names.push_back(a.at("name").get<std::string>());
        const std::array<double, 3> s = io_detail::get_vec3(a.at("source_mm"), "anchor source_mm");
        const std::array<double, 3> t = io_detail::get_vec3(a.at("target_mm"), "anchor target_mm");
        corr.source.push_back({s[0], s[1], s[2]});
        corr.target.push_back({t[0], t[1], t[2]});
    }
    corr.validate();
    return corr;
}

// --------------------------------------------------------------------------
// Evaluation report.

inline json report_to_json(const EvalReport &report) {
    json configs = json::object();
    for (const ConfigResult &c : report.configs)
        configs[c.name] = {{"gmpjpe_mm", c.gmpjpe_mm},
                           {"samples_evaluated", c.samples_evaluated},
                           {"samples_excluded", c.samples_excluded},
                           {"joints_evaluated", c.joints_evaluated}};
    json per_joint = json::object();
    for (const auto &[name, value] : report.per_joint_mean_mm) per_joint[name] = value;
    return {{"configs", configs},
            {"per_joint_mean_mm", per_joint},
            {"sample_count", report.sample_count}};
}

// --------------------------------------------------------------------------
// Learning-curve CSV: step, mean_reward, clip_fraction, kl.

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string curve_to_csv(const LearningCurve &curve) {
    std::string out = "step,mean_reward,clip_fraction,kl\n";
    for (const StepStats &s : curve) {
        out += std::to_string(s.step);
        out += ',';
        out += format_double(s.mean_reward);
        out += ',';
        out += format_double(s.clip_fraction);
        out += ',';
        out += format_double(s.kl);
        out += '\n';
    }
    return out;
}

// --------------------------------------------------------------------------
// File helpers. Writes go to a temporary name in the target directory and
// are renamed into place, so outputs are never observed truncated.

inline std::string read_text_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
    return content;
}

inline void atomic_write_file(const std::filesystem::path &path, const std::string &content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("failed to move '" + tmp.string() + "' into place: " + ec.message());
    }
}

// Parses one JSON document per non-empty line.
inline std::vector<json> read_jsonl(const std::filesystem::path &path) {
    const std::string text = read_text_file(path);
    std::vector<json> records;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        ++line_no;
        std::string_view line(text.data() + pos, nl - pos);
        pos = nl + 1;
        if (line.empty() || line == "\r") continue;
        json parsed = json::parse(line, nullptr, false);
        if (parsed.is_discarded())
            throw ConfigError("invalid JSON on line " + std::to_string(line_no) + " of '" +
                              path.string() + "'");
        records.push_back(std::move(parsed));
    }
    return records;
}

// --------------------------------------------------------------------------
// Run manifest, written next to each subcommand's primary output.

struct RunManifest {
    std::string subcommand;
    json resolved_config = json::object();
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double duration_seconds = 0.0;
};

inline json to_json(const RunManifest &m) {
    return {{"subcommand", m.subcommand}, {"config", m.resolved_config},
            {"seed", m.seed},             {"inputs", m.inputs},
            {"outputs", m.outputs},       {"version", kVersion},
            {"duration_seconds", m.duration_seconds}};
}

inline void write_manifest(const std::filesystem::path &primary_output, const RunManifest &m) {
    std::filesystem::path path = primary_output;
    path += ".manifest.json";
    atomic_write_file(path, to_json(m).dump(2) + "\n");
}

} // namespace taihri
