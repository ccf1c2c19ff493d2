// taihri: desk-scale toolkit for close-range 3D human-keypoint localization.
// Subcommands: encode, decode, parse, reward, grpo-train, synth, eval, align,
// version. Exit codes: 0 success, 1 domain error (error name on stderr),
// 2 usage error.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "taihri/io.hpp"
#include "taihri/sequence.hpp"

namespace {

using namespace taihri;
using Clock = std::chrono::steady_clock;

struct CommonOpts {
    std::string intrinsics_path; // accepted by every subcommand
    std::string manifest_path;   // explicit manifest target for stdout-only commands
};

void add_common(CLI::App *cmd, CommonOpts &opts) {
    cmd->add_option("--intrinsics", opts.intrinsics_path,
                    "camera intrinsics JSON {fx, fy, cx, cy, width, height}");
    cmd->add_option("--manifest", opts.manifest_path,
                    "write the run manifest to this path (stdout-only commands skip it otherwise)");
}

std::optional<CameraIntrinsics> load_intrinsics(const CommonOpts &opts) {
    if (opts.intrinsics_path.empty()) return std::nullopt;
    return intrinsics_from_json(
        parse_json_text(read_text_file(opts.intrinsics_path), "intrinsics file"));
}

std::vector<double> parse_csv_numbers(const std::string &text, std::size_t count,
                                      const std::string &what) {
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        try {
            std::size_t used = 0;
            const std::string piece = text.substr(pos, comma - pos);
            values.push_back(std::stod(piece, &used));
            if (used != piece.size()) throw std::invalid_argument(piece);
        } catch (const std::exception &) {
            throw ConfigError(what + " must be " + std::to_string(count) +
                              " comma-separated numbers, got '" + text + "'");
        }
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    if (values.size() != count)
        throw ConfigError(what + " must be " + std::to_string(count) +
                          " comma-separated numbers, got '" + text + "'");
    return values;
}

// Emits the manifest next to the primary output (or to the explicit path).
struct ManifestWriter {
    RunManifest manifest;
    Clock::time_point start = Clock::now();

    void finish(const std::string &primary_output, const CommonOpts &common) {
        manifest.duration_seconds =
            std::chrono::duration<double>(Clock::now() - start).count();
        if (!common.intrinsics_path.empty()) manifest.inputs.push_back(common.intrinsics_path);
        if (!common.manifest_path.empty()) {
            atomic_write_file(common.manifest_path, to_json(manifest).dump(2) + "\n");
        } else if (!primary_output.empty()) {
            write_manifest(primary_output, manifest);
        }
    }
};

// ---------------------------------------------------------------- encode ---

struct EncodeOpts {
    CommonOpts common;
    std::string volume_path;
    std::string point;
    bool clamp = false;
};

int run_encode(const EncodeOpts &opts) {
    ManifestWriter mw;
    mw.manifest.subcommand = "encode";
    InteractionVolume vol = InteractionVolume::default_volume();
    if (!opts.volume_path.empty()) {
        vol = volume_from_json(parse_json_text(read_text_file(opts.volume_path), "volume file"));
        mw.manifest.inputs.push_back(opts.volume_path);
    }
    const std::vector<double> xyz = parse_csv_numbers(opts.point, 3, "--point");
    const Point3Cam p{xyz[0], xyz[1], xyz[2]};
    VoxelToken token;
    bool clamped = false;
    if (opts.clamp) {
        const ClampedToken ct = encode_voxel_clamped(p, vol);
        token = ct.token;
        clamped = ct.clamped;
    } else {
        token = encode_voxel(p, vol);
    }
    std::printf("X=%d,Y=%d,Z=%d%s\n", token.x, token.y, token.z, clamped ? " (clamped)" : "");
    mw.manifest.resolved_config = {{"volume", to_json(vol)}, {"clamp", opts.clamp}};
    mw.finish("", opts.common);
    return 0;
}

// ---------------------------------------------------------------- decode ---

struct DecodeOpts {
    CommonOpts common;
    std::string volume_path;
    std::string token;
};

int run_decode(const DecodeOpts &opts) {
    ManifestWriter mw;
    mw.manifest.subcommand = "decode";
    InteractionVolume vol = InteractionVolume::default_volume();
    if (!opts.volume_path.empty()) {
        vol = volume_from_json(parse_json_text(read_text_file(opts.volume_path), "volume file"));
        mw.manifest.inputs.push_back(opts.volume_path);
    }
    const std::vector<double> idx = parse_csv_numbers(opts.token, 3, "--token");
    for (double v : idx)
        if (v != static_cast<long>(v))
            throw ConfigError("--token components must be integers, got '" + opts.token + "'");
    const Point3Cam p = decode_voxel({static_cast<int>(idx[0]), static_cast<int>(idx[1]),
                                      static_cast<int>(idx[2])},
                                     vol);
    std::printf("x=%.10g,y=%.10g,z=%.10g mm\n", p.x, p.y, p.z);
    mw.manifest.resolved_config = {{"volume", to_json(vol)}};
    mw.finish("", opts.common);
    return 0;
}

// ----------------------------------------------------------------- parse ---

struct ParseOpts {
    CommonOpts common;
    std::string in_path;
    std::string report_path;
};

int run_parse(const ParseOpts &opts) {
    ManifestWriter mw;
    mw.manifest.subcommand = "parse";
    mw.manifest.inputs.push_back(opts.in_path);
    const std::optional<CameraIntrinsics> intrinsics = load_intrinsics(opts.common);

    const ParseResult result = parse_sequence(read_text_file(opts.in_path));

    json records = json::array();
    for (const PredictionRecord &rec : result.sequence.records) {
        json entry = {{"joint", rec.joint_name},
                      {"uv_px", {rec.u, rec.v}},
                      {"voxel", {rec.voxel.x, rec.voxel.y, rec.voxel.z}}};
        if (intrinsics) {
            const bool inside = rec.u >= 0 && rec.u < intrinsics->width && rec.v >= 0 &&
                                rec.v < intrinsics->height;
            entry["out_of_frame"] = !inside;
        }
        records.push_back(std::move(entry));
    }
    json diagnostics = json::array();
    for (const ParseDiagnostic &d : result.diagnostics)
        diagnostics.push_back({{"line", d.line}, {"reason", d.reason}});
    const json report = {{"records", records}, {"diagnostics", diagnostics}};
    if (!opts.report_path.empty()) {
        atomic_write_file(opts.report_path, report.dump(2) + "\n");
        mw.manifest.outputs.push_back(opts.report_path);
    }
    std::printf("%s\n", serialize_sequence(result.sequence).c_str());
    mw.finish(opts.report_path, opts.common);
    return 0;
}

// ---------------------------------------------------------------- reward ---

struct RewardOpts {
    CommonOpts common;
    std::string pred_path;
    std::string gt_path;
    std::string config_path;
    std::string config_2d_path;
    std::string mode = "3d";
    std::string out_path;
};

double record_reward(const PoseRecord &gt, const PoseRecord &pred, const RewardConfig &cfg,
                     bool use_pixels) {
    JointErrors errs;
    gt.keypoints.for_each([&](std::string_view name, const Keypoint &kp) {
        if (use_pixels) {
            const auto git = gt.pixels.find(std::string(name));
            if (git == gt.pixels.end()) return; // 2D reward runs on annotated joints only
            const auto pit = pred.pixels.find(std::string(name));
            if (pit == pred.pixels.end()) throw MissingJoint(std::string(name));
            const double du = pit->second.u - git->second.u;
            const double dv = pit->second.v - git->second.v;
            errs.distances.push_back(std::sqrt(du * du + dv * dv));
        } else {
            const Keypoint &p = pred.keypoints.at(name);
            const double dx = p.position.x - kp.position.x;
            const double dy = p.position.y - kp.position.y;
            const double dz = p.position.z - kp.position.z;
            errs.distances.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
        }
        errs.visibility.push_back(kp.visible);
    });
    return pose_reward(errs, cfg);
}

int run_reward(const RewardOpts &opts) {
    ManifestWriter mw;
    mw.manifest.subcommand = "reward";
    mw.manifest.inputs = {opts.pred_path, opts.gt_path};
    if (opts.mode != "3d" && opts.mode != "2d" && opts.mode != "both")
        throw ConfigError("--mode must be one of 3d, 2d, both");

    RewardConfig cfg = opts.mode == "2d" ? RewardConfig::default_2d() : RewardConfig::default_3d();
    if (!opts.config_path.empty()) {
        cfg = reward_config_from_json(
            parse_json_text(read_text_file(opts.config_path), "reward config"));
        mw.manifest.inputs.push_back(opts.config_path);
    }
    RewardConfig cfg_2d = RewardConfig::default_2d();
    if (!opts.config_2d_path.empty()) {
        cfg_2d = reward_config_from_json(
            parse_json_text(read_text_file(opts.config_2d_path), "2d reward config"));
        mw.manifest.inputs.push_back(opts.config_2d_path);
    }

    std::vector<PoseRecord> gts, preds;
    for (const json &obj : read_jsonl(opts.gt_path)) gts.push_back(pose_record_from_json(obj));
    for (const json &obj : read_jsonl(opts.pred_path)) preds.push_back(pose_record_from_json(obj));

    std::string out;
    for (const PoseRecord &gt : gts) {
        const PoseRecord *pred = nullptr;
        for (const PoseRecord &p : preds)
            if (p.id == gt.id) pred = &p;
        if (!pred) throw IdMismatch("prediction file has no record with id " + std::to_string(gt.id));
        json line = {{"id", gt.id}};
        if (opts.mode == "3d") {
            line["reward"] = record_reward(gt, *pred, cfg, false);
        } else if (opts.mode == "2d") {
            line["reward"] = record_reward(gt, *pred, cfg, true);
        } else {
            const double r3 = record_reward(gt, *pred, cfg, false);
            const double r2 = record_reward(gt, *pred, cfg_2d, true);
            line["reward_3d"] = r3;
            line["reward_2d"] = r2;
            line["reward"] = 0.5 * r3 + 0.5 * r2;
        }
        out += line.dump();
        out += '\n';
    }

    mw.manifest.resolved_config = {{"mode", opts.mode}, {"config", to_json(cfg)}};
    if (opts.mode == "both") mw.manifest.resolved_config["config_2d"] = to_json(cfg_2d);
    if (!opts.out_path.empty()) {
        atomic_write_file(opts.out_path, out);
        mw.manifest.outputs.push_back(opts.out_path);
    } else {
        std::fputs(out.c_str(), stdout);
    }
    mw.finish(opts.out_path, opts.common);
    return 0;
}

// ------------------------------------------------------------- grpo-train ---

struct GrpoTrainOpts {
    CommonOpts common;
    std::string task_path;
    std::string config_path;
    std::string curve_path;
    std::int64_t seed_override = -1;
};

int run_grpo_train(const GrpoTrainOpts &opts) {
    ManifestWriter mw;
    mw.manifest.subcommand = "grpo-train";
    mw.manifest.inputs.push_back(opts.task_path);
    const ToyLocalizationTask task =
        task_from_json(parse_json_text(read_text_file(opts.task_path), "task file"));
    GrpoConfig cfg;
    if (!opts.config_path.empty()) {
        cfg = grpo_config_from_json(
            parse_json_text(read_text_file(opts.config_path), "grpo config"));
        mw.manifest.inputs.push_back(opts.config_path);
    }
    if (opts.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed_override);

    const LearningCurve curve = train_toy(task, cfg);
    atomic_write_file(opts.curve_path, curve_to_csv(curve));

    mw.manifest.resolved_config = to_json(cfg);
    mw.manifest.seed = cfg.seed;
    mw.manifest.outputs.push_back(opts.curve_path);
    mw.finish(opts.curve_path, opts.common);
    if (!curve.empty())
        std::fprintf(stderr, "grpo-train: %zu steps, first reward %.4f, last reward %.4f\n",
                     curve.size(), curve.front().mean_reward, curve.back().mean_reward);
    return 0;
}

// ----------------------------------------------------------------- synth ---

struct SynthOpts {
    CommonOpts common;
    int n = 0;
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_path;
};

int run_synth(const SynthOpts &opts) {
    ManifestWriter mw;
    mw.manifest.subcommand = "synth";
    SceneConfig cfg;
    if (!opts.config_path.empty()) {
        cfg = scene_config_from_json(
            parse_json_text(read_text_file(opts.config_path), "scene config"));
        mw.manifest.inputs.push_back(opts.config_path);
    }
    if (const std::optional<CameraIntrinsics> k = load_intrinsics(opts.common)) cfg.intrinsics = *k;

    DatasetStats stats;
    const std::vector<SceneSample> samples = generate_dataset(opts.n, cfg, opts.seed, &stats);
    std::string out;
    for (const SceneSample &sample : samples) {
        out += sample_to_json(sample).dump();
        out += '\n';
    }
    atomic_write_file(opts.out_path, out);

    mw.manifest.resolved_config = to_json(cfg);
    mw.manifest.resolved_config["n"] = opts.n;
    mw.manifest.seed = opts.seed;
    mw.manifest.outputs.push_back(opts.out_path);
    mw.finish(opts.out_path, opts.common);
    std::fprintf(stderr,
                 "synth: accepted %d of %lld attempts (%lld visibility, %lld filter rejections)\n",
                 opts.n, static_cast<long long>(stats.attempted),
                 static_cast<long long>(stats.rejected_by_visibility),
                 static_cast<long long>(stats.rejected_by_filter));
    return 0;
}

// ------------------------------------------------------------------ eval ---

struct EvalOpts {
    CommonOpts common;
    std::string data_path;
    std::string pred_path;
    std::string configs = "upper,lower,l_upper,r_upper";
    std::string report_path;
};

int run_eval(const EvalOpts &opts) {
    ManifestWriter mw;
    mw.manifest.subcommand = "eval";
    mw.manifest.inputs = {opts.data_path, opts.pred_path};

    std::vector<SceneSample> data;
    for (const json &obj : read_jsonl(opts.data_path)) data.push_back(sample_from_json(obj));

    std::vector<PoseRecord> preds;
    for (const json &obj : read_jsonl(opts.pred_path)) preds.push_back(pose_record_from_json(obj));

    std::vector<PartConfig> configs;
    std::size_t pos = 0;
    while (pos <= opts.configs.size()) {
        std::size_t comma = opts.configs.find(',', pos);
        if (comma == std::string::npos) comma = opts.configs.size();
        const std::string name = opts.configs.substr(pos, comma - pos);
        if (!name.empty()) configs.push_back(part_config(name));
        pos = comma + 1;
        if (comma == opts.configs.size()) break;
    }
    if (configs.empty()) throw ConfigError("--configs selected no part configuration");

    const Predictor predictor = [&preds](const SceneSample &sample) {
        for (const PoseRecord &p : preds)
            if (p.id == sample.id) return p.keypoints;
        throw IdMismatch("prediction file has no record with id " + std::to_string(sample.id));
    };
    const EvalReport report = run_benchmark(data, predictor, configs);
    atomic_write_file(opts.report_path, report_to_json(report).dump(2) + "\n");

    mw.manifest.resolved_config = {{"configs", opts.configs}};
    mw.manifest.outputs.push_back(opts.report_path);
    mw.finish(opts.report_path, opts.common);
    for (const ConfigResult &c : report.configs)
        std::fprintf(stderr, "eval: %-8s G-MPJPE %.3f mm over %lld samples\n", c.name.c_str(),
                     c.gmpjpe_mm, static_cast<long long>(c.samples_evaluated));
    return 0;
}

// ----------------------------------------------------------------- align ---

struct AlignOpts {
    CommonOpts common;
    std::string anchors_path;
    std::string pose_path;
    std::string out_path;
    bool with_scale = false;
};

int run_align(const AlignOpts &opts) {
    ManifestWriter mw;
    mw.manifest.subcommand = "align";
    mw.manifest.inputs = {opts.anchors_path, opts.pose_path};

    const AnchorCorrespondence corr = anchors_from_json(
        parse_json_text(read_text_file(opts.anchors_path), "anchors file"));
    ScaledTransform transform;
    if (opts.with_scale) {
        transform = kabsch_with_scale(corr);
    } else {
        transform.transform = align_with_anchors(corr);
    }

    std::string out;
    for (const json &obj : read_jsonl(opts.pose_path)) {
        PoseRecord rec = pose_record_from_json(obj);
        rec.keypoints = apply_transform(transform, rec.keypoints);
        rec.pixels.clear(); // 2D annotations do not survive a 3D motion
        out += pose_record_to_json(rec).dump();
        out += '\n';
    }
    atomic_write_file(opts.out_path, out);

    double residual_sq = 0.0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const Point3Cam placed = transform.apply(corr.source[i]);
        residual_sq += std::pow(placed.x - corr.target[i].x, 2) +
                       std::pow(placed.y - corr.target[i].y, 2) +
                       std::pow(placed.z - corr.target[i].z, 2);
    }
    json transform_json = {{"rotation", json::array()},
                           {"translation",
                            {transform.transform.translation.x(),
                             transform.transform.translation.y(),
                             transform.transform.translation.z()}},
                           {"scale", transform.scale},
                           {"anchor_rms_mm",
                            std::sqrt(residual_sq / static_cast<double>(corr.size()))},
                           {"anchors", corr.size()}};
    for (int r = 0; r < 3; ++r)
        transform_json["rotation"].push_back({transform.transform.rotation(r, 0),
                                              transform.transform.rotation(r, 1),
                                              transform.transform.rotation(r, 2)});
    std::printf("%s\n", transform_json.dump(2).c_str());

    mw.manifest.resolved_config = transform_json;
    mw.manifest.outputs.push_back(opts.out_path);
    mw.finish(opts.out_path, opts.common);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"taihri: close-range 3D human-keypoint localization toolkit"};
    app.require_subcommand(1);

    EncodeOpts encode_opts;
    CLI::App *encode_cmd = app.add_subcommand("encode", "quantize a camera-frame point to a voxel token");
    encode_cmd->add_option("--volume", encode_opts.volume_path, "interaction volume JSON");
    encode_cmd->add_option("--point", encode_opts.point, "x,y,z in millimeters")->required();
    encode_cmd->add_flag("--clamp", encode_opts.clamp, "clamp out-of-volume coordinates");
    add_common(encode_cmd, encode_opts.common);

    DecodeOpts decode_opts;
    CLI::App *decode_cmd = app.add_subcommand("decode", "reconstruct the voxel-center point of a token");
    decode_cmd->add_option("--volume", decode_opts.volume_path, "interaction volume JSON");
    decode_cmd->add_option("--token", decode_opts.token, "X,Y,Z in [0, 999]")->required();
    add_common(decode_cmd, decode_opts.common);

    ParseOpts parse_opts;
    CLI::App *parse_cmd = app.add_subcommand("parse", "parse a prediction sequence with diagnostics");
    parse_cmd->add_option("--in", parse_opts.in_path, "sequence text file")->required();
    parse_cmd->add_option("--report", parse_opts.report_path, "diagnostics report JSON");
    add_common(parse_cmd, parse_opts.common);

    RewardOpts reward_opts;
    CLI::App *reward_cmd = app.add_subcommand("reward", "pose-aware reward of predictions against ground truth");
    reward_cmd->add_option("--pred", reward_opts.pred_path, "predictions JSONL")->required();
    reward_cmd->add_option("--gt", reward_opts.gt_path, "ground-truth JSONL")->required();
    reward_cmd->add_option("--config", reward_opts.config_path, "reward config JSON");
    reward_cmd->add_option("--config-2d", reward_opts.config_2d_path,
                           "2D reward config JSON (mode both)");
    reward_cmd->add_option("--mode", reward_opts.mode, "3d, 2d, or both (default 3d)");
    reward_cmd->add_option("--out", reward_opts.out_path, "rewards JSONL (stdout when omitted)");
    add_common(reward_cmd, reward_opts.common);

    GrpoTrainOpts grpo_opts;
    CLI::App *grpo_cmd = app.add_subcommand("grpo-train", "train the toy policy with GRPO");
    grpo_cmd->add_option("--task", grpo_opts.task_path, "toy localization task JSON")->required();
    grpo_cmd->add_option("--config", grpo_opts.config_path, "grpo config JSON");
    grpo_cmd->add_option("--curve", grpo_opts.curve_path, "learning curve CSV output")->required();
    grpo_cmd->add_option("--seed", grpo_opts.seed_override, "override the config seed");
    add_common(grpo_cmd, grpo_opts.common);

    SynthOpts synth_opts;
    CLI::App *synth_cmd = app.add_subcommand("synth", "generate a synthetic close-range dataset");
    synth_cmd->add_option("--n", synth_opts.n, "number of accepted samples")->required();
    synth_cmd->add_option("--config", synth_opts.config_path, "scene config JSON");
    synth_cmd->add_option("--seed", synth_opts.seed, "master seed (default 1)");
    synth_cmd->add_option("--out", synth_opts.out_path, "dataset JSONL output")->required();
    add_common(synth_cmd, synth_opts.common);

    EvalOpts eval_opts;
    CLI::App *eval_cmd = app.add_subcommand("eval", "G-MPJPE benchmark over part configurations");
    eval_cmd->add_option("--data", eval_opts.data_path, "dataset JSONL")->required();
    eval_cmd->add_option("--pred", eval_opts.pred_path, "predictions JSONL")->required();
    eval_cmd->add_option("--configs", eval_opts.configs,
                         "comma-separated part configs (default upper,lower,l_upper,r_upper)");
    eval_cmd->add_option("--report", eval_opts.report_path, "report JSON output")->required();
    add_common(eval_cmd, eval_opts.common);

    AlignOpts align_opts;
    CLI::App *align_cmd = app.add_subcommand("align", "anchor-align a root-relative pose into camera space");
    align_cmd->add_option("--anchors", align_opts.anchors_path, "anchor correspondences JSON")->required();
    align_cmd->add_option("--pose", align_opts.pose_path, "poses JSONL to transform")->required();
    align_cmd->add_option("--out", align_opts.out_path, "aligned poses JSONL output")->required();
    align_cmd->add_flag("--with-scale", align_opts.with_scale,
                        "fit a similarity transform (scale ablation; needs >= 3 anchors)");
    add_common(align_cmd, align_opts.common);

    CLI::App *version_cmd = app.add_subcommand("version", "print the tool version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run 'taihri --help' for usage\n";
        return 2;
    }

    try {
        if (encode_cmd->parsed()) return run_encode(encode_opts);
        if (decode_cmd->parsed()) return run_decode(decode_opts);
        if (parse_cmd->parsed()) return run_parse(parse_opts);
        if (reward_cmd->parsed()) return run_reward(reward_opts);
        if (grpo_cmd->parsed()) return run_grpo_train(grpo_opts);
        if (synth_cmd->parsed()) return run_synth(synth_opts);
        if (eval_cmd->parsed()) return run_eval(eval_opts);
        if (align_cmd->parsed()) return run_align(align_opts);
        if (version_cmd->parsed()) {
            std::printf("taihri %s\n", kVersion);
            return 0;
        }
    } catch (const Error &e) {
        std::cerr << "error: " << e.name() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
