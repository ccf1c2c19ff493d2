#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "taihri/camera.hpp"
#include "taihri/errors.hpp"
#include "taihri/joints.hpp"
#include "taihri/voxel.hpp"

namespace taihri {

// One parsed model-output record: a joint name, its 2D location in integer
// pixels of the focal-unified image, and its 3D location as a voxel token.
struct PredictionRecord {
    std::string joint_name;
    int u = 0; // pixels, may be negative or past the image edge (out-of-frame)
    int v = 0;
    VoxelToken voxel;

    friend bool operator==(const PredictionRecord &, const PredictionRecord &) = default;
};

struct PredictionSequence {
    std::vector<PredictionRecord> records;

    void validate() const {
        if (records.empty()) throw EmptySequence();
        if (records.size() > kJointNames.size())
            throw ConfigError("prediction sequence has more records than joint names");
        for (std::size_t i = 0; i < records.size(); ++i) {
            const PredictionRecord &r = records[i];
            if (!is_joint_name(r.joint_name))
                throw ConfigError("unknown joint name '" + r.joint_name + "'");
            if (r.voxel.x < 0 || r.voxel.x >= kVoxelGrid || r.voxel.y < 0 ||
                r.voxel.y >= kVoxelGrid || r.voxel.z < 0 || r.voxel.z >= kVoxelGrid)
                throw ConfigError("voxel token out of range in record for '" + r.joint_name + "'");
            for (std::size_t j = 0; j < i; ++j)
                if (records[j].joint_name == r.joint_name)
                    throw ConfigError("duplicate joint name '" + r.joint_name + "'");
        }
    }

    friend bool operator==(const PredictionSequence &, const PredictionSequence &) = default;
};

// Pixel quantization used at serialization time: round half away from zero.
inline int round_pixel(double value) { return static_cast<int>(std::lround(value)); }

inline PredictionRecord make_record(std::string joint_name, const Pixel &px,
                                    const VoxelToken &voxel) {
    return {std::move(joint_name), round_pixel(px.u), round_pixel(px.v), voxel};
}

// Line grammar (bit-exact):
//   line := name ": (" int "," int ") -> [" int "," int "," int "]"
// Names are lowercase with underscores, records are newline-separated, and
// there is no trailing whitespace.
inline std::string serialize_sequence(const PredictionSequence &seq) {
    seq.validate();
    std::string out;
    for (std::size_t i = 0; i < seq.records.size(); ++i) {
        const PredictionRecord &r = seq.records[i];
        if (i > 0) out += '\n';
        out += r.joint_name;
        out += ": (";
        out += std::to_string(r.u);
        out += ',';
        out += std::to_string(r.v);
        out += ") -> [";
        out += std::to_string(r.voxel.x);
        out += ',';
        out += std::to_string(r.voxel.y);
        out += ',';
        out += std::to_string(r.voxel.z);
        out += ']';
    }
    return out;
}

struct ParseDiagnostic {
    int line = 0; // 1-based
    std::string reason;
};

struct ParseResult {
    PredictionSequence sequence;
    std::vector<ParseDiagnostic> diagnostics;
};

namespace detail {

class LineScanner {
  public:
    explicit LineScanner(std::string_view s) : s_(s) {}

    bool literal(std::string_view lit) {
        if (s_.substr(pos_, lit.size()) != lit) return false;
        pos_ += lit.size();
        return true;
    }

    // Decimal integer with optional leading minus. Fails on overflow.
    bool integer(long &out) {
        const char *begin = s_.data() + pos_;
        const char *end = s_.data() + s_.size();
        auto [ptr, ec] = std::from_chars(begin, end, out);
        if (ec != std::errc() || ptr == begin) return false;
        pos_ += static_cast<std::size_t>(ptr - begin);
        return true;
    }

    bool name(std::string_view &out) {
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               ((s_[pos_] >= 'a' && s_[pos_] <= 'z') || s_[pos_] == '_'))
            ++pos_;
        if (pos_ == start) return false;
        out = s_.substr(start, pos_ - start);
        return true;
    }

    bool done() const { return pos_ == s_.size(); }

  private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

// Parses one line; on failure returns the diagnostic reason.
inline bool parse_record_line(std::string_view line, PredictionRecord &rec, std::string &reason) {
    LineScanner sc(line);
    std::string_view name;
    long u = 0, v = 0, x = 0, y = 0, z = 0;
    if (!sc.name(name) || !sc.literal(": (") || !sc.integer(u) || !sc.literal(",") ||
        !sc.integer(v) || !sc.literal(") -> [") || !sc.integer(x) || !sc.literal(",") ||
        !sc.integer(y) || !sc.literal(",") || !sc.integer(z) || !sc.literal("]")) {
        reason = "malformed record";
        return false;
    }
    if (!sc.done()) {
        reason = "trailing characters after record";
        return false;
    }
    if (!is_joint_name(name)) {
        reason = "unknown joint name '" + std::string(name) + "'";
        return false;
    }
    if (u < INT32_MIN || u > INT32_MAX || v < INT32_MIN || v > INT32_MAX) {
        reason = "pixel coordinate out of range";
        return false;
    }
    const long coords[3] = {x, y, z};
    const char axes[3] = {'X', 'Y', 'Z'};
    for (int a = 0; a < 3; ++a) {
        if (coords[a] < 0 || coords[a] >= kVoxelGrid) {
            reason = std::string(1, axes[a]) + " out of range";
            return false;
        }
    }
    rec.joint_name = std::string(name);
    rec.u = static_cast<int>(u);
    rec.v = static_cast<int>(v);
    rec.voxel = {static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)};
    return true;
}

inline bool blank_line(std::string_view line) {
    for (char c : line)
        if (c != ' ' && c != '\t' && c != '\r') return false;
    return true;
}

} // namespace detail

// Total on arbitrary byte input: malformed lines are skipped and reported in
// the diagnostics with their 1-based line number; duplicate joint names keep
// the first occurrence. Blank lines are ignored without a diagnostic.
// Throws EmptySequence only when not a single line parses.
inline ParseResult parse_sequence(std::string_view text) {
    ParseResult result;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                              : nl - pos);
        ++line_no;
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        if (nl == std::string_view::npos && line.empty() && line_no > 1) break;
        if (detail::blank_line(line)) continue;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        PredictionRecord rec;
        std::string reason;
        if (!detail::parse_record_line(line, rec, reason)) {
            result.diagnostics.push_back({line_no, reason});
            continue;
        }
        bool duplicate = false;
        for (const PredictionRecord &seen : result.sequence.records)
            if (seen.joint_name == rec.joint_name) {
                duplicate = true;
                break;
            }
        if (duplicate) {
            result.diagnostics.push_back(
                {line_no, "duplicate joint name '" + rec.joint_name + "'"});
            continue;
        }
        result.sequence.records.push_back(std::move(rec));
    }
    if (result.sequence.records.empty()) throw EmptySequence();
    return result;
}

} // namespace taihri
