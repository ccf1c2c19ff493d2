#pragma once

#include <stdexcept>
#include <string>

namespace taihri {

// Base class for all domain errors. `name()` is the stable identifier the
// CLI prints on its diagnostic stream; `what()` carries the details.
class Error : public std::runtime_error {
  public:
    Error(std::string name, const std::string &message)
        : std::runtime_error(message), name_(std::move(name)) {}

    const std::string &name() const noexcept { return name_; }

  private:
    std::string name_;
};

struct NonPositiveDepth : Error {
    explicit NonPositiveDepth(double z)
        : Error("NonPositiveDepth", "depth must be positive, got " + std::to_string(z)) {}
};

struct OutOfVolume : Error {
    explicit OutOfVolume(char axis, double local, double extent)
        : Error("OutOfVolume", std::string("coordinate outside interaction volume on axis ") +
                                   axis + ": local " + std::to_string(local) + " mm not in [0, " +
                                   std::to_string(extent) + ")"),
          axis(axis) {}
    char axis;
};

struct TokenOutOfRange : Error {
    explicit TokenOutOfRange(char axis, int index)
        : Error("TokenOutOfRange", std::string("voxel token index out of [0, 999] on axis ") +
                                       axis + ": " + std::to_string(index)) {}
};

struct EmptySequence : Error {
    EmptySequence() : Error("EmptySequence", "no line of the input parses as a prediction record") {}
};

struct NoVisibleJoints : Error {
    NoVisibleJoints() : Error("NoVisibleJoints", "at least one visible joint is required") {}
};

struct GroupTooSmall : Error {
    explicit GroupTooSmall(std::size_t k)
        : Error("GroupTooSmall", "group-relative advantage needs K >= 2 rewards, got " +
                                     std::to_string(k)) {}
};

struct MissingJoint : Error {
    explicit MissingJoint(const std::string &joint)
        : Error("MissingJoint", "keypoint set has no joint named '" + joint + "'") {}
};

struct IdMismatch : Error {
    explicit IdMismatch(const std::string &detail) : Error("IdMismatch", detail) {}
};

struct TooFewAnchors : Error {
    explicit TooFewAnchors(std::size_t n, std::size_t need)
        : Error("TooFewAnchors", "alignment needs at least " + std::to_string(need) +
                                     " anchor(s), got " + std::to_string(n)) {}
};

struct CoincidentPair : Error {
    CoincidentPair()
        : Error("CoincidentPair", "two-anchor alignment requires a non-degenerate segment") {}
};

struct CollinearAnchors : Error {
    CollinearAnchors()
        : Error("CollinearAnchors", "anchors are collinear; rotation is not determined") {}
};

struct DegenerateConfig : Error {
    explicit DegenerateConfig(const std::string &detail) : Error("DegenerateConfig", detail) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string &detail) : Error("ConfigError", detail) {}
};

struct IoError : Error {
    explicit IoError(const std::string &detail) : Error("IoError", detail) {}
};

} // namespace taihri
