#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace csi_inpaint {

/// Invalid configuration value or combination. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failure; message carries the offending path. Exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// On-disk data disagrees with its manifest (byte counts, shapes, versions).
class CorruptionError : public IoError {
public:
    using IoError::IoError;
};

/// Training produced a non-finite loss. Exit code 4.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checkpoint incompatible with the dataset or config it is used with. Exit code 5.
class CheckpointMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

double dot(Vec2 a, Vec2 b);
double norm(Vec2 a);
double distance(Vec2 a, Vec2 b);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Stable sub-seed for a named purpose, e.g. derive_seed(seed, "mask").
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

/// Counter-based sub-seed, so frame i gets the same stream in any evaluation order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t counter);

std::string hex64(std::uint64_t value);

}  // namespace csi_inpaint
