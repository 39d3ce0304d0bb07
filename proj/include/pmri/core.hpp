#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pmri {

inline constexpr const char* kVersion = "0.1.0";

/// Error taxonomy mirrored by the CLI exit codes:
/// config_error -> 2, io_error -> 3, numeric_error -> 4.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
/// Evaluation point coincides with a source, or a required gradient vanishes.
struct singularity_error : numeric_error {
    using numeric_error::numeric_error;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

enum class Axis { X = 0, Y = 1, Z = 2 };

inline const char* axis_name(Axis a) {
    switch (a) {
        case Axis::X: return "x";
        case Axis::Y: return "y";
        default: return "z";
    }
}

/// Proton gyromagnetic ratio in Hz/T and vacuum permeability, fixed at
/// construction so every downstream computation agrees on the same values.
class PhysicsConstants {
public:
    explicit PhysicsConstants(double gamma_hz_per_t = 42.5774768e6)
        : gamma_(gamma_hz_per_t) {
        if (!(gamma_ > 0.0)) throw config_error("gamma must be positive");
    }

    double gamma() const { return gamma_; }
    double mu0() const { return 4.0e-7 * M_PI; }

private:
    double gamma_;
};

/// Spherical region of interest.
struct Sphere {
    Vec3 center;
    double radius = 0.0;

    bool contains(const Vec3& p) const {
        return (p - center).norm2() <= radius * radius;
    }
};

}  // namespace pmri
