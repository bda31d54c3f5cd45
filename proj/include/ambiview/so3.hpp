#pragma once

// Rotation arithmetic and view grids over SO(3).
//
// Conventions used throughout the library:
//  - A Rotation maps camera-frame vectors into the object frame.
//  - The canonical view axis is +z of the camera frame. R * (+z) is the
//    direction from the object center towards the camera, i.e. the viewing
//    direction. The camera looks back along -z at the origin.
//  - Roll is the rotation about the view axis applied after the look-at
//    rotation: R = look_at(v) * Rz(roll).
//  - Euler angles are intrinsic Z-Y-X: R = Rz(alpha) * Ry(beta) * Rx(gamma).

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ambiview {

using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Unit quaternion with the double cover collapsed (stored with w >= 0).
class Rotation {
public:
    Rotation() : q_(Eigen::Quaterniond::Identity()) {}

    /// Normalizes and canonicalizes. Throws on a zero quaternion.
    Rotation(double w, double x, double y, double z) : q_(w, x, y, z) { canonicalize(); }

    explicit Rotation(const Eigen::Quaterniond& q) : q_(q) { canonicalize(); }

    static Rotation identity() { return {}; }

    static Rotation from_axis_angle(const Vec3& axis, double angle) {
        return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
    }

    static Rotation about_x(double angle) { return from_axis_angle(Vec3::UnitX(), angle); }
    static Rotation about_y(double angle) { return from_axis_angle(Vec3::UnitY(), angle); }
    static Rotation about_z(double angle) { return from_axis_angle(Vec3::UnitZ(), angle); }

    /// Accepts any orthonormal matrix with determinant +1.
    static Rotation from_matrix(const Eigen::Matrix3d& m) { return Rotation(Eigen::Quaterniond(m)); }

    [[nodiscard]] double w() const { return q_.w(); }
    [[nodiscard]] double x() const { return q_.x(); }
    [[nodiscard]] double y() const { return q_.y(); }
    [[nodiscard]] double z() const { return q_.z(); }

    [[nodiscard]] const Eigen::Quaterniond& quaternion() const { return q_; }
    [[nodiscard]] Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }

    [[nodiscard]] Rotation inverse() const { return Rotation(q_.conjugate()); }

    [[nodiscard]] Vec3 apply(const Vec3& v) const { return q_ * v; }

    /// Viewing direction: where the canonical view axis points in the object frame.
    [[nodiscard]] Vec3 view_direction() const { return q_ * Vec3::UnitZ(); }

    friend Rotation operator*(const Rotation& a, const Rotation& b) { return Rotation(a.q_ * b.q_); }

    /// Exact comparison of the canonical representatives.
    friend bool operator==(const Rotation& a, const Rotation& b) { return a.q_.coeffs() == b.q_.coeffs(); }

private:
    void canonicalize() {
        const double n = q_.norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw std::invalid_argument("Rotation: quaternion must be finite and nonzero");
        }
        // Leave already-unit input untouched so that canonicalization is
        // idempotent and serialized values round-trip bit for bit.
        if (std::abs(n - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
            q_.coeffs() /= n;
        }
        // Pick the representative with w > 0; on the w == 0 great sphere the
        // first nonzero vector component is made positive.
        const double lead = q_.w() != 0.0 ? q_.w() : (q_.x() != 0.0 ? q_.x() : (q_.y() != 0.0 ? q_.y() : q_.z()));
        if (lead < 0.0) {
            q_.coeffs() = -q_.coeffs();
        }
    }

    Eigen::Quaterniond q_;
};

/// Angle of a^-1 b in [0, pi].
inline double geodesic_distance(const Rotation& a, const Rotation& b) {
    const Eigen::Quaterniond d = a.quaternion().conjugate() * b.quaternion();
    const double s = d.vec().norm();
    const double c = std::abs(d.w());
    return 2.0 * std::atan2(s, c);
}

/// Angle between two vectors in [0, pi], accurate for tiny and near-pi angles.
inline double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

struct EulerZYX {
    double alpha = 0.0; ///< about z
    double beta = 0.0;  ///< about the once-rotated y
    double gamma = 0.0; ///< about the twice-rotated x
};

inline Rotation from_euler(double alpha, double beta, double gamma) {
    return Rotation::about_z(alpha) * Rotation::about_y(beta) * Rotation::about_x(gamma);
}

inline Rotation from_euler(const EulerZYX& e) { return from_euler(e.alpha, e.beta, e.gamma); }

/// At gimbal lock (|cos beta| ~ 0) the canonical representative with gamma = 0 is returned.
inline EulerZYX to_euler(const Rotation& r) {
    const Eigen::Matrix3d m = r.matrix();
    EulerZYX e;
    const double sb = std::clamp(-m(2, 0), -1.0, 1.0);
    const double cb = std::hypot(m(0, 0), m(1, 0));
    e.beta = std::atan2(sb, cb);
    if (cb < 1e-9) {
        e.gamma = 0.0;
        // With gamma = 0: m(0,1) = -sin(alpha), m(1,1) = cos(alpha).
        e.alpha = std::atan2(-m(0, 1), m(1, 1));
    } else {
        e.alpha = std::atan2(m(1, 0), m(0, 0));
        e.gamma = std::atan2(m(2, 1), m(2, 2));
    }
    return e;
}

struct SphericalDirection {
    double theta = 0.0; ///< polar angle from +z, [0, pi]
    double phi = 0.0;   ///< azimuth, [0, 2pi)

    [[nodiscard]] Vec3 unit_vector() const {
        const double s = std::sin(theta);
        return {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
    }

    static SphericalDirection from_vector(const Vec3& v) {
        const Vec3 u = v.normalized();
        SphericalDirection d;
        d.theta = std::atan2(std::hypot(u.x(), u.y()), u.z());
        d.phi = std::atan2(u.y(), u.x());
        if (d.phi < 0.0) {
            d.phi += kTwoPi;
        }
        if (d.phi >= kTwoPi) {
            d.phi = 0.0;
        }
        return d;
    }
};

/// Golden-angle spiral with z_k = 1 - 2(k + 0.5)/n. A single direction is
/// placed at the pole.
inline std::vector<SphericalDirection> fibonacci_directions(std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("fibonacci_directions: n must be >= 1");
    }
    std::vector<SphericalDirection> dirs(n);
    if (n == 1) {
        return dirs;
    }
    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
    for (std::size_t k = 0; k < n; ++k) {
        const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
        dirs[k].theta = std::acos(std::clamp(z, -1.0, 1.0));
        dirs[k].phi = std::fmod(golden_angle * static_cast<double>(k), kTwoPi);
    }
    return dirs;
}

/// Expected spacing of n uniformly spread points on the unit sphere.
inline double uniform_sphere_spacing(std::size_t n) { return std::sqrt(4.0 * kPi / static_cast<double>(n)); }

/// Minimal rotation taking the canonical view axis onto `dir` (roll 0 by
/// definition). Undefined direction only at dir = -z, where a half-turn
/// about +x is used.
inline Rotation look_at(const Vec3& dir) {
    const Vec3 v = dir.normalized();
    const double c = v.z();
    if (c < -1.0 + 1e-15) {
        return Rotation(0.0, 1.0, 0.0, 0.0);
    }
    // Half-angle construction of the shortest arc from +z to v.
    return Rotation(1.0 + c, -v.y(), v.x(), 0.0);
}

inline Rotation look_at(const SphericalDirection& d) { return look_at(d.unit_vector()); }

inline double wrap_angle(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) {
        r += kTwoPi;
    }
    return r >= kTwoPi ? 0.0 : r;
}

/// Roll of `r` about its view axis relative to look_at(r.view_direction()), in [0, 2pi).
inline double roll_angle(const Rotation& r) {
    const Rotation rel = look_at(r.view_direction()).inverse() * r;
    return wrap_angle(2.0 * std::atan2(rel.z(), rel.w()));
}

inline Rotation view_rotation(const Vec3& dir, double roll) { return look_at(dir) * Rotation::about_z(roll); }

struct ViewGrid {
    std::vector<Rotation> rotations;
    std::size_t n_dirs = 0;
    std::size_t n_inplane = 0;

    [[nodiscard]] std::size_t size() const { return rotations.size(); }

    /// Expected direction spacing; used to scale local search steps.
    [[nodiscard]] double direction_spacing() const { return uniform_sphere_spacing(n_dirs); }
};

/// Direction-major ordering: entry k = dir k / n_inplane, roll (k % n_inplane) * 2pi / n_inplane.
inline ViewGrid build_view_grid(std::size_t n_dirs, std::size_t n_inplane) {
    if (n_dirs == 0 || n_inplane == 0) {
        throw std::invalid_argument("build_view_grid: n_dirs and n_inplane must be >= 1");
    }
    ViewGrid grid;
    grid.n_dirs = n_dirs;
    grid.n_inplane = n_inplane;
    grid.rotations.reserve(n_dirs * n_inplane);
    for (const auto& d : fibonacci_directions(n_dirs)) {
        const Rotation base = look_at(d);
        for (std::size_t j = 0; j < n_inplane; ++j) {
            const double roll = kTwoPi * static_cast<double>(j) / static_cast<double>(n_inplane);
            grid.rotations.push_back(base * Rotation::about_z(roll));
        }
    }
    return grid;
}

/// Largest geodesic distance from any grid rotation to its nearest neighbour. O(N^2).
inline double max_nearest_neighbor_spacing(const std::vector<Rotation>& rotations) {
    double worst = 0.0;
    for (std::size_t i = 0; i < rotations.size(); ++i) {
        double best = kPi;
        for (std::size_t j = 0; j < rotations.size(); ++j) {
            if (i != j) {
                best = std::min(best, geodesic_distance(rotations[i], rotations[j]));
            }
        }
        worst = std::max(worst, best);
    }
    return rotations.size() > 1 ? worst : 0.0;
}

} // namespace ambiview
