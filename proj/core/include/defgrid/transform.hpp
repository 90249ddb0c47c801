#pragma once

#include "defgrid/types.hpp"

namespace defgrid {

/// Local rigid motion: 3 Cayley rotation parameters and a translation.
/// All-zero parameters are the identity motion.
struct Transform6 {
    Vec3 z{0.0, 0.0, 0.0};
    Vec3 t{0.0, 0.0, 0.0};

    Transform6() = default;
    Transform6(const Vec3& z_in, const Vec3& t_in) : z(z_in), t(t_in) {}

    Transform6& operator+=(const Transform6& o) {
        z += o.z;
        t += o.t;
        return *this;
    }
    Transform6& operator*=(double s) {
        z *= s;
        t *= s;
        return *this;
    }
    friend Transform6 operator*(double s, const Transform6& a) {
        return Transform6(s * a.z, s * a.t);
    }
    double dot(const Transform6& o) const { return z.dot(o.z) + t.dot(o.t); }
    bool is_zero() const { return z.isZero(0.0) && t.isZero(0.0); }
    double& channel(int c) { return c < 3 ? z[c] : t[c - 3]; }
    double channel(int c) const { return c < 3 ? z[c] : t[c - 3]; }
};

Mat3 skew(const Vec3& z);

/// R(z) = (I + Z)(I - Z)^{-1}; total, orthogonal with det 1 for every z.
Mat3 cayley_rotation(const Vec3& z);

/// (I - Z)^{-1} = (I + Z + z z^T) / (1 + |z|^2), used by both the rotation and
/// its pullback.
Mat3 cayley_inverse_factor(const Vec3& z);

/// y = R(z) x + t with the rotation pivot at the canonical-domain origin.
Vec3 apply_transform(const Transform6& tf, const Vec3& x);

/// Reverse-mode data for y = R(z) x: with b = (I-Z)^{-1} x and a = (I+R)^T ybar,
///   zbar = b x a   and   xbar = R^T ybar.
struct RotationPullback {
    Mat3 rotation;
    Mat3 inverse_factor;

    explicit RotationPullback(const Vec3& z)
        : inverse_factor(cayley_inverse_factor(z)) {
        rotation = (Mat3::Identity() + skew(z)) * inverse_factor;
    }

    Vec3 rotate(const Vec3& x) const { return rotation * x; }

    void pull_back(const Vec3& x, const Vec3& ybar, Vec3& zbar_out, Vec3& xbar_out) const {
        const Vec3 b = inverse_factor * x;
        const Vec3 a = (Mat3::Identity() + rotation).transpose() * ybar;
        zbar_out = b.cross(a);
        xbar_out = rotation.transpose() * ybar;
    }
};

}  // namespace defgrid
