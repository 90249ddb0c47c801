#include "defgrid/transform.hpp"

namespace defgrid {

Mat3 skew(const Vec3& z) {
    Mat3 m;
    m << 0.0, -z.z(), z.y(),
         z.z(), 0.0, -z.x(),
         -z.y(), z.x(), 0.0;
    return m;
}

Mat3 cayley_inverse_factor(const Vec3& z) {
    const double denom = 1.0 + z.squaredNorm();
    return (Mat3::Identity() + skew(z) + z * z.transpose()) / denom;
}

Mat3 cayley_rotation(const Vec3& z) {
    return (Mat3::Identity() + skew(z)) * cayley_inverse_factor(z);
}

Vec3 apply_transform(const Transform6& tf, const Vec3& x) {
    return cayley_rotation(tf.z) * x + tf.t;
}

}  // namespace defgrid
