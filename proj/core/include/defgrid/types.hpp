#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>
#include <string>

namespace defgrid {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec3i = Eigen::Vector3i;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rejected or malformed caller input (bad indices, shape mismatches, empty clouds).
struct InputError : Error {
    using Error::Error;
};

/// Invalid run configuration (unknown flags, inconsistent settings, unreadable files).
struct ConfigError : Error {
    using Error::Error;
};

/// Non-finite values encountered mid-computation.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace defgrid
