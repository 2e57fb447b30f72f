#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace loadorbit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

inline constexpr double kGravity = 9.81;  // m/s^2

// Thrown when rank(G) < 6, i.e. all attachment points lie on one line.
struct DegenerateLayout : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a force configuration does not realize the requested wrench.
struct NotWrenchConsistent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a per-carrier force vanishes and no bearing is defined.
struct ZeroForce : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PlanningFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace loadorbit
