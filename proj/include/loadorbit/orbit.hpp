#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "loadorbit/geometry.hpp"
#include "loadorbit/rng.hpp"
#include "loadorbit/types.hpp"

namespace loadorbit {

/// Periodic nullspace-coordinate orbit lambda(t) = amplitude * A * mu(omega t)
/// with mu(s) = (cos s, sin s).
struct LinearOrbit {
  MatX A;                  // k x 2, N
  double omega = 1.0;      // rad/s
  double amplitude = 1.0;  // dimensionless scale on A

  LinearOrbit(MatX a, double om = 1.0, double amp = 1.0)
      : A(std::move(a)), omega(om), amplitude(amp) {
    if (!A.allFinite() || A.cols() != 2) {
      throw std::invalid_argument("LinearOrbit: A must be a finite k x 2 matrix");
    }
    if (!(omega > 0.0) || !(amplitude > 0.0)) {
      throw std::invalid_argument("LinearOrbit: omega and amplitude must be positive");
    }
  }

  double period() const { return 2.0 * M_PI / omega; }
};

struct OrbitSample {
  VecX lambda;      // N
  VecX lambda_dot;  // N/s
};

/// Evaluates the orbit and its time derivative. The phase is reduced mod 2*pi
/// before the trig calls so samples one period apart agree.
inline OrbitSample eval_orbit(const LinearOrbit& orbit, double t) {
  const double phase = std::fmod(orbit.omega * t, 2.0 * M_PI);
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  Eigen::Vector2d mu(c, s);
  Eigen::Vector2d mu_dot(-s, c);
  return OrbitSample{orbit.amplitude * orbit.A * mu,
                     orbit.amplitude * orbit.omega * orbit.A * mu_dot};
}

namespace detail {

// 2-norm condition number of a k x 2 matrix.
inline double condition_number(const MatX& a) {
  Eigen::JacobiSVD<MatX> svd(a);
  const VecX& s = svd.singularValues();
  if (s(1) == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(1);
}

}  // namespace detail

/// Draws `trials` k x 2 matrices with i.i.d. uniform [0,1] entries (SplitMix64
/// stream, row-major fill) and keeps the one with the smallest 2-norm
/// condition number. omega and amplitude are left at 1.
inline LinearOrbit sample_orbit_matrix(const GraspModel& gm, const Wrench& /*w*/,
                                       int trials, std::uint64_t seed) {
  if (trials < 1) {
    throw std::invalid_argument("sample_orbit_matrix: trials must be >= 1");
  }
  SplitMix64 rng(seed);
  const int k = gm.k();
  MatX best(k, 2);
  double best_cond = std::numeric_limits<double>::infinity();
  MatX a(k, 2);
  for (int trial = 0; trial < trials; ++trial) {
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < 2; ++c) a(r, c) = rng.next_double();
    }
    const double cond = detail::condition_number(a);
    if (cond < best_cond) {
      best_cond = cond;
      best = a;
    }
  }
  return LinearOrbit(std::move(best));
}

struct OrbitReport {
  bool valid = false;
  double min_tension = 0.0;          // N, over the sampled period
  double min_tension_time = 0.0;     // s
  int min_tension_carrier = -1;
  double min_carrier_speed = 0.0;    // m/s, |D q_i lambda_dot| * l_i
  double min_speed_time = 0.0;       // s
  int min_speed_carrier = -1;
  std::vector<int> rank_checks;      // rank(P_i N A) per carrier, must be 2
  std::vector<double> image_residuals;    // |(I - Pi_i) P_i Gdag w| per carrier
  std::vector<double> image_thresholds;   // 1e-8 * |P_i Gdag w| per carrier
  int samples = 0;
  double eps_tension = 0.0;  // N
  double eps_speed = 0.0;    // m/s
};

/// Checks that a linear orbit keeps every cable taut and every carrier moving.
///
/// Analytic part: rank(P_i N A) = 2 and P_i Gdag w outside image(P_i N A)
/// (residual above a relative threshold) certify positive tension and nonzero
/// carrier velocity for all t. When P_i Gdag w = 0 exactly, rank 2 alone
/// certifies both conditions, since P_i N A mu(t) never vanishes.
///
/// Sampled part: tension and carrier speed minima over `samples` uniform
/// times in one period, with cable lengths `lengths` (unit lengths when
/// empty).
inline OrbitReport verify_orbit(const GraspModel& gm, const Wrench& w,
                                const LinearOrbit& orbit, int samples = 4096,
                                double eps_tension = 1e-3, double eps_speed = 1e-4,
                                const std::vector<double>& lengths = {}) {
  if (samples < 64) {
    throw std::invalid_argument("verify_orbit: samples must be >= 64");
  }
  if (orbit.A.rows() != gm.k()) {
    throw std::invalid_argument("verify_orbit: orbit dimension does not match model");
  }
  if (!lengths.empty() && static_cast<int>(lengths.size()) != gm.n()) {
    throw std::invalid_argument("verify_orbit: lengths size does not match carrier count");
  }

  const int n = gm.n();
  OrbitReport report;
  report.samples = samples;
  report.eps_tension = eps_tension;
  report.eps_speed = eps_speed;

  const VecX pinv_force = gm.Gdag * w.vec();
  bool analytic_ok = true;
  for (int i = 0; i < n; ++i) {
    const MatX block = gm.carrier_rows(i) * orbit.A;  // 3 x 2
    const Vec3 u = pinv_force.segment<3>(3 * i);

    Eigen::JacobiSVD<MatX> svd(block, Eigen::ComputeThinU);
    const VecX& s = svd.singularValues();
    int rank = 0;
    if (s(0) > 0.0) {
      for (int j = 0; j < s.size(); ++j) {
        if (s(j) > kRankTol * s(0)) ++rank;
      }
    }
    report.rank_checks.push_back(rank);

    double residual = 0.0;
    if (rank > 0) {
      const MatX basis = svd.matrixU().leftCols(rank);
      residual = (u - basis * (basis.transpose() * u)).norm();
    } else {
      residual = u.norm();
    }
    const double threshold = 1e-8 * u.norm();
    report.image_residuals.push_back(residual);
    report.image_thresholds.push_back(threshold);

    const bool membership_ok = (u.norm() == 0.0) ? (rank == 2) : (residual > threshold);
    analytic_ok = analytic_ok && (rank == 2) && membership_ok;
  }

  report.min_tension = std::numeric_limits<double>::infinity();
  report.min_carrier_speed = std::numeric_limits<double>::infinity();
  const double period = orbit.period();
  for (int j = 0; j < samples; ++j) {
    const double t = period * static_cast<double>(j) / static_cast<double>(samples);
    const OrbitSample sample = eval_orbit(orbit, t);
    for (int i = 0; i < n; ++i) {
      const double li = lengths.empty() ? 1.0 : lengths[i];
      const Vec3 f = pinv_force.segment<3>(3 * i) +
                     gm.carrier_rows(i) * sample.lambda;
      const double tension = f.norm();
      if (tension < report.min_tension) {
        report.min_tension = tension;
        report.min_tension_time = t;
        report.min_tension_carrier = i;
      }
      double speed = 0.0;
      if (tension > 0.0) {
        const Vec3 q = f / tension;
        const Vec3 qdot = (gm.carrier_rows(i) * sample.lambda_dot -
                           q * (q.dot(gm.carrier_rows(i) * sample.lambda_dot))) / tension;
        speed = qdot.norm() * li;
      }
      if (speed < report.min_carrier_speed) {
        report.min_carrier_speed = speed;
        report.min_speed_time = t;
        report.min_speed_carrier = i;
      }
    }
  }

  report.valid = analytic_ok && report.min_tension > eps_tension &&
                 report.min_carrier_speed > eps_speed;
  return report;
}

// Carrier kinematics in the load frame at one instant.
struct CarrierKinematics {
  Vec3 p;     // m, b_i + q_i l_i
  Vec3 v;     // m/s, D q_i lambda_dot * l_i
  Vec3 q;     // unit bearing
  double T;   // N
};

inline std::vector<CarrierKinematics> orbit_to_kinematics(
    const GraspModel& gm, const Wrench& w, const LinearOrbit& orbit,
    const std::vector<double>& lengths, double t) {
  if (static_cast<int>(lengths.size()) != gm.n()) {
    throw std::invalid_argument("orbit_to_kinematics: lengths size does not match carrier count");
  }
  for (double l : lengths) {
    if (!(l > 0.0)) {
      throw std::invalid_argument("orbit_to_kinematics: cable lengths must be positive");
    }
  }
  const OrbitSample sample = eval_orbit(orbit, t);
  const VecX f = forces_from_lambda(gm, w, sample.lambda);
  std::vector<CarrierKinematics> out;
  out.reserve(gm.n());
  for (int i = 0; i < gm.n(); ++i) {
    const BearingTension bt = bearing_tension(GraspModel::carrier_block(f, i));
    const Vec3 qdot = (Mat3::Identity() - bt.q * bt.q.transpose()) *
                      (gm.carrier_rows(i) * sample.lambda_dot) / bt.T;
    out.push_back(CarrierKinematics{gm.layout.points[i] + bt.q * lengths[i],
                                    qdot * lengths[i], bt.q, bt.T});
  }
  return out;
}

}  // namespace loadorbit
