#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

#include "loadorbit/geometry.hpp"
#include "loadorbit/rng.hpp"
#include "loadorbit/types.hpp"

namespace loadorbit {

struct SegmentClearance {
  double clearance = 0.0;   // N, min over t in [0,1] and carriers of |f_i|
  double argmin_t = 0.0;    // segment parameter attaining the minimum
  int argmin_carrier = -1;
};

/// Minimum force norm along the straight segment a -> b in nullspace
/// coordinates. Per carrier the force is affine in t, so |f_i(t)|^2 is a
/// quadratic whose minimizer is the clamped critical point
/// t* = clamp(-u.d / |d|^2, 0, 1) with u = f_i(a), d = f_i(b) - f_i(a);
/// d = 0 degenerates to a constant.
inline SegmentClearance segment_clearance(const GraspModel& gm, const Wrench& w,
                                          const VecX& a, const VecX& b) {
  if (a.size() != gm.k() || b.size() != gm.k()) {
    throw std::invalid_argument("segment_clearance: point dimension does not match model");
  }
  const VecX pinv_force = gm.Gdag * w.vec();
  SegmentClearance out;
  out.clearance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < gm.n(); ++i) {
    const Vec3 u = pinv_force.segment<3>(3 * i) + gm.carrier_rows(i) * a;
    const Vec3 d = gm.carrier_rows(i) * (b - a);
    const double dd = d.squaredNorm();
    double t_star = 0.0;
    if (dd > 0.0) {
      t_star = std::clamp(-u.dot(d) / dd, 0.0, 1.0);
    }
    const double dist = (u + t_star * d).norm();
    if (dist < out.clearance) {
      out.clearance = dist;
      out.argmin_t = t_star;
      out.argmin_carrier = i;
    }
  }
  return out;
}

/// Piecewise-linear path in nullspace coordinates; consecutive waypoints are
/// joined by straight segments.
struct LambdaPath {
  std::vector<VecX> waypoints;  // N, at least one point
  double clearance = 0.0;       // N, min over the whole path of min_i |f_i|
};

namespace detail {

inline double point_clearance(const GraspModel& gm, const Wrench& w, const VecX& p) {
  return segment_clearance(gm, w, p, p).clearance;
}

// Depth-first segment refinement. On a blocked segment, draws a perturbed
// midpoint z = (a+b)/2 + delta * unit with delta = |b-a|/10 * 2^attempt and
// recurses on both halves. Every draw consumes one unit of `budget`, which
// bounds both the total work and the recursion depth.
inline void connect_segment(const GraspModel& gm, const Wrench& w, const VecX& a,
                            const VecX& b, double min_clearance, SplitMix64& rng,
                            int& budget, std::vector<VecX>& out) {
  if (segment_clearance(gm, w, a, b).clearance > min_clearance) {
    out.push_back(b);
    return;
  }
  const double delta0 = (b - a).norm() / 10.0;
  for (int attempt = 0;; ++attempt) {
    if (budget <= 0) {
      throw PlanningFailed("plan_path: retry budget exhausted");
    }
    --budget;
    const double delta = delta0 * std::pow(2.0, attempt);
    const VecX z = 0.5 * (a + b) + delta * rng.unit_vector(static_cast<int>(a.size()));
    if (point_clearance(gm, w, z) <= min_clearance) continue;
    connect_segment(gm, w, a, z, min_clearance, rng, budget, out);
    connect_segment(gm, w, z, b, min_clearance, rng, budget, out);
    return;
  }
}

}  // namespace detail

/// Plans a piecewise-linear path from start to goal whose every segment keeps
/// all force norms above min_clearance. Mirrors a perturbation argument: the
/// per-carrier zero-force sets are codimension-3 affine subspaces, so a random
/// midpoint displacement escapes them almost surely. Deterministic given seed.
inline LambdaPath plan_path(const GraspModel& gm, const Wrench& w, const VecX& start,
                            const VecX& goal, double min_clearance = 1e-3,
                            std::uint64_t seed = 0, int max_retries = 64) {
  if (start.size() != gm.k() || goal.size() != gm.k()) {
    throw std::invalid_argument("plan_path: endpoint dimension does not match model");
  }
  if (!(min_clearance > 0.0)) {
    throw std::invalid_argument("plan_path: min_clearance must be positive");
  }
  if (max_retries < 1) {
    throw std::invalid_argument("plan_path: max_retries must be >= 1");
  }
  const double start_clear = detail::point_clearance(gm, w, start);
  const double goal_clear = detail::point_clearance(gm, w, goal);
  if (start_clear <= min_clearance || goal_clear <= min_clearance) {
    throw std::invalid_argument("plan_path: endpoints must clear min_clearance");
  }

  LambdaPath path;
  path.waypoints.push_back(start);
  if ((goal - start).norm() == 0.0) {
    path.clearance = start_clear;
    return path;
  }

  SplitMix64 rng(seed);
  int budget = max_retries;
  detail::connect_segment(gm, w, start, goal, min_clearance, rng, budget,
                          path.waypoints);

  path.clearance = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s + 1 < path.waypoints.size(); ++s) {
    const double c =
        segment_clearance(gm, w, path.waypoints[s], path.waypoints[s + 1]).clearance;
    path.clearance = std::min(path.clearance, c);
  }
  return path;
}

}  // namespace loadorbit
