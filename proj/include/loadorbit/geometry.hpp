#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "loadorbit/types.hpp"

namespace loadorbit {

// Singular values below kRankTol * sigma_max count as zero.
inline constexpr double kRankTol = 1e-10;

// Cable attachment points b_i on the load, expressed in the load frame {O}.
struct AttachmentLayout {
  std::vector<Vec3> points;

  explicit AttachmentLayout(std::vector<Vec3> pts) : points(std::move(pts)) {
    if (points.size() < 3) {
      throw std::invalid_argument("AttachmentLayout: need at least 3 attachment points");
    }
    for (const Vec3& b : points) {
      if (!b.allFinite()) {
        throw std::invalid_argument("AttachmentLayout: non-finite attachment point");
      }
    }
  }

  int n() const { return static_cast<int>(points.size()); }
};

// Force/torque pair acting on the load about its CoM, load frame {O}.
struct Wrench {
  Vec3 force = Vec3::Zero();    // N
  Vec3 torque = Vec3::Zero();   // N m

  Eigen::Vector<double, 6> vec() const {
    Eigen::Vector<double, 6> w;
    w << force, torque;
    return w;
  }
};

/// Grasp matrix G = [I3 ... I3; b_1^x ... b_n^x], its minimum-norm
/// pseudoinverse, and an orthonormal basis N of ker(G), k = 3n-6.
struct GraspModel {
  AttachmentLayout layout;
  MatX G;      // 6 x 3n
  MatX Gdag;   // 3n x 6
  MatX N;      // 3n x k, N^T N = I_k

  int n() const { return layout.n(); }
  int k() const { return static_cast<int>(N.cols()); }

  // P_i f without materializing P_i.
  static Vec3 carrier_block(const VecX& f, int i) { return f.segment<3>(3 * i); }

  // P_i N as a block view.
  auto carrier_rows(int i) const { return N.middleRows<3>(3 * i); }

  // P_i Gdag w
  Vec3 carrier_pinv_force(const Wrench& w, int i) const {
    return (Gdag * w.vec()).segment<3>(3 * i);
  }
};

namespace detail {

// Flip each column so its largest-magnitude entry is positive. Ties resolve
// to the lowest row index, which keeps the basis reproducible.
inline void canonicalize_column_signs(MatX& m) {
  for (int c = 0; c < m.cols(); ++c) {
    int imax = 0;
    double vmax = 0.0;
    for (int r = 0; r < m.rows(); ++r) {
      const double a = std::abs(m(r, c));
      if (a > vmax) {
        vmax = a;
        imax = r;
      }
    }
    if (m(imax, c) < 0.0) m.col(c) = -m.col(c);
  }
}

}  // namespace detail

inline GraspModel build_grasp_model(const AttachmentLayout& layout) {
  const int n = layout.n();
  MatX G(6, 3 * n);
  for (int i = 0; i < n; ++i) {
    G.block<3, 3>(0, 3 * i) = Mat3::Identity();
    G.block<3, 3>(3, 3 * i) = skew(layout.points[i]);
  }

  Eigen::JacobiSVD<MatX> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VecX& sigma = svd.singularValues();
  const double tol = kRankTol * sigma(0);
  int rank = 0;
  for (int i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > tol) ++rank;
  }
  if (rank < 6) {
    throw DegenerateLayout("rank(G) = " + std::to_string(rank) +
                           " < 6; attachment points are collinear");
  }

  MatX Gdag = svd.matrixV().leftCols(6) *
              sigma.head(6).cwiseInverse().asDiagonal() *
              svd.matrixU().transpose();

  MatX N = svd.matrixV().rightCols(3 * n - 6);
  detail::canonicalize_column_signs(N);

  return GraspModel{layout, std::move(G), std::move(Gdag), std::move(N)};
}

/// Wrench the cables must exert to hold a static load of the given mass,
/// with eta the unit gravity direction expressed in {O}.
inline Wrench gravity_wrench(double mass, const Vec3& eta) {
  if (!(mass > 0.0)) {
    throw std::invalid_argument("gravity_wrench: mass must be positive");
  }
  if (std::abs(eta.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("gravity_wrench: eta must be a unit vector");
  }
  return Wrench{-mass * kGravity * eta, Vec3::Zero()};
}

/// f = Gdag w + N lambda.
inline VecX forces_from_lambda(const GraspModel& gm, const Wrench& w, const VecX& lambda) {
  if (lambda.size() != gm.k()) {
    throw std::invalid_argument("forces_from_lambda: lambda has wrong dimension");
  }
  return gm.Gdag * w.vec() + gm.N * lambda;
}

/// lambda = N^T (f - Gdag w); requires G f = w to 1e-6 (infinity norm).
inline VecX lambda_from_forces(const GraspModel& gm, const Wrench& w, const VecX& f) {
  if (f.size() != 3 * gm.n()) {
    throw std::invalid_argument("lambda_from_forces: f has wrong dimension");
  }
  const double residual = (gm.G * f - w.vec()).lpNorm<Eigen::Infinity>();
  if (residual > 1e-6) {
    throw NotWrenchConsistent("lambda_from_forces: |G f - w| = " + std::to_string(residual));
  }
  return gm.N.transpose() * (f - gm.Gdag * w.vec());
}

struct AdmissibilityReport {
  bool admissible = false;
  double min_tension = 0.0;   // N
  int argmin_carrier = -1;
};

/// Membership test for the admissible manifold: min_i |P_i(Gdag w + N lambda)| > eps.
inline AdmissibilityReport is_admissible(const GraspModel& gm, const Wrench& w,
                                         const VecX& lambda, double eps = 1e-6) {
  if (eps < 0.0) {
    throw std::invalid_argument("is_admissible: eps must be nonnegative");
  }
  const VecX f = forces_from_lambda(gm, w, lambda);
  AdmissibilityReport report;
  report.min_tension = std::numeric_limits<double>::infinity();
  for (int i = 0; i < gm.n(); ++i) {
    const double t = GraspModel::carrier_block(f, i).norm();
    if (t < report.min_tension) {
      report.min_tension = t;
      report.argmin_carrier = i;
    }
  }
  report.admissible = report.min_tension > eps;
  return report;
}

// Cable direction and tension, f_i = T q.
struct BearingTension {
  Vec3 q;     // unit vector, load frame
  double T;   // N, > 0
};

inline BearingTension bearing_tension(const Vec3& f_i) {
  const double T = f_i.norm();
  if (T < 1e-12) {
    throw ZeroForce("bearing_tension: force norm below 1e-12");
  }
  return BearingTension{f_i / T, T};
}

/// D q_i(lambda) = T_i^-1 (I3 - q_i q_i^T) P_i N, a 3 x k matrix of rank 2
/// whenever P_i N is full rank.
inline MatX bearing_differential(const GraspModel& gm, const Wrench& w,
                                 const VecX& lambda, int carrier) {
  if (carrier < 0 || carrier >= gm.n()) {
    throw std::invalid_argument("bearing_differential: carrier index out of range");
  }
  const VecX f = forces_from_lambda(gm, w, lambda);
  const BearingTension bt = bearing_tension(GraspModel::carrier_block(f, carrier));
  return (Mat3::Identity() - bt.q * bt.q.transpose()) * gm.carrier_rows(carrier) / bt.T;
}

struct LayoutCheck {
  bool regular = false;
  // Indices of one violating (n-1)-subset, empty when none was found.
  std::vector<int> witness;
  // rank(P_i N) per carrier; empty when the grasp model is degenerate.
  std::vector<int> pin_ranks;
};

namespace detail {

inline bool collinear(const std::vector<Vec3>& pts) {
  if (pts.size() <= 2) return true;
  MatX diffs(static_cast<int>(pts.size()) - 1, 3);
  for (std::size_t j = 1; j < pts.size(); ++j) {
    diffs.row(static_cast<int>(j) - 1) = (pts[j] - pts[0]).transpose();
  }
  Eigen::JacobiSVD<MatX> svd(diffs);
  const VecX& s = svd.singularValues();
  if (s(0) == 0.0) return true;  // all points coincide
  return s.size() < 2 || s(1) <= kRankTol * s(0);
}

inline int numerical_rank(const MatX& m) {
  Eigen::JacobiSVD<MatX> svd(m);
  const VecX& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > kRankTol * s(0)) ++rank;
  }
  return rank;
}

}  // namespace detail

/// Regularity test: every (n-1)-subset of attachment points non-collinear
/// (n >= 4; for n = 3 regularity is rank(G) = 6 alone), cross-checked for
/// n >= 4 by the rank of every P_i N being 3.
inline LayoutCheck check_layout_assumption(const AttachmentLayout& layout) {
  const int n = layout.n();
  LayoutCheck check;

  if (n >= 4) {
    for (int omit = 0; omit < n; ++omit) {
      std::vector<Vec3> subset;
      std::vector<int> indices;
      subset.reserve(n - 1);
      for (int j = 0; j < n; ++j) {
        if (j == omit) continue;
        subset.push_back(layout.points[j]);
        indices.push_back(j);
      }
      if (detail::collinear(subset)) {
        check.witness = std::move(indices);
        return check;
      }
    }
  }

  GraspModel gm = [&]() -> GraspModel {
    try {
      return build_grasp_model(layout);
    } catch (const DegenerateLayout&) {
      return GraspModel{layout, MatX(), MatX(), MatX()};
    }
  }();
  if (gm.N.size() == 0) return check;  // rank(G) < 6, not regular

  check.pin_ranks.reserve(n);
  bool all_full = true;
  for (int i = 0; i < n; ++i) {
    const int r = detail::numerical_rank(gm.carrier_rows(i));
    check.pin_ranks.push_back(r);
    all_full = all_full && (r == 3);
  }
  // With exactly three carriers the internal-force space is spanned by the
  // three edge modes, so every P_i N block has rank 2 by construction;
  // full-rank blocks are implied by regularity only from four carriers up.
  check.regular = (n == 3) || all_full;
  return check;
}

}  // namespace loadorbit
