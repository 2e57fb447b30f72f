#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "loadorbit/geometry.hpp"
#include "loadorbit/orbit.hpp"
#include "loadorbit/types.hpp"

namespace loadorbit {

struct CableParams {
  double Kc = 700.0;  // stiffness, N/m
  double Bc = 1.0;    // damping, N s/m
  double l0 = 0.8;    // rest length, m
};

/// Controlled point-mass carrier: accel = Mi^-1 (-f + K1 e_dot + K2 e + K3 int e)
/// with e = p_desired - p and f the cable force the carrier exerts on the load.
/// Gravity on the carrier is assumed compensated and does not appear.
struct CarrierParams {
  Mat3 Mi = 0.01 * Mat3::Identity();   // kg
  Mat3 K1 = 10.0 * Mat3::Identity();   // velocity-error gain, N s/m
  Mat3 K2 = 500.0 * Mat3::Identity();  // position-error gain, N/m
  Mat3 K3 = 20.0 * Mat3::Identity();   // integral-error gain, N/(m s)
};

struct LoadState {
  Vec3 position = Vec3::Zero();          // m, world frame
  Quat attitude = Quat::Identity();      // body-to-world, unit norm
  Vec3 velocity = Vec3::Zero();          // m/s, world frame
  Vec3 angular_velocity = Vec3::Zero();  // rad/s, body frame
};

struct CarrierState {
  Vec3 position = Vec3::Zero();        // m, world frame
  Vec3 velocity = Vec3::Zero();        // m/s, world frame
  Vec3 integral_error = Vec3::Zero();  // m s, accumulated position error
};

struct DesiredState {
  Vec3 p_d = Vec3::Zero();  // m, world frame
  Vec3 v_d = Vec3::Zero();  // m/s, world frame
};

/// Full simulation state: one rigid load suspended by one cable per carrier.
/// attachments[i] is the body-frame anchor of cable i; carrier_states[i] is the
/// far end of that cable. Any carrier count >= 0 is allowed (the static and
/// energy tests use one or zero cables).
struct SimWorld {
  double load_mass = 0.5;                      // kg
  Mat3 load_inertia = 0.01 * Mat3::Identity(); // kg m^2
  std::vector<Vec3> attachments;               // m, body frame
  CableParams cables;
  CarrierParams carriers;
  LoadState load;
  std::vector<CarrierState> carrier_states;
  double gravity = 9.81;        // m/s^2, along -z world
  double dt = 1e-3;             // s
  double duration = 20.0;       // s
  double time = 0.0;            // s, advanced by step()
  bool freeze_carriers = false; // pin carriers in place (static tests)
};

/// Unilateral spring-damper cable. Returns the force ON the load at the
/// attachment; the carrier receives the negative. A slack cable (length below
/// rest) exerts nothing, and damping never pushes: T = max(0, Kc*s + Bc*s_dot)
/// when the elongation s is positive, else 0.
inline Vec3 cable_force(const Vec3& attach_world, const Vec3& carrier_pos,
                        const Vec3& attach_vel, const Vec3& carrier_vel,
                        const CableParams& cp) {
  const Vec3 d = carrier_pos - attach_world;
  const double L = d.norm();
  if (L < 1e-9) return Vec3::Zero();
  const Vec3 u = d / L;
  const double s = L - cp.l0;
  if (!(s > 0.0)) return Vec3::Zero();
  const double s_dot = u.dot(carrier_vel - attach_vel);
  const double T = std::max(0.0, cp.Kc * s + cp.Bc * s_dot);
  return T * u;
}

namespace detail {

inline void validate_world(const SimWorld& world) {
  if (!(world.dt > 0.0)) {
    throw std::invalid_argument("SimWorld: dt must be positive");
  }
  if (!(world.load_mass > 0.0)) {
    throw std::invalid_argument("SimWorld: load mass must be positive");
  }
  if (Eigen::LLT<Mat3>(world.load_inertia).info() != Eigen::Success) {
    throw std::invalid_argument("SimWorld: load inertia must be positive definite");
  }
  if (Eigen::LLT<Mat3>(world.carriers.Mi).info() != Eigen::Success) {
    throw std::invalid_argument("SimWorld: carrier inertia must be positive definite");
  }
  if (!(world.cables.Kc > 0.0) || world.cables.Bc < 0.0 || !(world.cables.l0 > 0.0)) {
    throw std::invalid_argument("SimWorld: cable parameters out of range");
  }
  if (world.attachments.size() != world.carrier_states.size()) {
    throw std::invalid_argument("SimWorld: one carrier per attachment required");
  }
}

// Flat ODE state: load {position, velocity, quaternion wxyz, angular velocity},
// then per carrier {position, velocity, integral error}.
inline constexpr int kLoadStateSize = 13;
inline constexpr int kCarrierStateSize = 9;

inline VecX pack_state(const SimWorld& world) {
  const int n = static_cast<int>(world.carrier_states.size());
  VecX y(kLoadStateSize + kCarrierStateSize * n);
  y.segment<3>(0) = world.load.position;
  y.segment<3>(3) = world.load.velocity;
  y(6) = world.load.attitude.w();
  y(7) = world.load.attitude.x();
  y(8) = world.load.attitude.y();
  y(9) = world.load.attitude.z();
  y.segment<3>(10) = world.load.angular_velocity;
  for (int i = 0; i < n; ++i) {
    const int base = kLoadStateSize + kCarrierStateSize * i;
    y.segment<3>(base + 0) = world.carrier_states[i].position;
    y.segment<3>(base + 3) = world.carrier_states[i].velocity;
    y.segment<3>(base + 6) = world.carrier_states[i].integral_error;
  }
  return y;
}

inline void unpack_state(const VecX& y, SimWorld& world) {
  const int n = static_cast<int>(world.carrier_states.size());
  world.load.position = y.segment<3>(0);
  world.load.velocity = y.segment<3>(3);
  world.load.attitude = Quat(y(6), y(7), y(8), y(9)).normalized();
  world.load.angular_velocity = y.segment<3>(10);
  for (int i = 0; i < n; ++i) {
    const int base = kLoadStateSize + kCarrierStateSize * i;
    world.carrier_states[i].position = y.segment<3>(base + 0);
    world.carrier_states[i].velocity = y.segment<3>(base + 3);
    world.carrier_states[i].integral_error = y.segment<3>(base + 6);
  }
}

}  // namespace detail

/// Advances the world by one dt of fixed-step RK4. `desired_at(s)` must return
/// the per-carrier desired states at local time s in [0, dt], so the integrator
/// can evaluate the reference exactly at its substage times.
template <typename DesiredFn>
SimWorld step_with(const SimWorld& world, DesiredFn&& desired_at) {
  detail::validate_world(world);
  const int n = static_cast<int>(world.carrier_states.size());
  const Mat3 inertia_inv = world.load_inertia.inverse();
  const Mat3 carrier_mass_inv = world.carriers.Mi.inverse();

  auto deriv = [&](const VecX& y, double s) -> VecX {
    const std::vector<DesiredState>& des = desired_at(s);
    if (static_cast<int>(des.size()) != n) {
      throw std::invalid_argument("step: desired state count does not match carriers");
    }
    const Vec3 p_load = y.segment<3>(0);
    const Vec3 v_load = y.segment<3>(3);
    const Quat q = Quat(y(6), y(7), y(8), y(9)).normalized();
    const Mat3 R = q.toRotationMatrix();
    const Vec3 omega = y.segment<3>(10);

    Vec3 force_sum = Vec3::Zero();
    Vec3 torque_body = Vec3::Zero();
    VecX dy(y.size());
    for (int i = 0; i < n; ++i) {
      const int base = detail::kLoadStateSize + detail::kCarrierStateSize * i;
      const Vec3 p_carrier = y.segment<3>(base + 0);
      const Vec3 v_carrier = y.segment<3>(base + 3);
      const Vec3 integral = y.segment<3>(base + 6);

      const Vec3 attach_world = p_load + R * world.attachments[i];
      const Vec3 attach_vel = v_load + R * (omega.cross(world.attachments[i]));
      const Vec3 f_on_load =
          cable_force(attach_world, p_carrier, attach_vel, v_carrier, world.cables);
      force_sum += f_on_load;
      torque_body += world.attachments[i].cross(R.transpose() * f_on_load);

      if (world.freeze_carriers) {
        dy.segment<3>(base + 0).setZero();
        dy.segment<3>(base + 3).setZero();
        dy.segment<3>(base + 6).setZero();
      } else {
        const Vec3 e = des[i].p_d - p_carrier;
        const Vec3 e_dot = des[i].v_d - v_carrier;
        const Vec3 accel = carrier_mass_inv *
                           (-f_on_load + world.carriers.K1 * e_dot +
                            world.carriers.K2 * e + world.carriers.K3 * integral);
        dy.segment<3>(base + 0) = v_carrier;
        dy.segment<3>(base + 3) = accel;
        dy.segment<3>(base + 6) = e;
      }
    }

    dy.segment<3>(0) = v_load;
    dy.segment<3>(3) =
        force_sum / world.load_mass + Vec3(0.0, 0.0, -world.gravity);
    const Quat omega_quat(0.0, omega.x(), omega.y(), omega.z());
    const Quat q_dot_quat = q * omega_quat;
    dy(6) = 0.5 * q_dot_quat.w();
    dy(7) = 0.5 * q_dot_quat.x();
    dy(8) = 0.5 * q_dot_quat.y();
    dy(9) = 0.5 * q_dot_quat.z();
    dy.segment<3>(10) =
        inertia_inv * (torque_body - omega.cross(world.load_inertia * omega));
    return dy;
  };

  const double h = world.dt;
  const VecX y0 = detail::pack_state(world);
  const VecX k1 = deriv(y0, 0.0);
  const VecX k2 = deriv(y0 + 0.5 * h * k1, 0.5 * h);
  const VecX k3 = deriv(y0 + 0.5 * h * k2, 0.5 * h);
  const VecX k4 = deriv(y0 + h * k3, h);
  const VecX y1 = y0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  if (!y1.allFinite() || y1.cwiseAbs().maxCoeff() > 1e6) {
    throw NumericalDivergence("step: state magnitude exceeded 1e6");
  }

  SimWorld next = world;
  detail::unpack_state(y1, next);
  next.time = world.time + h;
  return next;
}

/// Single-step advance with the desired reference held over the step as a
/// first-order hold: p_d(s) = p_d + s * v_d, v_d(s) = v_d.
inline SimWorld step(const SimWorld& world, const std::vector<DesiredState>& desired) {
  std::vector<DesiredState> held = desired;
  return step_with(world, [&](double s) -> const std::vector<DesiredState>& {
    for (std::size_t i = 0; i < desired.size(); ++i) {
      held[i].p_d = desired[i].p_d + s * desired[i].v_d;
    }
    return held;
  });
}

// One recorded instant of a scenario run.
struct TimeSample {
  double t = 0.0;                         // s
  Vec3 load_position = Vec3::Zero();      // m
  Quat load_attitude = Quat::Identity();
  Vec3 load_rpy = Vec3::Zero();           // rad, roll/pitch/yaw (ZYX)
  std::vector<Vec3> carrier_positions;    // m
  std::vector<Vec3> carrier_velocities;   // m/s
  std::vector<double> tensions;           // N
  std::vector<double> tracking_errors;    // m, |p_d - p| per carrier
};

/// Initial snapshot plus one sample per completed step (t = dt, 2 dt, ...).
/// A zero-duration run keeps only the snapshot.
struct TimeSeries {
  TimeSample initial;
  std::vector<TimeSample> samples;
};

namespace detail {

// Roll/pitch/yaw of R = Rz(yaw) Ry(pitch) Rx(roll).
inline Vec3 rotation_to_rpy(const Mat3& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return Vec3(roll, pitch, yaw);
}

inline TimeSample record_sample(const SimWorld& world,
                                const std::vector<DesiredState>& desired) {
  TimeSample sample;
  sample.t = world.time;
  sample.load_position = world.load.position;
  sample.load_attitude = world.load.attitude;
  sample.load_rpy = rotation_to_rpy(world.load.attitude.toRotationMatrix());
  const Mat3 R = world.load.attitude.toRotationMatrix();
  const int n = static_cast<int>(world.carrier_states.size());
  for (int i = 0; i < n; ++i) {
    const CarrierState& cs = world.carrier_states[i];
    sample.carrier_positions.push_back(cs.position);
    sample.carrier_velocities.push_back(cs.velocity);
    const Vec3 attach_world = world.load.position + R * world.attachments[i];
    const Vec3 attach_vel =
        world.load.velocity + R * (world.load.angular_velocity.cross(world.attachments[i]));
    sample.tensions.push_back(
        cable_force(attach_world, cs.position, attach_vel, cs.velocity, world.cables)
            .norm());
    sample.tracking_errors.push_back((desired[i].p_d - cs.position).norm());
  }
  return sample;
}

}  // namespace detail

/// Runs a scenario end to end: desired carrier states come from the orbit
/// kinematics with every cable at rest length (elongation is ignored by the
/// planner), mapped into the world through the load's initial pose, which is
/// treated as static for planning. Carriers are initialized on the planned
/// trajectory at t = 0 with zero velocity error and empty integrators.
/// The orbit is assumed to have passed verify_orbit.
inline TimeSeries run_scenario(const GraspModel& gm, const Wrench& w,
                               const LinearOrbit& orbit, const SimWorld& world_in) {
  SimWorld world = world_in;
  detail::validate_world(world);
  if (static_cast<int>(world.attachments.size()) != gm.n()) {
    throw std::invalid_argument("run_scenario: world carrier count does not match model");
  }
  if (!(world.duration >= 0.0)) {
    throw std::invalid_argument("run_scenario: duration must be non-negative");
  }

  const int n = gm.n();
  const std::vector<double> lengths(static_cast<std::size_t>(n), world.cables.l0);
  const Vec3 p0 = world.load.position;
  const Mat3 R0 = world.load.attitude.normalized().toRotationMatrix();

  auto desired_world = [&](double t) {
    const std::vector<CarrierKinematics> kin =
        orbit_to_kinematics(gm, w, orbit, lengths, t);
    std::vector<DesiredState> des(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      des[i].p_d = p0 + R0 * kin[i].p;
      des[i].v_d = R0 * kin[i].v;
    }
    return des;
  };

  const std::vector<DesiredState> des0 = desired_world(world.time);
  for (int i = 0; i < n; ++i) {
    world.carrier_states[i].position = des0[i].p_d;
    world.carrier_states[i].velocity = des0[i].v_d;
    world.carrier_states[i].integral_error.setZero();
  }

  TimeSeries series;
  series.initial = detail::record_sample(world, des0);

  const long steps = std::lround(world.duration / world.dt);
  std::vector<DesiredState> scratch;
  for (long s = 0; s < steps; ++s) {
    const double t_start = world.time;
    world = step_with(world, [&](double local) -> const std::vector<DesiredState>& {
      scratch = desired_world(t_start + local);
      return scratch;
    });
    series.samples.push_back(
        detail::record_sample(world, desired_world(world.time)));
  }
  return series;
}

struct SimSummary {
  double max_position_deviation = 0.0;  // m, from the initial load position
  double max_attitude_deviation = 0.0;  // rad, from the initial attitude
  double min_tension = 0.0;             // N, over all cables and times
  double min_carrier_speed = 0.0;       // m/s, over all carriers and times
  std::vector<bool> plane_crossed;      // per carrier: z sign change in load frame
};

/// Aggregates a time series. Deviations are measured against the initial
/// snapshot. A carrier "crosses the plane" when its z-coordinate relative to
/// the load, expressed in the load frame, takes both signs over the run.
inline SimSummary summarize(const TimeSeries& series) {
  const std::size_t n = series.initial.carrier_positions.size();
  SimSummary out;
  out.min_tension = std::numeric_limits<double>::infinity();
  out.min_carrier_speed = std::numeric_limits<double>::infinity();
  std::vector<double> min_z(n, std::numeric_limits<double>::infinity());
  std::vector<double> max_z(n, -std::numeric_limits<double>::infinity());

  auto absorb = [&](const TimeSample& sample) {
    out.max_position_deviation =
        std::max(out.max_position_deviation,
                 (sample.load_position - series.initial.load_position).norm());
    out.max_attitude_deviation =
        std::max(out.max_attitude_deviation,
                 series.initial.load_attitude.angularDistance(sample.load_attitude));
    const Mat3 Rt = sample.load_attitude.toRotationMatrix().transpose();
    for (std::size_t i = 0; i < n; ++i) {
      out.min_tension = std::min(out.min_tension, sample.tensions[i]);
      out.min_carrier_speed =
          std::min(out.min_carrier_speed, sample.carrier_velocities[i].norm());
      const double z =
          (Rt * (sample.carrier_positions[i] - sample.load_position)).z();
      min_z[i] = std::min(min_z[i], z);
      max_z[i] = std::max(max_z[i], z);
    }
  };

  absorb(series.initial);
  for (const TimeSample& sample : series.samples) absorb(sample);
  for (std::size_t i = 0; i < n; ++i) {
    out.plane_crossed.push_back(min_z[i] < 0.0 && max_z[i] > 0.0);
  }
  if (n == 0) {
    out.min_tension = 0.0;
    out.min_carrier_speed = 0.0;
  }
  return out;
}

}  // namespace loadorbit
