#include "catch_amalgamated.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "loadorbit/geometry.hpp"
#include "loadorbit/orbit.hpp"
#include "loadorbit/sim.hpp"
#include "oracles.hpp"

using namespace loadorbit;

namespace {

// Load hanging from one cable whose carrier is pinned directly above the
// attachment point, which sits at the load's center of mass.
SimWorld hang_world() {
  SimWorld world;
  world.attachments = {Vec3::Zero()};
  world.carrier_states.resize(1);
  world.carrier_states[0].position = Vec3(0.0, 0.0, world.cables.l0);
  world.freeze_carriers = true;
  return world;
}

std::vector<DesiredState> pinned_desired(const SimWorld& world) {
  std::vector<DesiredState> des(world.carrier_states.size());
  for (std::size_t i = 0; i < des.size(); ++i) {
    des[i].p_d = world.carrier_states[i].position;
  }
  return des;
}

struct Scenario {
  GraspModel gm;
  Wrench w;
  LinearOrbit orbit;
  SimWorld world;
};

Scenario five_carrier_scenario(double duration, double dt) {
  const GraspModel gm = build_grasp_model(oracles::five_carrier_layout());
  const Wrench w = gravity_wrench(0.5, Vec3(0, 0, -1));
  Scenario s{gm, w, sample_orbit_matrix(gm, w, 1000, 7), SimWorld{}};
  s.world.attachments = gm.layout.points;
  s.world.carrier_states.resize(gm.n());
  s.world.duration = duration;
  s.world.dt = dt;
  return s;
}

}  // namespace

TEST_CASE("cable force law") {
  const CableParams cp;  // Kc 700, Bc 1, l0 0.8
  const Vec3 zero = Vec3::Zero();

  SECTION("a taut cable pulls the load toward the carrier") {
    const Vec3 f = cable_force(zero, Vec3(0, 0, 0.807), zero, zero, cp);
    CHECK(f.x() == 0.0);
    CHECK(f.y() == 0.0);
    CHECK(f.z() == Catch::Approx(4.9).epsilon(1e-9));

    const Vec3 sideways =
        cable_force(Vec3(1, 0, 0), Vec3(1.81, 0, 0), zero, zero, cp);
    CHECK(sideways.x() == Catch::Approx(7.0).epsilon(1e-9));
    CHECK(std::abs(sideways.y()) < 1e-12);
  }

  SECTION("a cable at rest length carries no tension") {
    CHECK(cable_force(zero, Vec3(0, 0, 0.8), zero, zero, cp).norm() == 0.0);
  }

  SECTION("a slack cable carries no tension regardless of rates") {
    CHECK(cable_force(zero, Vec3(0, 0, 0.5), zero, Vec3(0, 0, 50), cp).norm() == 0.0);
    CHECK(cable_force(zero, Vec3(0, 0, 0.5), Vec3(0, 0, -50), zero, cp).norm() == 0.0);
  }

  SECTION("stretch-rate damping adds to the spring term") {
    const Vec3 f = cable_force(zero, Vec3(0, 0, 0.807), zero, Vec3(0, 0, 0.1), cp);
    CHECK(f.z() == Catch::Approx(5.0).epsilon(1e-9));
  }

  SECTION("damping never turns a cable into a strut") {
    const Vec3 f = cable_force(zero, Vec3(0, 0, 0.801), zero, Vec3(0, 0, -10.0), cp);
    CHECK(f.norm() == 0.0);
  }

  SECTION("coincident endpoints produce no force") {
    CHECK(cable_force(zero, zero, zero, zero, cp).norm() == 0.0);
  }
}

TEST_CASE("a world at rest with no stimulus stays at rest") {
  SimWorld world;
  world.attachments = {Vec3::Zero()};
  world.carrier_states.resize(1);
  world.carrier_states[0].position = Vec3(0.0, 0.0, 0.5);  // slack
  world.gravity = 0.0;
  const SimWorld next = step(world, pinned_desired(world));
  CHECK((next.load.position - world.load.position).norm() < 1e-15);
  CHECK(next.load.velocity.norm() < 1e-15);
  CHECK(next.load.angular_velocity.norm() < 1e-15);
  CHECK(next.load.attitude.angularDistance(world.load.attitude) < 1e-15);
  CHECK((next.carrier_states[0].position - world.carrier_states[0].position).norm() <
        1e-15);
  CHECK(next.carrier_states[0].velocity.norm() < 1e-15);
  CHECK(next.time == Catch::Approx(world.dt));
}

TEST_CASE("a hanging load settles at the static cable stretch") {
  SimWorld world = hang_world();
  const std::vector<DesiredState> des = pinned_desired(world);
  for (int i = 0; i < 10000; ++i) world = step(world, des);

  const double expected_sag = world.load_mass * world.gravity / world.cables.Kc;
  CHECK(expected_sag == Catch::Approx(7.01e-3).epsilon(1e-3));
  CHECK(world.load.position.z() == Catch::Approx(-expected_sag).epsilon(0.01));
  CHECK(std::abs(world.load.position.x()) < 1e-12);
  CHECK(std::abs(world.load.position.y()) < 1e-12);
  CHECK(world.load.velocity.norm() < 1e-4);

  const Vec3 f = cable_force(world.load.position, world.carrier_states[0].position,
                             world.load.velocity, Vec3::Zero(), world.cables);
  CHECK(f.z() == Catch::Approx(world.load_mass * world.gravity).epsilon(0.01));
  CHECK(std::abs(world.load.attitude.norm() - 1.0) < 1e-9);
}

TEST_CASE("frozen carriers at stretch-corrected positions hold the load still") {
  const GraspModel gm = build_grasp_model(oracles::five_carrier_layout());
  const Wrench w = gravity_wrench(0.5, Vec3(0, 0, -1));
  const VecX f = forces_from_lambda(gm, w, VecX::Zero(gm.k()));

  SimWorld world;
  world.attachments = gm.layout.points;
  world.carrier_states.resize(gm.n());
  world.freeze_carriers = true;
  for (int i = 0; i < gm.n(); ++i) {
    const Vec3 fi = GraspModel::carrier_block(f, i);
    const double tension = fi.norm();
    REQUIRE(tension > 1e-6);
    const double stretched = world.cables.l0 + tension / world.cables.Kc;
    world.carrier_states[i].position =
        gm.layout.points[i] + (fi / tension) * stretched;
  }

  const std::vector<DesiredState> des = pinned_desired(world);
  for (int i = 0; i < 2000; ++i) world = step(world, des);
  CHECK(world.load.position.norm() < 1e-9);
  CHECK(world.load.velocity.norm() < 1e-9);
  CHECK(world.load.attitude.angularDistance(Quat::Identity()) < 1e-9);
  CHECK(world.load.angular_velocity.norm() < 1e-9);
}

TEST_CASE("halving the time step leaves the outcome unchanged at fourth order") {
  Scenario coarse = five_carrier_scenario(1.5, 1e-3);
  Scenario fine = five_carrier_scenario(1.5, 5e-4);
  const TimeSeries a = run_scenario(coarse.gm, coarse.w, coarse.orbit, coarse.world);
  const TimeSeries b = run_scenario(fine.gm, fine.w, fine.orbit, fine.world);
  REQUIRE(!a.samples.empty());
  REQUIRE(!b.samples.empty());
  const TimeSample& fa = a.samples.back();
  const TimeSample& fb = b.samples.back();
  CHECK(fa.t == Catch::Approx(fb.t));
  CHECK((fa.load_position - fb.load_position).norm() < 1e-4);
  CHECK(fa.load_attitude.angularDistance(fb.load_attitude) < 1e-4);
  for (std::size_t i = 0; i < fa.carrier_positions.size(); ++i) {
    CHECK((fa.carrier_positions[i] - fb.carrier_positions[i]).norm() < 1e-4);
  }
  CHECK(std::abs(fa.load_attitude.norm() - 1.0) < 1e-9);
}

TEST_CASE("energy is conserved without damping, gains, or gravity") {
  SimWorld world;
  world.gravity = 0.0;
  world.cables.Bc = 0.0;
  world.carriers.Mi = 0.5 * Mat3::Identity();
  world.carriers.K1.setZero();
  world.carriers.K2.setZero();
  world.carriers.K3.setZero();
  world.attachments = {Vec3(0.5, 0.0, 0.0), Vec3(-0.25, 0.433, 0.0),
                       Vec3(-0.25, -0.433, 0.0)};
  world.carrier_states.resize(3);
  for (int i = 0; i < 3; ++i) {
    world.carrier_states[i].position =
        world.attachments[i] + Vec3(0.0, 0.0, world.cables.l0 + 0.01);
  }

  const double e0 = oracles::mechanical_energy(world);
  REQUIRE(e0 > 0.1);  // three cables pre-stretched by 1 cm

  const std::vector<DesiredState> des = pinned_desired(world);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    world = step(world, des);
    worst = std::max(worst, std::abs(oracles::mechanical_energy(world) - e0));
  }
  CHECK(worst / e0 < 1e-3);

  Vec3 momentum = world.load_mass * world.load.velocity;
  for (const CarrierState& cs : world.carrier_states) {
    momentum += world.carriers.Mi * cs.velocity;
  }
  CHECK(momentum.norm() < 1e-9);
}

TEST_CASE("runaway states surface as divergence") {
  SimWorld world = hang_world();
  world.dt = 0.5;  // far beyond the stable region for a 700 N/m cable
  const std::vector<DesiredState> des = pinned_desired(world);
  auto blow_up = [&] {
    for (int i = 0; i < 1000; ++i) world = step(world, des);
  };
  CHECK_THROWS_AS(blow_up(), NumericalDivergence);
}

TEST_CASE("world validation") {
  const SimWorld good = hang_world();
  const std::vector<DesiredState> des = pinned_desired(good);

  SimWorld bad = good;
  bad.dt = 0.0;
  CHECK_THROWS_AS(step(bad, des), std::invalid_argument);

  bad = good;
  bad.load_mass = -1.0;
  CHECK_THROWS_AS(step(bad, des), std::invalid_argument);

  bad = good;
  bad.load_inertia = -Mat3::Identity();
  CHECK_THROWS_AS(step(bad, des), std::invalid_argument);

  bad = good;
  bad.carriers.Mi.setZero();
  CHECK_THROWS_AS(step(bad, des), std::invalid_argument);

  bad = good;
  bad.cables.Kc = 0.0;
  CHECK_THROWS_AS(step(bad, des), std::invalid_argument);

  bad = good;
  bad.cables.Bc = -1.0;
  CHECK_THROWS_AS(step(bad, des), std::invalid_argument);

  bad = good;
  bad.cables.l0 = 0.0;
  CHECK_THROWS_AS(step(bad, des), std::invalid_argument);

  bad = good;
  bad.attachments.push_back(Vec3::Zero());
  CHECK_THROWS_AS(step(bad, des), std::invalid_argument);

  bad = good;
  bad.freeze_carriers = false;
  CHECK_THROWS_AS(step(bad, {}), std::invalid_argument);
}

TEST_CASE("scenario bookkeeping") {
  SECTION("zero duration records only the initial snapshot") {
    Scenario s = five_carrier_scenario(0.0, 1e-3);
    const TimeSeries series = run_scenario(s.gm, s.w, s.orbit, s.world);
    CHECK(series.samples.empty());
    CHECK(series.initial.t == 0.0);
    REQUIRE(series.initial.tensions.size() == 5);
    // Carriers start one rest length along the bearing, so any stretch is
    // pure floating-point residue from the unit-vector scaling.
    for (double T : series.initial.tensions) {
      CHECK(T >= 0.0);
      CHECK(T < 1e-9);
    }
    for (double err : series.initial.tracking_errors) CHECK(err == 0.0);
  }

  SECTION("a short run tracks the reference closely") {
    Scenario s = five_carrier_scenario(2.0, 1e-3);
    const TimeSeries series = run_scenario(s.gm, s.w, s.orbit, s.world);
    CHECK(series.samples.size() == 2000);
    const SimSummary sum = summarize(series);
    CHECK(sum.max_position_deviation < 0.05);
    CHECK(sum.max_attitude_deviation < 5.0 * M_PI / 180.0);
    CHECK(sum.min_carrier_speed > 0.0);
    CHECK(sum.plane_crossed.size() == 5);
  }

  SECTION("repeated runs are bit-identical") {
    Scenario s1 = five_carrier_scenario(0.5, 1e-3);
    Scenario s2 = five_carrier_scenario(0.5, 1e-3);
    const TimeSeries a = run_scenario(s1.gm, s1.w, s1.orbit, s1.world);
    const TimeSeries b = run_scenario(s2.gm, s2.w, s2.orbit, s2.world);
    const TimeSample& fa = a.samples.back();
    const TimeSample& fb = b.samples.back();
    CHECK((fa.load_position.array() == fb.load_position.array()).all());
    CHECK((fa.load_attitude.coeffs().array() == fb.load_attitude.coeffs().array()).all());
    for (std::size_t i = 0; i < fa.carrier_positions.size(); ++i) {
      CHECK((fa.carrier_positions[i].array() == fb.carrier_positions[i].array()).all());
    }
  }

  SECTION("carrier count must match the model") {
    Scenario s = five_carrier_scenario(0.1, 1e-3);
    s.world.attachments.pop_back();
    s.world.carrier_states.pop_back();
    CHECK_THROWS_AS(run_scenario(s.gm, s.w, s.orbit, s.world), std::invalid_argument);
  }
}

TEST_CASE("summary semantics") {
  SECTION("plane crossing requires both signs of the load-frame height") {
    TimeSeries series;
    series.initial.load_attitude = Quat::Identity();
    series.initial.carrier_positions = {Vec3(0, 0, 1), Vec3(1, 0, 1)};
    series.initial.carrier_velocities = {Vec3::Zero(), Vec3::Zero()};
    series.initial.tensions = {1.0, 1.0};
    TimeSample later = series.initial;
    later.t = 1.0;
    later.carrier_positions = {Vec3(0, 0, -1), Vec3(1, 0, 0.5)};
    series.samples = {later};
    const SimSummary sum = summarize(series);
    REQUIRE(sum.plane_crossed.size() == 2);
    CHECK(sum.plane_crossed[0]);
    CHECK_FALSE(sum.plane_crossed[1]);
  }

  SECTION("an empty series yields zeros") {
    const SimSummary sum = summarize(TimeSeries{});
    CHECK(sum.max_position_deviation == 0.0);
    CHECK(sum.min_tension == 0.0);
    CHECK(sum.min_carrier_speed == 0.0);
    CHECK(sum.plane_crossed.empty());
  }
}
