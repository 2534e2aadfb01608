#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "dsm/evaluation.hpp"
#include "dsm/model.hpp"

namespace dsm {

// Axis-aligned box occupying [min, max) on every axis.
struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  ClassId label = 0;

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() < max.array()).all();
  }
  bool contains_closed(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct RayHit {
  double range = 0.0;
  Vec3 point = Vec3::Zero();
};

// Entry point of a ray starting outside the box; the coordinate on the entry
// face is snapped to the face plane.
std::optional<RayHit> intersect(const Box& box, const Vec3& origin, const Vec3& dir);

struct Waypoint {
  TimeIndex t = 0;
  Vec3 position = Vec3::Zero();
};

// Piecewise-linear interpolation, clamped outside the waypoint span.
Vec3 interpolate(const std::vector<Waypoint>& path, double t);

// Rigid box translating along a trajectory of its min corner.
struct DynamicBody {
  Vec3 size = Vec3::Ones();
  ClassId label = 0;
  std::vector<Waypoint> trajectory;

  Box at(TimeIndex t) const;
};

struct SensorSpec {
  std::vector<Waypoint> trajectory;
  double azimuth_min = -std::numbers::pi;
  double azimuth_max = std::numbers::pi;
  int azimuth_count = 360;
  double elevation_min = -0.3;
  double elevation_max = 0.3;
  int elevation_count = 16;
  double max_range = 20.0;

  Vec3 origin_at(TimeIndex t) const { return interpolate(trajectory, static_cast<double>(t)); }
  // Azimuth is sampled half-open over [min, max), elevation inclusive.
  std::vector<Vec3> directions() const;
};

struct WorldSpec {
  ClassRegistry registry{2, 0, {}};
  std::vector<Box> static_bodies;
  std::vector<DynamicBody> dynamic_bodies;
  SensorSpec sensor;
  int num_scans = 1;
  double p_flip = 0.0;
  double sigma_u = 0.0;
  // Free-space interval used for point-set ground truth.
  double free_sample_interval = 0.5;
  double gt_resolution = 0.1;
  int samples_per_voxel_axis = 4;

  void validate() const;
  std::vector<Box> bodies_at(TimeIndex t) const;
};

// One scan as seen from the sensor at time t. Returns nullopt when no ray hits anything.
std::optional<TrainingFrame> render_scan(const WorldSpec& spec, TimeIndex t, std::uint64_t seed);

// Monte-Carlo voxelized ground truth over the bounding box of all bodies at t.
GroundTruthModel render_gt(const WorldSpec& spec, TimeIndex t, double gt_resolution, int samples_per_voxel_axis);

// Noise-free returns plus free samples along every ray (to max range for misses).
GroundTruthModel render_gt_points(const WorldSpec& spec, TimeIndex t);

// Room with floor, walls and ceiling. A cube slides along +x and leaves the
// field of view halfway through while the sensor backs away along -y.
struct MovingCubeScenario {
  double room_x = 10.0;
  double room_y = 10.0;
  double room_z = 3.0;
  double cube_size = 0.5;
  double cube_speed = 0.25;
  Vec3 cube_start{2.5, 4.0, 0.0};
  int num_scans = 20;
  Vec3 sensor_start{5.0, 3.3, 1.0};
  Vec3 sensor_velocity{0.0, -0.1, 0.0};
  double azimuth_min_deg = 95.0;
  double azimuth_max_deg = 165.0;
  double azimuth_step_deg = 1.0;
  double elevation_min_deg = -50.0;
  double elevation_max_deg = 10.0;
  double elevation_step_deg = 1.0;
  double max_range = 6.0;
  double p_flip = 0.0;
  double sigma_u = 0.0;
  double free_sample_interval = 1.0;
};

// Class ids used by the scenario.
namespace cube_world {
inline constexpr ClassId kFree = 0;
inline constexpr ClassId kFloor = 1;
inline constexpr ClassId kWall = 2;
inline constexpr ClassId kCube = 3;
}  // namespace cube_world

WorldSpec moving_cube_world(const MovingCubeScenario& scenario = {});

}  // namespace dsm
