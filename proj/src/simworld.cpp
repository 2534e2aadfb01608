#include "dsm/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "dsm/mapper.hpp"

namespace dsm {

std::optional<RayHit> intersect(const Box& box, const Vec3& origin, const Vec3& dir) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int enter_axis = -1;
  double enter_plane = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.min[a] || origin[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (box.min[a] - origin[a]) / dir[a];
    double t1 = (box.max[a] - origin[a]) / dir[a];
    double plane0 = box.min[a];
    if (t0 > t1) {
      std::swap(t0, t1);
      plane0 = box.max[a];
    }
    if (t0 > t_enter) {
      t_enter = t0;
      enter_axis = a;
      enter_plane = plane0;
    }
    t_exit = std::min(t_exit, t1);
  }
  if (enter_axis < 0 || t_enter > t_exit || t_enter < 0.0) return std::nullopt;
  RayHit hit;
  hit.range = t_enter;
  hit.point = origin + t_enter * dir;
  hit.point[enter_axis] = enter_plane;
  return hit;
}

Vec3 interpolate(const std::vector<Waypoint>& path, double t) {
  if (path.empty()) throw std::invalid_argument("empty trajectory");
  if (t <= static_cast<double>(path.front().t)) return path.front().position;
  if (t >= static_cast<double>(path.back().t)) return path.back().position;
  auto it = std::upper_bound(path.begin(), path.end(), t,
                             [](double v, const Waypoint& w) { return v < static_cast<double>(w.t); });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double u = (t - static_cast<double>(a.t)) / static_cast<double>(b.t - a.t);
  return a.position + u * (b.position - a.position);
}

Box DynamicBody::at(TimeIndex t) const {
  const Vec3 corner = interpolate(trajectory, static_cast<double>(t));
  return {corner, corner + size, label};
}

std::vector<Vec3> SensorSpec::directions() const {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(azimuth_count) * static_cast<std::size_t>(elevation_count));
  for (int e = 0; e < elevation_count; ++e) {
    const double el = elevation_count > 1
                          ? elevation_min + (elevation_max - elevation_min) * e / (elevation_count - 1)
                          : elevation_min;
    for (int a = 0; a < azimuth_count; ++a) {
      const double az = azimuth_min + (azimuth_max - azimuth_min) * a / azimuth_count;
      dirs.emplace_back(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    }
  }
  return dirs;
}

void WorldSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (num_scans < 1) fail("num_scans must be at least 1");
  if (!(p_flip >= 0 && p_flip <= 1)) fail("p_flip must lie in [0, 1]");
  if (!(sigma_u >= 0)) fail("sigma_u must be non-negative");
  if (!(free_sample_interval > 0)) fail("free_sample_interval must be positive");
  if (!(gt_resolution > 0)) fail("gt_resolution must be positive");
  if (samples_per_voxel_axis < 1) fail("samples_per_voxel_axis must be at least 1");
  if (sensor.trajectory.empty()) fail("sensor trajectory is empty");
  if (sensor.azimuth_count < 1 || sensor.elevation_count < 1) fail("sensor needs at least one ray");
  if (!(sensor.max_range > 0)) fail("sensor max_range must be positive");
  for (std::size_t i = 0; i < static_bodies.size(); ++i) {
    const auto& b = static_bodies[i];
    if (!registry.is_static(b.label)) fail("static body " + std::to_string(i) + " needs a static label");
    if (!(b.max.array() > b.min.array()).all()) fail("static body " + std::to_string(i) + " is degenerate");
  }
  for (std::size_t i = 0; i < dynamic_bodies.size(); ++i) {
    const auto& d = dynamic_bodies[i];
    if (!registry.is_dynamic(d.label)) fail("dynamic body " + std::to_string(i) + " needs a dynamic label");
    if (!(d.size.array() > 0).all()) fail("dynamic body " + std::to_string(i) + " is degenerate");
    if (d.trajectory.empty() || d.trajectory.front().t > 0 || d.trajectory.back().t < num_scans - 1) {
      fail("dynamic body " + std::to_string(i) + " trajectory does not cover every scan");
    }
    for (std::size_t w = 1; w < d.trajectory.size(); ++w) {
      if (d.trajectory[w].t <= d.trajectory[w - 1].t) fail("trajectory times must increase");
    }
  }
}

std::vector<Box> WorldSpec::bodies_at(TimeIndex t) const {
  std::vector<Box> out;
  out.reserve(static_bodies.size() + dynamic_bodies.size());
  for (const auto& d : dynamic_bodies) out.push_back(d.at(t));
  out.insert(out.end(), static_bodies.begin(), static_bodies.end());
  return out;
}

namespace {

struct RayCast {
  Vec3 dir;
  std::optional<RayHit> hit;
  // Index into bodies_at(t); dynamic bodies come first.
  std::size_t body = 0;
};

std::vector<RayCast> cast_all(const WorldSpec& spec, TimeIndex t) {
  if (t < 0 || t >= spec.num_scans) throw std::out_of_range("scan index " + std::to_string(t) + " out of range");
  const Vec3 origin = spec.sensor.origin_at(t);
  const auto bodies = spec.bodies_at(t);
  for (const auto& b : bodies) {
    if (b.contains_closed(origin)) throw std::invalid_argument("sensor origin lies inside a body at t=" + std::to_string(t));
  }
  std::vector<RayCast> out;
  for (const Vec3& dir : spec.sensor.directions()) {
    RayCast rc{dir, std::nullopt, 0};
    for (std::size_t b = 0; b < bodies.size(); ++b) {
      auto h = intersect(bodies[b], origin, dir);
      if (h && h->range <= spec.sensor.max_range && (!rc.hit || h->range < rc.hit->range)) {
        rc.hit = h;
        rc.body = b;
      }
    }
    out.push_back(rc);
  }
  return out;
}

Vec3 body_flow(const WorldSpec& spec, std::size_t body, TimeIndex t) {
  if (body >= spec.dynamic_bodies.size() || t + 1 >= spec.num_scans) return Vec3::Zero();
  const auto& d = spec.dynamic_bodies[body];
  return d.at(t + 1).min - d.at(t).min;
}

ClassId body_label(const WorldSpec& spec, std::size_t body) {
  return body < spec.dynamic_bodies.size() ? spec.dynamic_bodies[body].label
                                           : spec.static_bodies[body - spec.dynamic_bodies.size()].label;
}

}  // namespace

std::optional<TrainingFrame> render_scan(const WorldSpec& spec, TimeIndex t, std::uint64_t seed) {
  spec.validate();
  const auto casts = cast_all(spec, t);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.sigma_u > 0 ? spec.sigma_u : 1.0);

  std::vector<ClassId> others;
  for (ClassId c = 0; c < spec.registry.num_classes(); ++c) {
    if (!spec.registry.is_free(c)) others.push_back(c);
  }

  TrainingFrame frame;
  frame.time_index = t;
  frame.sensor_origin = spec.sensor.origin_at(t);
  for (const auto& rc : casts) {
    if (!rc.hit) continue;
    PointSample p;
    p.position = rc.hit->point;
    p.label = body_label(spec, rc.body);
    p.flow = body_flow(spec, rc.body, t);
    if (spec.p_flip > 0 && others.size() > 1 && unit(rng) < spec.p_flip) {
      std::uniform_int_distribution<std::size_t> pick(0, others.size() - 2);
      std::size_t j = pick(rng);
      if (others[j] == p.label) j = others.size() - 1;
      p.label = others[j];
    }
    if (spec.sigma_u > 0) p.flow += Vec3(noise(rng), noise(rng), noise(rng));
    frame.points.push_back(p);
  }
  if (frame.points.empty()) return std::nullopt;
  return frame;
}

GroundTruthModel render_gt(const WorldSpec& spec, TimeIndex t, double gt_resolution, int samples_per_voxel_axis) {
  if (!(gt_resolution > 0)) throw std::invalid_argument("ground truth resolution must be positive");
  if (samples_per_voxel_axis < 1) throw std::invalid_argument("need at least one sub-sample per axis");
  const auto bodies = spec.bodies_at(t);
  std::vector<LabeledVoxel> voxels;
  if (bodies.empty()) return GroundTruthModel::voxel_grid(t, gt_resolution, std::move(voxels));

  Vec3 lo = bodies.front().min;
  Vec3 hi = bodies.front().max;
  for (const auto& b : bodies) {
    lo = lo.cwiseMin(b.min);
    hi = hi.cwiseMax(b.max);
  }
  const VoxelKey klo = voxel_key_of(lo, gt_resolution);
  const auto upper = [&](double v) { return static_cast<std::int32_t>(std::ceil(v / gt_resolution)) - 1; };
  const VoxelKey khi{upper(hi.x()), upper(hi.y()), upper(hi.z())};

  const int n = samples_per_voxel_axis;
  const int K = spec.registry.num_classes();
  std::vector<std::int64_t> votes(static_cast<std::size_t>(K));
  for (std::int32_t x = klo.ix; x <= khi.ix; ++x) {
    for (std::int32_t y = klo.iy; y <= khi.iy; ++y) {
      for (std::int32_t z = klo.iz; z <= khi.iz; ++z) {
        std::fill(votes.begin(), votes.end(), 0);
        const Vec3 corner = Vec3(x, y, z) * gt_resolution;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
              const Vec3 s = corner + (Vec3(i, j, k).array() + 0.5).matrix() * (gt_resolution / n);
              for (const auto& b : bodies) {
                if (b.contains(s)) {
                  ++votes[static_cast<std::size_t>(b.label)];
                  break;
                }
              }
            }
          }
        }
        voxels.push_back({{x, y, z}, majority_label(votes, spec.registry.free_class())});
      }
    }
  }
  return GroundTruthModel::voxel_grid(t, gt_resolution, std::move(voxels));
}

GroundTruthModel render_gt_points(const WorldSpec& spec, TimeIndex t) {
  spec.validate();
  const auto casts = cast_all(spec, t);
  const Vec3 origin = spec.sensor.origin_at(t);
  std::vector<LabeledPoint> points;
  for (const auto& rc : casts) {
    if (rc.hit) points.push_back({rc.hit->point, body_label(spec, rc.body)});
  }
  for (const auto& rc : casts) {
    const Vec3 end = rc.hit ? rc.hit->point : Vec3(origin + spec.sensor.max_range * rc.dir);
    if (end == origin) continue;
    for (const auto& s : free_space_samples(origin, end, spec.free_sample_interval, spec.registry)) {
      points.push_back({s.position, s.label});
    }
  }
  return GroundTruthModel::point_set(t, std::move(points));
}

WorldSpec moving_cube_world(const MovingCubeScenario& sc) {
  using namespace cube_world;
  WorldSpec w;
  w.registry = ClassRegistry(4, kFree, {kCube});
  const double X = sc.room_x, Y = sc.room_y, Z = sc.room_z, th = 0.1;
  w.static_bodies = {
      {{0, 0, -th}, {X, Y, 0}, kFloor},
      {{-th, 0, 0}, {0, Y, Z}, kWall},
      {{X, 0, 0}, {X + th, Y, Z}, kWall},
      {{0, -th, 0}, {X, 0, Z}, kWall},
      {{0, Y, 0}, {X, Y + th, Z}, kWall},
      {{0, 0, Z}, {X, Y, Z + th}, kWall},
  };
  DynamicBody cube;
  cube.size = Vec3::Constant(sc.cube_size);
  cube.label = kCube;
  const int last = sc.num_scans - 1;
  cube.trajectory = {{0, sc.cube_start}, {last, sc.cube_start + Vec3(sc.cube_speed * last, 0, 0)}};
  w.dynamic_bodies = {cube};

  w.sensor.trajectory = {{0, sc.sensor_start}, {last, sc.sensor_start + sc.sensor_velocity * last}};
  const double deg = std::numbers::pi / 180.0;
  w.sensor.azimuth_min = sc.azimuth_min_deg * deg;
  w.sensor.azimuth_max = sc.azimuth_max_deg * deg;
  w.sensor.azimuth_count =
      static_cast<int>(std::lround((sc.azimuth_max_deg - sc.azimuth_min_deg) / sc.azimuth_step_deg));
  w.sensor.elevation_min = sc.elevation_min_deg * deg;
  w.sensor.elevation_max = sc.elevation_max_deg * deg;
  w.sensor.elevation_count =
      static_cast<int>(std::lround((sc.elevation_max_deg - sc.elevation_min_deg) / sc.elevation_step_deg)) + 1;
  w.sensor.max_range = sc.max_range;
  w.num_scans = sc.num_scans;
  w.p_flip = sc.p_flip;
  w.sigma_u = sc.sigma_u;
  w.free_sample_interval = sc.free_sample_interval;
  w.gt_resolution = 0.1;
  w.samples_per_voxel_axis = 4;
  return w;
}

}  // namespace dsm
