#include "beamwatch/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "beamwatch/error.hpp"

namespace beamwatch::scene {

namespace {

double distance(Vec2 a, Vec2 b) { return std::hypot(b.x - a.x, b.y - a.y); }

double wrap(double v, double lo, double span) {
  double r = std::fmod(v - lo, span);
  if (r < 0.0) r += span;
  return lo + r;
}

double db_to_amplitude(double db) { return std::pow(10.0, -db / 20.0); }

}  // namespace

void ScenarioConfig::validate() const {
  auto fail = [this](const std::string& field, const std::string& why) {
    throw ConfigError("scenario '" + name + "': " + field + " " + why);
  };
  if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0)) fail("bounds", "must be non-degenerate");
  if (max_users == 0) fail("max_users", "must be >= 1 (a scene needs a user)");
  if (min_users > max_users) fail("min_users", "exceeds max_users");
  if (min_blockers > max_blockers) fail("min_blockers", "exceeds max_blockers");
  if (min_speed < 0.0 || min_speed > max_speed) fail("min_speed", "must lie in [0, max_speed]");
  if (!(blocker_half_extents.x > 0.0) || !(blocker_half_extents.y > 0.0)) {
    fail("blocker_half_extents", "must be positive");
  }
  if (!(dt > 0.0)) fail("dt", "must be positive");
  if (raster_width < 16 || raster_height < 16) fail("raster", "must be at least 16x16");
  if (user_lanes.empty()) fail("user_lanes", "must list at least one lane");
  if (max_blockers > 0 && blocker_lanes.empty()) fail("blocker_lanes", "must list at least one lane");
  for (double lane : user_lanes) {
    if (lane < bounds.min.y || lane > bounds.max.y) fail("user_lanes", "outside bounds");
  }
  for (double lane : blocker_lanes) {
    if (lane < bounds.min.y || lane > bounds.max.y) fail("blocker_lanes", "outside bounds");
  }
  if (blockage_penalty_db < 0.0 || reflection_loss_db < 0.0) fail("losses", "must be >= 0 dB");
  if (!(gain_scale > 0.0)) fail("gain_scale", "must be positive");
}

const User& SceneState::user(std::uint32_t id) const {
  for (const auto& u : users) {
    if (u.id == id) return u;
  }
  throw LookupError("scene: unknown user id " + std::to_string(id));
}

SceneState init_scene(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  SceneState s;
  s.bs_position = cfg.bs_position;
  s.bs_boresight = cfg.bs_boresight;
  s.bounds = cfg.bounds;

  auto count = [&rng](std::size_t lo, std::size_t hi) {
    return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo),
                                                    static_cast<std::int64_t>(hi)));
  };
  auto lane_velocity = [&]() {
    const double speed = rng.uniform(cfg.min_speed, cfg.max_speed);
    return Vec2{rng.bernoulli(0.5) ? speed : -speed, 0.0};
  };

  const std::size_t n_users = std::max<std::size_t>(1, count(cfg.min_users, cfg.max_users));
  for (std::size_t i = 0; i < n_users; ++i) {
    User u;
    u.id = static_cast<std::uint32_t>(i);
    const double lane = cfg.user_lanes[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(cfg.user_lanes.size()) - 1))];
    u.position = {rng.uniform(cfg.bounds.min.x, cfg.bounds.max.x), lane};
    u.velocity = lane_velocity();
    s.users.push_back(u);
  }
  const std::size_t n_blockers = count(cfg.min_blockers, cfg.max_blockers);
  for (std::size_t i = 0; i < n_blockers; ++i) {
    Blocker b;
    const double lane = cfg.blocker_lanes[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(cfg.blocker_lanes.size()) - 1))];
    b.center = {rng.uniform(cfg.bounds.min.x, cfg.bounds.max.x), lane};
    b.half_extents = cfg.blocker_half_extents;
    b.velocity = lane_velocity();
    s.blockers.push_back(b);
  }
  for (std::size_t i = 0; i < cfg.scatterers; ++i) {
    s.scatterers.push_back({rng.uniform(cfg.bounds.min.x, cfg.bounds.max.x),
                            rng.uniform(cfg.bounds.min.y, cfg.bounds.max.y)});
  }
  return s;
}

SceneState step(const SceneState& s, double dt) {
  SceneState next = s;
  const auto& b = s.bounds;
  auto advance = [&](Vec2& p, Vec2 v) {
    p.x = wrap(p.x + v.x * dt, b.min.x, b.width());
    p.y = wrap(p.y + v.y * dt, b.min.y, b.height());
  };
  for (auto& u : next.users) advance(u.position, u.velocity);
  for (auto& bl : next.blockers) advance(bl.center, bl.velocity);
  next.time += dt;
  return next;
}

bool segment_intersects_box(Vec2 a, Vec2 b, Vec2 center, Vec2 half_extents) {
  // Liang-Barsky clipping of the parametric segment a + t (b - a), t in (0, 1).
  double t_lo = 0.0;
  double t_hi = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double origin[2] = {a.x, a.y};
  const double lo[2] = {center.x - half_extents.x, center.y - half_extents.y};
  const double hi[2] = {center.x + half_extents.x, center.y + half_extents.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) {
      if (origin[axis] <= lo[axis] || origin[axis] >= hi[axis]) return false;
      continue;
    }
    double t0 = (lo[axis] - origin[axis]) / d[axis];
    double t1 = (hi[axis] - origin[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_lo = std::max(t_lo, t0);
    t_hi = std::min(t_hi, t1);
    if (t_lo >= t_hi) return false;
  }
  return t_lo < t_hi;
}

LinkStatus los_status(const SceneState& s, std::uint32_t user_id) {
  const Vec2 target = s.user(user_id).position;
  for (const auto& b : s.blockers) {
    if (segment_intersects_box(s.bs_position, target, b.center, b.half_extents)) {
      return LinkStatus::kNlos;
    }
  }
  return LinkStatus::kLos;
}

double azimuth_from_bs(const SceneState& s, Vec2 target) {
  const double dx = target.x - s.bs_position.x;
  const double dy = target.y - s.bs_position.y;
  const double bx = std::cos(s.bs_boresight);
  const double by = std::sin(s.bs_boresight);
  // Counter-clockwise from boresight is positive.
  return std::atan2(bx * dy - by * dx, bx * dx + by * dy);
}

wireless::PathSet paths_for_user(const SceneState& s, std::uint32_t user_id,
                                 const ScenarioConfig& cfg, const wireless::OfdmConfig& ofdm) {
  const Vec2 target = s.user(user_id).position;
  wireless::PathSet paths;

  const double d_los = std::max(distance(s.bs_position, target), 1e-3);
  wireless::Path los;
  los.gain = cfg.gain_scale / d_los;
  if (los_status(s, user_id) == LinkStatus::kNlos) los.gain *= db_to_amplitude(cfg.blockage_penalty_db);
  los.delay = d_los / wireless::kSpeedOfLight;
  los.azimuth = azimuth_from_bs(s, target);
  paths.push_back(los);

  const double reflection = db_to_amplitude(cfg.reflection_loss_db);
  for (const auto& sc : s.scatterers) {
    const double total = std::max(distance(s.bs_position, sc) + distance(sc, target), 1e-3);
    wireless::Path p;
    p.gain = cfg.gain_scale * reflection / total;
    p.delay = total / wireless::kSpeedOfLight;
    p.azimuth = azimuth_from_bs(s, sc);
    paths.push_back(p);
  }

  for (std::size_t l = 0; l < paths.size(); ++l) {
    if (paths[l].delay >= ofdm.max_delay()) {
      throw ValidationError("scenario too large: path " + std::to_string(l) + " delay " +
                            std::to_string(paths[l].delay * 1e9) + " ns exceeds D*T_S = " +
                            std::to_string(ofdm.max_delay() * 1e9) +
                            " ns; increase the cyclic prefix D or shrink the street bounds");
    }
  }
  return paths;
}

Frame render(const SceneState& s, std::size_t width, std::size_t height, double user_radius,
             double bs_radius) {
  if (width < 16 || height < 16) {
    throw ConfigError("render: raster must be at least 16x16, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  Frame f;
  f.width = width;
  f.height = height;
  f.pixels.assign(Frame::kChannels * width * height, 0.0f);
  const double sx = s.bounds.width() / static_cast<double>(width);
  const double sy = s.bounds.height() / static_cast<double>(height);
  auto set = [&](std::size_t c, std::size_t row, std::size_t col) {
    f.pixels[(c * height + row) * width + col] = 1.0f;
  };
  for (std::size_t row = 0; row < height; ++row) {
    const double y = s.bounds.min.y + (static_cast<double>(row) + 0.5) * sy;
    for (std::size_t col = 0; col < width; ++col) {
      const double x = s.bounds.min.x + (static_cast<double>(col) + 0.5) * sx;
      for (const auto& u : s.users) {
        const double dx = x - u.position.x;
        const double dy = y - u.position.y;
        if (dx * dx + dy * dy <= user_radius * user_radius) set(0, row, col);
      }
      {
        const double dx = x - s.bs_position.x;
        const double dy = y - s.bs_position.y;
        if (dx * dx + dy * dy <= bs_radius * bs_radius) set(1, row, col);
      }
      for (const auto& b : s.blockers) {
        if (std::abs(x - b.center.x) <= b.half_extents.x &&
            std::abs(y - b.center.y) <= b.half_extents.y) {
          set(2, row, col);
        }
      }
    }
  }
  return f;
}

}  // namespace beamwatch::scene
