#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "beamwatch/rng.hpp"
#include "beamwatch/wireless.hpp"

namespace beamwatch::scene {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Bounds {
  Vec2 min{0.0, 0.0};
  Vec2 max{60.0, 20.0};

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

/// Street layout, traffic mix and link-budget constants for one scenario.
struct ScenarioConfig {
  std::uint32_t id = 0;
  std::string name = "default";
  Bounds bounds{};
  Vec2 bs_position{30.0, 0.0};
  double bs_boresight = 1.5707963267948966;  // world-frame direction of the array normal
  std::vector<double> user_lanes{17.0, 19.0};
  std::vector<double> blocker_lanes{7.0, 11.0};
  std::size_t min_users = 1;
  std::size_t max_users = 3;
  std::size_t min_blockers = 1;
  std::size_t max_blockers = 3;
  double min_speed = 5.0;   // m/s
  double max_speed = 15.0;  // m/s
  Vec2 blocker_half_extents{4.0, 1.25};
  std::size_t scatterers = 4;
  double dt = 0.1;  // s
  std::size_t raster_width = 64;
  std::size_t raster_height = 64;
  double user_radius = 1.5;  // m, render only
  double bs_radius = 1.5;    // m, render only
  double blockage_penalty_db = 25.0;
  double reflection_loss_db = 10.0;
  double gain_scale = 1.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct User {
  std::uint32_t id = 0;
  Vec2 position;
  Vec2 velocity;

  friend bool operator==(const User&, const User&) = default;
};

/// Axis-aligned rectangular blocker (bus, truck).
struct Blocker {
  Vec2 center;
  Vec2 half_extents;
  Vec2 velocity;

  friend bool operator==(const Blocker&, const Blocker&) = default;
};

struct SceneState {
  Vec2 bs_position;
  double bs_boresight = 0.0;
  std::vector<User> users;
  std::vector<Blocker> blockers;
  std::vector<Vec2> scatterers;
  Bounds bounds;
  double time = 0.0;

  const User& user(std::uint32_t id) const;
  friend bool operator==(const SceneState&, const SceneState&) = default;
};

enum class LinkStatus : std::uint8_t { kLos = 0, kNlos = 1 };

/// Top-down raster, channel-planar: value(c, row, col) = pixels[(c * height + row) * width + col].
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  static constexpr std::size_t kChannels = 3;
  std::vector<float> pixels;

  float at(std::size_t channel, std::size_t row, std::size_t col) const {
    return pixels[(channel * height + row) * width + col];
  }
  friend bool operator==(const Frame&, const Frame&) = default;
};

SceneState init_scene(const ScenarioConfig& cfg, Rng& rng);

/// Advances every entity by velocity * dt, wrapping around the street bounds.
SceneState step(const SceneState& s, double dt);

/// True when the open segment from a to b overlaps the rectangle with positive length.
bool segment_intersects_box(Vec2 a, Vec2 b, Vec2 center, Vec2 half_extents);

LinkStatus los_status(const SceneState& s, std::uint32_t user_id);

/// Azimuth of `target` seen from the basestation, relative to its boresight, in (-pi, pi].
double azimuth_from_bs(const SceneState& s, Vec2 target);

/// LOS path (attenuated when blocked) plus one single-bounce path per scatterer.
wireless::PathSet paths_for_user(const SceneState& s, std::uint32_t user_id,
                                 const ScenarioConfig& cfg, const wireless::OfdmConfig& ofdm);

Frame render(const SceneState& s, std::size_t width, std::size_t height,
             double user_radius = 1.5, double bs_radius = 1.5);

}  // namespace beamwatch::scene
