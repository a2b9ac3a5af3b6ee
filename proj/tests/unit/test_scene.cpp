#include <gtest/gtest.h>

#include <cmath>

#include "beamwatch/error.hpp"
#include "beamwatch/scene.hpp"

namespace beamwatch::scene {
namespace {

SceneState empty_scene() {
  SceneState s;
  s.bs_position = {30, 0};
  s.bs_boresight = 1.5707963267948966;
  s.bounds = Bounds{};
  return s;
}

// Dense sampling of the open segment; independent of the clipping routine.
bool sampled_hit(Vec2 a, Vec2 b, Vec2 c, Vec2 h, int samples = 2000) {
  for (int i = 1; i < samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    const double x = a.x + t * (b.x - a.x);
    const double y = a.y + t * (b.y - a.y);
    if (std::abs(x - c.x) < h.x && std::abs(y - c.y) < h.y) return true;
  }
  return false;
}

TEST(Scenario, DefaultsValidate) { EXPECT_NO_THROW(ScenarioConfig{}.validate()); }

TEST(Scenario, ValidateNamesOffendingField) {
  ScenarioConfig c;
  c.min_users = 4;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("min_users"), std::string::npos);
  }
  c = ScenarioConfig{};
  c.dt = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ScenarioConfig{};
  c.raster_width = 8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ScenarioConfig{};
  c.user_lanes = {25.0};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Scene, InitIsDeterministicAndRespectsCounts) {
  ScenarioConfig cfg;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng a(seed), b(seed);
    const auto s = init_scene(cfg, a);
    EXPECT_EQ(s, init_scene(cfg, b));
    EXPECT_GE(s.users.size(), cfg.min_users);
    EXPECT_LE(s.users.size(), cfg.max_users);
    EXPECT_GE(s.blockers.size(), cfg.min_blockers);
    EXPECT_LE(s.blockers.size(), cfg.max_blockers);
    EXPECT_EQ(s.scatterers.size(), cfg.scatterers);
    for (const auto& u : s.users) {
      const double speed = std::abs(u.velocity.x);
      EXPECT_GE(speed, cfg.min_speed);
      EXPECT_LE(speed, cfg.max_speed);
    }
  }
}

TEST(Scene, StepMovesAndWraps) {
  auto s = empty_scene();
  s.users.push_back({0, {59.0, 17.0}, {10.0, 0.0}});
  s.blockers.push_back({{1.0, 7.0}, {4, 1.25}, {-15.0, 0.0}});
  const auto n = step(s, 0.2);
  EXPECT_NEAR(n.users[0].position.x, 1.0, 1e-12);
  EXPECT_NEAR(n.blockers[0].center.x, 58.0, 1e-12);
  EXPECT_NEAR(n.time, 0.2, 1e-15);
  EXPECT_EQ(s.users[0].position.x, 59.0);
}

TEST(Scene, UnknownUserIsLookupError) {
  auto s = empty_scene();
  EXPECT_THROW(s.user(3), LookupError);
}

TEST(Los, BlockerOnTheRayIsNlosAndEmptyStreetIsLos) {
  auto s = empty_scene();
  s.users.push_back({0, {30.0, 17.0}, {}});
  EXPECT_EQ(los_status(s, 0), LinkStatus::kLos);
  s.blockers.push_back({{30.0, 9.0}, {4, 1.25}, {}});
  EXPECT_EQ(los_status(s, 0), LinkStatus::kNlos);
  s.blockers[0].center.x = 45.0;
  EXPECT_EQ(los_status(s, 0), LinkStatus::kLos);
}

TEST(Los, SegmentTouchingEdgeOnlyIsNotBlocked) {
  // Grazing a corner or running along an edge has zero overlap length.
  EXPECT_FALSE(segment_intersects_box({0, 0}, {2, 2}, {2, 0}, {1, 1}));
  EXPECT_FALSE(segment_intersects_box({-5, 1}, {5, 1}, {0, 0}, {1, 1}));
  EXPECT_TRUE(segment_intersects_box({-5, 0.5}, {5, 0.5}, {0, 0}, {1, 1}));
  EXPECT_FALSE(segment_intersects_box({-5, 0}, {-2, 0}, {0, 0}, {1, 1}));
}

TEST(Los, MatchesSamplingOracleOnRandomSegments) {
  Rng rng(9);
  int disagreements = 0;
  for (int i = 0; i < 5000; ++i) {
    const Vec2 a{rng.uniform(0, 60), rng.uniform(0, 20)};
    const Vec2 b{rng.uniform(0, 60), rng.uniform(0, 20)};
    const Vec2 c{rng.uniform(0, 60), rng.uniform(0, 20)};
    const Vec2 h{rng.uniform(0.5, 5), rng.uniform(0.5, 3)};
    disagreements += segment_intersects_box(a, b, c, h) != sampled_hit(a, b, c, h, 20000);
  }
  // The sampling oracle can miss slivers thinner than its step.
  EXPECT_LE(disagreements, 2);
}

TEST(Los, SymmetricUnderRigidTranslation) {
  Rng rng(10);
  ScenarioConfig cfg;
  for (int trial = 0; trial < 300; ++trial) {
    auto s = init_scene(cfg, rng);
    auto t = s;
    const Vec2 shift{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    auto move = [&](Vec2& p) {
      p.x += shift.x;
      p.y += shift.y;
    };
    move(t.bs_position);
    move(t.bounds.min);
    move(t.bounds.max);
    for (auto& u : t.users) move(u.position);
    for (auto& b : t.blockers) move(b.center);
    for (const auto& u : s.users) EXPECT_EQ(los_status(s, u.id), los_status(t, u.id));
  }
}

TEST(Paths, LosGainDecreasesWithDistance) {
  ScenarioConfig cfg;
  wireless::OfdmConfig ofdm;
  double previous = std::numeric_limits<double>::infinity();
  for (double y = 2; y <= 20; y += 1.5) {
    auto s = empty_scene();
    s.users.push_back({0, {30.0, y}, {}});
    const auto paths = paths_for_user(s, 0, cfg, ofdm);
    const double g = std::abs(paths[0].gain);
    EXPECT_LT(g, previous);
    previous = g;
  }
}

TEST(Paths, BlockedLosIsAttenuatedByPenalty) {
  ScenarioConfig cfg;
  wireless::OfdmConfig ofdm;
  auto s = empty_scene();
  s.users.push_back({0, {30.0, 17.0}, {}});
  const double clear = std::abs(paths_for_user(s, 0, cfg, ofdm)[0].gain);
  s.blockers.push_back({{30.0, 9.0}, {4, 1.25}, {}});
  const double blocked = std::abs(paths_for_user(s, 0, cfg, ofdm)[0].gain);
  EXPECT_NEAR(20 * std::log10(clear / blocked), cfg.blockage_penalty_db, 1e-9);
}

TEST(Paths, OneLosPlusOnePerScatterer) {
  ScenarioConfig cfg;
  Rng rng(11);
  const auto s = init_scene(cfg, rng);
  const auto paths = paths_for_user(s, 0, cfg, wireless::OfdmConfig{});
  EXPECT_EQ(paths.size(), 1 + cfg.scatterers);
  for (const auto& p : paths) {
    EXPECT_GE(p.delay, 0.0);
    EXPECT_TRUE(std::isfinite(std::abs(p.gain)));
  }
}

TEST(Paths, OversizedStreetIsRejected) {
  ScenarioConfig cfg;
  wireless::OfdmConfig ofdm;
  ofdm.cyclic_prefix = 2;
  auto s = empty_scene();
  s.users.push_back({0, {30.0, 17.0}, {}});
  EXPECT_THROW(paths_for_user(s, 0, cfg, ofdm), ValidationError);
}

TEST(Render, BinaryShapedAndPure) {
  ScenarioConfig cfg;
  Rng rng(12);
  const auto s = init_scene(cfg, rng);
  const auto f = render(s, 64, 48);
  EXPECT_EQ(f.width, 64u);
  EXPECT_EQ(f.height, 48u);
  EXPECT_EQ(f.pixels.size(), 3u * 64 * 48);
  for (float v : f.pixels) EXPECT_TRUE(v == 0.0f || v == 1.0f);
  EXPECT_EQ(f, render(s, 64, 48));
}

TEST(Render, ClassesLandInTheirChannels) {
  auto s = empty_scene();
  s.users.push_back({0, {15.0, 17.0}, {}});
  s.blockers.push_back({{45.0, 9.0}, {4, 1.25}, {}});
  const auto f = render(s, 60, 20);  // 1 m per pixel
  EXPECT_EQ(f.at(0, 17, 15), 1.0f);
  EXPECT_EQ(f.at(0, 9, 45), 0.0f);
  EXPECT_EQ(f.at(2, 9, 45), 1.0f);
  EXPECT_EQ(f.at(1, 0, 30), 1.0f);
  EXPECT_EQ(f.at(2, 17, 15), 0.0f);
}

TEST(Render, TooSmallRasterIsConfigError) {
  EXPECT_THROW(render(empty_scene(), 8, 64), ConfigError);
}

TEST(Azimuth, MeasuredFromBoresight) {
  const auto s = empty_scene();
  EXPECT_NEAR(azimuth_from_bs(s, {30, 10}), 0.0, 1e-15);
  EXPECT_NEAR(azimuth_from_bs(s, {20, 10}), std::atan2(10, 10), 1e-12);
  EXPECT_NEAR(azimuth_from_bs(s, {40, 10}), -std::atan2(10, 10), 1e-12);
}

}  // namespace
}  // namespace beamwatch::scene
