#include "freeflyer/config.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace ff;
using cfg::ConfigFile;

TEST(ConfigFile, ParsesSectionsTypesAndComments) {
  auto file = ConfigFile::parse_text(
      "# top comment\n"
      "[sim]\n"
      "control_hz = 5   # inline comment\n"
      "substeps = 10\n"
      "[task]\n"
      "kind = \"gotopose2d\"\n"
      "sigma_pos = 0.75\n"
      "spawn_eval_radius = [2.5, 3.5]\n"
      "[eval]\n"
      "stochastic = true\n",
      "test.cfg");
  EXPECT_EQ(file.get_double("sim.control_hz", 10.0), 5.0);
  EXPECT_EQ(file.get_int("sim.substeps", 1), 10);
  EXPECT_EQ(file.get_string("task.kind", "x"), "gotopose2d");
  EXPECT_EQ(file.get_double("task.sigma_pos", 0.5), 0.75);
  auto arr = file.get_array("task.spawn_eval_radius", {});
  ASSERT_EQ(arr.size(), 2u);
  EXPECT_EQ(arr[0], 2.5);
  EXPECT_EQ(arr[1], 3.5);
  EXPECT_TRUE(file.get_bool("eval.stochastic", false));
  EXPECT_NO_THROW(file.reject_unknown());
}

TEST(ConfigFile, LinePreciseErrors) {
  auto expect_line = [](const std::string& text, const std::string& needle) {
    try {
      auto f = ConfigFile::parse_text(text, "t.cfg");
      f.reject_unknown();
      FAIL() << "expected ConfigInvalid";
    } catch (const ConfigInvalid& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
          << e.what();
    }
  };
  expect_line("[sim]\nmystery = 3\n", "t.cfg:2: unknown key 'sim.mystery'");
  expect_line("key_outside = 1\n", "t.cfg:1: key outside any [section]");
  expect_line("[sim\n", "t.cfg:1: unterminated section");
  expect_line("[sim]\ncontrol_hz 5\n", "t.cfg:2: expected key = value");
  expect_line("[sim]\na = 1\na = 2\n", "t.cfg:3: duplicate key");
}

TEST(ConfigFile, TypeErrorsNameTheLine) {
  auto f = ConfigFile::parse_text("[sim]\nsubsteps = banana\n", "t.cfg");
  try {
    f.get_int("sim.substeps", 1);
    FAIL();
  } catch (const ConfigInvalid& e) {
    EXPECT_NE(std::string(e.what()).find("t.cfg:2:"), std::string::npos);
  }
  auto f2 = ConfigFile::parse_text("[sim]\nsubsteps = 1.5\n", "t.cfg");
  EXPECT_THROW(f2.get_int("sim.substeps", 1), ConfigInvalid);
}

TEST(RunConfig, DefaultsPerTask) {
  auto rc3 = cfg::default_run_config(tasks::TaskKind::go_to_xy);
  EXPECT_EQ(rc3.env.layout.size(), 8u);
  EXPECT_EQ(rc3.env.sim.horizon, 500);
  EXPECT_EQ(rc3.ppo.epochs, 2000);
  EXPECT_EQ(rc3.eval.n_envs, 1024);
  EXPECT_EQ(rc3.eval.steps, 500);
  EXPECT_EQ(rc3.env.spawn.eval_radius_min, 3.0);
  EXPECT_EQ(rc3.env.spawn.eval_radius_max, 4.0);
  auto rc6 = cfg::default_run_config(tasks::TaskKind::go_to_xyz);
  EXPECT_EQ(rc6.env.layout.size(), 16u);
  EXPECT_EQ(rc6.env.spawn.eval_radius_min, 1.0);
  EXPECT_EQ(rc6.env.spawn.eval_radius_max, 5.0);
}

TEST(RunConfig, ResolvedDumpRoundTrips) {
  auto file = ConfigFile::parse_text(
      "[body]\nmass = 7.25\n[sim]\ncontrol_hz = 5\nsubsteps = 11\n"
      "[ppo]\nepochs = 123\nlearning_rate = 0.000125\n",
      "a.cfg");
  auto rc = cfg::load_run_config(file, std::string("gotopose2d"));
  cfg::finalize_run_config(rc);
  EXPECT_EQ(rc.env.body.mass, 7.25);
  EXPECT_EQ(rc.env.sim.substeps, 11);
  EXPECT_EQ(rc.ppo.epochs, 123);

  auto file2 = ConfigFile::parse_text(rc.resolved_text, "resolved.cfg");
  auto rc2 = cfg::load_run_config(file2, std::nullopt);
  cfg::finalize_run_config(rc2);
  EXPECT_EQ(rc2.resolved_text, rc.resolved_text);
  EXPECT_EQ(rc2.hash, rc.hash);
  EXPECT_EQ(rc2.env.body.mass, 7.25);
  EXPECT_EQ(rc2.env.task, tasks::TaskKind::go_to_pose_2d);
}

TEST(RunConfig, HashChangesWithContent) {
  auto a = cfg::default_run_config(tasks::TaskKind::go_to_xy);
  auto b = cfg::default_run_config(tasks::TaskKind::go_to_xy);
  EXPECT_EQ(a.hash, b.hash);
  auto file = ConfigFile::parse_text("[body]\nmass = 9\n", "c.cfg");
  auto c = cfg::load_run_config(file, std::string("gotoxy"));
  cfg::finalize_run_config(c);
  EXPECT_NE(c.hash, a.hash);
}

TEST(RunConfig, CustomThrusterLayout) {
  auto file = ConfigFile::parse_text(
      "[thrusters]\n"
      "magnitude = 2\n"
      "points = [0.3, 0, 0,  -0.3, 0, 0,  0, 0.3, 0,  0, -0.3, 0]\n"
      "directions = [0, 1, 0,  0, -1, 0,  -1, 0, 0,  1, 0, 0]\n",
      "thr.cfg");
  auto rc = cfg::load_run_config(file, std::string("gotoxy"));
  cfg::finalize_run_config(rc);
  EXPECT_EQ(rc.env.layout.size(), 4u);
  EXPECT_EQ(rc.env.layout.magnitude, 2.0);
  // rank 3 still satisfied by this pinwheel
  EXPECT_EQ(dyn::wrench_rank(rc.env.layout), 3);
}

TEST(RunConfig, RejectsDeficientCustomLayout) {
  auto file = ConfigFile::parse_text(
      "[thrusters]\n"
      "points = [0, 0, 0,  0, 0, 0]\n"
      "directions = [1, 0, 0,  -1, 0, 0]\n",
      "thr.cfg");
  auto rc = cfg::load_run_config(file, std::string("gotoxy"));
  EXPECT_THROW(cfg::finalize_run_config(rc), ConfigInvalid);
}

TEST(RunConfig, ManifestEmbedsResolvedConfig) {
  auto rc = cfg::default_run_config(tasks::TaskKind::go_to_xy);
  auto manifest = cfg::make_manifest("train", 42, rc, {{"extra", "1"}});
  EXPECT_NE(manifest.find("seed=42"), std::string::npos);
  EXPECT_NE(manifest.find("config_hash=" + rc.hash), std::string::npos);
  EXPECT_NE(manifest.find("nonpaper_defaults="), std::string::npos);
  EXPECT_NE(manifest.find("resolved_config_begin"), std::string::npos);
  EXPECT_NE(manifest.find(rc.resolved_text), std::string::npos);
  EXPECT_NE(manifest.find("extra=1"), std::string::npos);
}
