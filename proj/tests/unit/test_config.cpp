#include <catch2/catch_amalgamated.hpp>

#include "densephys/core/config.hpp"
#include "densephys/core/errors.hpp"

using namespace dpn;

TEST_CASE("defaults validate and survive a serialize round trip",
          "[core][config]") {
  RunConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  const RunConfig back = parse_config_text(cfg.serialize());
  REQUIRE(back.serialize() == cfg.serialize());
  REQUIRE(back.hash() == cfg.hash());
}

TEST_CASE("parser accepts comments, blanks, and spacing", "[core][config]") {
  const RunConfig cfg = parse_config_text(
      "# training setup\n"
      "\n"
      "grid_size=48\n"
      "  epochs =  3 \n"
      "bptt = true\n");
  REQUIRE(cfg.grid_size == 48);
  REQUIRE(cfg.epochs == 3);
  REQUIRE(cfg.bptt);
  REQUIRE(cfg.batch == 8);
}

TEST_CASE("unknown keys are rejected", "[core][config]") {
  REQUIRE_THROWS_AS(parse_config_text("grud_size = 64\n"), ConfigError);
}

TEST_CASE("repeated keys are rejected", "[core][config]") {
  REQUIRE_THROWS_AS(parse_config_text("seed = 1\nseed = 2\n"), ConfigError);
}

TEST_CASE("malformed lines and values are rejected", "[core][config]") {
  REQUIRE_THROWS_AS(parse_config_text("grid_size\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("grid_size = soon\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("bptt = maybe\n"), ConfigError);
}

TEST_CASE("validation bounds hold", "[core][config]") {
  REQUIRE_THROWS_AS(parse_config_text("grid_size = 16\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("speed_scale = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("speed_scale = -1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("gravity = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("residual_depth = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("action_width = 30\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("lr_decay = 1.5\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("beta2 = 1\n"), ConfigError);
  REQUIRE_NOTHROW(parse_config_text("action_width = 37\n"));
  REQUIRE_NOTHROW(parse_config_text("grid_size = 32\n"));
}

TEST_CASE("metres_per_pixel follows the grid", "[core][config]") {
  RunConfig cfg;
  cfg.grid_size = 50;
  cfg.workspace_side = 2.0;
  REQUIRE(cfg.metres_per_pixel() == Catch::Approx(0.04));
}
