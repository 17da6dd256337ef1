#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "densephys/core/sampling.hpp"

using namespace dpn;

TEST_CASE("material property draws stay inside their category",
          "[core][sampling]") {
  auto rng = seeded_rng(3, "props");
  for (const auto m :
       {Material::kPlastic, Material::kWood, Material::kMetal}) {
    const auto& mc = material_class(m);
    for (int i = 0; i < 2000; ++i) {
      const PhysProps p = sample_props(mc, rng);
      REQUIRE(mc.contains(p));
      REQUIRE(p.restitution == 0.5);
    }
  }
}

TEST_CASE("grid draws land exactly on grid values and cover all rows",
          "[core][sampling]") {
  auto rng = seeded_rng(4, "grid");
  std::set<int> fr, ms;
  for (int i = 0; i < 10000; ++i) {
    int fi = -1, mi = -1;
    const PhysProps p = sample_props_grid(rng, &fi, &mi);
    REQUIRE(fi >= 0);
    REQUIRE(fi < PropertyGrid::kClasses);
    REQUIRE(mi >= 0);
    REQUIRE(mi < PropertyGrid::kClasses);
    REQUIRE(p.friction == PropertyGrid::friction_values()[fi]);
    REQUIRE(p.mass == PropertyGrid::mass_values()[mi]);
    fr.insert(fi);
    ms.insert(mi);
  }
  REQUIRE(fr.size() == PropertyGrid::kClasses);
  REQUIRE(ms.size() == PropertyGrid::kClasses);
}

TEST_CASE("material scenes hold one object per category and validate",
          "[core][sampling]") {
  auto rng = seeded_rng(5, "scene");
  for (int trial = 0; trial < 50; ++trial) {
    const SceneState scene = sample_material_scene(1.0, rng);
    REQUIRE(scene.objects.size() == 3);
    std::set<Material> mats;
    for (const auto& obj : scene.objects) {
      REQUIRE(obj.material.has_value());
      REQUIRE(material_class(*obj.material).contains(obj.props));
      mats.insert(*obj.material);
    }
    REQUIRE(mats.size() == 3);
    REQUIRE_NOTHROW(scene.validate());
  }
}

TEST_CASE("material order is shuffled across scenes", "[core][sampling]") {
  auto rng = seeded_rng(6, "order");
  std::set<Material> first_slot;
  for (int trial = 0; trial < 64; ++trial)
    first_slot.insert(*sample_material_scene(1.0, rng).objects[0].material);
  REQUIRE(first_slot.size() == 3);
}

TEST_CASE("grid scenes record their property rows", "[core][sampling]") {
  auto rng = seeded_rng(7, "gridscene");
  const SceneState scene = sample_grid_scene(2, 1.0, rng);
  REQUIRE(scene.objects.size() == 2);
  for (const auto& obj : scene.objects) {
    REQUIRE(obj.friction_index.has_value());
    REQUIRE(obj.mass_index.has_value());
    REQUIRE(obj.props.friction ==
            PropertyGrid::friction_values()[*obj.friction_index]);
    REQUIRE(obj.props.mass == PropertyGrid::mass_values()[*obj.mass_index]);
  }
}

TEST_CASE("impossible placements raise the crowding error",
          "[core][sampling]") {
  auto rng = seeded_rng(8, "crowded");
  REQUIRE_THROWS_AS(sample_grid_scene(4, 0.7, rng), SceneTooCrowdedError);
}

TEST_CASE("placement respects the workspace and clearance",
          "[core][sampling]") {
  auto rng = seeded_rng(9, "placement");
  for (int trial = 0; trial < 30; ++trial) {
    const SceneState scene = sample_grid_scene(2, 1.2, rng);
    for (const auto& obj : scene.objects) REQUIRE(scene.in_workspace(obj));
    REQUIRE_FALSE(footprints_overlap(scene.objects[0], scene.objects[1],
                                     kPlacementClearance * 0.5));
  }
}
