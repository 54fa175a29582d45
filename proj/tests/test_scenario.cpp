#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "dudesim/scenario.hpp"

using namespace dudesim;

namespace {

Scenario minimal() {
  std::istringstream in(
      "[cells]\n"
      "cell 1 macro 0 0 46 15\n"
      "cell 2 pico 400 300 20 4\n");
  return load_scenario(in, "mem", ".");
}

}  // namespace

TEST(ScenarioLoad, MinimalDocumentGetsDefaults) {
  Scenario s = minimal();
  ASSERT_EQ(s.cells.size(), 2u);
  EXPECT_EQ(s.cells[0].layer, Layer::Macro);
  EXPECT_EQ(s.cells[1].layer, Layer::Pico);
  // Area defaults to the cell bounding box padded by 500 m on each side.
  EXPECT_DOUBLE_EQ(s.area.origin_x_m, -500.0);
  EXPECT_DOUBLE_EQ(s.area.origin_y_m, -500.0);
  EXPECT_DOUBLE_EQ(s.area.width_m, 1400.0);
  EXPECT_DOUBLE_EQ(s.area.height_m, 1300.0);
  EXPECT_EQ(s.n_rb, 100);
  EXPECT_DOUBLE_EQ(s.bandwidth_hz, 20e6);
  EXPECT_DOUBLE_EQ(s.demand.r_min_bps, 200e3);
  // Contribution floor tracks the interference limit unless pinned.
  EXPECT_DOUBLE_EQ(s.powerctl.contribution_floor_dbm, s.powerctl.interference_limit_dbm - 10.0);
  EXPECT_NO_THROW(validate_scenario(s));
}

TEST(ScenarioLoad, LayerPowerOverridesAndPcKeys) {
  std::istringstream in(
      "[radio]\n"
      "pico_tx_dbm = 30\n"
      "macro_tx_dbm = 43\n"
      "pc_interference_limit_dbm = -100\n"
      "pc_step_db = 2\n"
      "pc_min_power_dbm = -30\n"
      "pc_max_iterations = 7\n"
      "ul_metric = raw_pathloss\n"
      "[cells]\n"
      "cell 1 macro 0 0 46 15\n"
      "cell 2 pico 100 0 20 4\n"
      "cell 3 pico 200 0 20 4\n");
  Scenario s = load_scenario(in, "mem", ".");
  EXPECT_DOUBLE_EQ(s.cells[0].tx_power_dbm, 43.0);
  EXPECT_DOUBLE_EQ(s.cells[1].tx_power_dbm, 30.0);
  EXPECT_DOUBLE_EQ(s.cells[2].tx_power_dbm, 30.0);
  EXPECT_DOUBLE_EQ(s.powerctl.interference_limit_dbm, -100.0);
  EXPECT_DOUBLE_EQ(s.powerctl.step_db, 2.0);
  EXPECT_DOUBLE_EQ(s.powerctl.contribution_floor_dbm, -110.0);
  EXPECT_EQ(s.powerctl.max_iterations, 7);
  EXPECT_EQ(s.ul_metric, UlMetric::RawPathloss);
}

TEST(ScenarioLoad, RejectsUnknownKeysAndSections) {
  std::istringstream bad_key("[radio]\nnot_a_key = 1\n[cells]\ncell 1 macro 0 0 46 15\n");
  EXPECT_THROW(load_scenario(bad_key, "mem", "."), ParseError);
  std::istringstream bad_section("[nope]\n[cells]\ncell 1 macro 0 0 46 15\n");
  EXPECT_THROW(load_scenario(bad_section, "mem", "."), ParseError);
  std::istringstream bad_layer("[cells]\ncell 1 femto 0 0 46 15\n");
  EXPECT_THROW(load_scenario(bad_layer, "mem", "."), ParseError);
}

TEST(ScenarioValidate, CatchesBrokenInvariants) {
  Scenario s = minimal();
  s.cells[1].id = 1;
  EXPECT_THROW(validate_scenario(s), ValidationError);

  s = minimal();
  for (auto& c : s.cells) c.active = false;
  EXPECT_THROW(validate_scenario(s), ValidationError);

  s = minimal();
  s.cells[0].tx_power_dbm = 80.0;
  EXPECT_THROW(validate_scenario(s), ValidationError);

  s = minimal();
  s.n_rb = 200;  // 200 * 180 kHz > 20 MHz
  EXPECT_THROW(validate_scenario(s), ValidationError);

  s = minimal();
  s.demand.r_min_bps = 30e6;  // above r_max
  EXPECT_THROW(validate_scenario(s), ValidationError);

  s = minimal();
  s.pathloss.exponent_macro = 1.0;
  EXPECT_THROW(validate_scenario(s), ValidationError);

  s = minimal();
  s.powerctl.step_db = 0.0;
  EXPECT_THROW(validate_scenario(s), ValidationError);
}

TEST(ScenarioPreset, TestbedMiniShape) {
  Scenario s = scenario_preset("testbed-mini");
  EXPECT_EQ(s.cells.size(), 14u);
  EXPECT_EQ(s.pico_ids().size(), 12u);
  EXPECT_DOUBLE_EQ(s.mean_ue_count, 150.0);
  EXPECT_DOUBLE_EQ(s.area.width_m, 1000.0);
  EXPECT_NO_THROW(validate_scenario(s));

  Scenario dense = scenario_preset("testbed-mini-dense");
  EXPECT_DOUBLE_EQ(dense.mean_ue_count, 300.0);
  EXPECT_EQ(dense.cells.size(), 14u);

  EXPECT_THROW(scenario_preset("no-such"), ValidationError);
}

TEST(ScenarioPreset, FileAndPresetAgree) {
  std::string path = std::string(DUDESIM_SOURCE_DIR) + "/scenarios/testbed-mini.cfg";
  Scenario file = load_scenario(path);
  Scenario pre = scenario_preset("testbed-mini");
  ASSERT_EQ(file.cells.size(), pre.cells.size());
  for (std::size_t i = 0; i < file.cells.size(); ++i) {
    EXPECT_EQ(file.cells[i].id, pre.cells[i].id);
    EXPECT_EQ(file.cells[i].layer, pre.cells[i].layer);
    EXPECT_DOUBLE_EQ(file.cells[i].x_m, pre.cells[i].x_m);
    EXPECT_DOUBLE_EQ(file.cells[i].tx_power_dbm, pre.cells[i].tx_power_dbm);
  }
  EXPECT_DOUBLE_EQ(file.mean_ue_count, pre.mean_ue_count);
  EXPECT_DOUBLE_EQ(file.demand.r_min_bps, pre.demand.r_min_bps);
}

TEST(ScenarioUes, PoissonDrawIsSeededAndInArea) {
  Scenario s = scenario_preset("testbed-mini");
  auto a = generate_ues(s, 77);
  auto b = generate_ues(s, 77);
  auto c = generate_ues(s, 78);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_DOUBLE_EQ(a[i].x_m, b[i].x_m);
    EXPECT_DOUBLE_EQ(a[i].y_m, b[i].y_m);
    EXPECT_EQ(a[i].id, static_cast<int>(i));
    EXPECT_TRUE(s.area.contains(a[i].x_m, a[i].y_m));
  }
  bool same = a.size() == c.size();
  if (same)
    for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].x_m == c[i].x_m;
  EXPECT_FALSE(same);
}

TEST(ScenarioUes, FixedCountDrawsExactly) {
  Scenario s = scenario_preset("testbed-mini");
  s.fixed_count = true;
  s.mean_ue_count = 37;
  EXPECT_EQ(generate_ues(s, 5).size(), 37u);
}

TEST(ScenarioUes, HotspotsConcentrateTraffic) {
  Scenario s = scenario_preset("testbed-mini");
  // Hotspot pixels must weigh more than the floor far from any cluster.
  const auto& r = s.traffic_density;
  auto weight_near = [&](double x, double y) {
    int col = static_cast<int>((x - r.origin_x_m) / r.pixel_m);
    int row = static_cast<int>((y - r.origin_y_m) / r.pixel_m);
    return r.at(row, col);
  };
  EXPECT_GT(weight_near(100, 150), 5.0 * weight_near(500, 250));
}

TEST(ScenarioActivation, PrefixControlsPicos) {
  Scenario s = scenario_preset("testbed-mini");
  std::vector<int> order = s.pico_ids();
  Scenario off = activate_cells(s, 0, order);
  EXPECT_EQ(off.active_cell_count(), 2);
  Scenario three = activate_cells(s, 3, order);
  EXPECT_EQ(three.active_cell_count(), 5);
  for (int id : {order[0], order[1], order[2]})
    EXPECT_TRUE(three.find_cell(id)->active);
  EXPECT_FALSE(three.find_cell(order[3])->active);

  EXPECT_THROW(activate_cells(s, 13, order), ValidationError);
  std::vector<int> dup = order;
  dup[1] = dup[0];
  EXPECT_THROW(activate_cells(s, 2, dup), ValidationError);
  std::vector<int> with_macro = order;
  with_macro[0] = 1;
  EXPECT_THROW(activate_cells(s, 2, with_macro), ValidationError);
}

TEST(ScenarioRaster, HotspotRasterDimsAndFloor) {
  Area a{0, 0, 200, 100};
  DensityRaster r = make_hotspot_raster(a, 20, {{50, 50, 30, 1.0}}, 0.1);
  EXPECT_EQ(r.width, 10);
  EXPECT_EQ(r.height, 5);
  EXPECT_TRUE(r.covers(a));
  // Far corner only carries the floor; the hotspot pixel carries ~1 more.
  EXPECT_GT(r.at(2, 2), r.at(4, 9) * 5.0);
}
