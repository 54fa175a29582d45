#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dudesim/raster.hpp"
#include "dudesim/rng.hpp"
#include "dudesim/types.hpp"

namespace dudesim {

// A Scenario is the complete, immutable description of one experiment:
// deployment, radio numerology, propagation model, demand, traffic shape
// and the uplink control knobs. Snapshot workers share it read-only.
struct Scenario {
  std::string name = "unnamed";
  std::vector<Cell> cells;
  Area area;
  DensityRaster traffic_density;
  double mean_ue_count = 560.0;
  bool fixed_count = false;  // when true, every snapshot drops round(mean) UEs
  DemandProfile demand;

  double bandwidth_hz = 20e6;
  int n_rb = 100;
  double rb_bandwidth_hz = 180e3;
  double carrier_hz = 2.6e9;

  double ue_max_tx_power_dbm = 20.0;
  double ue_antenna_gain_dbi = 0.0;
  double noise_figure_db = 5.0;
  double min_sinr_db = -7.0;          // below this an RB carries nothing
  double se_cap_bps_per_hz = 6.0;     // spectral-efficiency ceiling (64QAM-ish)

  PowerLawModel pathloss;
  std::string pathloss_raster_path;   // empty = closed-form power law
  PowerControlParams powerctl;
  UlMetric ul_metric = UlMetric::CouplingGain;

  const Cell* find_cell(int id) const {
    for (const auto& c : cells)
      if (c.id == id) return &c;
    return nullptr;
  }

  int active_cell_count() const {
    int n = 0;
    for (const auto& c : cells) n += c.active ? 1 : 0;
    return n;
  }

  std::vector<int> pico_ids() const {
    std::vector<int> ids;
    for (const auto& c : cells)
      if (c.layer == Layer::Pico) ids.push_back(c.id);
    return ids;
  }
};

// Hotspot mixture: per-pixel weight = floor + sum of Gaussian bumps.
// Stands in for measured traffic maps.
struct Hotspot {
  double x_m = 0.0;
  double y_m = 0.0;
  double sigma_m = 70.0;
  double weight = 1.0;
};

inline DensityRaster make_hotspot_raster(const Area& area, double pixel_m,
                                         const std::vector<Hotspot>& hotspots,
                                         double uniform_floor) {
  if (!(pixel_m > 0.0)) throw ValidationError("traffic pixel_m must be positive");
  if (uniform_floor < 0.0) throw ValidationError("traffic uniform_floor must be >= 0");
  DensityRaster r;
  r.width = std::max(1, static_cast<int>(std::ceil(area.width_m / pixel_m - 1e-9)));
  r.height = std::max(1, static_cast<int>(std::ceil(area.height_m / pixel_m - 1e-9)));
  r.origin_x_m = area.origin_x_m;
  r.origin_y_m = area.origin_y_m;
  r.pixel_m = pixel_m;
  r.weights.assign(static_cast<std::size_t>(r.width) * r.height, 0.0);
  for (int row = 0; row < r.height; ++row) {
    for (int col = 0; col < r.width; ++col) {
      auto [cx, cy] = r.pixel_center(row, col);
      double w = uniform_floor;
      for (const auto& h : hotspots) {
        double dx = cx - h.x_m;
        double dy = cy - h.y_m;
        w += h.weight * std::exp(-(dx * dx + dy * dy) / (2.0 * h.sigma_m * h.sigma_m));
      }
      r.at(row, col) = w;
    }
  }
  r.finalize();
  return r;
}

inline DensityRaster make_uniform_raster(const Area& area, double pixel_m) {
  return make_hotspot_raster(area, pixel_m, {}, 1.0);
}

// Full invariant check; every load and transform funnels through here.
inline void validate_scenario(const Scenario& s) {
  if (s.cells.empty()) throw ValidationError("cells: at least one active cell required");
  std::set<int> ids;
  for (const auto& c : s.cells) {
    if (!ids.insert(c.id).second)
      throw ValidationError("cells: duplicate cell id " + std::to_string(c.id));
    if (c.tx_power_dbm < -40.0 || c.tx_power_dbm > 60.0)
      throw ValidationError("cell " + std::to_string(c.id) + ": tx_power outside [-40, 60] dBm");
    if (c.antenna_gain_dbi < -10.0 || c.antenna_gain_dbi > 30.0)
      throw ValidationError("cell " + std::to_string(c.id) + ": antenna_gain outside [-10, 30] dBi");
  }
  if (s.active_cell_count() < 1)
    throw ValidationError("cells: at least one active cell required");
  if (!(s.area.width_m > 0.0) || !(s.area.height_m > 0.0))
    throw ValidationError("area: width and height must be positive");
  if (s.n_rb < 1) throw ValidationError("radio: n_rb must be >= 1");
  if (!(s.rb_bandwidth_hz > 0.0)) throw ValidationError("radio: rb_bandwidth_hz must be positive");
  if (s.n_rb * s.rb_bandwidth_hz > s.bandwidth_hz * (1.0 + 1e-12))
    throw ValidationError("radio: n_rb * rb_bandwidth_hz exceeds bandwidth_hz");
  if (!(s.demand.r_min_bps > 0.0) || s.demand.r_min_bps > s.demand.r_max_bps)
    throw ValidationError("demand: require 0 < r_min_bps <= r_max_bps");
  if (!(s.mean_ue_count >= 0.0) || !std::isfinite(s.mean_ue_count))
    throw ValidationError("traffic: mean_ue_count must be finite and >= 0");
  if (s.pathloss.exponent_macro < 2.0 || s.pathloss.exponent_macro > 6.0 ||
      s.pathloss.exponent_pico < 2.0 || s.pathloss.exponent_pico > 6.0)
    throw ValidationError("radio: pathloss exponents must lie in [2, 6]");
  if (s.pathloss.ref_loss_db < 0.0) throw ValidationError("radio: ref_loss_db must be >= 0");
  if (s.pathloss.shadowing_sigma_db < 0.0)
    throw ValidationError("radio: shadowing_sigma_db must be >= 0");
  if (!(s.powerctl.step_db > 0.0)) throw ValidationError("radio: pc_step_db must be positive");
  if (s.powerctl.max_iterations < 1)
    throw ValidationError("radio: pc_max_iterations must be >= 1");
  if (!s.traffic_density.covers(s.area))
    throw ValidationError("traffic: density raster does not cover area");
}

// ---------------------------------------------------------------------------
// Config document
//
// Line-oriented text, '#' starts a comment, sections [area] [radio] [demand]
// [cells] [traffic]. Keys are `key = value`; cells and hotspots are list
// lines inside their sections:
//   cell <id> <macro|pico> <x_m> <y_m> <tx_dbm> <gain_dbi>
//   hotspot <x_m> <y_m> <sigma_m> <weight>
// Unknown keys and sections are errors, not warnings; fixtures stay honest.
// ---------------------------------------------------------------------------

inline Scenario load_scenario(std::istream& in, const std::string& name,
                              const std::string& base_dir) {
  Scenario s;
  s.name = name;
  bool have_area = false;
  bool have_traffic_section = false;
  std::string density_file;
  std::vector<Hotspot> hotspots;
  double traffic_pixel_m = 20.0;
  double uniform_floor = -1.0;  // <0 = unset
  std::optional<double> pico_tx_override, macro_tx_override;
  bool pc_floor_set = false;

  std::string section;
  std::string line;
  int lineno = 0;
  auto where = [&]() { return name + ":" + std::to_string(lineno); };

  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where() + ": unterminated section header");
      section = line.substr(1, line.size() - 2);
      if (section != "area" && section != "radio" && section != "demand" &&
          section != "cells" && section != "traffic")
        throw ParseError(where() + ": unknown section [" + section + "]");
      if (section == "traffic") have_traffic_section = true;
      continue;
    }

    if (section == "cells") {
      auto toks = detail::split_ws(line);
      if (toks.empty() || toks[0] != "cell")
        throw ParseError(where() + ": expected 'cell <id> <macro|pico> <x> <y> <tx_dbm> <gain_dbi>'");
      if (toks.size() != 7)
        throw ParseError(where() + ": cell line needs 6 fields, got " +
                         std::to_string(toks.size() - 1));
      Cell c;
      c.id = static_cast<int>(detail::parse_long(toks[1], where()));
      if (toks[2] == "macro") c.layer = Layer::Macro;
      else if (toks[2] == "pico") c.layer = Layer::Pico;
      else throw ParseError(where() + ": cell layer must be 'macro' or 'pico'");
      c.x_m = detail::parse_double(toks[3], where());
      c.y_m = detail::parse_double(toks[4], where());
      c.tx_power_dbm = detail::parse_double(toks[5], where());
      c.antenna_gain_dbi = detail::parse_double(toks[6], where());
      s.cells.push_back(c);
      continue;
    }

    if (section == "traffic" && line.rfind("hotspot", 0) == 0) {
      auto toks = detail::split_ws(line);
      if (toks.size() != 5)
        throw ParseError(where() + ": expected 'hotspot <x> <y> <sigma_m> <weight>'");
      Hotspot h;
      h.x_m = detail::parse_double(toks[1], where());
      h.y_m = detail::parse_double(toks[2], where());
      h.sigma_m = detail::parse_double(toks[3], where());
      h.weight = detail::parse_double(toks[4], where());
      if (!(h.sigma_m > 0.0)) throw ParseError(where() + ": hotspot sigma must be positive");
      hotspots.push_back(h);
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(where() + ": expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ParseError(where() + ": expected 'key = value'");
    auto num = [&]() { return detail::parse_double(val, where() + " (" + key + ")"); };

    if (section == "area") {
      if (key == "origin_x") s.area.origin_x_m = num();
      else if (key == "origin_y") s.area.origin_y_m = num();
      else if (key == "width") { s.area.width_m = num(); have_area = true; }
      else if (key == "height") { s.area.height_m = num(); have_area = true; }
      else throw ParseError(where() + ": unknown key '" + key + "' in [area]");
    } else if (section == "radio") {
      if (key == "bandwidth_hz") s.bandwidth_hz = num();
      else if (key == "n_rb") s.n_rb = static_cast<int>(detail::parse_long(val, where()));
      else if (key == "rb_bandwidth_hz") s.rb_bandwidth_hz = num();
      else if (key == "carrier_hz") s.carrier_hz = num();
      else if (key == "ue_max_tx_dbm") s.ue_max_tx_power_dbm = num();
      else if (key == "ue_gain_dbi") s.ue_antenna_gain_dbi = num();
      else if (key == "noise_figure_db") s.noise_figure_db = num();
      else if (key == "min_sinr_db") s.min_sinr_db = num();
      else if (key == "se_cap") s.se_cap_bps_per_hz = num();
      else if (key == "exponent_macro") s.pathloss.exponent_macro = num();
      else if (key == "exponent_pico") s.pathloss.exponent_pico = num();
      else if (key == "ref_loss_db") s.pathloss.ref_loss_db = num();
      else if (key == "shadowing_sigma_db") s.pathloss.shadowing_sigma_db = num();
      else if (key == "pico_tx_dbm") pico_tx_override = num();
      else if (key == "macro_tx_dbm") macro_tx_override = num();
      else if (key == "pathloss_raster") s.pathloss_raster_path = val;
      else if (key == "pc_interference_limit_dbm") s.powerctl.interference_limit_dbm = num();
      else if (key == "pc_step_db") s.powerctl.step_db = num();
      else if (key == "pc_min_power_dbm") s.powerctl.min_power_dbm = num();
      else if (key == "pc_max_iterations")
        s.powerctl.max_iterations = static_cast<int>(detail::parse_long(val, where()));
      else if (key == "pc_contribution_floor_dbm") {
        s.powerctl.contribution_floor_dbm = num();
        pc_floor_set = true;
      }
      else if (key == "ul_metric") {
        if (val == "coupling_gain") s.ul_metric = UlMetric::CouplingGain;
        else if (val == "raw_pathloss") s.ul_metric = UlMetric::RawPathloss;
        else throw ParseError(where() + ": ul_metric must be coupling_gain or raw_pathloss");
      } else throw ParseError(where() + ": unknown key '" + key + "' in [radio]");
    } else if (section == "demand") {
      if (key == "r_min_bps") s.demand.r_min_bps = num();
      else if (key == "r_max_bps") s.demand.r_max_bps = num();
      else throw ParseError(where() + ": unknown key '" + key + "' in [demand]");
    } else if (section == "traffic") {
      if (key == "mean_ue_count") s.mean_ue_count = num();
      else if (key == "fixed_count") s.fixed_count = detail::parse_bool(val, where());
      else if (key == "density_file") density_file = val;
      else if (key == "pixel_m") traffic_pixel_m = num();
      else if (key == "uniform_floor") uniform_floor = num();
      else throw ParseError(where() + ": unknown key '" + key + "' in [traffic]");
    } else if (section.empty()) {
      throw ParseError(where() + ": key outside any section");
    } else {
      throw ParseError(where() + ": unexpected line in [" + section + "]");
    }
  }

  if (s.cells.empty()) throw ValidationError(name + ": at least one active cell required");

  // The backoff floor tracks the interference limit unless pinned explicitly.
  if (!pc_floor_set)
    s.powerctl.contribution_floor_dbm = s.powerctl.interference_limit_dbm - 10.0;

  if (!s.pathloss_raster_path.empty()) {
    std::filesystem::path p(s.pathloss_raster_path);
    if (p.is_relative()) s.pathloss_raster_path = (std::filesystem::path(base_dir) / p).string();
  }

  if (pico_tx_override)
    for (auto& c : s.cells)
      if (c.layer == Layer::Pico) c.tx_power_dbm = *pico_tx_override;
  if (macro_tx_override)
    for (auto& c : s.cells)
      if (c.layer == Layer::Macro) c.tx_power_dbm = *macro_tx_override;

  if (!have_area) {
    // Default area: bounding box of the cells padded by 500 m per side.
    double min_x = s.cells.front().x_m, max_x = min_x;
    double min_y = s.cells.front().y_m, max_y = min_y;
    for (const auto& c : s.cells) {
      min_x = std::min(min_x, c.x_m); max_x = std::max(max_x, c.x_m);
      min_y = std::min(min_y, c.y_m); max_y = std::max(max_y, c.y_m);
    }
    s.area = {min_x - 500.0, min_y - 500.0, (max_x - min_x) + 1000.0, (max_y - min_y) + 1000.0};
  }

  if (!density_file.empty()) {
    std::filesystem::path p(density_file);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    s.traffic_density = load_density_raster(p.string());
  } else if (!hotspots.empty()) {
    s.traffic_density = make_hotspot_raster(s.area, traffic_pixel_m, hotspots,
                                            uniform_floor < 0.0 ? 0.0 : uniform_floor);
  } else {
    s.traffic_density = make_uniform_raster(s.area, traffic_pixel_m);
  }
  (void)have_traffic_section;

  validate_scenario(s);
  return s;
}

inline Scenario load_scenario(std::istream& in, const std::string& name) {
  return load_scenario(in, name, ".");
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError(path + ": cannot open scenario file");
  std::string dir = std::filesystem::path(path).parent_path().string();
  if (dir.empty()) dir = ".";
  return load_scenario(f, path, dir);
}

// Users drop as a Poisson-count (or fixed-count) process over the traffic
// density. Pure in (scenario, seed); the jitter rejection keeps every UE
// inside the deployment area even when the raster overhangs it.
inline std::vector<Ue> generate_ues(const Scenario& s, std::uint64_t seed) {
  SeedStream rng(derive_seed(seed, 0x5eedu, 1u));
  long count = s.fixed_count ? std::lround(s.mean_ue_count)
                             : rng.next_poisson(s.mean_ue_count);
  std::vector<Ue> ues;
  ues.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    Ue u;
    u.id = static_cast<int>(i);
    u.max_tx_power_dbm = s.ue_max_tx_power_dbm;
    u.antenna_gain_dbi = s.ue_antenna_gain_dbi;
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      auto [x, y] = s.traffic_density.sample(rng);
      if (s.area.contains(x, y)) {
        u.x_m = x;
        u.y_m = y;
        placed = true;
      }
    }
    if (!placed)
      throw ValidationError("generate_ues: traffic density has no usable weight inside area");
    ues.push_back(u);
  }
  return ues;
}

// Copy with exactly the first `active_pico_count` ids of `order` active
// among picos; macros stay active; nothing else changes.
inline Scenario activate_cells(const Scenario& s, int active_pico_count,
                               const std::vector<int>& order) {
  if (active_pico_count < 0 ||
      static_cast<std::size_t>(active_pico_count) > order.size())
    throw ValidationError("activate_cells: active_pico_count outside [0, len(order)]");
  std::set<int> seen;
  for (int id : order) {
    const Cell* c = s.find_cell(id);
    if (!c) throw ValidationError("activate_cells: unknown cell id " + std::to_string(id));
    if (c->layer != Layer::Pico)
      throw ValidationError("activate_cells: cell " + std::to_string(id) + " is not a pico");
    if (!seen.insert(id).second)
      throw ValidationError("activate_cells: duplicate cell id " + std::to_string(id));
  }
  Scenario out = s;
  std::set<int> keep(order.begin(), order.begin() + active_pico_count);
  for (auto& c : out.cells) {
    if (c.layer == Layer::Macro) c.active = true;
    else c.active = keep.count(c.id) > 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in scenarios. The canonical text is embedded so the shipped config
// file, the preset, and the tests all read the very same bytes.
// ---------------------------------------------------------------------------

inline const char* testbed_mini_text() {
  return R"(# Two-macro, twelve-pico testbed on 1 km^2.
# Traffic clusters at the pico sites over a light uniform floor.

[area]
origin_x = 0
origin_y = 0
width = 1000
height = 1000

[radio]
bandwidth_hz = 20e6
n_rb = 100
rb_bandwidth_hz = 180e3
carrier_hz = 2.6e9
ue_max_tx_dbm = 20
ue_gain_dbi = 0
noise_figure_db = 5
exponent_macro = 4.0
exponent_pico = 3.6
ref_loss_db = 38.5
shadowing_sigma_db = 0
# Stop backing a user off once its contribution is within 5 dB of the cap;
# the 10 dB default strangles far users in partially deployed layouts.
pc_contribution_floor_dbm = -110

[demand]
r_min_bps = 200e3
r_max_bps = 20e6

[cells]
cell 1 macro 250 500 49 17.8
cell 2 macro 750 500 49 17.8
cell 101 pico 100 150 20 4
cell 102 pico 320 80 20 4
cell 103 pico 600 120 20 4
cell 104 pico 900 100 20 4
cell 105 pico 80 520 20 4
cell 106 pico 540 470 20 4
cell 107 pico 930 520 20 4
cell 108 pico 150 850 20 4
cell 109 pico 380 920 20 4
cell 110 pico 640 840 20 4
cell 111 pico 880 880 20 4
cell 112 pico 500 700 20 4

[traffic]
mean_ue_count = 150
pixel_m = 20
uniform_floor = 0.05
hotspot 100 150 70 1
hotspot 320 80 70 1
hotspot 600 120 70 1
hotspot 900 100 70 1
hotspot 80 520 70 1
hotspot 930 520 70 1
hotspot 150 850 70 1
hotspot 380 920 70 1
hotspot 640 840 70 1
hotspot 880 880 70 1
hotspot 540 470 70 1
hotspot 500 700 70 1
)";
}

inline Scenario scenario_preset(const std::string& name) {
  if (name == "testbed-mini") {
    std::istringstream in(testbed_mini_text());
    return load_scenario(in, "testbed-mini", ".");
  }
  if (name == "testbed-mini-dense") {
    std::istringstream in(testbed_mini_text());
    Scenario s = load_scenario(in, "testbed-mini-dense", ".");
    s.mean_ue_count = 300.0;
    return s;
  }
  throw ValidationError("unknown scenario preset '" + name +
                        "' (known: testbed-mini, testbed-mini-dense)");
}

// Resolves --scenario arguments: an existing file path wins, then presets.
inline Scenario load_scenario_or_preset(const std::string& arg) {
  if (std::filesystem::exists(arg)) return load_scenario(arg);
  return scenario_preset(arg);
}

}  // namespace dudesim
