#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dudesim {

// Raised when an input document (scenario config, raster, geometry fixture)
// cannot be read or violates its grammar. The message names file and line.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when inputs parse but describe an unusable experiment
// (no active cells, raster not covering the area, negative demand, ...).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

enum class Layer { Macro, Pico };

inline const char* layer_name(Layer l) { return l == Layer::Macro ? "macro" : "pico"; }

struct Cell {
  int id = 0;
  Layer layer = Layer::Macro;
  double x_m = 0.0;
  double y_m = 0.0;
  double tx_power_dbm = 46.0;     // downlink transmit power
  double antenna_gain_dbi = 0.0;  // applies to both link directions
  bool active = true;
};

struct Ue {
  int id = 0;
  double x_m = 0.0;
  double y_m = 0.0;
  double max_tx_power_dbm = 20.0;
  double antenna_gain_dbi = 0.0;
};

// Axis-aligned deployment region; origin is the lower-left corner.
struct Area {
  double origin_x_m = 0.0;
  double origin_y_m = 0.0;
  double width_m = 0.0;
  double height_m = 0.0;

  bool contains(double x, double y) const {
    return x >= origin_x_m && x <= origin_x_m + width_m &&
           y >= origin_y_m && y <= origin_y_m + height_m;
  }
};

// Per-UE uplink service demand. r_min below which a UE counts as outage,
// r_max above which a UE receives no further resources.
struct DemandProfile {
  double r_min_bps = 200e3;
  double r_max_bps = 20e6;
};

// Distance-power-law pathloss with optional lognormal shadowing.
// exponent is per layer; ref_loss anchors the curve at 1 m.
struct PowerLawModel {
  double exponent_macro = 4.0;
  double exponent_pico = 3.6;
  double ref_loss_db = 38.5;
  double shadowing_sigma_db = 0.0;
};

struct PowerControlParams {
  double interference_limit_dbm = -105.0;  // per-RB ceiling at any cell
  double step_db = 1.0;                    // per-iteration reduction
  double min_power_dbm = -40.0;            // floor a UE can be pushed to
  int max_iterations = 20;
  // Contributions below this level are never asked to back off.
  double contribution_floor_dbm = -115.0;
};

// Which quantity uplink association maximizes. CouplingGain folds antenna
// gains into the comparison; RawPathloss compares propagation loss alone.
enum class UlMetric { CouplingGain, RawPathloss };

// Resource-block occupancy of one cell: a contiguous [first, first+count)
// span per served UE, disjoint across UEs, count == 0 meaning unserved.
struct RbSpan {
  int first = 0;
  int count = 0;
};

struct RbOccupancy {
  int n_rb = 0;
  std::vector<std::pair<int, RbSpan>> spans;  // (ue index, span), ue index unique
};

}  // namespace dudesim
