#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dudesim/rng.hpp"
#include "dudesim/scenario.hpp"
#include "dudesim/types.hpp"
#include "dudesim/units.hpp"

namespace dudesim {

// Close-in clamp; the power law is singular at d = 0.
inline constexpr double kMinPathDistanceM = 1.0;

inline double pathloss_powerlaw(double d_m, double exponent, double ref_loss_db) {
  double d = std::max(d_m, kMinPathDistanceM);
  return ref_loss_db + 10.0 * exponent * std::log10(d);
}

// Answers propagation loss for any (cell, position). Implementations are
// immutable after construction and safe to share across snapshot workers.
class PathlossProvider {
 public:
  virtual ~PathlossProvider() = default;
  virtual double pathloss_db(const Cell& cell, double x_m, double y_m) const = 0;
  // Checks the provider can answer for every active cell over the area.
  virtual void ensure_covers(const Scenario& s) const { (void)s; }
};

class PowerLawProvider : public PathlossProvider {
 public:
  explicit PowerLawProvider(const PowerLawModel& model) : model_(model) {}

  double pathloss_db(const Cell& cell, double x_m, double y_m) const override {
    double dx = x_m - cell.x_m;
    double dy = y_m - cell.y_m;
    double d = std::sqrt(dx * dx + dy * dy);
    double exp = cell.layer == Layer::Macro ? model_.exponent_macro : model_.exponent_pico;
    return pathloss_powerlaw(d, exp, model_.ref_loss_db);
  }

 private:
  PowerLawModel model_;
};

// Imported per-cell pathloss maps, nearest-pixel lookup. Nearest pixel
// (never bilinear) keeps imported values exactly reproducible.
//
// File format (UTF-8 text):
//   PLRASTER v1 <n_cells> <width> <height> <origin_x_m> <origin_y_m> <pixel_m>
//   then per cell: 'CELL <id>' followed by height rows of width decimals (dB).
class RasterPathlossProvider : public PathlossProvider {
 public:
  int width = 0;
  int height = 0;
  double origin_x_m = 0.0;
  double origin_y_m = 0.0;
  double pixel_m = 0.0;
  std::map<int, std::vector<double>> grids;  // cell id -> row-major dB grid

  double pathloss_db(const Cell& cell, double x_m, double y_m) const override {
    auto it = grids.find(cell.id);
    if (it == grids.end())
      throw ValidationError("pathloss raster: no grid for cell " + std::to_string(cell.id));
    const double eps = 1e-9;
    double fx = (x_m - origin_x_m) / pixel_m;
    double fy = (y_m - origin_y_m) / pixel_m;
    if (fx < -eps || fy < -eps || fx > width + eps || fy > height + eps)
      throw ValidationError("pathloss raster: position (" + std::to_string(x_m) + ", " +
                            std::to_string(y_m) + ") outside raster coverage");
    int col = std::clamp(static_cast<int>(fx), 0, width - 1);
    int row = std::clamp(static_cast<int>(fy), 0, height - 1);
    return it->second[static_cast<std::size_t>(row) * width + col];
  }

  void ensure_covers(const Scenario& s) const override {
    for (const auto& c : s.cells) {
      if (!c.active) continue;
      if (!grids.count(c.id))
        throw ValidationError("pathloss raster: missing cell " + std::to_string(c.id));
    }
    if (origin_x_m > s.area.origin_x_m + 1e-6 || origin_y_m > s.area.origin_y_m + 1e-6 ||
        origin_x_m + width * pixel_m < s.area.origin_x_m + s.area.width_m - 1e-6 ||
        origin_y_m + height * pixel_m < s.area.origin_y_m + s.area.height_m - 1e-6)
      throw ValidationError("pathloss raster: grid does not cover area");
  }
};

inline std::shared_ptr<RasterPathlossProvider> load_pathloss_raster(std::istream& in,
                                                                    const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name + ": empty file");
  auto head = detail::split_ws(line);
  if (head.size() != 8 || head[0] != "PLRASTER" || head[1] != "v1")
    throw ParseError(name +
                     ":1: expected header 'PLRASTER v1 <n_cells> <w> <h> <ox> <oy> <pixel>'");
  auto prov = std::make_shared<RasterPathlossProvider>();
  long n_cells = detail::parse_long(head[2], name + ":1");
  prov->width = static_cast<int>(detail::parse_long(head[3], name + ":1"));
  prov->height = static_cast<int>(detail::parse_long(head[4], name + ":1"));
  prov->origin_x_m = detail::parse_double(head[5], name + ":1");
  prov->origin_y_m = detail::parse_double(head[6], name + ":1");
  prov->pixel_m = detail::parse_double(head[7], name + ":1");
  if (n_cells < 1 || prov->width < 1 || prov->height < 1 || !(prov->pixel_m > 0.0))
    throw ParseError(name + ":1: cell count, grid size and pixel must be positive");

  int lineno = 1;
  for (long c = 0; c < n_cells; ++c) {
    if (!std::getline(in, line))
      throw ParseError(name + ": expected " + std::to_string(n_cells) + " CELL blocks, got " +
                       std::to_string(c));
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.size() != 2 || toks[0] != "CELL")
      throw ParseError(name + ":" + std::to_string(lineno) + ": expected 'CELL <id>'");
    int id = static_cast<int>(detail::parse_long(toks[1], name + ":" + std::to_string(lineno)));
    if (prov->grids.count(id))
      throw ParseError(name + ":" + std::to_string(lineno) + ": duplicate cell " +
                       std::to_string(id));
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(prov->width) * prov->height);
    for (int row = 0; row < prov->height; ++row) {
      if (!std::getline(in, line))
        throw ParseError(name + ": cell " + std::to_string(id) + ": expected " +
                         std::to_string(prov->height) + " rows, got " + std::to_string(row));
      ++lineno;
      auto vals = detail::split_ws(line);
      if (static_cast<int>(vals.size()) != prov->width)
        throw ParseError(name + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(prov->width) + " values, got " +
                         std::to_string(vals.size()));
      for (const auto& v : vals)
        grid.push_back(detail::parse_double(v, name + ":" + std::to_string(lineno)));
    }
    prov->grids.emplace(id, std::move(grid));
  }
  return prov;
}

inline std::shared_ptr<RasterPathlossProvider> load_pathloss_raster(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError(path + ": cannot open pathloss raster");
  return load_pathloss_raster(f, path);
}

inline void save_pathloss_raster(const RasterPathlossProvider& prov, std::ostream& out) {
  out << "PLRASTER v1 " << prov.grids.size() << ' ' << prov.width << ' ' << prov.height << ' '
      << prov.origin_x_m << ' ' << prov.origin_y_m << ' ' << prov.pixel_m << '\n';
  for (const auto& [id, grid] : prov.grids) {
    out << "CELL " << id << '\n';
    for (int row = 0; row < prov.height; ++row) {
      for (int col = 0; col < prov.width; ++col) {
        if (col) out << ' ';
        out << grid[static_cast<std::size_t>(row) * prov.width + col];
      }
      out << '\n';
    }
  }
}

// Scenario-selected provider: imported raster when configured, else power law.
inline std::shared_ptr<PathlossProvider> make_pathloss_provider(const Scenario& s) {
  if (!s.pathloss_raster_path.empty()) {
    auto prov = load_pathloss_raster(s.pathloss_raster_path);
    prov->ensure_covers(s);
    return prov;
  }
  return std::make_shared<PowerLawProvider>(s.pathloss);
}

// Link budget for every (active cell, UE) pair, one matrix for both
// directions (reciprocity). pathloss_db holds net propagation loss
// including the shadowing draw, so gain + pathloss == G_cell + G_ue holds
// entry-wise. Rows are active cells in ascending id order.
struct CouplingGainMatrix {
  struct CellRef {
    int id = 0;
    Layer layer = Layer::Macro;
    double tx_power_dbm = 0.0;
    double antenna_gain_dbi = 0.0;
  };

  std::vector<CellRef> cells;   // ascending id
  std::vector<int> ue_ids;      // by UE index
  std::vector<double> gain_db;      // cells.size() * ue_ids.size(), row-major
  std::vector<double> pathloss_db;  // same shape

  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_ues() const { return static_cast<int>(ue_ids.size()); }

  double gain(int cell_row, int ue_idx) const {
    return gain_db[static_cast<std::size_t>(cell_row) * ue_ids.size() + ue_idx];
  }
  double pathloss(int cell_row, int ue_idx) const {
    return pathloss_db[static_cast<std::size_t>(cell_row) * ue_ids.size() + ue_idx];
  }

  int row_of(int cell_id) const {
    auto it = std::lower_bound(cells.begin(), cells.end(), cell_id,
                               [](const CellRef& c, int id) { return c.id < id; });
    if (it == cells.end() || it->id != cell_id)
      throw ValidationError("gain matrix: unknown cell id " + std::to_string(cell_id));
    return static_cast<int>(it - cells.begin());
  }
};

// Shadowing is seeded per (seed, cell id, ue id): the matrix is identical
// however construction is ordered or parallelized.
inline double shadowing_draw(std::uint64_t seed, int cell_id, int ue_id, double sigma_db) {
  if (sigma_db <= 0.0) return 0.0;
  SeedStream st(derive_seed(seed, 0x5440u, static_cast<std::uint64_t>(cell_id),
                            static_cast<std::uint64_t>(ue_id)));
  return sigma_db * st.next_normal();
}

inline CouplingGainMatrix build_gain_matrix(const Scenario& s, const std::vector<Ue>& ues,
                                            const PathlossProvider& provider,
                                            std::uint64_t seed) {
  CouplingGainMatrix m;
  std::vector<const Cell*> active;
  for (const auto& c : s.cells)
    if (c.active) active.push_back(&c);
  std::sort(active.begin(), active.end(),
            [](const Cell* a, const Cell* b) { return a->id < b->id; });
  m.cells.reserve(active.size());
  for (const Cell* c : active)
    m.cells.push_back({c->id, c->layer, c->tx_power_dbm, c->antenna_gain_dbi});
  m.ue_ids.reserve(ues.size());
  for (const auto& u : ues) m.ue_ids.push_back(u.id);

  std::size_t n = active.size() * ues.size();
  m.gain_db.resize(n);
  m.pathloss_db.resize(n);
  double sigma = s.pathloss.shadowing_sigma_db;
  for (std::size_t ci = 0; ci < active.size(); ++ci) {
    const Cell& c = *active[ci];
    for (std::size_t ui = 0; ui < ues.size(); ++ui) {
      const Ue& u = ues[ui];
      double pl = provider.pathloss_db(c, u.x_m, u.y_m) +
                  shadowing_draw(seed, c.id, u.id, sigma);
      std::size_t k = ci * ues.size() + ui;
      m.pathloss_db[k] = pl;
      m.gain_db[k] = c.antenna_gain_dbi + u.antenna_gain_dbi - pl;
    }
  }
  return m;
}

}  // namespace dudesim
