#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dudesim/association.hpp"
#include "dudesim/log.hpp"
#include "dudesim/powerctl.hpp"
#include "dudesim/propagation.hpp"
#include "dudesim/raster.hpp"
#include "dudesim/rng.hpp"
#include "dudesim/scenario.hpp"
#include "dudesim/scheduler.hpp"
#include "dudesim/types.hpp"
#include "dudesim/units.hpp"

namespace dudesim {

// One resolved Monte Carlo snapshot. Per-UE vectors are indexed like the
// generated UE list; per-cell vectors are indexed like the gain-matrix rows
// (active cells in ascending id order).
struct SnapshotResult {
  std::vector<Ue> ues;
  std::vector<double> throughput_bps;
  std::vector<int> dl_cell;
  std::vector<int> ul_cell;
  std::vector<bool> outage;
  std::vector<double> ue_tx_power_dbm;

  std::vector<int> cell_ids;
  std::vector<Layer> cell_layers;
  std::vector<int> ul_ue_count;
  std::vector<int> dl_ue_count;
  std::vector<double> cell_interference_dbm;       // max over RBs, final round
  std::vector<double> prev_cell_interference_dbm;  // same, round before it

  int rounds_used = 0;
  bool converged = false;     // interference fixed point reached
  bool pc_converged = true;   // last power-control call hit no terminal violation
};

struct CampaignMetrics {
  double p5_bps = 0.0;
  double p50_bps = 0.0;
  double p90_bps = 0.0;
  double p98_bps = 0.0;
  double outage_macro = 0.0;      // outage UEs / UL-associated UEs on the layer
  double outage_pico = 0.0;
  double mean_ues_macro = 0.0;    // UL-associated UEs per active cell of the layer
  double mean_ues_pico = 0.0;
  double decoupled_frac = 0.0;
  int snapshots = 0;
};

// Percentile with linear interpolation on the sorted sample.
inline double percentile(std::vector<double> sample, double q) {
  if (sample.empty()) return 0.0;
  std::sort(sample.begin(), sample.end());
  if (sample.size() == 1) return sample[0];
  double rank = q * static_cast<double>(sample.size() - 1);
  std::size_t lo = static_cast<std::size_t>(rank);
  if (lo >= sample.size() - 1) return sample.back();
  double frac = rank - static_cast<double>(lo);
  return sample[lo] + (sample[lo + 1] - sample[lo]) * frac;
}

inline constexpr int kMaxInterferenceRounds = 10;   // after the noise-only bootstrap
inline constexpr double kConvergenceToleranceDb = 0.1;
inline constexpr double kNoInterferenceFloorDbm = -300.0;

namespace detail {

// Contiguous RB placement per cell: served UEs in a seeded random order,
// blocks packed from RB 0. Randomizing the order decorrelates which UEs
// collide across cells from round to round.
inline std::vector<RbOccupancy> place_occupancy(const CouplingGainMatrix& gains,
                                                const std::vector<Allocation>& alloc_by_cell,
                                                const std::map<int, int>& ue_index_of_id,
                                                int n_rb, std::uint64_t seed, int round) {
  std::vector<RbOccupancy> occ(gains.cells.size());
  for (std::size_t c = 0; c < gains.cells.size(); ++c) {
    occ[c].n_rb = n_rb;
    const auto& served = alloc_by_cell[c].served;
    if (served.empty()) continue;
    std::vector<std::size_t> order(served.size());
    std::iota(order.begin(), order.end(), 0);
    SeedStream rng(derive_seed(seed, 0x0ccu, static_cast<std::uint64_t>(round),
                               static_cast<std::uint64_t>(gains.cells[c].id)));
    rng.shuffle(order);
    int next_rb = 0;
    for (std::size_t k : order) {
      const auto& sv = served[k];
      RbSpan span{next_rb, sv.rb_count};
      next_rb += sv.rb_count;
      occ[c].spans.emplace_back(ue_index_of_id.at(sv.ue_id), span);
    }
  }
  return occ;
}

}  // namespace detail

inline SnapshotResult run_snapshot(const Scenario& s, const AssociationPolicy& policy,
                                   std::uint64_t seed, const PathlossProvider& provider) {
  validate_scenario(s);
  provider.ensure_covers(s);

  SnapshotResult res;
  res.ues = generate_ues(s, seed);
  CouplingGainMatrix gains = build_gain_matrix(s, res.ues, provider, seed);

  res.cell_ids.reserve(gains.cells.size());
  res.cell_layers.reserve(gains.cells.size());
  for (const auto& c : gains.cells) {
    res.cell_ids.push_back(c.id);
    res.cell_layers.push_back(c.layer);
  }
  res.ul_ue_count.assign(gains.cells.size(), 0);
  res.dl_ue_count.assign(gains.cells.size(), 0);
  res.cell_interference_dbm.assign(gains.cells.size(), kNoInterferenceFloorDbm);
  res.prev_cell_interference_dbm.assign(gains.cells.size(), kNoInterferenceFloorDbm);

  std::size_t n_ues = res.ues.size();
  res.throughput_bps.assign(n_ues, 0.0);
  res.outage.assign(n_ues, false);
  res.ue_tx_power_dbm.assign(n_ues, s.ue_max_tx_power_dbm);
  if (n_ues == 0) {
    res.converged = true;
    return res;
  }

  Association assoc = build_association(gains, policy, s.ul_metric);
  res.dl_cell = assoc.dl_cell;
  res.ul_cell = assoc.ul_cell;
  std::vector<int> ul_row(n_ues), dl_row(n_ues);
  for (std::size_t u = 0; u < n_ues; ++u) {
    ul_row[u] = gains.row_of(assoc.ul_cell[u]);
    dl_row[u] = gains.row_of(assoc.dl_cell[u]);
    res.ul_ue_count[ul_row[u]] += 1;
    res.dl_ue_count[dl_row[u]] += 1;
  }

  std::map<int, int> ue_index_of_id;
  for (std::size_t u = 0; u < n_ues; ++u) ue_index_of_id[res.ues[u].id] = static_cast<int>(u);

  // UEs attached to each cell row for scheduling.
  std::vector<std::vector<std::size_t>> ues_of_cell(gains.cells.size());
  for (std::size_t u = 0; u < n_ues; ++u)
    ues_of_cell[ul_row[u]].push_back(u);

  double noise_mw = dbm_to_mw(noise_per_rb_dbm(s.rb_bandwidth_hz, s.noise_figure_db));
  std::vector<double> powers(n_ues, s.ue_max_tx_power_dbm);
  std::vector<Allocation> alloc_by_cell(gains.cells.size());
  std::vector<RbOccupancy> occupancy(gains.cells.size());
  for (auto& o : occupancy) o.n_rb = s.n_rb;
  PowerState pc_state;

  // Fixed-point loop. Round 0 schedules against noise only (no occupancy
  // yet); each later round rebuilds occupancy from the previous round's
  // allocation, measures interference with the current powers, recomputes
  // SINRs, reruns power control from maximum power, and reschedules.
  // Converged when no cell's max interference moved by the tolerance.
  for (int round = 0; round <= kMaxInterferenceRounds; ++round) {
    res.rounds_used = round + 1;
    occupancy = detail::place_occupancy(gains, alloc_by_cell, ue_index_of_id, s.n_rb, seed, round);

    auto interference =
        detail::per_rb_interference_mw(gains, occupancy, powers, s.n_rb);
    res.prev_cell_interference_dbm = res.cell_interference_dbm;
    for (std::size_t c = 0; c < gains.cells.size(); ++c) {
      double mx = 0.0;
      const double* row = &interference[c * static_cast<std::size_t>(s.n_rb)];
      for (int r = 0; r < s.n_rb; ++r) mx = std::max(mx, row[r]);
      res.cell_interference_dbm[c] = mx > 0.0 ? mw_to_dbm(mx) : kNoInterferenceFloorDbm;
    }

    // Per-UE SINR: mean linear SINR over the UE's own RBs when it held
    // any last round, otherwise over the whole band of its serving cell.
    std::vector<double> sinr_db(n_ues);
    std::vector<const RbSpan*> span_of_ue(n_ues, nullptr);
    for (std::size_t c = 0; c < occupancy.size(); ++c)
      for (const auto& [ue, span] : occupancy[c].spans)
        if (span.count > 0) span_of_ue[ue] = &span;
    for (std::size_t u = 0; u < n_ues; ++u) {
      int c = ul_row[u];
      const double* row = &interference[static_cast<std::size_t>(c) * s.n_rb];
      double sig_mw = dbm_to_mw(powers[u] + gains.gain(c, static_cast<int>(u)));
      double acc = 0.0;
      int cnt = 0;
      if (span_of_ue[u]) {
        for (int r = span_of_ue[u]->first; r < span_of_ue[u]->first + span_of_ue[u]->count; ++r) {
          acc += sig_mw / (noise_mw + row[r]);
          ++cnt;
        }
      } else {
        for (int r = 0; r < s.n_rb; ++r) {
          acc += sig_mw / (noise_mw + row[r]);
          ++cnt;
        }
      }
      sinr_db[u] = lin_to_db(acc / cnt);
    }

    pc_state = control_uplink_power(assoc, gains, occupancy, s.powerctl, res.ues);
    powers = pc_state.tx_power_dbm;

    for (std::size_t c = 0; c < gains.cells.size(); ++c) {
      std::vector<SchedUe> in;
      in.reserve(ues_of_cell[c].size());
      for (std::size_t u : ues_of_cell[c])
        in.push_back({res.ues[u].id,
                      per_rb_rate(sinr_db[u], s.rb_bandwidth_hz, s.min_sinr_db,
                                  s.se_cap_bps_per_hz)});
      alloc_by_cell[c] = schedule_cell(in, s.n_rb, s.demand);
    }

    if (round >= 1) {
      double worst = 0.0;
      for (std::size_t c = 0; c < gains.cells.size(); ++c)
        worst = std::max(worst, std::abs(res.cell_interference_dbm[c] -
                                         res.prev_cell_interference_dbm[c]));
      if (worst < kConvergenceToleranceDb) {
        res.converged = true;
        break;
      }
    }
  }
  res.pc_converged = pc_state.converged;
  res.ue_tx_power_dbm = powers;

  for (std::size_t c = 0; c < gains.cells.size(); ++c) {
    for (const auto& sv : alloc_by_cell[c].served) {
      int u = ue_index_of_id.at(sv.ue_id);
      res.throughput_bps[static_cast<std::size_t>(u)] = sv.throughput_bps;
    }
    for (int id : alloc_by_cell[c].outage) {
      int u = ue_index_of_id.at(id);
      res.outage[static_cast<std::size_t>(u)] = true;
      res.throughput_bps[static_cast<std::size_t>(u)] = 0.0;
    }
  }
  return res;
}

inline SnapshotResult run_snapshot(const Scenario& s, const AssociationPolicy& policy,
                                   std::uint64_t seed) {
  auto provider = make_pathloss_provider(s);
  return run_snapshot(s, policy, seed, *provider);
}

// Pooled aggregation over snapshots; order-independent by construction
// (indexed result slots, sequential reduction).
inline CampaignMetrics aggregate_snapshots(const std::vector<SnapshotResult>& snaps,
                                           const Scenario& s) {
  CampaignMetrics m;
  m.snapshots = static_cast<int>(snaps.size());
  int macro_cells = 0, pico_cells = 0;
  for (const auto& c : s.cells) {
    if (!c.active) continue;
    (c.layer == Layer::Macro ? macro_cells : pico_cells) += 1;
  }

  std::vector<double> pooled;
  long macro_ues = 0, pico_ues = 0, macro_outage = 0, pico_outage = 0;
  long decoupled = 0, total = 0;
  for (const auto& snap : snaps) {
    std::map<int, Layer> layer_of;
    for (std::size_t c = 0; c < snap.cell_ids.size(); ++c)
      layer_of[snap.cell_ids[c]] = snap.cell_layers[c];
    for (std::size_t u = 0; u < snap.ues.size(); ++u) {
      pooled.push_back(snap.throughput_bps[u]);
      ++total;
      bool pico = layer_of.at(snap.ul_cell[u]) == Layer::Pico;
      (pico ? pico_ues : macro_ues) += 1;
      if (snap.outage[u]) (pico ? pico_outage : macro_outage) += 1;
      if (snap.ul_cell[u] != snap.dl_cell[u]) ++decoupled;
    }
  }

  m.p5_bps = percentile(pooled, 0.05);
  m.p50_bps = percentile(pooled, 0.50);
  m.p90_bps = percentile(pooled, 0.90);
  m.p98_bps = percentile(pooled, 0.98);
  m.outage_macro = macro_ues > 0 ? static_cast<double>(macro_outage) / macro_ues : 0.0;
  m.outage_pico = pico_ues > 0 ? static_cast<double>(pico_outage) / pico_ues : 0.0;
  long n_snaps = std::max<long>(1, m.snapshots);
  m.mean_ues_macro =
      macro_cells > 0 ? static_cast<double>(macro_ues) / (n_snaps * macro_cells) : 0.0;
  m.mean_ues_pico =
      pico_cells > 0 ? static_cast<double>(pico_ues) / (n_snaps * pico_cells) : 0.0;
  m.decoupled_frac = total > 0 ? static_cast<double>(decoupled) / total : 0.0;
  return m;
}

// Snapshot seeds are derived from (master_seed, index), and results land in
// indexed slots, so any worker count produces the same metrics.
inline CampaignMetrics run_campaign(const Scenario& s, const AssociationPolicy& policy,
                                    int n_snapshots, std::uint64_t master_seed,
                                    int workers = 1) {
  if (n_snapshots < 1) throw ValidationError("run_campaign: n_snapshots must be >= 1");
  validate_scenario(s);
  auto provider = make_pathloss_provider(s);

  std::vector<SnapshotResult> snaps(static_cast<std::size_t>(n_snapshots));
  int n_workers = std::clamp(workers, 1, n_snapshots);
  if (n_workers == 1) {
    for (int i = 0; i < n_snapshots; ++i)
      snaps[static_cast<std::size_t>(i)] =
          run_snapshot(s, policy, derive_seed(master_seed, static_cast<std::uint64_t>(i)),
                       *provider);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          int i;
          while ((i = next.fetch_add(1)) < n_snapshots)
            snaps[static_cast<std::size_t>(i)] = run_snapshot(
                s, policy, derive_seed(master_seed, static_cast<std::uint64_t>(i)), *provider);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return aggregate_snapshots(snaps, s);
}

// ---------------------------------------------------------------------------
// Coverage rasters: which layer would serve the uplink at every pixel.
// ---------------------------------------------------------------------------

struct CoverageRaster {
  int width = 0;
  int height = 0;
  double origin_x_m = 0.0;
  double origin_y_m = 0.0;
  double pixel_m = 0.0;
  std::vector<std::uint8_t> pico;  // row-major, 1 = pico serves, 0 = macro
  double pico_fraction = 0.0;
};

// Probe UEs at pixel centers, shadowing disabled, association per policy.
inline CoverageRaster coverage_raster(const Scenario& s, const AssociationPolicy& policy,
                                      double pixel_m) {
  if (!(pixel_m > 0.0)) throw ValidationError("coverage_raster: pixel must be positive");
  validate_scenario(s);
  Scenario probe_s = s;
  probe_s.pathloss.shadowing_sigma_db = 0.0;
  auto provider = make_pathloss_provider(probe_s);
  provider->ensure_covers(probe_s);

  CoverageRaster cov;
  cov.width = std::max(1, static_cast<int>(std::ceil(s.area.width_m / pixel_m - 1e-9)));
  cov.height = std::max(1, static_cast<int>(std::ceil(s.area.height_m / pixel_m - 1e-9)));
  cov.origin_x_m = s.area.origin_x_m;
  cov.origin_y_m = s.area.origin_y_m;
  cov.pixel_m = pixel_m;

  std::vector<Ue> probes;
  probes.reserve(static_cast<std::size_t>(cov.width) * cov.height);
  int id = 0;
  for (int row = 0; row < cov.height; ++row)
    for (int col = 0; col < cov.width; ++col) {
      Ue u;
      u.id = id++;
      u.x_m = cov.origin_x_m + (col + 0.5) * pixel_m;
      u.y_m = cov.origin_y_m + (row + 0.5) * pixel_m;
      u.max_tx_power_dbm = s.ue_max_tx_power_dbm;
      u.antenna_gain_dbi = s.ue_antenna_gain_dbi;
      probes.push_back(u);
    }

  CouplingGainMatrix gains = build_gain_matrix(probe_s, probes, *provider, 0);
  Association assoc = build_association(gains, policy, s.ul_metric);
  std::map<int, Layer> layer_of;
  for (const auto& c : gains.cells) layer_of[c.id] = c.layer;

  cov.pico.resize(probes.size());
  long pico_px = 0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    bool pico = layer_of.at(assoc.ul_cell[i]) == Layer::Pico;
    cov.pico[i] = pico ? 1 : 0;
    pico_px += pico ? 1 : 0;
  }
  cov.pico_fraction = static_cast<double>(pico_px) / static_cast<double>(probes.size());
  return cov;
}

// P2 graymap, 0 = macro, 255 = pico; rows written north-up.
inline void write_coverage_pgm(const CoverageRaster& cov, std::ostream& out) {
  out << "P2\n" << cov.width << ' ' << cov.height << "\n255\n";
  for (int row = cov.height - 1; row >= 0; --row) {
    for (int col = 0; col < cov.width; ++col) {
      if (col) out << ' ';
      out << (cov.pico[static_cast<std::size_t>(row) * cov.width + col] ? 255 : 0);
    }
    out << '\n';
  }
}

inline void write_coverage_pgm(const CoverageRaster& cov, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError(path + ": cannot open for writing");
  write_coverage_pgm(cov, f);
}

// ---------------------------------------------------------------------------
// Pico-activation sweep.
// ---------------------------------------------------------------------------

inline std::vector<std::pair<int, CampaignMetrics>> sweep_pico_activation(
    const Scenario& s, const AssociationPolicy& policy, const std::vector<int>& order,
    int n_snapshots, std::uint64_t master_seed, int workers = 1) {
  for (int id : s.pico_ids())
    if (std::find(order.begin(), order.end(), id) == order.end())
      throw ValidationError("sweep: activation order must cover all picos (missing " +
                            std::to_string(id) + ")");
  std::vector<std::pair<int, CampaignMetrics>> out;
  for (std::size_t k = 0; k <= order.size(); ++k) {
    Scenario sk = activate_cells(s, static_cast<int>(k), order);
    // Same master seed for every prefix: curves differ only by deployment.
    out.emplace_back(static_cast<int>(k),
                     run_campaign(sk, policy, n_snapshots, master_seed, workers));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics CSV. Throughputs as integer bit/s, ratios and means with four
// decimals: byte-stable for golden files.
// ---------------------------------------------------------------------------

struct MetricsRow {
  std::string policy_label;
  int active_picos = 0;
  CampaignMetrics metrics;
};

inline const char* metrics_csv_header() {
  return "policy,active_picos,snapshots,p5_bps,p50_bps,p90_bps,p98_bps,"
         "outage_macro,outage_pico,mean_ues_macro,mean_ues_pico,decoupled_frac";
}

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << metrics_csv_header() << '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << r.policy_label << ',' << r.active_picos << ',' << m.snapshots << ','
        << static_cast<long long>(std::llround(m.p5_bps)) << ','
        << static_cast<long long>(std::llround(m.p50_bps)) << ','
        << static_cast<long long>(std::llround(m.p90_bps)) << ','
        << static_cast<long long>(std::llround(m.p98_bps)) << ',' << std::fixed
        << std::setprecision(4) << m.outage_macro << ',' << m.outage_pico << ','
        << m.mean_ues_macro << ',' << m.mean_ues_pico << ',' << m.decoupled_frac << '\n';
    out.unsetf(std::ios_base::floatfield);
  }
}

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError(path + ": cannot open for writing");
  write_metrics_csv(rows, f);
}

}  // namespace dudesim
