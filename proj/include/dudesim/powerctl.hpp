#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "dudesim/association.hpp"
#include "dudesim/propagation.hpp"
#include "dudesim/types.hpp"
#include "dudesim/units.hpp"

namespace dudesim {

struct PowerState {
  std::vector<double> tx_power_dbm;        // per UE index, final values
  std::vector<double> iteration_log_dbm;   // max cell interference measured each iteration
  bool converged = false;                  // true iff no cell exceeded the limit at exit
};

namespace detail {

// Received interference at every (cell row, RB) from all UEs served
// elsewhere, in mW. occupancy is indexed by cell row; a UE listed under a
// row is served by that cell, so skipping the victim's own row implements
// the serving-cell exclusion.
inline std::vector<double> per_rb_interference_mw(const CouplingGainMatrix& gains,
                                                  const std::vector<RbOccupancy>& occupancy,
                                                  const std::vector<double>& tx_power_dbm,
                                                  int n_rb) {
  std::size_t n_cells = gains.cells.size();
  std::vector<double> interference(n_cells * static_cast<std::size_t>(n_rb), 0.0);
  for (std::size_t victim = 0; victim < n_cells; ++victim) {
    double* row = &interference[victim * static_cast<std::size_t>(n_rb)];
    for (std::size_t src = 0; src < n_cells; ++src) {
      if (src == victim) continue;
      for (const auto& [ue, span] : occupancy[src].spans) {
        if (span.count <= 0) continue;
        double p = dbm_to_mw(tx_power_dbm[ue] + gains.gain(static_cast<int>(victim), ue));
        for (int r = span.first; r < span.first + span.count; ++r) row[r] += p;
      }
    }
  }
  return interference;
}

}  // namespace detail

// Interference-cap power control. Synchronous rounds: measure per-RB
// interference at every cell with the current powers; every cell with an
// RB above the limit makes each other cell step down, by one `step_db`,
// all of its UEs that contribute above the floor on a violated RB.
// Powers start from each UE's maximum and only ever move down, clamped at
// min_power. Stops on: no violation (converged), no power change, or
// max_iterations; the last two leave converged = false.
inline PowerState control_uplink_power(const Association& assoc,
                                       const CouplingGainMatrix& gains,
                                       const std::vector<RbOccupancy>& occupancy,
                                       const PowerControlParams& params,
                                       const std::vector<Ue>& ues) {
  if (occupancy.size() != gains.cells.size())
    throw ValidationError("power control: occupancy must have one entry per active cell");
  int n_rb = occupancy.empty() ? 0 : occupancy.front().n_rb;
  for (std::size_t c = 0; c < occupancy.size(); ++c) {
    if (occupancy[c].n_rb != n_rb)
      throw ValidationError("power control: inconsistent n_rb across cells");
    for (const auto& [ue, span] : occupancy[c].spans) {
      if (span.count > 0 && assoc.ul_cell[ue] != gains.cells[c].id)
        throw ValidationError("power control: occupancy lists a UE under a foreign cell");
    }
  }

  PowerState st;
  st.tx_power_dbm.resize(ues.size());
  for (std::size_t u = 0; u < ues.size(); ++u) {
    if (params.min_power_dbm >= ues[u].max_tx_power_dbm)
      throw ValidationError("power control: min_power must be below UE max power");
    st.tx_power_dbm[u] = ues[u].max_tx_power_dbm;
  }

  double limit_mw = dbm_to_mw(params.interference_limit_dbm);
  for (int it = 0; it < params.max_iterations; ++it) {
    auto interference =
        detail::per_rb_interference_mw(gains, occupancy, st.tx_power_dbm, n_rb);
    double max_mw = 0.0;
    for (double v : interference) max_mw = std::max(max_mw, v);
    st.iteration_log_dbm.push_back(max_mw > 0.0 ? mw_to_dbm(max_mw) : -300.0);

    // UEs to step down: contribute above the floor on some violated RB of
    // a cell other than their own.
    std::set<int> reduce;
    for (std::size_t victim = 0; victim < gains.cells.size(); ++victim) {
      const double* row = &interference[victim * static_cast<std::size_t>(n_rb)];
      bool violated = false;
      for (int r = 0; r < n_rb && !violated; ++r) violated = row[r] > limit_mw;
      if (!violated) continue;
      for (std::size_t src = 0; src < gains.cells.size(); ++src) {
        if (src == victim) continue;
        for (const auto& [ue, span] : occupancy[src].spans) {
          if (span.count <= 0) continue;
          double contrib = st.tx_power_dbm[ue] + gains.gain(static_cast<int>(victim), ue);
          if (contrib <= params.contribution_floor_dbm) continue;
          bool hits_violated_rb = false;
          for (int r = span.first; r < span.first + span.count && !hits_violated_rb; ++r)
            hits_violated_rb = row[r] > limit_mw;
          if (hits_violated_rb) reduce.insert(ue);
        }
      }
    }

    if (reduce.empty()) {
      // Either nothing exceeds the limit (converged), or a violation has
      // no external contributor above the floor (stuck, not converged).
      st.converged = !(max_mw > limit_mw);
      return st;
    }

    bool changed = false;
    for (int ue : reduce) {
      double next = std::max(params.min_power_dbm, st.tx_power_dbm[ue] - params.step_db);
      if (next < st.tx_power_dbm[ue]) {
        st.tx_power_dbm[ue] = next;
        changed = true;
      }
    }
    if (!changed) return st;  // all offenders already at the floor power
  }
  return st;
}

}  // namespace dudesim
