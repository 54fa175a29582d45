#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "dudesim/propagation.hpp"
#include "dudesim/types.hpp"

namespace dudesim {

// Coupled: both directions follow DL RSRP.
// Dude: DL follows RSRP, UL follows the best uplink metric (decoupled).
// RangeExtension: both directions follow RSRP biased by +offset on picos.
struct AssociationPolicy {
  enum class Kind { Coupled, Dude, RangeExtension };
  Kind kind = Kind::Coupled;
  double offset_db = 0.0;  // used by RangeExtension only, must be >= 0

  static AssociationPolicy coupled() { return {Kind::Coupled, 0.0}; }
  static AssociationPolicy dude() { return {Kind::Dude, 0.0}; }
  static AssociationPolicy range_extension(double offset_db) {
    if (offset_db < 0.0)
      throw ValidationError("range extension offset must be >= 0 dB");
    return {Kind::RangeExtension, offset_db};
  }
};

// Accepts the CLI/config spellings: coupled | dude | re:<offset_db>
inline AssociationPolicy parse_policy(const std::string& text) {
  if (text == "coupled") return AssociationPolicy::coupled();
  if (text == "dude") return AssociationPolicy::dude();
  if (text.rfind("re:", 0) == 0)
    return AssociationPolicy::range_extension(
        detail::parse_double(text.substr(3), "policy '" + text + "'"));
  throw ValidationError("unknown policy '" + text + "' (expected coupled, dude, or re:<db>)");
}

inline std::string policy_name(const AssociationPolicy& p) {
  switch (p.kind) {
    case AssociationPolicy::Kind::Coupled: return "coupled";
    case AssociationPolicy::Kind::Dude: return "dude";
    case AssociationPolicy::Kind::RangeExtension: {
      std::ostringstream ss;
      ss << "re:" << p.offset_db;
      return ss.str();
    }
  }
  return "?";
}

namespace detail {

// Shared argmax with the deterministic lowest-id tie-break: rows are in
// ascending cell id order, so strict > keeps the first (lowest) id on ties.
template <typename Metric>
int argmax_cell(const CouplingGainMatrix& m, Metric&& metric) {
  if (m.n_cells() < 1) throw ValidationError("association: no active cells");
  int best = 0;
  double best_v = metric(0);
  for (int c = 1; c < m.n_cells(); ++c) {
    double v = metric(c);
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return m.cells[best].id;
}

inline double rsrp_dbm(const CouplingGainMatrix& m, int cell_row, int ue_idx) {
  return m.cells[cell_row].tx_power_dbm + m.gain(cell_row, ue_idx);
}

inline double ul_metric_value(const CouplingGainMatrix& m, int cell_row, int ue_idx,
                              UlMetric metric) {
  // Larger is better in both modes, hence the negated pathloss.
  return metric == UlMetric::CouplingGain ? m.gain(cell_row, ue_idx)
                                          : -m.pathloss(cell_row, ue_idx);
}

inline double biased_rsrp_dbm(const CouplingGainMatrix& m, int cell_row, int ue_idx,
                              double pico_offset_db) {
  return rsrp_dbm(m, cell_row, ue_idx) +
         (m.cells[cell_row].layer == Layer::Pico ? pico_offset_db : 0.0);
}

}  // namespace detail

// Downlink serving cell: strongest RSRP (tx power plus coupling gain).
inline int associate_dl(int ue_idx, const CouplingGainMatrix& m) {
  return detail::argmax_cell(m, [&](int c) { return detail::rsrp_dbm(m, c, ue_idx); });
}

// Uplink serving cell under the given policy.
inline int associate_ul(int ue_idx, const CouplingGainMatrix& m,
                        const AssociationPolicy& policy,
                        UlMetric metric = UlMetric::CouplingGain) {
  switch (policy.kind) {
    case AssociationPolicy::Kind::Coupled:
      return associate_dl(ue_idx, m);
    case AssociationPolicy::Kind::Dude:
      return detail::argmax_cell(
          m, [&](int c) { return detail::ul_metric_value(m, c, ue_idx, metric); });
    case AssociationPolicy::Kind::RangeExtension:
      return detail::argmax_cell(
          m, [&](int c) { return detail::biased_rsrp_dbm(m, c, ue_idx, policy.offset_db); });
  }
  throw ValidationError("association: unhandled policy");
}

struct Association {
  AssociationPolicy policy;
  std::vector<int> ue_ids;   // by UE index, mirrors the gain matrix
  std::vector<int> dl_cell;  // cell ids
  std::vector<int> ul_cell;

  int n_ues() const { return static_cast<int>(ue_ids.size()); }
};

inline Association build_association(const CouplingGainMatrix& m,
                                     const AssociationPolicy& policy,
                                     UlMetric metric = UlMetric::CouplingGain) {
  Association a;
  a.policy = policy;
  a.ue_ids = m.ue_ids;
  a.dl_cell.resize(m.ue_ids.size());
  a.ul_cell.resize(m.ue_ids.size());
  for (int u = 0; u < m.n_ues(); ++u) {
    if (policy.kind == AssociationPolicy::Kind::RangeExtension) {
      // Range extension is a coupled policy: one biased choice, both links.
      int c = detail::argmax_cell(
          m, [&](int r) { return detail::biased_rsrp_dbm(m, r, u, policy.offset_db); });
      a.dl_cell[u] = c;
      a.ul_cell[u] = c;
    } else {
      a.dl_cell[u] = associate_dl(u, m);
      a.ul_cell[u] = policy.kind == AssociationPolicy::Kind::Coupled
                         ? a.dl_cell[u]
                         : associate_ul(u, m, policy, metric);
    }
  }
  return a;
}

// UEs whose uplink and downlink serve from different cells.
inline std::vector<int> decoupled_set(const Association& a) {
  std::vector<int> out;
  for (std::size_t i = 0; i < a.ue_ids.size(); ++i)
    if (a.dl_cell[i] != a.ul_cell[i]) out.push_back(a.ue_ids[i]);
  return out;
}

}  // namespace dudesim
