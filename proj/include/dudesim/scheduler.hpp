#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dudesim/types.hpp"
#include "dudesim/units.hpp"

namespace dudesim {

// Link quality of one UE toward its uplink serving cell.
struct LinkQuality {
  double sinr_db = 0.0;
  double spectral_efficiency = 0.0;  // bit/s/Hz, 0 below threshold, capped above
  double per_rb_rate_bps = 0.0;
};

inline constexpr double kDefaultMinSinrDb = -7.0;  // lowest usable modulation edge
inline constexpr double kDefaultSeCap = 6.0;       // densest modulation ceiling

// Shannon rate over one RB, gated below min_sinr and capped at se_cap.
inline double per_rb_rate(double sinr_db, double rb_bandwidth_hz,
                          double min_sinr_db = kDefaultMinSinrDb,
                          double se_cap = kDefaultSeCap) {
  if (!(rb_bandwidth_hz > 0.0))
    throw ValidationError("per_rb_rate: rb_bandwidth must be positive");
  if (sinr_db < min_sinr_db) return 0.0;
  double se = std::min(std::log2(1.0 + db_to_lin(sinr_db)), se_cap);
  return rb_bandwidth_hz * se;
}

inline LinkQuality make_link_quality(double sinr_db, double rb_bandwidth_hz,
                                     double min_sinr_db = kDefaultMinSinrDb,
                                     double se_cap = kDefaultSeCap) {
  LinkQuality q;
  q.sinr_db = sinr_db;
  q.per_rb_rate_bps = per_rb_rate(sinr_db, rb_bandwidth_hz, min_sinr_db, se_cap);
  q.spectral_efficiency = q.per_rb_rate_bps / rb_bandwidth_hz;
  return q;
}

// Scheduler input: one UE attached to the cell, with its flat per-RB rate.
struct SchedUe {
  int ue_id = 0;
  double per_rb_rate_bps = 0.0;
};

struct Allocation {
  struct Served {
    int ue_id = 0;
    int rb_count = 0;
    double throughput_bps = 0.0;
  };
  std::vector<Served> served;  // ascending ue_id
  std::vector<int> outage;     // ue ids, ascending
};

// Minimum-first admission, then proportional-fair surplus distribution.
//
// Phase 0: UEs that cannot carry bits at all go to outage.
// Phase 1: each candidate needs ceil(r_min / rate) RBs; admit in ascending
//          need (ties by ue id) while the budget holds, give exactly that
//          many RBs; the rest are outage.
// Phase 2: hand out the remaining RBs one at a time to the admitted UE
//          with the largest marginal gain of sum-log-throughput (equivalent
//          to argmax rate/throughput until a grant would cross r_max, where
//          the marginal truncates), skipping UEs already at r_max, ties by
//          ue id.
// Throughput is finally clamped to r_max; rb_count is left as allocated.
inline Allocation schedule_cell(const std::vector<SchedUe>& ues, int n_rb,
                                const DemandProfile& demand) {
  if (n_rb < 1) throw ValidationError("schedule_cell: n_rb must be >= 1");
  Allocation out;

  struct Cand {
    int ue_id;
    double rate;
    double need;  // RBs to reach r_min; double to survive extreme demands
  };
  std::vector<Cand> cands;
  for (const auto& u : ues) {
    if (u.per_rb_rate_bps <= 0.0) {
      out.outage.push_back(u.ue_id);
    } else {
      cands.push_back({u.ue_id, u.per_rb_rate_bps,
                       std::ceil(demand.r_min_bps / u.per_rb_rate_bps)});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.need != b.need ? a.need < b.need : a.ue_id < b.ue_id;
  });

  struct Admitted {
    int ue_id;
    double rate;
    int rb_count;
    double throughput;
  };
  std::vector<Admitted> adm;
  int rb_left = n_rb;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const Cand& c = cands[i];
    if (c.need > static_cast<double>(rb_left)) {
      // Ascending need: nothing later fits either.
      for (std::size_t j = i; j < cands.size(); ++j) out.outage.push_back(cands[j].ue_id);
      break;
    }
    int rb = static_cast<int>(c.need);
    adm.push_back({c.ue_id, c.rate, rb, rb * c.rate});
    rb_left -= rb;
  }

  while (rb_left > 0) {
    int best = -1;
    double best_gain = 0.0;
    for (std::size_t i = 0; i < adm.size(); ++i) {
      if (adm[i].throughput >= demand.r_max_bps) continue;
      double lifted = std::min(adm[i].throughput + adm[i].rate, demand.r_max_bps);
      double gain = std::log(lifted / adm[i].throughput);
      if (best < 0 || gain > best_gain ||
          (gain == best_gain && adm[i].ue_id < adm[static_cast<std::size_t>(best)].ue_id)) {
        best = static_cast<int>(i);
        best_gain = gain;
      }
    }
    if (best < 0) break;  // everyone at r_max
    Admitted& b = adm[static_cast<std::size_t>(best)];
    b.rb_count += 1;
    b.throughput = std::min(b.throughput + b.rate, demand.r_max_bps);
    --rb_left;
  }

  out.served.reserve(adm.size());
  for (const auto& a : adm)
    out.served.push_back({a.ue_id, a.rb_count, std::min(a.throughput, demand.r_max_bps)});
  std::sort(out.served.begin(), out.served.end(),
            [](const Allocation::Served& a, const Allocation::Served& b) {
              return a.ue_id < b.ue_id;
            });
  std::sort(out.outage.begin(), out.outage.end());
  return out;
}

}  // namespace dudesim
