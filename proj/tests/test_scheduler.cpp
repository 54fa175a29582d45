#include <gtest/gtest.h>

#include <cmath>
#include <utility>
#include <vector>

#include "dudesim/scheduler.hpp"

using namespace dudesim;

namespace {

DemandProfile demand(double rmin = 200e3, double rmax = 20e6) { return {rmin, rmax}; }

double sum_log_throughput(const Allocation& a) {
  double acc = 0.0;
  for (const auto& s : a.served) acc += std::log(s.throughput_bps);
  return acc;
}

// Exhaustive optimum of sum log(throughput) over every split of the RB
// budget among a fixed set of (rate, minimum-RB) entries.
double brute_best(const std::vector<std::pair<double, int>>& rate_need, std::size_t i,
                  int rb_left, const DemandProfile& d, double acc) {
  if (i == rate_need.size()) return acc;
  auto [rate, need] = rate_need[i];
  double best = -1e300;
  for (int rb = need; rb <= rb_left; ++rb) {
    double tp = std::min(rb * rate, d.r_max_bps);
    double v = brute_best(rate_need, i + 1, rb_left - rb, d, acc + std::log(tp));
    best = std::max(best, v);
  }
  return best;
}

}  // namespace

TEST(PerRbRate, OracleValues) {
  // 30 dB SINR saturates the 6 bit/s/Hz cap: 180 kHz * 6.
  EXPECT_DOUBLE_EQ(per_rb_rate(30.0, 180e3), 1.08e6);
  // 0 dB gives log2(2) = 1 bit/s/Hz.
  EXPECT_DOUBLE_EQ(per_rb_rate(0.0, 180e3), 180e3);
  // Below the -7 dB floor nothing is carried.
  EXPECT_DOUBLE_EQ(per_rb_rate(-20.0, 180e3), 0.0);
  EXPECT_GT(per_rb_rate(-7.0, 180e3), 0.0);
  EXPECT_THROW(per_rb_rate(0.0, 0.0), ValidationError);
}

TEST(PerRbRate, LinkQualityIsConsistent) {
  LinkQuality q = make_link_quality(10.0, 180e3);
  EXPECT_NEAR(q.spectral_efficiency, std::log2(11.0), 1e-12);
  EXPECT_NEAR(q.per_rb_rate_bps, 180e3 * std::log2(11.0), 1e-6);
}

TEST(Scheduler, EmptyAndZeroRate) {
  Allocation a = schedule_cell({}, 100, demand());
  EXPECT_TRUE(a.served.empty());
  EXPECT_TRUE(a.outage.empty());

  Allocation b = schedule_cell({{7, 0.0}}, 100, demand());
  EXPECT_TRUE(b.served.empty());
  EXPECT_EQ(b.outage, std::vector<int>{7});
}

TEST(Scheduler, SingleUeStopsAtRmax) {
  // 360 kb/s per RB: 56 RBs pass 20 Mb/s, the clamp holds the throughput.
  Allocation a = schedule_cell({{1, 360e3}}, 100, demand());
  ASSERT_EQ(a.served.size(), 1u);
  EXPECT_EQ(a.served[0].rb_count, 56);
  EXPECT_DOUBLE_EQ(a.served[0].throughput_bps, 20e6);
}

TEST(Scheduler, AdmissionIsNeedAscendingMaximalPrefix) {
  // Needs at r_min 200 kb/s: ue1 -> 2 RBs, ue2 -> 4, ue3 -> 5. Budget 6
  // admits ue1+ue2 and leaves ue3 in outage.
  std::vector<SchedUe> ues{{3, 40e3}, {1, 100e3}, {2, 50e3}};
  Allocation a = schedule_cell(ues, 6, demand());
  ASSERT_EQ(a.served.size(), 2u);
  EXPECT_EQ(a.served[0].ue_id, 1);
  EXPECT_EQ(a.served[1].ue_id, 2);
  EXPECT_EQ(a.outage, std::vector<int>{3});
  EXPECT_GE(a.served[0].throughput_bps, 200e3);
  EXPECT_GE(a.served[1].throughput_bps, 200e3);
  int total_rb = a.served[0].rb_count + a.served[1].rb_count;
  EXPECT_LE(total_rb, 6);
}

TEST(Scheduler, NeedTieBreaksByUeId) {
  std::vector<SchedUe> ues{{9, 100e3}, {4, 100e3}};
  Allocation a = schedule_cell(ues, 2, demand());
  ASSERT_EQ(a.served.size(), 1u);
  EXPECT_EQ(a.served[0].ue_id, 4);
  EXPECT_EQ(a.outage, std::vector<int>{9});
}

TEST(Scheduler, SurplusFollowsProportionalFairness) {
  // Equal rates and equal admission: surplus RBs spread evenly because the
  // marginal rate/throughput always favors the currently smaller pile.
  std::vector<SchedUe> ues{{1, 200e3}, {2, 200e3}};
  Allocation a = schedule_cell(ues, 10, demand());
  ASSERT_EQ(a.served.size(), 2u);
  EXPECT_EQ(a.served[0].rb_count, 5);
  EXPECT_EQ(a.served[1].rb_count, 5);
}

TEST(Scheduler, ExhaustiveMiniGridMatchesOptimum) {
  // Every instance with up to 3 UEs and up to 8 RBs over a rate grid,
  // with a binding throughput cap in play: the surplus distribution must
  // hit the exhaustive-search optimum of sum log(throughput) over the
  // admitted set exactly, and admission must be maximal.
  const std::vector<double> rates{0.0, 60e3, 100e3, 250e3, 700e3};
  DemandProfile d{200e3, 1.2e6};
  for (double r1 : rates)
    for (double r2 : rates)
      for (double r3 : rates)
        for (int n_rb : {1, 3, 5, 8}) {
          std::vector<SchedUe> ues{{1, r1}, {2, r2}, {3, r3}};
          Allocation a = schedule_cell(ues, n_rb, d);
          SCOPED_TRACE(testing::Message() << "r=(" << r1 << "," << r2 << "," << r3
                                          << ") n_rb=" << n_rb);

          int rb_used = 0;
          std::vector<int> seen;
          std::vector<std::pair<double, int>> rate_need;
          double need_total = 0.0;
          for (const auto& sv : a.served) {
            rb_used += sv.rb_count;
            EXPECT_GE(sv.throughput_bps, d.r_min_bps);
            EXPECT_LE(sv.throughput_bps, d.r_max_bps);
            seen.push_back(sv.ue_id);
            double rate = ues[static_cast<std::size_t>(sv.ue_id - 1)].per_rb_rate_bps;
            double need = std::ceil(d.r_min_bps / rate);
            EXPECT_GE(sv.rb_count, static_cast<int>(need));
            rate_need.emplace_back(rate, static_cast<int>(need));
            need_total += need;
          }
          for (int id : a.outage) seen.push_back(id);
          std::sort(seen.begin(), seen.end());
          EXPECT_EQ(seen, (std::vector<int>{1, 2, 3}));
          EXPECT_LE(rb_used, n_rb);

          // Admission maximality: no outage UE with a usable rate fits
          // on top of the admitted set.
          for (int id : a.outage) {
            double rate = ues[static_cast<std::size_t>(id - 1)].per_rb_rate_bps;
            if (rate > 0.0)
              EXPECT_GT(need_total + std::ceil(d.r_min_bps / rate),
                        static_cast<double>(n_rb));
          }

          if (!rate_need.empty()) {
            double best = brute_best(rate_need, 0, n_rb, d, 0.0);
            EXPECT_NEAR(sum_log_throughput(a), best, 1e-9);
          }
        }
}

TEST(Scheduler, RejectsBadBudget) {
  EXPECT_THROW(schedule_cell({}, 0, demand()), ValidationError);
}
