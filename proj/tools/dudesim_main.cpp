// Command-line front end: the two-cell analytic model, Monte Carlo
// campaigns, pico-activation sweeps, and uplink coverage rasters.
// Emits plot-ready CSV/PGM files; no rendering here.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dudesim/analytic.hpp"
#include "dudesim/association.hpp"
#include "dudesim/engine.hpp"
#include "dudesim/scenario.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dudesim;

struct PolicyPreset {
  const char* label;
  const char* policy;
  double pico_tx_dbm;
};

// The three deployment cases: coupled association with low- and high-power
// picos, and decoupled association (pico DL power stays high so the DL side
// of the split is well defined).
constexpr PolicyPreset kPresets[] = {
    {"dl-lp", "coupled", 20.0},
    {"dl-hp", "coupled", 30.0},
    {"dude", "dude", 30.0},
};

const PolicyPreset& preset_by_label(const std::string& label) {
  for (const auto& p : kPresets)
    if (label == p.label) return p;
  throw ValidationError("unknown case preset: " + label);
}

struct CampaignOpts {
  std::string scenario = "testbed-mini";
  std::string policy;   // --policy text, empty if --case used
  std::string preset;   // --case label, empty if --policy used
  double pico_power = 0.0;
  bool pico_power_set = false;
  int snapshots = 20;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out = ".";
  double rmin = 0.0;
  bool rmin_set = false;
  double rmax = 0.0;
  bool rmax_set = false;
};

void add_campaign_flags(CLI::App* cmd, CampaignOpts& o) {
  cmd->add_option("--scenario", o.scenario, "Scenario file or preset name")
      ->capture_default_str();
  auto* assoc = cmd->add_option_group("association", "Exactly one of --policy / --case");
  assoc->add_option("--policy", o.policy, "Association policy: coupled, dude, re:<db>");
  assoc->add_option("--case", o.preset, "Deployment preset: dl-lp, dl-hp, dude")
      ->check(CLI::IsMember({"dl-lp", "dl-hp", "dude"}));
  assoc->require_option(1);
  cmd->add_option("--pico-power", o.pico_power, "Override pico DL transmit power [dBm]")
      ->each([&o](const std::string&) { o.pico_power_set = true; });
  cmd->add_option("--snapshots", o.snapshots, "Monte Carlo snapshots")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Master seed")->required();
  cmd->add_option("--workers", o.workers, "Worker threads (output-invariant)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_option("--rmin", o.rmin, "Minimum demanded throughput [bit/s]")
      ->each([&o](const std::string&) { o.rmin_set = true; });
  cmd->add_option("--rmax", o.rmax, "Maximum useful throughput [bit/s]")
      ->each([&o](const std::string&) { o.rmax_set = true; });
}

// Resolves scenario + policy + label from the shared flags. The option
// group guarantees exactly one of --policy / --case arrived.
struct ResolvedCampaign {
  Scenario scenario;
  AssociationPolicy policy;
  std::string label;
};

ResolvedCampaign resolve_campaign(const CampaignOpts& o, double default_rmin = 0.0) {
  ResolvedCampaign r;
  r.scenario = load_scenario_or_preset(o.scenario);
  if (!o.policy.empty()) {
    r.policy = parse_policy(o.policy);
    r.label = o.policy;
  } else if (!o.preset.empty()) {
    const auto& p = preset_by_label(o.preset);
    r.policy = parse_policy(p.policy);
    r.label = p.label;
    for (auto& c : r.scenario.cells)
      if (c.layer == Layer::Pico) c.tx_power_dbm = p.pico_tx_dbm;
  } else {
    throw ValidationError("one of --policy or --case is required");
  }
  if (o.pico_power_set)
    for (auto& c : r.scenario.cells)
      if (c.layer == Layer::Pico) c.tx_power_dbm = o.pico_power;
  if (default_rmin > 0.0) r.scenario.demand.r_min_bps = default_rmin;
  if (o.rmin_set) r.scenario.demand.r_min_bps = o.rmin;
  if (o.rmax_set) r.scenario.demand.r_max_bps = o.rmax;
  return r;
}

int active_pico_count(const Scenario& s) {
  int n = 0;
  for (const auto& c : s.cells)
    if (c.active && c.layer == Layer::Pico) ++n;
  return n;
}

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// --- simplified: the two-cell closed-form model -----------------------------

int cmd_simplified_case1(const std::string& out) {
  AnalyticParams p;
  Borders b = cell_borders(p);

  // Sample both association rules on a half-meter grid and normalize the
  // pair to its joint maximum, which keeps the curves' relative offset.
  std::vector<double> xs, pl, rp;
  double joint_max = 0.0;
  for (int k = 0; k <= 196; ++k) {
    double x = 1.0 + 0.5 * k;
    xs.push_back(x);
    pl.push_back(rate_vs_position(p, x, AssocMode::PathLoss));
    rp.push_back(rate_vs_position(p, x, AssocMode::ReceivedPower));
    joint_max = std::max({joint_max, pl.back(), rp.back()});
  }

  fs::path dir = ensure_out_dir(out);
  std::ofstream f(dir / "case1_curves.csv");
  if (!f) throw ParseError((dir / "case1_curves.csv").string() + ": cannot open for writing");
  f << "x_m,pl_rate_norm,rp_rate_norm\n" << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < xs.size(); ++i)
    f << std::setprecision(1) << xs[i] << ',' << std::setprecision(6) << pl[i] / joint_max << ','
      << rp[i] / joint_max << '\n';

  std::cout << std::fixed << std::setprecision(6)                      //
            << "dl_border_m=" << b.dl << '\n'                          //
            << "ul_border_m=" << b.ul << '\n'                          //
            << "curves=" << (dir / "case1_curves.csv").string() << '\n';
  return 0;
}

int cmd_simplified_case2(const std::string& out) {
  fs::path dir = ensure_out_dir(out);
  fs::path primary = dir / "case2_geometry.txt";
  fs::path fallback = fs::path("data") / "case2_geometry.txt";

  ThreeUeGeometry geom;
  if (fs::exists(primary)) {
    geom = load_geometry_fixture(primary.string());
  } else if (fs::exists(fallback)) {
    geom = load_geometry_fixture(fallback.string());
  } else {
    auto targets = case2_reference_targets();
    RecoveredGeometry rec = recover_geometry(targets.first, targets.second);
    save_geometry_fixture(rec, primary.string());
    std::cout << "recovered geometry written to " << primary.string() << '\n';
    geom = rec.geometry;
  }

  AnalyticParams p;
  RateBreakdown pl = three_ue_total_rate(p, geom, AssocMode::PathLoss);
  RateBreakdown rp = three_ue_total_rate(p, geom, AssocMode::ReceivedPower);

  std::cout << std::fixed << std::setprecision(2)  //
            << "mode  R_M   R_S   R_T\n"
            << "PL    " << pl.r_m << "  " << pl.r_s << "  " << pl.r_t << '\n'
            << "RP    " << rp.r_m << "  " << rp.r_s << "  " << rp.r_t << '\n'
            << std::setprecision(4) << "ratio_pl_over_rp=" << pl.r_t / rp.r_t << '\n';
  return 0;
}

// --- run / sweep / coverage --------------------------------------------------

int cmd_run(const CampaignOpts& o) {
  ResolvedCampaign rc = resolve_campaign(o);
  CampaignMetrics m = run_campaign(rc.scenario, rc.policy, o.snapshots, o.seed, o.workers);

  fs::path dir = ensure_out_dir(o.out);
  std::vector<MetricsRow> rows{{rc.label, active_pico_count(rc.scenario), m}};
  write_metrics_csv(rows, (dir / "metrics.csv").string());

  std::cout << "metrics=" << (dir / "metrics.csv").string() << '\n'
            << std::fixed << std::setprecision(0)                     //
            << "p5_bps=" << m.p5_bps << " p50_bps=" << m.p50_bps      //
            << std::setprecision(4)                                   //
            << " outage_macro=" << m.outage_macro                     //
            << " decoupled_frac=" << m.decoupled_frac << '\n';
  return 0;
}

int cmd_sweep(const CampaignOpts& o) {
  // Sweeps stress admission at low demand, so the default minimum rate is
  // lower than the scenario's unless overridden.
  ResolvedCampaign rc = resolve_campaign(o, 100e3);
  std::vector<int> order = rc.scenario.pico_ids();
  auto series = sweep_pico_activation(rc.scenario, rc.policy, order, o.snapshots, o.seed,
                                      o.workers);

  std::vector<MetricsRow> rows;
  rows.reserve(series.size());
  for (const auto& [k, m] : series) rows.push_back({rc.label, k, m});

  fs::path dir = ensure_out_dir(o.out);
  write_metrics_csv(rows, (dir / "sweep.csv").string());
  std::cout << "sweep=" << (dir / "sweep.csv").string() << '\n';
  return 0;
}

int cmd_coverage(const std::string& scenario_arg, double pixel, const std::string& out) {
  Scenario base = load_scenario_or_preset(scenario_arg);
  fs::path dir = ensure_out_dir(out);
  for (const auto& p : kPresets) {
    Scenario s = base;
    for (auto& c : s.cells)
      if (c.layer == Layer::Pico) c.tx_power_dbm = p.pico_tx_dbm;
    CoverageRaster cov = coverage_raster(s, parse_policy(p.policy), pixel);

    fs::path pgm = dir / (std::string("coverage_") + p.label + ".pgm");
    write_coverage_pgm(cov, pgm.string());
    fs::path txt = dir / (std::string("coverage_") + p.label + ".txt");
    std::ofstream f(txt);
    if (!f) throw ParseError(txt.string() + ": cannot open for writing");
    f << "pico_fraction=" << std::fixed << std::setprecision(4) << cov.pico_fraction << '\n';

    std::cout << p.label << " pico_fraction=" << std::fixed << std::setprecision(4)
              << cov.pico_fraction << " map=" << pgm.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous-network uplink/downlink association simulator"};
  app.require_subcommand(1);

  int case_no = 0;
  std::string simp_out = ".";
  auto* simp = app.add_subcommand("simplified", "Two-cell closed-form model");
  simp->add_option("--case", case_no, "1 = rate-vs-position curves, 2 = three-user benchmark")
      ->required()
      ->check(CLI::IsMember({1, 2}));
  simp->add_option("--out", simp_out, "Output directory")->capture_default_str();

  CampaignOpts run_opts;
  auto* run = app.add_subcommand("run", "Monte Carlo campaign, emits metrics.csv");
  add_campaign_flags(run, run_opts);

  CampaignOpts sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Pico-activation series, emits sweep.csv");
  add_campaign_flags(sweep, sweep_opts);

  std::string cov_scenario = "testbed-mini";
  double cov_pixel = 10.0;
  std::string cov_out = ".";
  auto* cov = app.add_subcommand("coverage", "Uplink best-server rasters for all three presets");
  cov->add_option("--scenario", cov_scenario, "Scenario file or preset name")
      ->capture_default_str();
  cov->add_option("--pixel", cov_pixel, "Raster pixel size [m]")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cov->add_option("--out", cov_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (simp->parsed()) return case_no == 1 ? cmd_simplified_case1(simp_out)
                                            : cmd_simplified_case2(simp_out);
    if (run->parsed()) return cmd_run(run_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts);
    if (cov->parsed()) return cmd_coverage(cov_scenario, cov_pixel, cov_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
