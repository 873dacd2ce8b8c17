#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "srfl/scenario.hpp"

namespace srfl::oracle {

struct RadioParams {
  double tx_pwr_ref_dbm = 21.0;
  double obss_pd_min_dbm = -82.0;
  double noise_floor_dbm = -95.0;
  double path_loss_exponent = 4.0;
  double path_loss_at_1m_db = 40.05;
  double max_phy_rate_mbps = 120.0;
  double bandwidth_mhz = 20.0;
  // When false every AP detects at OBSS/PD_min and no power cap applies.
  bool spatial_reuse_enabled = true;

  void validate() const;
};

double dbm_to_mw(double dbm) noexcept;
double mw_to_dbm(double mw) noexcept;

// Log-distance path loss. Distances below 0.1 m are clamped to 0.1 m.
double path_loss_db(double distance_m, const RadioParams& params);

// Maximum transmit power allowed during an SR transmit opportunity:
// TX_PWR_ref - (obss_pd - OBSS/PD_min). Throws std::domain_error outside
// [-82, -62] dBm.
double max_sr_tx_power(double obss_pd_dbm, const RadioParams& params);

// Unordered AP pair keyed by BSS id, first < second.
using ApEdge = std::pair<int, int>;

struct ContentionGraph {
  int ap_count = 0;
  std::vector<ApEdge> edges;  // sorted

  bool has_edge(int a, int b) const;
  int degree(int bss) const;
  bool operator==(const ContentionGraph&) const = default;
};

struct StaMetrics {
  int node_id = 0;
  int bss_id = 0;
  double rssi_dbm = 0.0;
  double sinr_db = 0.0;
  // Aggregate power at the STA from concurrently transmitting APs; -inf when
  // there is none.
  double interference_dbm = 0.0;
  double throughput_mbps = 0.0;

  bool operator==(const StaMetrics&) const = default;
};

struct LinkMetrics {
  std::vector<StaMetrics> stas;  // node order
  // interference_dbm[i][j]: power received at AP i from AP j (nominal power),
  // diagonal unused (0).
  std::vector<std::vector<double>> ap_interference_dbm;
  std::vector<double> airtime_share;  // per BSS
  std::vector<double> effective_tx_power_dbm;  // per BSS
  ContentionGraph graph;
  bool sr_txop = false;

  bool operator==(const LinkMetrics&) const = default;
};

// Power received at AP `at` from AP `from` using `from`'s nominal power.
double received_power_dbm(const scenario::Deployment& d, int at_bss, int from_bss,
                          const RadioParams& params);

ContentionGraph contention_graph(const scenario::Deployment& d, const RadioParams& params);

// RSSI, AP interference and SINR under the given per-BSS transmit powers and
// contention graph (only non-neighbours of a STA's AP interfere).
LinkMetrics compute_link_metrics(const scenario::Deployment& d, const RadioParams& params);

// Full deterministic label oracle, including airtime shares and throughput.
LinkMetrics simulate_throughput(const scenario::Deployment& d, const RadioParams& params);

void write_metrics_csv(const LinkMetrics& m, const std::filesystem::path& path,
                       const std::string& comment = {});

}  // namespace srfl::oracle
