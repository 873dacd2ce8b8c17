#include "srfl/rf_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "srfl/csv.hpp"
#include "srfl/errors.hpp"

namespace srfl::oracle {

using scenario::Deployment;
using scenario::kBssOfInterest;

void RadioParams::validate() const {
  if (obss_pd_min_dbm != -82.0) throw ConfigError("obss_pd_min must be -82 dBm");
  if (tx_pwr_ref_dbm != 21.0 && tx_pwr_ref_dbm != 25.0) {
    throw ConfigError("tx_pwr_ref must be 21 or 25 dBm");
  }
  if (!(noise_floor_dbm < -80.0)) throw ConfigError("noise floor must be below -80 dBm");
  if (!(path_loss_exponent > 0.0)) throw ConfigError("path loss exponent must be positive");
  if (!(max_phy_rate_mbps > 0.0) || !(bandwidth_mhz > 0.0)) {
    throw ConfigError("rate and bandwidth must be positive");
  }
}

double dbm_to_mw(double dbm) noexcept { return std::pow(10.0, dbm / 10.0); }

double mw_to_dbm(double mw) noexcept {
  if (mw <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(mw);
}

double path_loss_db(double distance_m, const RadioParams& params) {
  const double d = std::max(distance_m, 0.1);
  return params.path_loss_at_1m_db + 10.0 * params.path_loss_exponent * std::log10(d);
}

double max_sr_tx_power(double obss_pd_dbm, const RadioParams& params) {
  if (!(obss_pd_dbm >= -82.0 && obss_pd_dbm <= -62.0)) {
    throw std::domain_error("OBSS/PD " + std::to_string(obss_pd_dbm) +
                            " dBm outside [-82, -62]");
  }
  return params.tx_pwr_ref_dbm - (obss_pd_dbm - params.obss_pd_min_dbm);
}

bool ContentionGraph::has_edge(int a, int b) const {
  const ApEdge e = a < b ? ApEdge{a, b} : ApEdge{b, a};
  return std::binary_search(edges.begin(), edges.end(), e);
}

int ContentionGraph::degree(int bss) const {
  return static_cast<int>(std::count_if(edges.begin(), edges.end(), [bss](const ApEdge& e) {
    return e.first == bss || e.second == bss;
  }));
}

double received_power_dbm(const Deployment& d, int at_bss, int from_bss,
                          const RadioParams& params) {
  const auto& at = d.ap_of(at_bss);
  const auto& from = d.ap_of(from_bss);
  return from.tx_power_dbm - path_loss_db(scenario::distance(at.position, from.position), params);
}

namespace {

void check_contiguous_bss(const Deployment& d) {
  const int n = d.ap_count();
  for (int b = 0; b < n; ++b) (void)d.ap_of(b);
}

double detection_threshold(const Deployment& d, const RadioParams& params) {
  if (!params.spatial_reuse_enabled) return params.obss_pd_min_dbm;
  return static_cast<double>(d.tau());
}

// An SR transmit opportunity exists when some OBSS AP would have been detected
// at the legacy threshold but is ignored under the configured one.
bool has_sr_txop(const Deployment& d, const RadioParams& params) {
  const double tau = detection_threshold(d, params);
  if (tau <= params.obss_pd_min_dbm) return false;
  for (int j = 1; j < d.ap_count(); ++j) {
    const double rx = received_power_dbm(d, kBssOfInterest, j, params);
    if (rx >= params.obss_pd_min_dbm && rx < tau) return true;
  }
  return false;
}

}  // namespace

ContentionGraph contention_graph(const Deployment& d, const RadioParams& params) {
  check_contiguous_bss(d);
  ContentionGraph g;
  g.ap_count = d.ap_count();
  const double tau = detection_threshold(d, params);
  for (int i = 0; i < g.ap_count; ++i) {
    for (int j = i + 1; j < g.ap_count; ++j) {
      bool edge = false;
      if (i == kBssOfInterest) {
        edge = received_power_dbm(d, i, j, params) >= tau;
      } else {
        edge = std::max(received_power_dbm(d, i, j, params),
                        received_power_dbm(d, j, i, params)) >= params.obss_pd_min_dbm;
      }
      if (edge) g.edges.emplace_back(i, j);
    }
  }
  return g;
}

LinkMetrics compute_link_metrics(const Deployment& d, const RadioParams& params) {
  LinkMetrics m;
  m.graph = contention_graph(d, params);
  const int n_aps = m.graph.ap_count;

  m.sr_txop = has_sr_txop(d, params);
  m.effective_tx_power_dbm.resize(static_cast<std::size_t>(n_aps));
  for (int b = 0; b < n_aps; ++b) {
    double p = d.ap_of(b).tx_power_dbm;
    if (b == kBssOfInterest && m.sr_txop) {
      p = std::min(p, max_sr_tx_power(d.tau(), params));
    }
    m.effective_tx_power_dbm[static_cast<std::size_t>(b)] = p;
  }

  m.ap_interference_dbm.assign(static_cast<std::size_t>(n_aps),
                               std::vector<double>(static_cast<std::size_t>(n_aps), 0.0));
  for (int i = 0; i < n_aps; ++i) {
    for (int j = 0; j < n_aps; ++j) {
      if (i != j) {
        m.ap_interference_dbm[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            received_power_dbm(d, i, j, params);
      }
    }
  }

  const double noise_mw = dbm_to_mw(params.noise_floor_dbm);
  for (const auto& node : d.nodes) {
    if (node.is_ap()) continue;
    StaMetrics s;
    s.node_id = node.node_id;
    s.bss_id = node.bss_id;
    const auto& ap = d.ap_of(node.bss_id);
    s.rssi_dbm = m.effective_tx_power_dbm[static_cast<std::size_t>(node.bss_id)] -
                 path_loss_db(scenario::distance(ap.position, node.position), params);
    double interference_mw = 0.0;
    for (int k = 0; k < n_aps; ++k) {
      if (k == node.bss_id || m.graph.has_edge(node.bss_id, k)) continue;
      const auto& other = d.ap_of(k);
      interference_mw +=
          dbm_to_mw(m.effective_tx_power_dbm[static_cast<std::size_t>(k)] -
                    path_loss_db(scenario::distance(other.position, node.position), params));
    }
    s.interference_dbm = mw_to_dbm(interference_mw);
    s.sinr_db = s.rssi_dbm - mw_to_dbm(interference_mw + noise_mw);
    m.stas.push_back(s);
  }
  return m;
}

LinkMetrics simulate_throughput(const Deployment& d, const RadioParams& params) {
  LinkMetrics m = compute_link_metrics(d, params);
  const int n_aps = m.graph.ap_count;
  m.airtime_share.resize(static_cast<std::size_t>(n_aps));
  for (int b = 0; b < n_aps; ++b) {
    m.airtime_share[static_cast<std::size_t>(b)] = 1.0 / (1.0 + m.graph.degree(b));
  }
  for (auto& s : m.stas) {
    const double shannon =
        params.bandwidth_mhz * std::log2(1.0 + dbm_to_mw(s.sinr_db));
    const double rate = std::min(params.max_phy_rate_mbps, shannon);
    const auto n_stas = static_cast<double>(d.stas_of(s.bss_id).size());
    s.throughput_mbps = m.airtime_share[static_cast<std::size_t>(s.bss_id)] * rate / n_stas;
  }
  return m;
}

void write_metrics_csv(const LinkMetrics& m, const std::filesystem::path& path,
                       const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  if (!comment.empty()) out << '#' << comment << '\n';
  out << "sta_id,rssi_dbm,sinr_db,interference_dbm,throughput_mbps,airtime_share\n";
  for (const auto& s : m.stas) {
    const double share =
        m.airtime_share.empty() ? 1.0 : m.airtime_share[static_cast<std::size_t>(s.bss_id)];
    out << s.node_id << ',' << csv::format_double(s.rssi_dbm) << ','
        << csv::format_double(s.sinr_db) << ',' << csv::format_double(s.interference_dbm)
        << ',' << csv::format_double(s.throughput_mbps) << ',' << csv::format_double(share)
        << '\n';
  }
}

}  // namespace srfl::oracle
