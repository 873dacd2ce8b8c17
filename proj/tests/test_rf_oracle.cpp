#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "helpers.hpp"
#include "reference_oracle.hpp"
#include "srfl/errors.hpp"
#include "srfl/rf_oracle.hpp"

using namespace srfl;
using namespace srfl::oracle;
using srfl::scenario::Deployment;
using testing::edge_set;
using testing::reference_oracle;

namespace {

double bss_a_total(const LinkMetrics& m) {
  double s = 0.0;
  for (const auto& st : m.stas) {
    if (st.bss_id == 0) s += st.throughput_mbps;
  }
  return s;
}

}  // namespace

TEST_SUITE("rf_oracle") {

TEST_CASE("path loss") {
  const RadioParams p;
  CHECK(path_loss_db(1.0, p) == 40.05);
  CHECK(path_loss_db(10.0, p) == doctest::Approx(80.05).epsilon(1e-14));
  CHECK(path_loss_db(0.01, p) == path_loss_db(0.1, p));
  double prev = path_loss_db(0.1, p);
  for (double d = 0.2; d < 200.0; d *= 1.3) {
    const double pl = path_loss_db(d, p);
    CHECK(pl >= prev);
    prev = pl;
  }
}

TEST_CASE("max SR transmit power") {
  RadioParams p;
  CHECK(max_sr_tx_power(-82, p) == 21.0);
  CHECK(max_sr_tx_power(-62, p) == 1.0);
  for (double ref : {21.0, 25.0}) {
    p.tx_pwr_ref_dbm = ref;
    for (int tau = -82; tau <= -62; ++tau) CHECK(max_sr_tx_power(tau, p) == ref - (tau + 82));
  }
  CHECK(max_sr_tx_power(-72, p) == 15.0);
  CHECK_THROWS_AS(max_sr_tx_power(-61, p), std::domain_error);
  CHECK_THROWS_AS(max_sr_tx_power(-83, p), std::domain_error);
}

TEST_CASE("isolated BSS has noise-limited SINR and full airtime") {
  const auto d = testing::make_toy({{{0, 0, 0}, {{12, 0, 0}}}});
  const auto m = simulate_throughput(d, {});
  REQUIRE(m.stas.size() == 1);
  const double rssi = 21.0 - path_loss_db(12.0, {});
  CHECK(m.stas[0].rssi_dbm == doctest::Approx(rssi).epsilon(1e-14));
  CHECK(m.stas[0].sinr_db == doctest::Approx(rssi + 95.0).epsilon(1e-12));
  CHECK(std::isinf(m.stas[0].interference_dbm));
  CHECK(m.airtime_share[0] == 1.0);
  CHECK(m.stas[0].throughput_mbps ==
        doctest::Approx(std::min(120.0, 20.0 * std::log2(1.0 + std::pow(10.0, (rssi + 95.0) / 10.0)))));
}

TEST_CASE("three-node toy matches hand evaluation") {
  // AP_A at the origin, its STA at 10 m, interfering AP at 20 m from AP_A.
  auto d = testing::make_toy({{{0, 0, 0}, {{10, 0, 0}}}, {{20, 0, 0}, {}}});

  SUBCASE("legacy threshold: the APs contend, no interference") {
    const auto m = simulate_throughput(d, {});
    CHECK(m.graph.has_edge(0, 1));
    CHECK_FALSE(m.sr_txop);
    // RSSI = 21 - 80.05; SINR = RSSI + 95
    CHECK(m.stas[0].rssi_dbm == doctest::Approx(-59.05).epsilon(1e-13));
    CHECK(m.stas[0].sinr_db == doctest::Approx(35.95).epsilon(1e-13));
    CHECK(m.airtime_share[0] == 0.5);
  }
  SUBCASE("tau -62 ignores the OBSS AP and caps power at 1 dBm") {
    d = scenario::with_threshold(d, -62);
    const auto m = simulate_throughput(d, {});
    // rx at AP_A = 21 - (40.05 + 40 log10 20) = -71.09 dBm, inside [-82, -62)
    CHECK(m.ap_interference_dbm[0][1] == doctest::Approx(-71.0912).epsilon(1e-5));
    CHECK_FALSE(m.graph.has_edge(0, 1));
    CHECK(m.sr_txop);
    CHECK(m.effective_tx_power_dbm[0] == 1.0);
    // S = 1 - 80.05 = -79.05; I = 21 - 80.05 = -59.05; N = -95
    const double i_plus_n = std::pow(10.0, -5.905) + std::pow(10.0, -9.5);
    const double sinr = -79.05 - 10.0 * std::log10(i_plus_n);
    CHECK(m.stas[0].rssi_dbm == doctest::Approx(-79.05).epsilon(1e-13));
    CHECK(m.stas[0].interference_dbm == doctest::Approx(-59.05).epsilon(1e-13));
    CHECK(m.stas[0].sinr_db == doctest::Approx(sinr).epsilon(1e-12));
    CHECK(m.stas[0].sinr_db == doctest::Approx(-20.0011).epsilon(1e-5));
    CHECK(m.airtime_share[0] == 1.0);
  }
}

TEST_CASE("interference matrix is symmetric for mirrored APs") {
  const auto d = testing::make_toy({{{10, 10, 0}, {{12, 10, 0}}}, {{40, 10, 0}, {{38, 10, 0}}}});
  const auto m = compute_link_metrics(d, {});
  CHECK(m.ap_interference_dbm[0][1] == m.ap_interference_dbm[1][0]);
  CHECK(m.stas[0].rssi_dbm == m.stas[1].rssi_dbm);
}

TEST_CASE("received power equal to the threshold creates an edge") {
  RadioParams p;
  p.path_loss_at_1m_db = 40.0;
  auto d = testing::make_toy({{{0, 0, 0}, {{0.5, 0, 0}}}, {{1, 0, 0}, {{1.5, 0, 0}}}});
  d.nodes[2].tx_power_dbm = -30.0;  // AP 1
  d = scenario::with_threshold(d, -70);
  REQUIRE(received_power_dbm(d, 0, 1, p) == -70.0);
  CHECK(contention_graph(d, p).has_edge(0, 1));
  d = scenario::with_threshold(d, -69);
  CHECK_FALSE(contention_graph(d, p).has_edge(0, 1));
}

TEST_CASE("contention graph shrinks monotonically in tau") {
  int deployments = 0;
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto d = scenario::generate_deployment(scenario::training2(), seed);
    ++deployments;
    std::set<std::pair<int, int>> prev = edge_set(contention_graph(d, {}));
    for (int tau = -81; tau <= -62; ++tau) {
      const auto cur = edge_set(contention_graph(scenario::with_threshold(d, tau), {}));
      if (!std::includes(prev.begin(), prev.end(), cur.begin(), cur.end())) ++violations;
      // only edges touching BSS_A may disappear
      for (const auto& e : prev) {
        if (!cur.count(e)) CHECK(e.first == 0);
      }
      prev = cur;
    }
  }
  CHECK(deployments == 200);
  CHECK(violations == 0);
}

TEST_CASE("legacy threshold equals SR disabled") {
  RadioParams off;
  off.spatial_reuse_enabled = false;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto d = scenario::generate_deployment(scenario::training3(), seed);
    CHECK(simulate_throughput(d, {}) == simulate_throughput(d, off));
  }
}

TEST_CASE("pipeline matches independent re-implementation") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto base = scenario::generate_deployment(scenario::training2(), 1000 + seed);
    for (const auto& d : scenario::sweep_thresholds(base)) {
      const auto m = simulate_throughput(d, {});
      const auto ref = reference_oracle(d);
      REQUIRE(m.stas.size() == ref.throughput.size());
      CHECK(edge_set(m.graph) == ref.edges);
      for (std::size_t i = 0; i < m.stas.size(); ++i) {
        CHECK(std::abs(m.stas[i].throughput_mbps - ref.throughput[i]) <= 1e-12);
        CHECK(std::abs(m.stas[i].sinr_db - ref.sinr[i]) <= 1e-9);
      }
    }
  }
}

TEST_CASE("two-AP threshold curve matches re-implementation") {
  const auto base =
      testing::make_toy({{{10, 10, 0}, {{14, 12, 0}, {6, 9, 0}}}, {{32, 18, 0}, {{35, 20, 0}}}});
  for (const auto& d : scenario::sweep_thresholds(base)) {
    const auto m = simulate_throughput(d, {});
    const auto ref = reference_oracle(d);
    for (std::size_t i = 0; i < m.stas.size(); ++i) {
      CHECK(std::abs(m.stas[i].throughput_mbps - ref.throughput[i]) <= 1e-12);
    }
  }
}

TEST_CASE("labels are bounded and deterministic") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto d = scenario::with_threshold(
        scenario::generate_deployment(scenario::training3(), seed), -82 + static_cast<int>(seed % 21));
    const auto m = simulate_throughput(d, {});
    CHECK(m == simulate_throughput(d, {}));
    for (int b = 0; b < m.graph.ap_count; ++b) {
      CHECK(m.airtime_share[static_cast<std::size_t>(b)] == 1.0 / (1.0 + m.graph.degree(b)));
    }
    for (const auto& s : m.stas) {
      CHECK(s.throughput_mbps >= 0.0);
      CHECK(s.throughput_mbps <= 120.0);
    }
  }
}

TEST_CASE("spatial reuse trade-off goes both ways") {
  int sr_wins = 0;
  int legacy_wins = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto d = scenario::generate_deployment(scenario::training2(), seed);
    const double legacy = bss_a_total(simulate_throughput(d, {}));
    const double sr = bss_a_total(simulate_throughput(scenario::with_threshold(d, -62), {}));
    if (sr > legacy) ++sr_wins;
    if (legacy > sr) ++legacy_wins;
  }
  CHECK(sr_wins > 0);
  CHECK(legacy_wins > 0);
}

TEST_CASE("radio parameter validation") {
  RadioParams p;
  CHECK_NOTHROW(p.validate());
  p.tx_pwr_ref_dbm = 23.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.noise_floor_dbm = -50.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("metrics CSV") {
  testing::TempDir tmp("metrics");
  const auto d = scenario::generate_deployment(scenario::training2(), 2);
  const auto m = simulate_throughput(d, {});
  write_metrics_csv(m, tmp / "m.csv", "config_hash=00");
  const auto text = testing::read_file(tmp / "m.csv");
  CHECK(text.rfind("#config_hash=00\nsta_id,rssi_dbm,sinr_db,interference_dbm,throughput_mbps,"
                   "airtime_share\n",
                   0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(m.stas.size()) + 2);
}

}  // TEST_SUITE
