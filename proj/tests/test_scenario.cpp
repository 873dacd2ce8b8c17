#include <algorithm>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "srfl/errors.hpp"
#include "srfl/scenario.hpp"

using namespace srfl;
using namespace srfl::scenario;

namespace {

double min_ap_distance(const Deployment& d) {
  double best = 1e300;
  for (const auto& a : d.nodes) {
    for (const auto& b : d.nodes) {
      if (&a == &b || !a.is_ap() || !b.is_ap()) continue;
      best = std::min(best, distance(a.position, b.position));
    }
  }
  return best;
}

// Scans every node for the AP of a STA's BSS instead of using ap_of.
const NodeRecord* find_ap(const Deployment& d, int bss) {
  const NodeRecord* found = nullptr;
  for (const auto& n : d.nodes) {
    if (n.is_ap() && n.bss_id == bss) {
      if (found) return nullptr;
      found = &n;
    }
  }
  return found;
}

std::vector<Position> ap_positions(const Deployment& d) {
  std::vector<Position> out;
  for (const auto& n : d.nodes) {
    if (n.is_ap()) out.push_back(n.position);
  }
  return out;
}

bool same_positions(const std::vector<Position>& a, const std::vector<Position>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].x != b[i].x || a[i].y != b[i].y || a[i].z != b[i].z) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("training1 seed 7 respects AP count, STA count and spacing") {
  const auto d = generate_deployment(training1(), 7);
  CHECK(d.ap_count() >= 2);
  CHECK(d.ap_count() <= 6);
  for (int b = 0; b < d.ap_count(); ++b) CHECK(d.stas_of(b).size() == 1);
  CHECK(min_ap_distance(d) >= 10.0);
  CHECK_NOTHROW(validate(d));
}

TEST_CASE("generation is deterministic") {
  const auto a = generate_deployment(training1(), 7);
  const auto b = generate_deployment(training1(), 7);
  CHECK(a == b);
  const auto c = generate_deployment(training3(), 11);
  CHECK(c == generate_deployment(training3(), 11));
  CHECK_FALSE(a == generate_deployment(training1(), 8));
}

TEST_CASE("training2 STAs lie inside the association radius") {
  const GeneratorOptions opts;
  const auto d = generate_deployment(training2(), 3, opts);
  int stas = 0;
  for (const auto& n : d.nodes) {
    if (n.is_ap()) continue;
    ++stas;
    const NodeRecord* ap = find_ap(d, n.bss_id);
    REQUIRE(ap != nullptr);
    CHECK(distance(ap->position, n.position) <= opts.association_radius_m + 1e-12);
  }
  CHECK(stas >= d.ap_count());
}

TEST_CASE("min-distance audit over many seeds") {
  for (const auto& profile : {training1(), training2()}) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto d = generate_deployment(profile, seed);
      REQUIRE(min_ap_distance(d) >= *profile.min_ap_distance_m);
    }
  }
}

TEST_CASE("profile table") {
  CHECK(training1().sta_per_ap_max == 1);
  CHECK(training2().sta_per_ap_max == 4);
  CHECK(training3().location_variations == 20);
  CHECK_FALSE(training3().min_ap_distance_m.has_value());
  CHECK(test_profile().sta_per_ap_min == 2);
  CHECK(profile_by_name("training2").kind == ProfileKind::kTraining2);
  CHECK_THROWS_AS(profile_by_name("training9"), ConfigError);
}

TEST_CASE("infeasible spacing is reported") {
  GeneratorOptions opts;
  opts.map_width_m = 5.0;
  opts.map_height_m = 5.0;
  opts.max_attempts = 500;
  auto p = training1();
  p.ap_min = 6;
  CHECK_THROWS_AS(generate_deployment(p, 1, opts), GenerationInfeasible);
}

TEST_CASE("threshold sweep has 21 variants") {
  const auto d = generate_deployment(training2(), 5);
  const auto sweep = sweep_thresholds(d);
  REQUIRE(sweep.size() == 21);
  for (int i = 0; i < 21; ++i) CHECK(sweep[static_cast<std::size_t>(i)].tau() == -82 + i);
  CHECK(sweep.front() == d);
  for (const auto& v : sweep) {
    for (std::size_t i = 0; i < v.nodes.size(); ++i) {
      const auto& n = v.nodes[i];
      if (n.bss_id == kBssOfInterest) {
        CHECK(n.obss_pd_dbm == v.tau());
      } else {
        CHECK(n.obss_pd_dbm == -82);
      }
      CHECK(n.position.x == d.nodes[i].position.x);
    }
  }
  CHECK_THROWS_AS(with_threshold(d, -61), ConfigError);
  CHECK_THROWS_AS(with_threshold(d, -83), ConfigError);
}

TEST_CASE("STA location variations") {
  const auto d = generate_deployment(training3(), 21);
  const auto one = vary_sta_locations(d, 1, 99);
  REQUIRE(one.size() == 1);
  bool moved = false;
  for (std::size_t i = 0; i < d.nodes.size(); ++i) {
    if (!d.nodes[i].is_ap() && (d.nodes[i].position.x != one[0].nodes[i].position.x ||
                                d.nodes[i].position.y != one[0].nodes[i].position.y)) {
      moved = true;
    }
  }
  CHECK(moved);

  const auto twenty = vary_sta_locations(d, 20, 99);
  REQUIRE(twenty.size() == 20);
  for (const auto& v : twenty) {
    CHECK(same_positions(ap_positions(v), ap_positions(d)));
    for (int b = 0; b < d.ap_count(); ++b) CHECK(v.stas_of(b).size() == d.stas_of(b).size());
  }
  CHECK(vary_sta_locations(d, 5, 3) == vary_sta_locations(d, 5, 3));
  CHECK_THROWS_AS(vary_sta_locations(d, 0, 3), ConfigError);
  CHECK_THROWS_AS(vary_sta_locations(d, 21, 3), ConfigError);
}

TEST_CASE("nodes CSV round trip") {
  testing::TempDir tmp("nodes");
  auto d = with_threshold(generate_deployment(training2(), 4), -70);
  const auto path = tmp / "nodes.csv";
  write_nodes_csv(d, path, "config_hash=abc");
  const auto text = testing::read_file(path);
  CHECK(text.rfind("#config_hash=abc\nnode_id,node_type,bss_id,x,y,z,primary_channel,"
                   "tx_power,obss_pd\n",
                   0) == 0);
  const auto back = read_nodes_csv(path);
  REQUIRE(back.nodes.size() == d.nodes.size());
  for (std::size_t i = 0; i < d.nodes.size(); ++i) {
    CHECK(back.nodes[i].node_type == d.nodes[i].node_type);
    CHECK(back.nodes[i].bss_id == d.nodes[i].bss_id);
    CHECK(back.nodes[i].obss_pd_dbm == d.nodes[i].obss_pd_dbm);
    CHECK(back.nodes[i].position.x == doctest::Approx(d.nodes[i].position.x).epsilon(1e-6));
  }
  CHECK(back.tau() == -70);
}

TEST_CASE("malformed nodes CSV") {
  testing::TempDir tmp("nodes_bad");
  testing::write_file(tmp / "a.csv", "node_id,node_type,bss_id,x,y,z,primary_channel,tx_power\n");
  CHECK_THROWS_AS(read_nodes_csv(tmp / "a.csv"), ParseError);
  testing::write_file(tmp / "b.csv",
                      "node_id,node_type,bss_id,x,y,z,primary_channel,tx_power,obss_pd\n"
                      "0,AP,0,1,2,0,0,21,-82\n1,ROUTER,0,1,2,0,0,21,-82\n");
  try {
    read_nodes_csv(tmp / "b.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("validate rejects broken deployments") {
  auto d = testing::make_toy({{{0, 0, 0}, {{1, 0, 0}}}, {{30, 0, 0}, {{31, 0, 0}}}});
  CHECK_NOTHROW(validate(d));
  auto orphan = d;
  orphan.nodes.back().bss_id = 7;
  CHECK_THROWS_AS(validate(orphan), ConfigError);
  auto bad_tau = d;
  bad_tau.nodes[0].obss_pd_dbm = -50;
  CHECK_THROWS_AS(validate(bad_tau), ConfigError);
}

}  // TEST_SUITE
