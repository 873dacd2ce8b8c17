#include "srfl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "srfl/csv.hpp"
#include "srfl/errors.hpp"
#include "srfl/random.hpp"

namespace srfl::scenario {
namespace {

const std::vector<std::string> kNodesHeader = {
    "node_id", "node_type", "bss_id", "x", "y", "z", "primary_channel", "tx_power", "obss_pd"};

Position clamp_to_map(Position p, double width, double height) {
  p.x = std::clamp(p.x, 0.0, width);
  p.y = std::clamp(p.y, 0.0, height);
  return p;
}

// Uniform point in a disk of the given radius, clamped to the map. Clamping
// projects onto a convex set that contains the AP, so it never moves a STA
// farther from its AP.
Position draw_sta_position(Rng& rng, const Position& ap, double radius, double width,
                           double height, double z) {
  const double r = radius * std::sqrt(rng.uniform());
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  Position p{ap.x + r * std::cos(theta), ap.y + r * std::sin(theta), z};
  return clamp_to_map(p, width, height);
}

void place_stas(Deployment& d, Rng& rng, const GeneratorOptions& opts,
                const std::vector<int>& sta_counts) {
  std::vector<NodeRecord> nodes;
  int next_id = 0;
  for (std::size_t bss = 0; bss < sta_counts.size(); ++bss) {
    NodeRecord ap = d.ap_of(static_cast<int>(bss));
    ap.node_id = next_id++;
    nodes.push_back(ap);
    for (int s = 0; s < sta_counts[bss]; ++s) {
      NodeRecord sta;
      sta.node_id = next_id++;
      sta.node_type = NodeType::kSta;
      sta.bss_id = ap.bss_id;
      sta.position = draw_sta_position(rng, ap.position, opts.association_radius_m,
                                        d.map_width_m, d.map_height_m, opts.z_m);
      sta.primary_channel = ap.primary_channel;
      sta.tx_power_dbm = ap.tx_power_dbm;
      sta.obss_pd_dbm = ap.obss_pd_dbm;
      nodes.push_back(sta);
    }
  }
  d.nodes = std::move(nodes);
}

}  // namespace

double distance(const Position& a, const Position& b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void ScenarioProfile::validate() const {
  if (ap_min < 2 || ap_max > 6 || ap_min > ap_max) {
    throw ConfigError("profile " + name + ": AP count range must lie in [2, 6]");
  }
  if (sta_per_ap_min < 1 || sta_per_ap_min > sta_per_ap_max) {
    throw ConfigError("profile " + name + ": invalid STA-per-AP range");
  }
  if (min_ap_distance_m && *min_ap_distance_m < 0.0) {
    throw ConfigError("profile " + name + ": negative minimum AP distance");
  }
  if (location_variations < 1 || location_variations > 20) {
    throw ConfigError("profile " + name + ": location variations must lie in [1, 20]");
  }
}

ScenarioProfile training1() {
  return {"training1", ProfileKind::kTraining1, 2, 6, 1, 1, 10.0, 1};
}
ScenarioProfile training2() {
  return {"training2", ProfileKind::kTraining2, 2, 6, 1, 4, 10.0, 1};
}
ScenarioProfile training3() {
  return {"training3", ProfileKind::kTraining3, 2, 6, 1, 4, std::nullopt, 20};
}
ScenarioProfile test_profile() {
  return {"test", ProfileKind::kTest, 2, 6, 2, 4, std::nullopt, 1};
}

ScenarioProfile profile_by_name(std::string_view name) {
  if (name == "training1") return training1();
  if (name == "training2") return training2();
  if (name == "training3") return training3();
  if (name == "test") return test_profile();
  throw ConfigError("unknown profile '" + std::string(name) + "'");
}

std::string_view to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::kTraining1: return "training1";
    case ProfileKind::kTraining2: return "training2";
    case ProfileKind::kTraining3: return "training3";
    case ProfileKind::kTest: return "test";
  }
  return "unknown";
}

std::string_view to_string(NodeType type) { return type == NodeType::kAp ? "AP" : "STA"; }

void GeneratorOptions::validate() const {
  if (!(map_width_m > 0.0) || !(map_height_m > 0.0)) {
    throw ConfigError("map size must be positive");
  }
  if (!(association_radius_m > 0.0)) throw ConfigError("association radius must be positive");
  if (max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
}

int Deployment::ap_count() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(),
                                        [](const NodeRecord& n) { return n.is_ap(); }));
}

std::vector<const NodeRecord*> Deployment::stas_of(int bss_id) const {
  std::vector<const NodeRecord*> out;
  for (const auto& n : nodes) {
    if (!n.is_ap() && n.bss_id == bss_id) out.push_back(&n);
  }
  return out;
}

const NodeRecord& Deployment::ap_of(int bss_id) const {
  for (const auto& n : nodes) {
    if (n.is_ap() && n.bss_id == bss_id) return n;
  }
  throw ConfigError("no AP for bss " + std::to_string(bss_id));
}

int Deployment::tau() const { return ap_of(kBssOfInterest).obss_pd_dbm; }

void validate(const Deployment& d) {
  std::set<int> ap_bss;
  for (const auto& n : d.nodes) {
    if (n.obss_pd_dbm < kObssPdMin || n.obss_pd_dbm > kObssPdMax) {
      throw ConfigError("node " + std::to_string(n.node_id) + ": OBSS/PD out of range");
    }
    if (n.is_ap() && !ap_bss.insert(n.bss_id).second) {
      throw ConfigError("bss " + std::to_string(n.bss_id) + " has more than one AP");
    }
  }
  for (const auto& n : d.nodes) {
    if (!n.is_ap() && !ap_bss.contains(n.bss_id)) {
      throw ConfigError("STA " + std::to_string(n.node_id) + " references missing AP");
    }
  }
  if (!ap_bss.contains(kBssOfInterest)) throw ConfigError("deployment lacks BSS_A");
}

Deployment generate_deployment(const ScenarioProfile& profile, std::uint64_t seed,
                               const GeneratorOptions& opts, int deployment_id) {
  profile.validate();
  opts.validate();
  Rng rng(mix_seed(seed, 0x5ce7a210ULL));

  Deployment d;
  d.deployment_id = deployment_id;
  d.profile = profile.kind;
  d.map_width_m = opts.map_width_m;
  d.map_height_m = opts.map_height_m;
  d.rng_seed = seed;

  const int n_aps = static_cast<int>(rng.uniform_int(profile.ap_min, profile.ap_max));
  const double d_min = profile.min_ap_distance_m.value_or(0.0);

  std::vector<Position> aps;
  int attempts = 0;
  while (static_cast<int>(aps.size()) < n_aps) {
    if (++attempts > opts.max_attempts) {
      throw GenerationInfeasible("could not place " + std::to_string(n_aps) +
                                 " APs with minimum distance " + std::to_string(d_min) +
                                 " m after " + std::to_string(opts.max_attempts) +
                                 " attempts");
    }
    Position p{rng.uniform(0.0, opts.map_width_m), rng.uniform(0.0, opts.map_height_m),
               opts.z_m};
    const bool ok = std::all_of(aps.begin(), aps.end(),
                                [&](const Position& q) { return distance(p, q) >= d_min; });
    if (ok) aps.push_back(p);
  }

  std::vector<int> sta_counts;
  for (int i = 0; i < n_aps; ++i) {
    NodeRecord ap;
    ap.node_type = NodeType::kAp;
    ap.bss_id = i;
    ap.position = aps[static_cast<std::size_t>(i)];
    ap.primary_channel = opts.primary_channel;
    ap.tx_power_dbm = opts.tx_power_dbm;
    ap.obss_pd_dbm = kObssPdMin;
    d.nodes.push_back(ap);
    sta_counts.push_back(
        static_cast<int>(rng.uniform_int(profile.sta_per_ap_min, profile.sta_per_ap_max)));
  }
  place_stas(d, rng, opts, sta_counts);
  return d;
}

Deployment with_threshold(const Deployment& d, int tau) {
  if (tau < kObssPdMin || tau > kObssPdMax) {
    throw ConfigError("threshold " + std::to_string(tau) + " outside [-82, -62]");
  }
  Deployment v = d;
  for (auto& n : v.nodes) n.obss_pd_dbm = n.bss_id == kBssOfInterest ? tau : kObssPdMin;
  return v;
}

std::vector<Deployment> sweep_thresholds(const Deployment& d) {
  std::vector<Deployment> out;
  out.reserve(kThresholdCount);
  for (int tau = kObssPdMin; tau <= kObssPdMax; ++tau) out.push_back(with_threshold(d, tau));
  return out;
}

std::vector<Deployment> vary_sta_locations(const Deployment& d, int n_variations,
                                           std::uint64_t seed, const GeneratorOptions& opts) {
  if (n_variations < 1 || n_variations > 20) {
    throw ConfigError("n_variations must lie in [1, 20], got " + std::to_string(n_variations));
  }
  opts.validate();
  const int n_aps = d.ap_count();
  std::vector<int> sta_counts;
  for (int bss = 0; bss < n_aps; ++bss) {
    sta_counts.push_back(static_cast<int>(d.stas_of(bss).size()));
  }
  std::vector<Deployment> out;
  for (int v = 0; v < n_variations; ++v) {
    Rng rng(mix_seed(seed, 0x7a41a7ULL, static_cast<std::uint64_t>(d.deployment_id),
                     static_cast<std::uint64_t>(v)));
    Deployment variant = d;
    variant.variation_id = v;
    GeneratorOptions local = opts;
    local.z_m = d.ap_of(kBssOfInterest).position.z;
    place_stas(variant, rng, local, sta_counts);
    out.push_back(std::move(variant));
  }
  return out;
}

void write_nodes_csv(const Deployment& d, const std::filesystem::path& path,
                     const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  if (!comment.empty()) out << '#' << comment << '\n';
  out << csv::join(kNodesHeader) << '\n';
  for (const auto& n : d.nodes) {
    out << n.node_id << ',' << to_string(n.node_type) << ',' << n.bss_id << ','
        << csv::format_fixed(n.position.x, 6) << ',' << csv::format_fixed(n.position.y, 6)
        << ',' << csv::format_fixed(n.position.z, 6) << ',' << n.primary_channel << ','
        << csv::format_fixed(n.tx_power_dbm, 6) << ',' << n.obss_pd_dbm << '\n';
  }
}

Deployment read_nodes_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  std::vector<std::string> cells;
  if (!reader.next(cells)) throw ParseError("empty nodes file " + path.string(), 0);
  csv::expect_header(cells, kNodesHeader, reader.line());
  Deployment d;
  while (reader.next(cells)) {
    const auto line = reader.line();
    if (cells.size() != kNodesHeader.size()) throw ParseError("row arity mismatch", line);
    NodeRecord n;
    n.node_id = static_cast<int>(csv::parse_int(cells[0], line));
    if (cells[1] == "AP") {
      n.node_type = NodeType::kAp;
    } else if (cells[1] == "STA") {
      n.node_type = NodeType::kSta;
    } else {
      throw ParseError("unknown node_type '" + cells[1] + "'", line);
    }
    n.bss_id = static_cast<int>(csv::parse_int(cells[2], line));
    n.position = {csv::parse_double(cells[3], line), csv::parse_double(cells[4], line),
                  csv::parse_double(cells[5], line)};
    n.primary_channel = static_cast<int>(csv::parse_int(cells[6], line));
    n.tx_power_dbm = csv::parse_double(cells[7], line);
    n.obss_pd_dbm = static_cast<int>(csv::parse_int(cells[8], line));
    d.nodes.push_back(n);
  }
  validate(d);
  return d;
}

}  // namespace srfl::scenario
