#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace srfl::scenario {

inline constexpr int kObssPdMin = -82;
inline constexpr int kObssPdMax = -62;
inline constexpr int kThresholdCount = kObssPdMax - kObssPdMin + 1;  // 21
// BSS of interest; always the first generated BSS.
inline constexpr int kBssOfInterest = 0;

enum class NodeType { kAp, kSta };
enum class ProfileKind { kTraining1, kTraining2, kTraining3, kTest };

struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Position&) const = default;
};

double distance(const Position& a, const Position& b) noexcept;

struct NodeRecord {
  int node_id = 0;
  NodeType node_type = NodeType::kAp;
  int bss_id = 0;
  Position position;
  int primary_channel = 0;
  double tx_power_dbm = 21.0;
  int obss_pd_dbm = kObssPdMin;

  bool is_ap() const noexcept { return node_type == NodeType::kAp; }
  bool operator==(const NodeRecord&) const = default;
};

struct ScenarioProfile {
  std::string name;
  ProfileKind kind = ProfileKind::kTraining1;
  int ap_min = 2;
  int ap_max = 6;
  int sta_per_ap_min = 1;
  int sta_per_ap_max = 1;
  std::optional<double> min_ap_distance_m;
  int location_variations = 1;

  void validate() const;
};

// Built-in profiles mirroring the dataset's scenario table.
ScenarioProfile training1();
ScenarioProfile training2();
ScenarioProfile training3();
ScenarioProfile test_profile();
ScenarioProfile profile_by_name(std::string_view name);
std::string_view to_string(ProfileKind kind);
std::string_view to_string(NodeType type);

// Knobs not covered by the profile table.
struct GeneratorOptions {
  double map_width_m = 80.0;
  double map_height_m = 60.0;
  double association_radius_m = 15.0;
  double z_m = 0.0;
  int max_attempts = 10000;
  double tx_power_dbm = 21.0;
  int primary_channel = 0;

  void validate() const;
};

struct Deployment {
  int deployment_id = 0;
  int variation_id = 0;
  ProfileKind profile = ProfileKind::kTraining1;
  std::vector<NodeRecord> nodes;
  double map_width_m = 0.0;
  double map_height_m = 0.0;
  std::uint64_t rng_seed = 0;

  int ap_count() const;
  // STAs associated with the given BSS, in node order.
  std::vector<const NodeRecord*> stas_of(int bss_id) const;
  const NodeRecord& ap_of(int bss_id) const;
  // Threshold currently configured on the BSS of interest.
  int tau() const;

  bool operator==(const Deployment&) const = default;
};

// Checks the structural invariants (one AP per BSS, STAs reference existing
// APs, thresholds in the legal range). Throws ConfigError on violation.
void validate(const Deployment& d);

Deployment generate_deployment(const ScenarioProfile& profile, std::uint64_t seed,
                               const GeneratorOptions& opts = {}, int deployment_id = 0);

// One variant per threshold value, BSS_A's AP and STAs carrying tau; every
// other BSS stays at the legacy -82 dBm.
std::vector<Deployment> sweep_thresholds(const Deployment& d);
Deployment with_threshold(const Deployment& d, int tau);

// Re-draws STA positions around fixed APs. n_variations must be in [1, 20].
std::vector<Deployment> vary_sta_locations(const Deployment& d, int n_variations,
                                           std::uint64_t seed,
                                           const GeneratorOptions& opts = {});

void write_nodes_csv(const Deployment& d, const std::filesystem::path& path,
                     const std::string& comment = {});
// Only the node list is stored on disk; identifiers and map size are left for
// the caller to fill in from the dataset manifest.
Deployment read_nodes_csv(const std::filesystem::path& path);

}  // namespace srfl::scenario
