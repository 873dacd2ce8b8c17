#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "srfl/random.hpp"
#include "srfl/scenario.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("srfl_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct ToyBss {
  srfl::scenario::Position ap;
  std::vector<srfl::scenario::Position> stas;
};

// Hand-placed deployment, BSS ids in the given order, all at 21 dBm.
inline srfl::scenario::Deployment make_toy(const std::vector<ToyBss>& bsses, int tau = -82) {
  using namespace srfl::scenario;
  Deployment d;
  d.map_width_m = 80.0;
  d.map_height_m = 60.0;
  int id = 0;
  for (std::size_t b = 0; b < bsses.size(); ++b) {
    NodeRecord ap;
    ap.node_id = id++;
    ap.node_type = NodeType::kAp;
    ap.bss_id = static_cast<int>(b);
    ap.position = bsses[b].ap;
    ap.obss_pd_dbm = b == 0 ? tau : kObssPdMin;
    d.nodes.push_back(ap);
    for (const auto& p : bsses[b].stas) {
      NodeRecord sta = ap;
      sta.node_id = id++;
      sta.node_type = NodeType::kSta;
      sta.position = p;
      d.nodes.push_back(sta);
    }
  }
  return d;
}

inline std::vector<double> random_vector(srfl::Rng& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace testing
