#pragma once

#include <cstdint>
#include <random>

#include "stosim/vec3.hpp"

namespace stosim {

/// Independent, reproducible random stream identified by (master_seed, stream_id).
///
/// Streams with different ids never share state; the same pair always yields
/// the same sequence for a given standard library.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  double gaussian() { return normal_(engine_); }
  Vec3 gaussian3() {
    const double x = gaussian();
    const double y = gaussian();
    const double z = gaussian();
    return {x, y, z};
  }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace stosim
