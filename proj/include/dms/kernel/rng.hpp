#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dms {

// Seed for the variate stream of one block. Depends only on the master seed
// and the (LP, block) identity, so moving a block between kernels (sequential
// flattening vs one kernel per LP) never changes the numbers it draws.
std::uint64_t stream_seed(std::uint64_t master_seed, std::string_view lp_id, std::string_view block_id);

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t master_seed, std::string_view lp_id, std::string_view block_id)
      : engine_(stream_seed(master_seed, lp_id, block_id)) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dms
