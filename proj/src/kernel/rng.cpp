#include "dms/kernel/rng.hpp"

namespace dms {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::string_view text, std::uint64_t hash = kFnvOffset) {
  for (unsigned char c : text) {
    hash ^= c;
    hash *= kFnvPrime;
  }
  return hash;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t master_seed, std::string_view lp_id, std::string_view block_id) {
  // The separator byte keeps ("ab","c") and ("a","bc") apart.
  std::uint64_t h = fnv1a(lp_id);
  h = fnv1a(std::string_view("\x1f", 1), h);
  h = fnv1a(block_id, h);
  return splitmix64(splitmix64(master_seed) ^ h);
}

}  // namespace dms
