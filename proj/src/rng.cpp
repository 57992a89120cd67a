#include "hlsgo/rng.hpp"

#include <cmath>
#include <cstring>

namespace hlsgo {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0, 1] keeps the log finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int Rng::uniform_int(int n) {
  return static_cast<int>(uniform01() * static_cast<double>(n)) % n;
}

void Rng::serialize(std::vector<std::uint8_t>& out) const {
  std::size_t base = out.size();
  out.resize(base + kSerializedSize);
  std::uint8_t* p = out.data() + base;
  std::memcpy(p, state_.data(), 32);
  p[32] = has_spare_ ? 1 : 0;
  std::memcpy(p + 33, &spare_, 8);
}

std::size_t Rng::deserialize(const std::uint8_t* data, std::size_t size) {
  if (size < kSerializedSize) return 0;
  std::memcpy(state_.data(), data, 32);
  has_spare_ = data[32] != 0;
  std::memcpy(&spare_, data + 33, 8);
  return kSerializedSize;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = fnv1a64(tag.data(), tag.size());
  std::uint64_t x = base ^ (h + 0x9e3779b97f4a7c15ULL);
  (void)splitmix64(x);
  x ^= a * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
  (void)splitmix64(x);
  x ^= b * 0xaf251af3b0f025b5ULL + 0x9e3779b97f4a7c15ULL;
  return splitmix64(x);
}

}  // namespace hlsgo
