#ifndef HLSGO_RNG_HPP
#define HLSGO_RNG_HPP

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace hlsgo {

// xoshiro256++ generator with a Box-Muller gaussian on top.
// The full state (including the cached gaussian spare) serializes, so a
// restored generator continues the exact same stream.
class Rng {
 public:
  Rng() : Rng(0x9e3779b97f4a7c15ULL) {}
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform01();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal.
  double normal();
  // Uniform integer in [0, n), n >= 1.
  int uniform_int(int n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

  void serialize(std::vector<std::uint8_t>& out) const;
  // Returns bytes consumed.
  std::size_t deserialize(const std::uint8_t* data, std::size_t size);

  static constexpr std::size_t kSerializedSize = 4 * 8 + 1 + 8;

  bool operator==(const Rng& other) const {
    return state_ == other.state_ && has_spare_ == other.has_spare_ &&
           spare_ == other.spare_;
  }

 private:
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Deterministic seed derivation: mixes a base seed with a tag and indices so
// independent components get independent streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

// FNV-1a over a byte buffer; used for content checksums.
std::uint64_t fnv1a64(const void* data, std::size_t size);

}  // namespace hlsgo

#endif  // HLSGO_RNG_HPP
