#pragma once
// Counter-based deterministic RNG. std::uniform_*_distribution is not
// bit-stable across standard libraries, so all randomness in the project
// goes through this header.

#include <algorithm>
#include <cstdint>
#include <vector>

namespace simtlab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // decorrelate nearby seeds
    splitmix64(state_);
  }

  // Derive an independent stream, e.g. per (seed, sentence index).
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed;
    splitmix64(s);
    s ^= 0x632be59bd9b4e019ULL * (index + 1);
    return Rng(s);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, n). Rejection-free modulo bias is negligible for desk-scale n.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  int next_int(int lo, int hi) {  // inclusive range
    return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  double next_double() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = next_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [lo, hi], sorted ascending.
  std::vector<int> sample_without_replacement(int lo, int hi, int k);

 private:
  std::uint64_t state_;
};

inline std::vector<int> Rng::sample_without_replacement(int lo, int hi, int k) {
  std::vector<int> pool;
  pool.reserve(hi - lo + 1);
  for (int v = lo; v <= hi; ++v) pool.push_back(v);
  shuffle(pool);
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace simtlab
