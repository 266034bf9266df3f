#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace bugforge {

// Derives a stream seed from a root seed and a stream name. Stable across
// platforms and runs: FNV-1a over the name, mixed with the root via splitmix64.
std::uint64_t derive_seed(std::uint64_t root, const std::string& name);

// A seeded engine plus the hand-rolled samplers the pipeline relies on.
// Sampling goes through these helpers only, so draw sequences are identical
// across platforms for a given seed.
class Rng {
 public:
  Rng() : engine_(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n) via rejection sampling. n must be > 0.
  std::size_t uniform_index(std::size_t n);

  // Double in [0, 1) built from 53 random bits.
  double uniform_real();

  // Index drawn proportionally to weights (inverse-CDF walk). Weights must be
  // non-negative with a positive sum; zero-weight entries are never returned.
  std::size_t categorical(const std::vector<double>& weights);

  // Engine state as text, for checkpoints.
  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

// Named RNG streams hanging off one root seed. Separate streams mean that e.g.
// enabling dropout cannot shift which mutation targets get sampled under the
// same seed. Streams are created lazily; the derived seed depends only on
// (root, name), never on creation order.
class RngSuite {
 public:
  RngSuite() : root_(0) {}
  explicit RngSuite(std::uint64_t root_seed) : root_(root_seed) {}

  Rng& stream(const std::string& name);
  std::uint64_t root() const { return root_; }

  std::map<std::string, std::string> save() const;
  void load(std::uint64_t root, const std::map<std::string, std::string>& states);

 private:
  std::uint64_t root_;
  std::map<std::string, Rng> streams_;
};

}  // namespace bugforge
