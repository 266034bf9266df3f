#include "bugforge/rng.hpp"

#include <sstream>

#include "bugforge/errors.hpp"

namespace bugforge {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, const std::string& name) {
  return splitmix64(root ^ fnv1a(name));
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ConfigError("uniform_index: n must be > 0");
  // Rejection sampling over the largest multiple of n that fits in 64 bits.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % n);
}

double Rng::uniform_real() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("categorical: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("categorical: weights must sum to a positive value");
  const double u = uniform_real() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = i;
    acc += weights[i];
    if (u < acc && weights[i] > 0.0) return i;
  }
  // Floating-point slack at the top of the CDF: return the last usable index.
  return last_positive;
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::load_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (is.fail()) throw ParseError("bad rng state string");
}

Rng& RngSuite::stream(const std::string& name) {
  auto it = streams_.find(name);
  if (it == streams_.end()) {
    it = streams_.emplace(name, Rng(derive_seed(root_, name))).first;
  }
  return it->second;
}

std::map<std::string, std::string> RngSuite::save() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, rng] : streams_) out[name] = rng.save_state();
  return out;
}

void RngSuite::load(std::uint64_t root, const std::map<std::string, std::string>& states) {
  root_ = root;
  streams_.clear();
  for (const auto& [name, state] : states) {
    Rng r;
    r.load_state(state);
    streams_.emplace(name, std::move(r));
  }
}

}  // namespace bugforge
