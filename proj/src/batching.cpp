#include "bugforge/batching.hpp"

#include <algorithm>

#include "bugforge/errors.hpp"

namespace bugforge {

std::vector<BatchSpec> make_length_batches(const std::vector<std::size_t>& lengths,
                                           std::size_t token_budget, std::size_t bucket_width) {
  if (token_budget == 0 || bucket_width == 0) {
    throw ConfigError("make_length_batches: budget and bucket width must be positive");
  }
  std::vector<std::size_t> order(lengths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lengths[a] != lengths[b] ? lengths[a] < lengths[b] : a < b;
  });

  std::vector<BatchSpec> batches;
  BatchSpec current;
  std::size_t current_bucket = 0;
  auto flush = [&] {
    if (!current.indices.empty()) {
      batches.push_back(std::move(current));
      current = BatchSpec{};
    }
  };
  for (std::size_t idx : order) {
    const std::size_t len = lengths[idx];
    if (len == 0) throw ConfigError("make_length_batches: zero-length sequence");
    if (len > token_budget) {
      throw ConfigError("make_length_batches: sequence of length " + std::to_string(len) +
                        " exceeds the token budget " + std::to_string(token_budget));
    }
    const std::size_t bucket = (len - 1) / bucket_width;
    // Ascending order means `len` is the padded length if idx joins.
    const bool fits = (current.indices.size() + 1) * len <= token_budget;
    if (!current.indices.empty() && (bucket != current_bucket || !fits)) flush();
    current_bucket = bucket;
    current.indices.push_back(idx);
    current.padded_len = len;
  }
  flush();
  return batches;
}

void shuffle_batches(std::vector<BatchSpec>& batches, Rng& rng) {
  for (std::size_t i = batches.size(); i > 1; --i) {
    std::swap(batches[i - 1], batches[rng.uniform_index(i)]);
  }
}

RouteSplit route_fifty_fifty(const std::vector<bool>& can_mutate, Rng& rng) {
  const std::size_t n = can_mutate.size();
  std::size_t mutable_count = 0;
  for (bool flag : can_mutate) mutable_count += flag ? 1 : 0;
  const double p =
      mutable_count == 0
          ? 0.0
          : std::min(1.0, 0.5 * static_cast<double>(n) / static_cast<double>(mutable_count));
  RouteSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    if (can_mutate[i] && rng.uniform_real() < p) {
      split.to_mutate.push_back(i);
    } else {
      split.keep_real.push_back(i);
    }
  }
  return split;
}

}  // namespace bugforge
