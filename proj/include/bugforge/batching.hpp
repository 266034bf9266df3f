#pragma once

#include <cstddef>
#include <vector>

#include "bugforge/rng.hpp"

namespace bugforge {

struct BatchSpec {
  std::vector<std::size_t> indices;  // into the caller's sequence list
  std::size_t padded_len = 0;        // longest member; cost = count * padded_len
};

// Token-budget batching: sequences are bucketed by length (bucket_width wide)
// so similar lengths pad together, then packed greedily in ascending length
// order under count * padded_len <= token_budget. Every input index appears in
// exactly one batch; a sequence longer than the budget itself is an error.
// Deterministic for given inputs.
std::vector<BatchSpec> make_length_batches(const std::vector<std::size_t>& lengths,
                                           std::size_t token_budget,
                                           std::size_t bucket_width = 64);

// Seeded shuffle of batch order; composition of each batch is untouched.
void shuffle_batches(std::vector<BatchSpec>& batches, Rng& rng);

struct RouteSplit {
  std::vector<std::size_t> keep_real;  // trained as-is this step
  std::vector<std::size_t> to_mutate;  // handed to the mutator
};

// Real-vs-mutate routing of an incoming batch (the non-pipelined scheme).
// Items that cannot be mutated always stay real; the coin on the remaining
// items is biased to min(1, n/2m) so the expected mutate share of the whole
// batch stays one half whenever the m mutable items allow it. Coins are drawn
// for mutable items only. Both lists preserve the input order.
RouteSplit route_fifty_fifty(const std::vector<bool>& can_mutate, Rng& rng);

}  // namespace bugforge
