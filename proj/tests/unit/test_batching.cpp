#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "bugforge/batching.hpp"
#include "bugforge/errors.hpp"
#include "doctest.h"

using namespace bugforge;

namespace {

// Every index appears exactly once and no batch exceeds the budget.
void check_partition(const std::vector<BatchSpec>& batches,
                     const std::vector<std::size_t>& lengths, std::size_t budget) {
  std::set<std::size_t> seen;
  for (const auto& b : batches) {
    REQUIRE(!b.indices.empty());
    std::size_t longest = 0;
    for (std::size_t idx : b.indices) {
      REQUIRE(idx < lengths.size());
      CHECK(seen.insert(idx).second);
      longest = std::max(longest, lengths[idx]);
    }
    CHECK(b.padded_len == longest);
    CHECK(b.indices.size() * b.padded_len <= budget);
  }
  CHECK(seen.size() == lengths.size());
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("uniform lengths pack to the exact batch arithmetic") {
  std::vector<std::size_t> lengths(100, 125);
  std::vector<BatchSpec> batches = make_length_batches(lengths, 12500);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].indices.size() == 100);
  CHECK(batches[0].padded_len == 125);
  check_partition(batches, lengths, 12500);
}

TEST_CASE("mixed lengths split into per-bucket batches") {
  std::vector<std::size_t> lengths;
  for (int i = 0; i < 10; ++i) lengths.push_back(240);
  for (int i = 0; i < 10; ++i) lengths.push_back(50);
  std::vector<BatchSpec> batches = make_length_batches(lengths, 12500);
  REQUIRE(batches.size() == 2);
  check_partition(batches, lengths, 12500);
  // Shorts and longs never share a batch under bucket width 64.
  for (const auto& b : batches) {
    std::set<std::size_t> ls;
    for (std::size_t idx : b.indices) ls.insert(lengths[idx]);
    CHECK(ls.size() == 1);
  }
}

TEST_CASE("a single sequence at the length cap fits") {
  std::vector<BatchSpec> batches = make_length_batches({250}, 12500);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].padded_len == 250);
}

TEST_CASE("sequences longer than the budget are an error") {
  CHECK_THROWS_AS(make_length_batches({501}, 500), ConfigError);
}

TEST_CASE("arbitrary length mixes partition without drops") {
  Rng rng(61);
  std::vector<std::size_t> lengths;
  for (int i = 0; i < 500; ++i) lengths.push_back(5 + rng.uniform_index(246));
  std::vector<BatchSpec> batches = make_length_batches(lengths, 2000);
  check_partition(batches, lengths, 2000);
}

TEST_CASE("batch construction is deterministic") {
  Rng rng(67);
  std::vector<std::size_t> lengths;
  for (int i = 0; i < 200; ++i) lengths.push_back(5 + rng.uniform_index(200));
  std::vector<BatchSpec> a = make_length_batches(lengths, 1500);
  std::vector<BatchSpec> b = make_length_batches(lengths, 1500);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].indices == b[i].indices);
}

TEST_CASE("same-seed shuffles agree, different seeds usually do not") {
  std::vector<std::size_t> lengths(60, 30);
  std::vector<BatchSpec> base = make_length_batches(lengths, 120);
  REQUIRE(base.size() > 2);

  std::vector<BatchSpec> x = base, y = base, z = base;
  Rng rx(71), ry(71), rz(72);
  shuffle_batches(x, rx);
  shuffle_batches(y, ry);
  shuffle_batches(z, rz);
  bool xy_equal = true, xz_equal = true;
  for (std::size_t i = 0; i < base.size(); ++i) {
    xy_equal = xy_equal && x[i].indices == y[i].indices;
    xz_equal = xz_equal && x[i].indices == z[i].indices;
  }
  CHECK(xy_equal);
  CHECK(!xz_equal);
}

TEST_CASE("routing mutates half of the eligible items in expectation") {
  Rng rng(73);
  const int n = 100000;
  std::vector<bool> can(n, true);
  RouteSplit split = route_fifty_fifty(can, rng);
  CHECK(split.keep_real.size() + split.to_mutate.size() == static_cast<std::size_t>(n));
  CHECK(std::abs(split.to_mutate.size() / double(n) - 0.5) < 0.005);
}

TEST_CASE("items without targets always stay real, and the rest rebalance") {
  Rng rng(79);
  // Half the items are ineligible; the mutate share must come out of the
  // eligible half, still aiming at half of the whole batch.
  const int n = 100000;
  std::vector<bool> can(n, false);
  for (int i = 0; i < n; i += 2) can[i] = true;
  RouteSplit split = route_fifty_fifty(can, rng);
  for (std::size_t idx : split.to_mutate) CHECK(can[idx]);
  // All eligible items should be routed to mutate: p = min(1, n / 2m) = 1.
  CHECK(split.to_mutate.size() == static_cast<std::size_t>(n / 2));
}

TEST_CASE("routing a batch with no eligible items keeps everything real") {
  Rng rng(83);
  RouteSplit split = route_fifty_fifty(std::vector<bool>(10, false), rng);
  CHECK(split.to_mutate.empty());
  CHECK(split.keep_real.size() == 10);
}

TEST_CASE("routing is reproducible for a fixed seed") {
  std::vector<bool> can = {true, false, true, true, false, true, true, true};
  Rng a(89), b(89);
  RouteSplit ra = route_fifty_fifty(can, a);
  RouteSplit rb = route_fifty_fifty(can, b);
  CHECK(ra.keep_real == rb.keep_real);
  CHECK(ra.to_mutate == rb.to_mutate);
}

TEST_SUITE_END();
