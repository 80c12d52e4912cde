#include <doctest.h>

#include "msfactor/errors.hpp"
#include "msfactor/partition.hpp"
#include "test_support.hpp"

using namespace msf;

namespace {

RecursivePartition two_level(NodeSet a1, NodeSet a2, NodeSet b1, NodeSet b2) {
  return RecursivePartition(4, {{1, a1, a2}, {2, b1, b2}});
}

}  // namespace

TEST_CASE("cells_at_level intersects the first j splits") {
  const auto rp = two_level({0, 1}, {2, 3}, {0, 2}, {1, 3});
  const auto cells = rp.cells_at_level(2);
  CHECK(cells.size() == 4);
  CHECK(cells.at("00") == NodeSet{0});
  CHECK(cells.at("01") == NodeSet{1});
  CHECK(cells.at("10") == NodeSet{2});
  CHECK(cells.at("11") == NodeSet{3});
  CHECK(rp.cells_at_level(1).at("0") == NodeSet{0, 1});
}

TEST_CASE("repeated split leaves empty intersections out") {
  const auto rp = two_level({0, 1}, {2, 3}, {0, 1}, {2, 3});
  const auto cells = rp.cells_at_level(2);
  CHECK(cells.size() == 2);
  CHECK(cells.at("00") == NodeSet{0, 1});
  CHECK(cells.at("11") == NodeSet{2, 3});
}

TEST_CASE("cells match brute-force enumeration at n=128, k=3") {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rp = random_partition(128, 3, rng);
    const auto cells = rp.cells_at_level(3);
    CHECK(cells == testing::brute_force_cells(rp, 3));
    std::size_t total = 0;
    for (const auto& [label, nodes] : cells) total += nodes.size();
    CHECK(total == 128);
    CHECK(cells.size() <= 8);
  }
}

TEST_CASE("cells_at_level rejects levels out of range") {
  const auto rp = two_level({0, 1}, {2, 3}, {0, 2}, {1, 3});
  CHECK_THROWS_AS(rp.cells_at_level(0), RangeError);
  CHECK_THROWS_AS(rp.cells_at_level(3), RangeError);
}

TEST_CASE("constructor rejects overlapping or incomplete sides") {
  CHECK_THROWS_AS(RecursivePartition(3, {{1, {0, 1}, {1, 2}}}), DomainError);
  CHECK_THROWS_AS(RecursivePartition(3, {{1, {0}, {1}}}), DomainError);
  CHECK_THROWS_AS(RecursivePartition(3, {{1, {0, 5}, {1, 2}}}), RangeError);
}

TEST_CASE("random_partition") {
  SUBCASE("two nodes give the only non-empty split") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng = make_rng(seed);
      const auto rp = random_partition(2, 1, rng);
      CHECK(rp.level(1).side1.size() == 1);
      CHECK(rp.level(1).side2.size() == 1);
    }
  }
  SUBCASE("deterministic given seed") {
    Rng r1 = make_rng(5), r2 = make_rng(5);
    CHECK(random_partition(16, 4, r1) == random_partition(16, 4, r2));
  }
  SUBCASE("every level has two non-empty sides") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng = make_rng(seed);
      const auto rp = random_partition(64, 6, rng);
      for (int j = 1; j <= 6; ++j) {
        CHECK_FALSE(rp.level(j).side1.empty());
        CHECK_FALSE(rp.level(j).side2.empty());
      }
    }
  }
  SUBCASE("n < k") {
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(random_partition(2, 3, rng), DimensionError);
  }
}

TEST_CASE("cells refine across levels and stay within min(n, 2^j)") {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 4 + trial, k = 1 + trial % 6;
    const auto rp = random_partition(n, k, rng);
    std::size_t previous = 1;
    for (int j = 1; j <= k; ++j) {
      const auto cells = rp.cells_at_level(j);
      CHECK(cells.size() >= previous);
      CHECK(cells.size() <= std::min<std::size_t>(n, std::size_t{1} << j));
      previous = cells.size();
      if (j > 1) {
        const auto parents = rp.cells_at_level(j - 1);
        for (const auto& [label, nodes] : cells) {
          const auto& parent = parents.at(label.substr(0, j - 1));
          for (int i : nodes) CHECK(std::binary_search(parent.begin(), parent.end(), i));
        }
      }
    }
  }
}

TEST_CASE("partition_distance") {
  CHECK(partition_distance(std::vector<int>{0, 0, 1, 1}, std::vector<int>{1, 1, 0, 0}) == 0.0);
  CHECK(partition_distance(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(partition_distance(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}) == doctest::Approx(0.5));
  CHECK(partition_distance(std::vector<int>{0, 1, 2, 2}, std::vector<int>{7, 5, 3, 3}) == 0.0);
  CHECK(partition_distance(std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(partition_distance(std::vector<int>{0, 1}, std::vector<int>{0}), DimensionError);
}

TEST_CASE("partition JSON round trip") {
  Rng rng = make_rng(9);
  const auto rp = random_partition(10, 3, rng);
  const nlohmann::json j = rp;
  CHECK(j.at("levels").size() == 3);
  CHECK(j.get<RecursivePartition>() == rp);
}
