#include <gtest/gtest.h>

#include <set>

#include "coopgait/graph.hpp"
#include "oracles.hpp"

using namespace coopgait;

TEST(ProductGraph, EightCycleCounts) {
  const ProductGraph pg = strong_product(plain_cycle(8));
  EXPECT_EQ(pg.vertices.size(), 64u);
  EXPECT_EQ(pg.edges.size(), 192u);
}

TEST(ProductGraph, MatchesDefinitionOnSmallCycles) {
  for (int n = 2; n <= 6; ++n) {
    const GaitGraph g = plain_cycle(n);
    const ProductGraph pg = strong_product(g);
    std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> got;
    for (const auto& e : pg.edges) got.insert({{e.from.v, e.from.w}, {e.to.v, e.to.w}});
    EXPECT_EQ(got, oracle::brute_product_edges(g)) << "n=" << n;
    EXPECT_EQ(pg.vertices.size(), static_cast<size_t>(n * n));
  }
  EXPECT_EQ(strong_product(plain_cycle(2)).edges.size(), 12u);
}

TEST(ProductGraph, EdgeConditions) {
  const GaitGraph g = plain_cycle(8);
  EXPECT_EQ(classify_edge(g, {2, 5}, {2, 6}), 1);
  EXPECT_EQ(classify_edge(g, {2, 5}, {3, 5}), 2);
  EXPECT_EQ(classify_edge(g, {7, 7}, {0, 0}), 3);
  EXPECT_EQ(classify_edge(g, {2, 5}, {2, 5}), 0);
  EXPECT_EQ(classify_edge(g, {2, 5}, {4, 5}), 0);
  const ProductGraph pg = strong_product(g);
  int diagonal = 0;
  for (const auto& e : pg.edges) {
    EXPECT_EQ(e.condition, classify_edge(g, e.from, e.to));
    if (e.from.v == e.from.w && e.to.v == e.to.w) ++diagonal;
  }
  EXPECT_EQ(diagonal, 8);
  EXPECT_EQ(pg.index({3, 4}), 3 * 8 + 4);
}

TEST(GaitGraphTest, RejectsNonCycles) {
  std::vector<DomainSpec> d(3);
  std::vector<ResetKind> r(3, ResetKind::kIdentity);
  EXPECT_THROW(GaitGraph(d, {1, 0, 2}, r), std::invalid_argument);
  EXPECT_THROW(GaitGraph(d, {1, 1, 0}, r), std::invalid_argument);
  EXPECT_THROW(GaitGraph(d, {1, 2, 5}, r), std::invalid_argument);
  EXPECT_NO_THROW(GaitGraph(d, {2, 0, 1}, r));
  const GaitGraph g(d, {2, 0, 1}, r);
  EXPECT_EQ(g.cycle_position(2), 1);
  EXPECT_EQ(g.cycle_position(1), 2);
}
