// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <chrono>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tilescore/matching.hpp"

namespace tilescore {
namespace {

void expect_same_as_oracle(const std::vector<BBox>& as, const std::vector<BBox>& ps, double t) {
  const MatchResult m = greedy_match(as, ps, t);
  const auto trace = testing::brute_force_greedy(as, ps, t);
  ASSERT_EQ(m.pairs.size(), trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    ASSERT_EQ(m.pairs[k].annotation, trace[k].a);
    ASSERT_EQ(m.pairs[k].detection, trace[k].p);
    ASSERT_EQ(m.pairs[k].jaccard, trace[k].j);
  }
}

TEST(JaccardMatrix, Examples) {
  const std::vector<BBox> one{BBox(0, 0, 10, 10)};
  const auto same = jaccard_matrix(one, one);
  ASSERT_EQ(same.rows(), 1u);
  EXPECT_EQ(same(0, 0), 1.0);

  const std::vector<BBox> far{BBox(50, 50, 60, 60), BBox(70, 0, 80, 10)};
  const auto disjoint = jaccard_matrix(one, far);
  EXPECT_EQ(disjoint.cols(), 2u);
  for (const double v : disjoint.values()) EXPECT_EQ(v, 0.0);

  const std::vector<BBox> shifted{BBox(5, 0, 15, 10)};
  EXPECT_NEAR(jaccard_matrix(one, shifted)(0, 0), 1.0 / 3.0, 1e-12);

  const auto empty = jaccard_matrix({}, one);
  EXPECT_EQ(empty.rows(), 0u);
  EXPECT_TRUE(empty.values().empty());
}

TEST(GreedyMatch, TwoIndependentPairs) {
  const std::vector<BBox> as{BBox(0, 0, 10, 10), BBox(20, 0, 30, 10)};
  const std::vector<BBox> ps{BBox(1, 0, 11, 10), BBox(20, 0, 28, 10)};
  const MatchResult m = greedy_match(as, ps);
  ASSERT_EQ(m.pairs.size(), 2u);
  // 9/11 is taken before 0.8.
  EXPECT_EQ(m.pairs[0], (MatchPair{0, 0, 90.0 / 110.0}));
  EXPECT_EQ(m.pairs[1], (MatchPair{1, 1, 0.8}));
  EXPECT_TRUE(m.unmatched_annotations.empty());
  EXPECT_TRUE(m.unmatched_detections.empty());
}

TEST(GreedyMatch, BestCandidateWinsRestIsFalsePositive) {
  const std::vector<BBox> as{BBox(0, 0, 10, 10)};
  const std::vector<BBox> ps{BBox(0, 0, 10, 10), BBox(2, 0, 12, 10)};
  ASSERT_NEAR(jaccard(as[0], ps[1]), 8.0 / 12.0, 1e-15);
  const MatchResult m = greedy_match(as, ps);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].detection, 0u);
  EXPECT_EQ(m.unmatched_detections, (std::vector<std::size_t>{1}));
}

TEST(GreedyMatch, ThresholdIsStrict) {
  const std::vector<BBox> as{BBox(0, 0, 10, 10)};
  const std::vector<BBox> ps{BBox(6, 0, 16, 10)};
  ASSERT_EQ(jaccard(as[0], ps[0]), 0.25);
  const MatchResult m = greedy_match(as, ps, 0.25);
  EXPECT_TRUE(m.pairs.empty());
  EXPECT_EQ(m.unmatched_annotations, (std::vector<std::size_t>{0}));
  EXPECT_EQ(m.unmatched_detections, (std::vector<std::size_t>{0}));
}

TEST(GreedyMatch, TiesResolveByLowestIds) {
  // Both detections are identical copies of the annotation.
  const std::vector<BBox> as{BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)};
  const std::vector<BBox> ps{BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)};
  const MatchResult m = greedy_match(as, ps);
  ASSERT_EQ(m.pairs.size(), 2u);
  EXPECT_EQ(m.pairs[0], (MatchPair{0, 0, 1.0}));
  EXPECT_EQ(m.pairs[1], (MatchPair{1, 1, 1.0}));
}

TEST(GreedyMatch, EmptySides) {
  const std::vector<BBox> as{BBox(0, 0, 10, 10)};
  const MatchResult m = greedy_match(as, {});
  EXPECT_TRUE(m.pairs.empty());
  EXPECT_EQ(m.unmatched_annotations.size(), 1u);
  EXPECT_TRUE(greedy_match({}, as).unmatched_annotations.empty());
  EXPECT_THROW(greedy_match(as, as, 1.5), ConfigError);
}

TEST(GreedyMatchProperty, AgreesWithBruteForceTrace) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<BBox> as, ps;
    const std::size_t n_a = rng() % 7, n_p = rng() % 7;
    for (std::size_t i = 0; i < n_a; ++i) as.push_back(testing::random_box(rng, 40, 4, 20));
    for (std::size_t j = 0; j < n_p; ++j) ps.push_back(testing::random_box(rng, 40, 4, 20));
    const double t = static_cast<double>(rng() % 8) / 10.0;
    expect_same_as_oracle(as, ps, t);
  }
}

TEST(GreedyMatchProperty, SparseSweepMatchesDenseOracleOnLargeScenes) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<BBox> as, ps;
    for (int i = 0; i < 150; ++i) as.push_back(testing::random_real_box(rng, 600.0, 5.0, 80.0));
    for (int j = 0; j < 170; ++j) ps.push_back(testing::random_real_box(rng, 600.0, 5.0, 80.0));
    expect_same_as_oracle(as, ps, 0.1 * trial);
  }
}

TEST(GreedyMatchProperty, Invariants) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<BBox> as, ps;
    for (std::size_t i = 0, n = rng() % 12; i < n; ++i) as.push_back(testing::random_real_box(rng, 80.0));
    for (std::size_t j = 0, n = rng() % 12; j < n; ++j) ps.push_back(testing::random_real_box(rng, 80.0));
    const double t = static_cast<double>(rng() % 10) / 10.0;
    const MatchResult m = greedy_match(as, ps, t);

    std::vector<int> a_seen(as.size(), 0), p_seen(ps.size(), 0);
    for (const auto& p : m.pairs) {
      ASSERT_GT(p.jaccard, t);
      ++a_seen[p.annotation];
      ++p_seen[p.detection];
    }
    for (const auto i : m.unmatched_annotations) ++a_seen[i];
    for (const auto j : m.unmatched_detections) ++p_seen[j];
    for (const int s : a_seen) ASSERT_EQ(s, 1);
    for (const int s : p_seen) ASSERT_EQ(s, 1);

    // Raising the threshold never adds pairs.
    ASSERT_LE(greedy_match(as, ps, std::min(1.0, t + 0.15)).pairs.size(), m.pairs.size());

    // Swapping roles transposes the pair list.
    const MatchResult swapped = greedy_match(ps, as, t);
    ASSERT_EQ(swapped.pairs.size(), m.pairs.size());
    for (std::size_t k = 0; k < m.pairs.size(); ++k) {
      ASSERT_EQ(swapped.pairs[k].annotation, m.pairs[k].detection);
      ASSERT_EQ(swapped.pairs[k].detection, m.pairs[k].annotation);
    }
  }
}

TEST(GreedyMatchProperty, GreedyNeverExceedsOptimalCount) {
  std::mt19937_64 rng(4321);
  int gaps = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<BBox> as, ps;
    for (int i = 0; i < 5; ++i) as.push_back(testing::random_box(rng, 30, 6, 18));
    for (int j = 0; j < 5; ++j) ps.push_back(testing::random_box(rng, 30, 6, 18));
    const auto greedy = greedy_match(as, ps, 0.25).pairs.size();
    const auto best = testing::brute_force_max_pairs(as, ps, 0.25);
    ASSERT_LE(greedy, best);
    gaps += greedy < best ? 1 : 0;
  }
  RecordProperty("instances_below_optimal", gaps);
}

TEST(GreedyMatch, TwentyByTwentyIsFast) {
  std::mt19937_64 rng(5);
  std::vector<BBox> as, ps;
  for (int i = 0; i < 20; ++i) as.push_back(testing::random_real_box(rng, 500.0, 10.0, 80.0));
  for (int j = 0; j < 20; ++j) ps.push_back(testing::random_real_box(rng, 500.0, 10.0, 80.0));
  const auto start = std::chrono::steady_clock::now();
  for (int rep = 0; rep < 100; ++rep) greedy_match(as, ps);
  const auto per_call = (std::chrono::steady_clock::now() - start) / 100;
  EXPECT_LT(per_call, std::chrono::milliseconds(1));
}

}  // namespace
}  // namespace tilescore
