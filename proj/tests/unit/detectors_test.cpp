/*
 * Copyright 2026 The dqaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "dqaudit/detectors/image.hpp"
#include "dqaudit/detectors/labels.hpp"
#include "dqaudit/detectors/outliers.hpp"
#include "dqaudit/eval/ranking.hpp"
#include "test_util.hpp"

namespace dqaudit::detectors {
namespace {

using testing::KindOf;

std::vector<std::string> Ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(1000 + i));
  return ids;
}

// Gaussian cluster plus a fraction of points at radius >= 10 sigma.
struct Planted {
  EmbeddingMatrix x;
  std::vector<int> outlier;
};

Planted PlantedOutliers(std::size_t n, std::size_t d, double fraction, std::uint64_t seed) {
  Rng rng(seed);
  const auto n_out = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  std::vector<double> v(n * d);
  std::vector<int> label(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= n - n_out) {
      label[i] = 1;
      double norm = 0;
      for (std::size_t k = 0; k < d; ++k) norm += (v[i * d + k] = rng.Normal()) * v[i * d + k];
      const double r = rng.Uniform(10.0, 12.0) / std::sqrt(norm);
      for (std::size_t k = 0; k < d; ++k) v[i * d + k] *= r;
    } else {
      for (std::size_t k = 0; k < d; ++k) v[i * d + k] = rng.Normal();
    }
  }
  return {EmbeddingMatrix(Ids(n), d, v), label};
}

double AurocOf(const ScoreVector& s, const std::vector<int>& labels) {
  return eval::Auroc(LabeledRanking::FromScores(s.scores, labels));
}

std::size_t ArgMax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

bool UniqueMax(const std::vector<double>& v, std::size_t at) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (i != at && v[i] >= v[at]) return false;
  return true;
}

EmbeddingMatrix ClusterPlusFar(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v;
  for (int i = 0; i < 10; ++i)
    for (int k = 0; k < 3; ++k) v.push_back(rng.Uniform(0.0, 1.0));
  v.insert(v.end(), {100.0, 0.0, 0.0});
  return EmbeddingMatrix(Ids(11), 3, v);
}

TEST(Knn, IdenticalPointsScoreZero) {
  EmbeddingMatrix x(Ids(3), 2, std::vector<double>(6, 4.0));
  for (double s : KnnOutlierScore(x, 1).scores) EXPECT_EQ(s, 0.0);
}

TEST(Knn, FarPointHasUniqueMax) {
  EXPECT_TRUE(UniqueMax(KnnOutlierScore(ClusterPlusFar(1), 3).scores, 10));
}

TEST(Knn, MatchesBruteForceAndRejectsLargeK) {
  const auto p = PlantedOutliers(60, 3, 0.05, 2);
  const auto s = KnnOutlierScore(p.x, 4);
  for (std::size_t i = 0; i < 60; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < 60; ++j)
      if (j != i) d.push_back(p.x.Distance(i, j));
    std::sort(d.begin(), d.end());
    EXPECT_NEAR(s.scores[i], d[3], 1e-12);
  }
  EXPECT_EQ(KindOf([&] { KnnOutlierScore(p.x, 60); }), ErrorKind::kContract);
}

// Translation and rotation in the first two coordinates.
EmbeddingMatrix Isometry(const EmbeddingMatrix& x, double angle, double shift) {
  std::vector<double> v = x.values();
  const std::size_t d = x.dim();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double a = v[i * d], b = v[i * d + 1];
    v[i * d] = std::cos(angle) * a - std::sin(angle) * b;
    v[i * d + 1] = std::sin(angle) * a + std::cos(angle) * b;
    for (std::size_t k = 0; k < d; ++k) v[i * d + k] += shift;
  }
  return EmbeddingMatrix(x.ids(), d, v);
}

std::vector<std::size_t> Order(const std::vector<double>& s) {
  std::vector<std::size_t> o(s.size());
  std::iota(o.begin(), o.end(), std::size_t{0});
  std::stable_sort(o.begin(), o.end(), [&](auto a, auto b) { return s[a] < s[b]; });
  return o;
}

TEST(Knn, InvariantUnderIsometry) {
  const auto p = PlantedOutliers(80, 4, 0.05, 3);
  const auto moved = Isometry(p.x, 0.7, 3.0);
  const auto a = KnnOutlierScore(p.x, 5).scores;
  const auto b = KnnOutlierScore(moved, 5).scores;
  // float rounding of the moved coordinates limits agreement
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
}

TEST(PlantedOutliers, EveryAnomalyDetectorSeparates) {
  const auto p = PlantedOutliers(500, 16, 0.05, 4);
  EXPECT_GE(AurocOf(KnnOutlierScore(p.x, 5), p.outlier), 0.95);
  EXPECT_GE(AurocOf(IForestScore(IForestFit(p.x, 100, 256, 1), p.x), p.outlier), 0.95);
  EXPECT_GE(AurocOf(HbosScore(p.x, 10), p.outlier), 0.95);
  EXPECT_GE(AurocOf(EcodScore(p.x), p.outlier), 0.95);
}

TEST(IForest, FarOutlierIsMaximum) {
  const auto s = IForestScore(IForestFit(ClusterPlusFar(5), 100, 256, 3), ClusterPlusFar(5));
  EXPECT_EQ(ArgMax(s.scores), 10u);
  for (double v : s.scores) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(IForest, TreeInvariants) {
  const auto p = PlantedOutliers(300, 5, 0.05, 6);
  const auto m = IForestFit(p.x, 20, 64, 7);
  for (const auto& t : m.trees) {
    EXPECT_LE(t.Height(), 6u);
    for (const auto& node : t.nodes) {
      if (node.dim == IsolationNode::kLeaf) continue;
      EXPECT_GT(node.split, node.lo);
      EXPECT_LE(node.split, node.hi);
    }
  }
}

TEST(IForest, ConstantDataIsDegenerate) {
  EmbeddingMatrix x(Ids(20), 3, std::vector<double>(60, 1.5));
  const auto s = IForestScore(IForestFit(x, 10, 256, 1), x);
  EXPECT_TRUE(s.degenerate);
  for (double v : s.scores) EXPECT_EQ(v, s.scores[0]);
}

TEST(IForest, DeterministicPerSeed) {
  const auto p = PlantedOutliers(100, 3, 0.05, 8);
  EXPECT_EQ(IForestScore(IForestFit(p.x, 30, 64, 9), p.x).scores,
            IForestScore(IForestFit(p.x, 30, 64, 9), p.x).scores);
}

TEST(IForest, TwoPointsAreExchangeable) {
  EmbeddingMatrix x(Ids(2), 2, {0.0, 0.0, 1.0, 3.0});
  double diff = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = IForestScore(IForestFit(x, 10, 256, seed), x).scores;
    diff += s[0] - s[1];
  }
  EXPECT_LT(std::abs(diff / 100.0), 0.05);
}

// Holds when the subsample is small next to n; at psi close to n the
// duplicated pool yields fewer distinct points per tree and scores drift up.
TEST(IForest, DuplicatingTheDataKeepsScores) {
  constexpr std::size_t n = 1000;
  const auto p = PlantedOutliers(n, 4, 0.05, 10);
  std::vector<double> v = p.x.values();
  v.insert(v.end(), p.x.values().begin(), p.x.values().end());
  EmbeddingMatrix twice(Ids(2 * n), 4, v);
  std::vector<double> a(n, 0.0), b(n, 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sa = IForestScore(IForestFit(p.x, 100, 256, seed), p.x).scores;
    const auto sb = IForestScore(IForestFit(twice, 100, 256, 1000 + seed), twice).scores;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] += sa[i] / 20.0;
      b[i] += sb[i] / 20.0;
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  EXPECT_LE(worst, 0.02);
}

TEST(Hbos, UniformGridIsNearlyFlat) {
  std::vector<double> v;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) v.insert(v.end(), {i * 5.0, j * 5.0});
  const auto s = HbosScore(EmbeddingMatrix(Ids(400), 2, v), 10).scores;
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / 400.0;
  EXPECT_LT(*hi - *lo, 0.1 * mean);
}

TEST(Hbos, FarOutlierIsMaximum) {
  EXPECT_EQ(ArgMax(HbosScore(ClusterPlusFar(11), 10).scores), 10u);
}

TEST(Hbos, ConstantDimensionDoesNotChangeOrder) {
  const auto p = PlantedOutliers(100, 3, 0.05, 12);
  std::vector<double> v;
  for (std::size_t i = 0; i < 100; ++i) {
    v.insert(v.end(), p.x.row(i).begin(), p.x.row(i).end());
    v.push_back(7.0);
  }
  const auto with = HbosScore(EmbeddingMatrix(Ids(100), 4, v), 10).scores;
  const auto without = HbosScore(p.x, 10).scores;
  EXPECT_EQ(Order(with), Order(without));
}

TEST(Hbos, OutOfRangeFallsInEdgeBin) {
  EmbeddingMatrix train(Ids(4), 1, {0, 1, 2, 3});
  const auto m = HbosFit(train, 3);
  EmbeddingMatrix probe(Ids(2), 1, {-50, 50});
  const auto s = HbosScore(m, probe).scores;
  const auto t = HbosScore(m, train).scores;
  EXPECT_EQ(s[0], t[0]);
  EXPECT_EQ(s[1], t[3]);
}

TEST(Ecod, RightTailPointRanksFirst) {
  // one extreme on the right; the left end is shared so it is less extreme
  EmbeddingMatrix x(Ids(10), 1, {1, 1, 2, 3, 5, 5, 6, 7, 8, 30});
  const auto parts = EcodComponents(x);
  // hand ECDF: 30 has #{>= 30} = 1 of 10
  EXPECT_NEAR(parts.right[9], -std::log(0.1), 1e-12);
  EXPECT_NEAR(parts.left[9], 0.0, 1e-12);
  // 5 appears twice: #{<= 5} = 6, #{>= 5} = 6
  EXPECT_NEAR(parts.left[4], -std::log(0.6), 1e-12);
  EXPECT_NEAR(parts.right[5], -std::log(0.6), 1e-12);
  EXPECT_NEAR(parts.left[0], -std::log(0.2), 1e-12);
  const auto s = EcodScore(x).scores;
  EXPECT_TRUE(UniqueMax(s, 9));
}

TEST(Ecod, IdenticalPointsScoreEqual) {
  EmbeddingMatrix x(Ids(5), 2, std::vector<double>(10, 3.0));
  for (double v : EcodScore(x).scores) EXPECT_EQ(v, 0.0);
}

// Tail sums depend on ranks alone; the skewness-selected part can change
// when a transform flips a dimension's skew sign, so the full score is
// checked under transforms that keep every skew sign.
TEST(Ecod, TailPartsInvariantUnderMonotoneTransforms) {
  const auto p = PlantedOutliers(120, 3, 0.05, 13);
  std::vector<double> v = p.x.values();
  for (std::size_t i = 0; i < 120; ++i) {
    v[i * 3] = std::exp(v[i * 3]);
    v[i * 3 + 1] = std::atan(v[i * 3 + 1]);
    v[i * 3 + 2] = 2.0 * v[i * 3 + 2] + 1.0;
  }
  const auto a = EcodComponents(p.x);
  const auto b = EcodComponents(EmbeddingMatrix(Ids(120), 3, v));
  for (std::size_t i = 0; i < 120; ++i) {
    EXPECT_NEAR(a.left[i], b.left[i], 1e-12);
    EXPECT_NEAR(a.right[i], b.right[i], 1e-12);
  }
}

TEST(Ecod, OrderInvariantUnderSkewPreservingTransforms) {
  Rng rng(14);
  std::vector<double> v(200 * 2);
  for (auto& x : v) x = -std::log(rng.UniformOpen());  // exponential: skew > 0
  std::vector<double> w = v;
  for (std::size_t i = 0; i < 200; ++i) {
    w[i * 2] = w[i * 2] * w[i * 2] * w[i * 2];  // cube keeps the right skew
    w[i * 2 + 1] = 3.0 * w[i * 2 + 1] - 4.0;
  }
  EXPECT_EQ(Order(EcodScore(EmbeddingMatrix(Ids(200), 2, v)).scores),
            Order(EcodScore(EmbeddingMatrix(Ids(200), 2, w)).scores));
}

GrayImage TestImage(std::uint64_t seed, std::size_t w = 64, std::size_t h = 64) {
  Rng rng(seed);
  const double fx = rng.Uniform(0.5, 3.0), fy = rng.Uniform(0.5, 3.0), ph = rng.Uniform(0, 6);
  std::vector<std::uint8_t> px(w * h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double u = static_cast<double>(x) / static_cast<double>(w);
      const double v = static_cast<double>(y) / static_cast<double>(h);
      const double val = 125 + 50 * std::sin(6.283 * fx * u + ph) * std::cos(6.283 * fy * v) +
                         40 * (u - v);
      px[y * w + x] = static_cast<std::uint8_t>(std::clamp(std::lround(val), 20L, 235L));
    }
  return GrayImage(w, h, px);
}

GrayImage Noisy(const GrayImage& base, int amplitude, std::uint64_t seed) {
  Rng rng(seed);
  GrayImage out = base;
  for (auto& p : out.pixels) {
    const long delta = static_cast<long>(rng.Index(2 * static_cast<std::uint64_t>(amplitude) + 1)) - amplitude;
    p = static_cast<std::uint8_t>(std::clamp(static_cast<long>(p) + delta, 0L, 255L));
  }
  return out;
}

GrayImage UniformNoise(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> px(64 * 64);
  for (auto& p : px) p = static_cast<std::uint8_t>(rng.Index(256));
  return GrayImage(64, 64, px);
}

TEST(PHash, IdenticalImagesHashEqual) {
  const auto img = TestImage(1);
  EXPECT_EQ(HammingDistance(PHash(img), PHash(img)), 0);
}

TEST(PHash, SmallNoiseMovesFewBits) {
  const auto img = TestImage(2);
  const auto noisy = Noisy(img, 2, 3);
  EXPECT_LE(HammingDistance(PHash(img), PHash(noisy)), 4);
}

TEST(PHash, BrightnessShiftWithoutClipping) {
  const auto img = TestImage(4);
  GrayImage bright = img;
  for (auto& p : bright.pixels) p = static_cast<std::uint8_t>(p + 10);
  EXPECT_LE(HammingDistance(PHash(img), PHash(bright)), 1);
}

TEST(PHash, IndependentNoiseImagesDifferInAboutHalfTheBits) {
  double total = 0;
  int outside = 0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const int h = HammingDistance(PHash(UniformNoise(2 * t)), PHash(UniformNoise(2 * t + 1)));
    total += h;
    outside += h < 24 || h > 40;
  }
  EXPECT_NEAR(total / 50.0, 32.0, 2.0);
  EXPECT_LE(outside, 3) << "trials outside [24, 40]";
}

TEST(PHash, BitLayoutAndContract) {
  // A horizontal ramp concentrates energy in the first row of coefficients.
  std::vector<std::uint8_t> px(32 * 32);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x) px[y * 32 + x] = static_cast<std::uint8_t>(x * 8);
  const auto h = PHash(GrayImage(32, 32, px));
  EXPECT_TRUE(h.bits >> 63);  // DC is the largest coefficient
  EXPECT_LE(std::popcount(h.bits), 32);  // strictly above the median
  EXPECT_EQ(KindOf([] { PHash(GrayImage(7, 8, std::uint8_t{0})); }), ErrorKind::kContract);
}

TEST(HashSimilarity, Examples) {
  const PerceptualHash a{0x0123456789abcdefULL};
  EXPECT_EQ(HashSimilarity(a, a), 1.0);
  EXPECT_EQ(HashSimilarity(a, PerceptualHash{~a.bits}), 0.0);
  EXPECT_EQ(HashSimilarity(PerceptualHash{0}, PerceptualHash{0xffffULL}), 0.75);
}

TEST(Ssim, SelfIsExactlyOne) {
  const auto img = TestImage(5, 61, 45);
  EXPECT_EQ(SsimPair(img, img), 1.0);
  EXPECT_EQ(SsimPair(img, img, SsimWindowing::kSliding), 1.0);
}

TEST(Ssim, ConstantImagesClosedForm) {
  const double c1 = 6.5025;
  const double expected = (2 * 100.0 * 200.0 + c1) / (100.0 * 100.0 + 200.0 * 200.0 + c1);
  EXPECT_NEAR(SsimPair(GrayImage(16, 16, std::uint8_t{100}), GrayImage(16, 16, std::uint8_t{200})),
              expected, 1e-6);
  // zero variance leaves only the luminance term: 40006.5 / 50006.5
  EXPECT_NEAR(expected, 0.800026, 1e-6);
}

TEST(Ssim, DecreasesWithNoiseAmplitude) {
  const auto base = TestImage(6);
  double prev = 2.0;
  for (int amp : {0, 8, 32, 128}) {
    const double s = SsimPair(base, Noisy(base, amp, 7));
    EXPECT_LT(s, prev) << amp;
    prev = s;
  }
}

TEST(Ssim, SymmetricAndChecksShape) {
  const auto a = TestImage(8), b = Noisy(TestImage(8), 20, 9);
  EXPECT_NEAR(SsimPair(a, b), SsimPair(b, a), 1e-12);
  EXPECT_EQ(KindOf([&] { SsimPair(a, TestImage(8, 64, 63)); }), ErrorKind::kContract);
}

TEST(EmbedPairSimilarity, Examples) {
  EmbeddingMatrix x({"a", "b", "c", "d"}, 1, {0.0, 0.0, 1.0, 3.0});
  const auto s = EmbedPairSimilarity(x, {{"a", "b"}, {"c", "a"}, {"a", "d"}});
  EXPECT_EQ(s.scores[0], 1.0);
  EXPECT_EQ(s.scores[1], 0.5);
  EXPECT_EQ(s.keys[1], "a|c");
  EXPECT_GT(s.scores[1], s.scores[2]);
  EXPECT_EQ(KindOf([&] { EmbedPairSimilarity(x, {{"a", "zz"}}); }), ErrorKind::kData);
}

struct TwoClusters {
  EmbeddingMatrix x;
  std::vector<int> labels;
};

TwoClusters MakeTwoClusters(std::uint64_t seed, std::size_t per = 40) {
  Rng rng(seed);
  std::vector<double> v;
  std::vector<int> labels;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      v.push_back(c * 20.0 + rng.Normal());
      v.push_back(rng.Normal());
      labels.push_back(c);
    }
  return {EmbeddingMatrix(Ids(2 * per), 2, v), labels};
}

TEST(EmbedLabelError, SwappedLabelScoresHighest) {
  auto t = MakeTwoClusters(15);
  t.labels[7] = 1;
  EXPECT_TRUE(UniqueMax(EmbedLabelErrorScore(t.x, t.labels, 10).scores, 7));
}

TEST(EmbedLabelError, SingleClassIsContractError) {
  auto t = MakeTwoClusters(16);
  std::fill(t.labels.begin(), t.labels.end(), 0);
  EXPECT_EQ(KindOf([&] { EmbedLabelErrorScore(t.x, t.labels); }), ErrorKind::kContract);
}

TEST(EmbedLabelError, SingletonClassIsFlagged) {
  auto t = MakeTwoClusters(17);
  t.labels[3] = 2;
  const auto s = EmbedLabelErrorScore(t.x, t.labels, 5);
  ASSERT_EQ(s.flagged.size(), 1u);
  EXPECT_EQ(s.flagged[0], t.x.ids()[3]);
  s.Validate();
}

TEST(EmbedLabelError, OrderInvariantUnderScaling) {
  auto t = MakeTwoClusters(18);
  t.labels[2] = 1;
  std::vector<double> v = t.x.values();
  for (auto& a : v) a *= 4.0;  // power of two keeps float values exact
  EXPECT_EQ(Order(EmbedLabelErrorScore(t.x, t.labels).scores),
            Order(EmbedLabelErrorScore(EmbeddingMatrix(t.x.ids(), 2, v), t.labels).scores));
}

TEST(KnnProbEstimator, RowsSumToOneAndPureClustersAgree) {
  const auto t = MakeTwoClusters(19);
  const auto p = KnnProbEstimator(t.x, t.labels, 10, 5, 3);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(std::accumulate(p[i].begin(), p[i].end(), 0.0), 1.0, 1e-12);
    EXPECT_EQ(static_cast<int>(std::max_element(p[i].begin(), p[i].end()) - p[i].begin()), t.labels[i]);
  }
  EXPECT_EQ(p, KnnProbEstimator(t.x, t.labels, 10, 5, 3));
}

TEST(ConfidentLearning, ConcentratedProbabilitiesGiveDiagonal) {
  const auto r = ConfidentLearning({{1, 0}, {0, 1}, {1, 0}}, {0, 1, 0});
  EXPECT_EQ(r.joint.counts, (std::vector<std::vector<std::size_t>>{{2, 0}, {0, 1}}));
  EXPECT_TRUE(r.flagged.empty());
}

// Thresholds t0 = (0.9 + 0.8) / 2 = 0.85 and t1 = (0.8 + 0.4) / 2 = 0.6.
// Item 1 (p0 = 0.8) clears neither threshold, nor does item 3, so only
// items 0 and 2 are counted.
TEST(ConfidentLearning, FourItemExample) {
  const std::vector<std::vector<double>> probs = {{.9, .1}, {.8, .2}, {.2, .8}, {.6, .4}};
  const auto r = ConfidentLearning(probs, {0, 0, 1, 1});
  EXPECT_NEAR(r.joint.thresholds[0], 0.85, 1e-12);
  EXPECT_NEAR(r.joint.thresholds[1], 0.6, 1e-12);
  EXPECT_EQ(r.joint.counts, (std::vector<std::vector<std::size_t>>{{1, 0}, {0, 1}}));
  EXPECT_TRUE(r.flagged.empty());
}

TEST(ConfidentLearning, SwappedLabelIsFlagged) {
  const std::vector<std::vector<double>> probs = {{.9, .1}, {.8, .2}, {.2, .8}, {.6, .4}};
  const auto r = ConfidentLearning(probs, {0, 0, 0, 1});
  EXPECT_NEAR(r.joint.thresholds[0], 1.9 / 3.0, 1e-12);
  EXPECT_NEAR(r.joint.thresholds[1], 0.4, 1e-12);
  EXPECT_EQ(r.joint.counts, (std::vector<std::vector<std::size_t>>{{2, 1}, {0, 1}}));
  EXPECT_EQ(r.flagged, (std::vector<std::size_t>{2}));
  EXPECT_EQ(std::max_element(r.scores.begin(), r.scores.end()) - r.scores.begin(), 2);
  EXPECT_NEAR(r.scores[2], (0.8 - 0.2 + 1.0) / 2.0, 1e-12);
}

TEST(ConfidentLearning, JointTotals) {
  Rng rng(20);
  std::vector<std::vector<double>> probs(50, std::vector<double>(3));
  std::vector<int> given(50);
  for (std::size_t i = 0; i < 50; ++i) {
    double s = 0;
    for (auto& p : probs[i]) s += (p = rng.UniformOpen());
    for (auto& p : probs[i]) p /= s;
    given[i] = static_cast<int>(rng.Index(3));
  }
  const auto r = ConfidentLearning(probs, given);
  EXPECT_LE(r.joint.Total(), 50u);
  // uniform rows qualify for every class with threshold <= 1/3
  std::vector<std::vector<double>> flat(9, std::vector<double>(3, 1.0 / 3.0));
  const auto all = ConfidentLearning(flat, {0, 1, 2, 0, 1, 2, 0, 1, 2});
  EXPECT_EQ(all.joint.Total(), 9u);
}

TEST(ConfidentLearning, UnnormalizedRowsRejected) {
  EXPECT_EQ(KindOf([] { ConfidentLearning({{0.5, 0.6}}, {0}); }), ErrorKind::kContract);
}

}  // namespace
}  // namespace dqaudit::detectors
