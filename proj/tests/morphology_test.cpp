#include <random>

#include <gtest/gtest.h>

#include "cellseg/morphology.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace cellseg {
namespace {

BinaryMask mask_from(std::size_t w, std::size_t h, std::vector<std::uint8_t> bits) {
  return BinaryMask(w, h, std::move(bits));
}

// --- connected_components -------------------------------------------------

TEST(ConnectedComponentsTest, TwoDisjointSquares) {
  BinaryMask m(6, 2, 0);
  for (std::size_t y = 0; y < 2; ++y) {
    m(0, y) = m(1, y) = 1;
    m(4, y) = m(5, y) = 1;
  }
  const LabelMap l = connected_components(m);
  EXPECT_EQ(count_instances(l), 2u);
  EXPECT_EQ(l(0, 0), 1u);
  EXPECT_EQ(l(5, 1), 2u);
}

TEST(ConnectedComponentsTest, DiagonalTouchDependsOnConnectivity) {
  const BinaryMask m = mask_from(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(count_instances(connected_components(m, Connectivity::Eight)), 1u);
  EXPECT_EQ(count_instances(connected_components(m, Connectivity::Four)), 2u);
  EXPECT_TRUE(oracle::same_partition(connected_components(m, Connectivity::Four),
                                     oracle::union_find_components(m, Connectivity::Four)));
}

TEST(ConnectedComponentsTest, EmptyMask) {
  EXPECT_TRUE(distinct_labels(connected_components(BinaryMask(5, 5, 0))).empty());
}

TEST(ConnectedComponentsTest, RasterScanOrder) {
  // The component whose first pixel comes first in raster order gets 1 even
  // when it extends further down.
  const BinaryMask m = mask_from(4, 3, {0, 0, 0, 1,  //
                                        1, 0, 0, 1,  //
                                        1, 0, 0, 1});
  const LabelMap l = connected_components(m);
  EXPECT_EQ(l(3, 0), 1u);
  EXPECT_EQ(l(0, 1), 2u);
}

TEST(ConnectedComponentsTest, MatchesUnionFindOnRandomMasks) {
  std::mt19937 rng(1234);
  std::uniform_int_distribution<std::size_t> dim(1, 64);
  std::uniform_real_distribution<double> density(0.1, 0.7);
  for (int trial = 0; trial < 60; ++trial) {
    const BinaryMask m = oracle::random_mask(rng, dim(rng), dim(rng), density(rng));
    for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
      const LabelMap l = connected_components(m, conn);
      ASSERT_TRUE(oracle::same_partition(l, oracle::union_find_components(m, conn))) << "trial " << trial;
      const auto labels = distinct_labels(l);
      ASSERT_TRUE(labels.empty() || (labels.front() == 1 && labels.back() == labels.size()));
    }
  }
}

// --- reconstruct_by_dilation ----------------------------------------------

TEST(ReconstructionTest, MarkerEqualToMaskIsFixedPoint) {
  std::mt19937 rng(3);
  const Raster f = oracle::random_raster(rng, 9, 7, 20);
  EXPECT_EQ(reconstruct_by_dilation(f, f), f);
}

TEST(ReconstructionTest, ConstantMarkerUnderConstantMask) {
  const Raster out = reconstruct_by_dilation(Raster(6, 4, 7.0f - 10.0f), Raster(6, 4, 7.0f));
  EXPECT_EQ(out, Raster(6, 4, -3.0f));
  EXPECT_EQ(out, oracle::iterate_reconstruction(Raster(6, 4, -3.0f), Raster(6, 4, 7.0f), Connectivity::Eight));
}

TEST(ReconstructionTest, SingleSpikeOnFiveByFive) {
  Raster mask(5, 5, 0.0f);
  mask(2, 2) = 20.0f;
  Raster marker = mask;
  for (auto& v : marker) v -= 10.0f;
  const Raster out = reconstruct_by_dilation(marker, mask);
  EXPECT_EQ(out(2, 2), 10.0f);
  EXPECT_EQ(out(0, 0), 0.0f);
  EXPECT_EQ(out(1, 2), 0.0f);
  EXPECT_EQ(out, oracle::iterate_reconstruction(marker, mask, Connectivity::Eight));
}

TEST(ReconstructionTest, Errors) {
  EXPECT_CELLSEG_ERROR(reconstruct_by_dilation(Raster(2, 2, 1.0f), Raster(2, 2, 0.0f)), ErrorCode::MarkerExceedsMask);
  EXPECT_CELLSEG_ERROR(reconstruct_by_dilation(Raster(2, 2), Raster(3, 2)), ErrorCode::DimensionMismatch);
}

TEST(ReconstructionTest, ConnectivityMatters) {
  // A diagonal chain only carries the marker with eight-neighborhood.
  Raster mask(3, 3, 0.0f);
  mask(0, 0) = mask(1, 1) = mask(2, 2) = 5.0f;
  Raster marker(3, 3, 0.0f);
  marker(0, 0) = 5.0f;
  EXPECT_EQ(reconstruct_by_dilation(marker, mask, Connectivity::Eight)(2, 2), 5.0f);
  EXPECT_EQ(reconstruct_by_dilation(marker, mask, Connectivity::Four)(2, 2), 0.0f);
}

class ReconstructionPropertyTest : public ::testing::TestWithParam<Connectivity> {};

TEST_P(ReconstructionPropertyTest, MatchesIterationAndInvariants) {
  const Connectivity conn = GetParam();
  std::mt19937 rng(conn == Connectivity::Eight ? 99 : 98);
  std::uniform_int_distribution<std::size_t> dim(1, 32);
  std::uniform_int_distribution<int> drop(0, 15);
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t w = dim(rng);
    const std::size_t h = dim(rng);
    const Raster mask = trial % 2 ? oracle::random_relief(rng, w, h) : oracle::random_raster(rng, w, h, 12);
    Raster marker = mask;
    for (auto& v : marker) v -= static_cast<float>(drop(rng));
    const Raster r = reconstruct_by_dilation(marker, mask, conn);
    ASSERT_EQ(r, oracle::iterate_reconstruction(marker, mask, conn)) << "trial " << trial;
    for (std::size_t i = 0; i < r.size(); ++i) {
      ASSERT_LE(marker[i], r[i]);
      ASSERT_LE(r[i], mask[i]);
    }
    ASSERT_EQ(reconstruct_by_dilation(r, mask, conn), r);

    // Monotone in the marker.
    Raster lower = marker;
    for (auto& v : lower) v -= 1.0f;
    const Raster r_lower = reconstruct_by_dilation(lower, mask, conn);
    for (std::size_t i = 0; i < r.size(); ++i) ASSERT_LE(r_lower[i], r[i]);
  }
}

INSTANTIATE_TEST_SUITE_P(BothConnectivities, ReconstructionPropertyTest,
                         ::testing::Values(Connectivity::Four, Connectivity::Eight));

// --- h_maxima --------------------------------------------------------------

TEST(HMaximaTest, ZeroHIsIdentity) {
  std::mt19937 rng(5);
  const Raster f = oracle::random_relief(rng, 17, 13);
  EXPECT_EQ(h_maxima(f, 0.0), f);
}

TEST(HMaximaTest, SpikeOnSevenBySeven) {
  Raster f(7, 7, 0.0f);
  f(3, 3) = 20.0f;
  const Raster out = h_maxima(f, 10.0);
  Raster expected(7, 7, 0.0f);
  expected(3, 3) = 10.0f;
  EXPECT_EQ(out, expected);
  EXPECT_EQ(out, oracle::iterate_hmax(f, 10.0, Connectivity::Eight));
}

TEST(HMaximaTest, NegativeHRejected) {
  EXPECT_CELLSEG_ERROR(h_maxima(Raster(2, 2), -1.0), ErrorCode::NegativeH);
}

TEST(HMaximaTest, SandwichAndMonotoneInH) {
  std::mt19937 rng(77);
  std::uniform_int_distribution<std::size_t> dim(1, 24);
  std::uniform_real_distribution<double> hs(0.0, 15.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Raster f = oracle::random_relief(rng, dim(rng), dim(rng));
    double h1 = hs(rng);
    double h2 = hs(rng);
    if (h1 > h2) std::swap(h1, h2);
    const Raster a = h_maxima(f, h1);
    const Raster b = h_maxima(f, h2);
    for (std::size_t i = 0; i < f.size(); ++i) {
      ASSERT_LE(f[i] - static_cast<float>(h1), a[i]);
      ASSERT_LE(a[i], f[i]);
      ASSERT_LE(b[i], a[i]);
    }
  }
}

// Hand-built 1-D profiles: maxima surviving HMAX_h are exactly those whose
// dynamic exceeds h.
TEST(HMaximaTest, SurvivingMaximaHaveDynamicAboveH) {
  // peaks at x=2 (value 12, dynamic 12-5=7 to reach the 30 peak),
  // x=6 (value 30, global: dynamic 30), x=10 (value 18, dynamic 18-4=14).
  const std::vector<float> profile{0, 6, 12, 6, 5, 15, 30, 10, 4, 9, 18, 3, 0};
  Raster f(profile.size(), 1, profile);
  const double h = 10.0;
  const BinaryMask peaks = regional_maxima(h_maxima(f, h));
  const LabelMap components = connected_components(peaks);
  EXPECT_EQ(count_instances(components), 2u);
  EXPECT_TRUE(peaks(6, 0));
  EXPECT_TRUE(peaks(10, 0));
  EXPECT_FALSE(peaks(2, 0));

  // With h below every dynamic all three survive.
  EXPECT_EQ(count_instances(connected_components(regional_maxima(h_maxima(f, 6.0)))), 3u);
}

// --- regional_maxima -------------------------------------------------------

TEST(RegionalMaximaTest, SingleSpike) {
  Raster f(5, 5, 1.0f);
  f(2, 3) = 4.0f;
  BinaryMask expected(5, 5, 0);
  expected(2, 3) = 1;
  EXPECT_EQ(regional_maxima(f), expected);
}

TEST(RegionalMaximaTest, ConstantRasterIsOnePlateau) {
  EXPECT_EQ(regional_maxima(Raster(4, 3, 2.5f)), BinaryMask(4, 3, 1));
}

TEST(RegionalMaximaTest, MonotoneRampKeepsOnlyTop) {
  Raster f(6, 1, std::vector<float>{0, 1, 2, 3, 4, 5});
  BinaryMask expected(6, 1, 0);
  expected(5, 0) = 1;
  EXPECT_EQ(regional_maxima(f), expected);
}

TEST(RegionalMaximaTest, PlateauWithHigherNeighborIsNotMaximum) {
  Raster f(5, 1, std::vector<float>{1, 3, 3, 4, 0});
  BinaryMask expected(5, 1, 0);
  expected(3, 0) = 1;
  EXPECT_EQ(regional_maxima(f), expected);
}

// For integer-valued images the regional maxima are where f exceeds its
// reconstruction from f - 1.
TEST(RegionalMaximaTest, MatchesReconstructionCharacterization) {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 20);
  for (int trial = 0; trial < 80; ++trial) {
    const Raster f = trial % 2 ? oracle::random_relief(rng, dim(rng), dim(rng))
                               : oracle::random_raster(rng, dim(rng), dim(rng), 4);
    for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
      const Raster rec = oracle::iterate_hmax(f, 1.0, conn);
      const BinaryMask got = regional_maxima(f, conn);
      for (std::size_t i = 0; i < f.size(); ++i) {
        ASSERT_EQ(got[i] != 0, f[i] - rec[i] > 0.0f) << "trial " << trial << " pixel " << i;
      }
    }
  }
}

// --- distance_map ----------------------------------------------------------

TEST(DistanceMapTest, IsolatedPixel) {
  LabelMap l(5, 5, 0);
  l(2, 2) = 3;
  const Raster d = distance_map(l);
  EXPECT_EQ(d(2, 2), 1.0f);
  EXPECT_EQ(d(0, 0), 0.0f);
}

TEST(DistanceMapTest, ThreeWideStrip) {
  LabelMap l(9, 5, 0);
  for (std::size_t y = 1; y <= 3; ++y) {
    for (std::size_t x = 0; x < 9; ++x) l(x, y) = 1;
  }
  const Raster d = distance_map(l);
  for (std::size_t x = 1; x + 1 < 9; ++x) {
    EXPECT_EQ(d(x, 1), 1.0f);
    EXPECT_EQ(d(x, 2), 2.0f);
    EXPECT_EQ(d(x, 3), 1.0f);
  }
  // The strip touches the left and right frame, which counts as outside.
  EXPECT_EQ(d(0, 2), 1.0f);
  EXPECT_EQ(d, oracle::brute_distance(l));
}

TEST(DistanceMapTest, SharedBorderBetweenInstances) {
  LabelMap l(8, 6, 0);
  for (std::size_t y = 1; y < 5; ++y) {
    for (std::size_t x = 1; x < 4; ++x) l(x, y) = 1;
    for (std::size_t x = 4; x < 7; ++x) l(x, y) = 2;
  }
  const Raster d = distance_map(l);
  for (std::size_t y = 1; y < 5; ++y) {
    EXPECT_EQ(d(3, y), 1.0f);
    EXPECT_EQ(d(4, y), 1.0f);
  }
  EXPECT_EQ(d, oracle::brute_distance(l));
}

TEST(DistanceMapTest, BorderTouchingInstance) {
  LabelMap l(4, 4, 1);
  const Raster d = distance_map(l);
  EXPECT_EQ(d(0, 0), 1.0f);
  EXPECT_EQ(d(1, 1), 2.0f);
}

TEST(DistanceMapTest, NormalizedPeaksAtOne) {
  LabelMap l(9, 5, 0);
  for (std::size_t y = 1; y <= 3; ++y) {
    for (std::size_t x = 0; x < 9; ++x) l(x, y) = 1;
  }
  const Raster d = distance_map(l, true);
  EXPECT_EQ(d(4, 2), 1.0f);
  EXPECT_EQ(d(4, 1), 0.5f);
}

TEST(DistanceMapTest, MatchesBruteForceOnRandomLabels) {
  std::mt19937 rng(555);
  std::uniform_int_distribution<std::size_t> dim(1, 64);
  for (int trial = 0; trial < 40; ++trial) {
    const LabelMap l = oracle::random_labels(rng, dim(rng), dim(rng), 12);
    const Raster d = distance_map(l);
    ASSERT_EQ(d, oracle::brute_distance(l)) << "trial " << trial;
    ASSERT_TRUE(all_finite(d));
  }
}

TEST(DistanceMapTest, NonConvexAndFragmentedInstances) {
  // One label used by two disconnected blobs plus a ring.
  LabelMap l(12, 12, 0);
  for (std::size_t i = 2; i < 10; ++i) {
    l(i, 2) = l(i, 9) = l(2, i) = l(9, i) = 4;
  }
  l(0, 11) = l(1, 11) = 4;
  l(5, 5) = l(6, 6) = 9;
  EXPECT_EQ(distance_map(l), oracle::brute_distance(l));
}

}  // namespace
}  // namespace cellseg
