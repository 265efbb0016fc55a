#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "editer/metrics.hpp"
#include "test_util.hpp"

using namespace editer;
using editer::testing::random_matrix;

namespace {

// Direct O(N²M²) centered orthonormal inverse DFT.
CMatrix naive_centered_idft(const CMatrix& k)
{
  const Index n = k.rows(), m = k.cols();
  CMatrix img = CMatrix::Zero(n, m);
  const double two_pi = 2.0 * std::numbers::pi;
  for (Index x = 0; x < n; ++x)
    for (Index y = 0; y < m; ++y) {
      cplx acc = 0.0;
      for (Index u = 0; u < n; ++u)
        for (Index v = 0; v < m; ++v) {
          const double ph = two_pi * (static_cast<double>((u - n / 2) * (x - n / 2)) / static_cast<double>(n) +
                                      static_cast<double>((v - m / 2) * (y - m / 2)) / static_cast<double>(m));
          acc += k(u, v) * std::polar(1.0, ph);
        }
      img(x, y) = acc / std::sqrt(static_cast<double>(n * m));
    }
  return img;
}

MagnitudeImage image_of(const RMatrix& m) { return {m}; }

} // namespace

TEST(Reconstruct, ZerosGiveZeros)
{
  EXPECT_TRUE(reconstruct(CMatrix::Zero(16, 9)).pixels.isZero(0.0));
}

TEST(Reconstruct, CenterImpulseIsFlat)
{
  CMatrix k = CMatrix::Zero(16, 9);
  k(8, 4) = 1.0;
  const auto img = reconstruct(k);
  EXPECT_TRUE(img.pixels.isApproxToConstant(1.0 / std::sqrt(16.0 * 9.0), 1e-12));
}

TEST(Reconstruct, MatchesDirectTransform)
{
  std::mt19937_64 gen(1);
  for (auto [n, m] : {std::pair<Index, Index>{8, 5}, {7, 6}, {12, 11}}) {
    const CMatrix k = random_matrix(gen, n, m);
    EXPECT_LT(editer::testing::rel_diff(kspace_to_image(k), naive_centered_idft(k)), 1e-12);
  }
}

TEST(Reconstruct, PreservesEnergy)
{
  std::mt19937_64 gen(2);
  const CMatrix k = random_matrix(gen, 64, 33);
  EXPECT_NEAR(reconstruct(k).pixels.norm(), k.norm(), 1e-10 * k.norm());
}

TEST(Reconstruct, RejectsEmpty)
{
  EXPECT_THROW(reconstruct(CMatrix(0, 0)), Error);
}

TEST(Nrmse, BasicValues)
{
  std::mt19937_64 gen(3);
  const RMatrix ref = random_matrix(gen, 10, 7).cwiseAbs();
  EXPECT_EQ(nrmse(image_of(ref), image_of(ref)), 0.0);
  EXPECT_NEAR(nrmse(image_of(RMatrix::Zero(10, 7)), image_of(ref)), 1.0, 1e-15);
  EXPECT_NEAR(nrmse(image_of(1.1 * ref), image_of(ref)), 0.1, 1e-12);
}

TEST(Nrmse, RejectsMismatchedDimsAndZeroReference)
{
  EXPECT_THROW(nrmse(image_of(RMatrix::Ones(3, 3)), image_of(RMatrix::Ones(3, 4))), Error);
  EXPECT_THROW(nrmse(image_of(RMatrix::Ones(3, 3)), image_of(RMatrix::Zero(3, 3))), Error);
}

TEST(RoiStd, KnownValues)
{
  EXPECT_EQ(roi_std(image_of(RMatrix::Constant(6, 6, 3.5)), {0, 5, 0, 5}), 0.0);
  RMatrix two(1, 2);
  two << 0.0, 2.0;
  EXPECT_DOUBLE_EQ(roi_std(image_of(two), {0, 0, 0, 1}), 1.0);
}

TEST(RoiStd, MatchesTwoPassOracle)
{
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-3.0, 5.0);
  RMatrix m(20, 15);
  for (Index i = 0; i < m.size(); ++i)
    m.data()[i] = u(gen);
  const RoiSpec roi{3, 11, 2, 13};
  double sum = 0.0;
  for (Index r = 3; r <= 11; ++r)
    for (Index c = 2; c <= 13; ++c)
      sum += m(r, c);
  const double mean = sum / 108.0;
  double ss = 0.0;
  for (Index r = 3; r <= 11; ++r)
    for (Index c = 2; c <= 13; ++c)
      ss += (m(r, c) - mean) * (m(r, c) - mean);
  EXPECT_NEAR(roi_std(image_of(m), roi), std::sqrt(ss / 108.0), 1e-13);
}

TEST(RoiStd, RejectsBadRegions)
{
  const auto img = image_of(RMatrix::Ones(8, 8));
  EXPECT_THROW(roi_std(img, {0, 8, 0, 3}), Error);
  EXPECT_THROW(roi_std(img, {4, 2, 0, 3}), Error);
  EXPECT_THROW(roi_std(img, {-1, 2, 0, 3}), Error);
  EXPECT_THROW(roi_std(img, {2, 2, 3, 3}), Error);
}

TEST(EmiRemoval, PublishedStandardDeviationPairs)
{
  struct Row {
    double un, co, percent;
  };
  const Row rows[] = {{17.5e6, 5.36e6, 69.4}, {9.92e6, 6.09e6, 38.6}, {30.7e6, 6.49e6, 78.9},
                      {78.9e6, 20.2e6, 74.4}, {41.5e6, 13.9e6, 66.5}, {57.1e6, 16.2e6, 71.6}};
  for (const auto& r : rows) {
    const auto m = emi_removal_from_sigma(r.un, r.co);
    EXPECT_NEAR(m.percent, r.percent, 0.1) << r.un << " " << r.co;
    EXPECT_FALSE(m.overcorrected);
  }
}

TEST(EmiRemoval, IdenticalImagesRemoveNothing)
{
  std::mt19937_64 gen(5);
  const auto img = reconstruct(random_matrix(gen, 16, 16));
  const auto m = emi_removal(img, img, {0, 7, 0, 7});
  EXPECT_EQ(m.percent, 0.0);
  EXPECT_FALSE(m.overcorrected);
}

TEST(EmiRemoval, OvercorrectionIsFlaggedAndAbsolute)
{
  const auto m = emi_removal_from_sigma(2.0, 3.0);
  EXPECT_DOUBLE_EQ(m.percent, 50.0);
  EXPECT_TRUE(m.overcorrected);
  EXPECT_THROW(emi_removal_from_sigma(0.0, 1.0), Error);
}

TEST(EmiRemoval, ScaleInvariant)
{
  EXPECT_NEAR(emi_removal_from_sigma(7.0, 2.0).percent, emi_removal_from_sigma(7e6, 2e6).percent, 1e-12);
}

TEST(EmiRemoval, VolumeAveragesSigmaFirst)
{
  RMatrix a(1, 2), b(1, 2), c(1, 2), d(1, 2);
  a << 0.0, 2.0; // σ 1
  b << 0.0, 6.0; // σ 3
  c << 0.0, 1.0; // σ 0.5
  d << 0.0, 1.0; // σ 0.5
  const std::vector<MagnitudeImage> un = {image_of(a), image_of(b)};
  const std::vector<MagnitudeImage> co = {image_of(c), image_of(d)};
  const auto v = emi_removal_volume(un, co, {0, 0, 0, 1});
  EXPECT_DOUBLE_EQ(v.sigma_uncorrected, 2.0);
  EXPECT_DOUBLE_EQ(v.sigma_corrected, 0.5);
  EXPECT_DOUBLE_EQ(v.percent, 75.0);
  // per-partition percentages would average to (50 + 83.3) / 2, which differs
  EXPECT_GT(std::abs(v.percent - (50.0 + 500.0 / 6.0) / 2.0), 1.0);
  EXPECT_THROW(emi_removal_volume(un, std::span<const MagnitudeImage>(co).first(1), {0, 0, 0, 1}), Error);
}

TEST(NrmseImprovement, Percentages)
{
  EXPECT_DOUBLE_EQ(nrmse_improvement(0.5, 0.1), 80.0);
  EXPECT_DOUBLE_EQ(nrmse_improvement(0.5, 0.5), 0.0);
  EXPECT_THROW(nrmse_improvement(0.0, 0.1), Error);
}
