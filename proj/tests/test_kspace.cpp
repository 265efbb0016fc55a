#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "editer/kspace.hpp"
#include "test_util.hpp"

using namespace editer;

namespace {

AcquisitionDataset zeros(Index nkx, Index npe, int detectors)
{
  AcquisitionDataset ds;
  ds.primary = CMatrix::Zero(nkx, npe);
  for (int d = 0; d < detectors; ++d)
    ds.detectors.push_back(CMatrix::Zero(nkx, npe));
  return ds;
}

bool has(const ValidationReport& r, const std::string& msg)
{
  for (const auto& v : r.violations)
    if (v == msg)
      return true;
  return false;
}

} // namespace

TEST(Dataset, FullSizeWithFiveDetectorsIsValid)
{
  const auto ds = zeros(512, 101, 5);
  EXPECT_TRUE(validate_dataset(ds).valid());
  EXPECT_EQ(ds.readout_samples(), 512);
  EXPECT_EQ(ds.pe_lines(), 101);
  EXPECT_EQ(ds.detector_count(), 5);
}

TEST(Dataset, WrongDetectorWidthIsNamed)
{
  auto ds = zeros(512, 101, 5);
  ds.detectors[1] = CMatrix::Zero(512, 100);
  const auto r = validate_dataset(ds);
  EXPECT_FALSE(r.valid());
  EXPECT_TRUE(has(r, "detector 2 dims 512×100 ≠ 512×101")) << r.summary();
}

TEST(Dataset, NonFiniteSampleIsLocated)
{
  auto ds = zeros(512, 101, 5);
  ds.primary(3, 7) = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
  const auto r = validate_dataset(ds);
  EXPECT_TRUE(has(r, "non-finite at (3,7) in primary")) << r.summary();
}

TEST(Dataset, InfiniteImaginaryPartInDetectorIsLocated)
{
  auto ds = zeros(8, 4, 2);
  ds.detectors[1](0, 2) = cplx(0.0, std::numeric_limits<double>::infinity());
  EXPECT_TRUE(has(validate_dataset(ds), "non-finite at (0,2) in detector 2"));
}

TEST(Dataset, NoDetectorsIsInvalid)
{
  const auto r = validate_dataset(zeros(8, 4, 0));
  EXPECT_TRUE(has(r, "no detector channels (N_c = 0)"));
}

TEST(Dataset, GroundTruthShapeChecked)
{
  auto ds = zeros(8, 4, 1);
  ds.ground_truth = CMatrix::Zero(8, 3);
  EXPECT_FALSE(validate_dataset(ds).valid());
}

TEST(Dataset, ValidationIsPure)
{
  std::mt19937_64 gen(1);
  auto ds = editer::testing::random_dataset(gen, 16, 6, 3);
  ds.detectors[2] = CMatrix::Zero(16, 5);
  ds.primary(1, 1) = cplx(std::nan(""), 0.0);
  const auto a = validate_dataset(ds);
  const auto b = validate_dataset(ds);
  EXPECT_EQ(a.violations, b.violations);
  EXPECT_EQ(a.violations.size(), 2u);
}

TEST(Volume, PartitionsMustAgree)
{
  VolumeDataset vol;
  EXPECT_FALSE(validate_volume(vol).valid());
  vol.partitions = {zeros(8, 4, 2), zeros(8, 4, 2)};
  EXPECT_TRUE(validate_volume(vol).valid());
  vol.partitions.push_back(zeros(8, 5, 2));
  vol.partitions.push_back(zeros(8, 4, 1));
  const auto r = validate_volume(vol);
  EXPECT_EQ(r.violations.size(), 2u) << r.summary();
}

TEST(Config, DefaultsAreValid)
{
  CorrectionConfig cfg;
  EXPECT_EQ(cfg.dkx, 7);
  EXPECT_EQ(cfg.dky, 1);
  EXPECT_EQ(cfg.first_pass_window, 1);
  EXPECT_DOUBLE_EQ(cfg.cluster_threshold, 0.5);
  EXPECT_DOUBLE_EQ(cfg.rank_cutoff, 1e-12);
  EXPECT_FALSE(cfg.max_groups.has_value());
  EXPECT_TRUE(validate_config(cfg).valid());
}

TEST(Config, EachInvariantIsReported)
{
  auto bad = [](auto mutate, std::optional<Index> lines = std::nullopt) {
    CorrectionConfig cfg;
    mutate(cfg);
    return validate_config(cfg, lines).violations.size();
  };
  EXPECT_EQ(bad([](auto& c) { c.dkx = 4; }), 1u);
  EXPECT_EQ(bad([](auto& c) { c.dkx = 0; }), 1u);
  EXPECT_EQ(bad([](auto& c) { c.dky = -1; }), 1u);
  EXPECT_EQ(bad([](auto& c) { c.first_pass_window = 0; }), 1u);
  EXPECT_EQ(bad([](auto& c) { c.first_pass_window = 11; }, 10), 1u);
  EXPECT_EQ(bad([](auto& c) { c.first_pass_window = 10; }, 10), 0u);
  EXPECT_EQ(bad([](auto& c) { c.cluster_threshold = 0.0; }), 1u);
  EXPECT_EQ(bad([](auto& c) { c.cluster_threshold = 1.0; }), 0u);
  EXPECT_EQ(bad([](auto& c) { c.cluster_threshold = 1.5; }), 1u);
  EXPECT_EQ(bad([](auto& c) { c.rank_cutoff = 0.0; }), 1u);
  EXPECT_EQ(bad([](auto& c) { c.max_groups = 0; }), 1u);
}

TEST(Windows, CountsAndShortTail)
{
  EXPECT_EQ(window_count(1, 10), 10);
  EXPECT_EQ(window_count(3, 10), 4);
  EXPECT_EQ(window_lines(3, 3, 10), (std::vector<Index>{9}));
  EXPECT_EQ(window_lines(1, 3, 10), (std::vector<Index>{3, 4, 5}));
  EXPECT_EQ(window_count(10, 10), 1);
}

TEST(Responses, AsMatrixStacksColumns)
{
  ResponseMatrix h;
  EXPECT_EQ(h.as_matrix().size(), 0);
  h.columns.push_back({CVector::Constant(3, cplx(1, 0)), 0});
  h.columns.push_back({CVector::Constant(3, cplx(0, 2)), 1});
  const auto m = h.as_matrix();
  EXPECT_EQ(m.rows(), 3);
  EXPECT_EQ(m.cols(), 2);
  EXPECT_EQ(m(2, 1), cplx(0, 2));
}
