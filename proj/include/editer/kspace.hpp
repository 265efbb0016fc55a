#pragma once

// Domain types for simultaneously acquired primary-coil and EMI-detector
// k-space data, plus the correction configuration.
//
// Layout: every matrix is N_kx (readout samples) x N_PE (phase-encode lines),
// so one column is one PE line and readout samples are contiguous.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "editer/common.hpp"

namespace editer {

struct AcquisitionDataset {
  CMatrix primary;
  std::vector<CMatrix> detectors;
  std::optional<CMatrix> ground_truth;
  std::optional<int> partition_index;

  Index readout_samples() const { return primary.rows(); }
  Index pe_lines() const { return primary.cols(); }
  Index detector_count() const { return static_cast<Index>(detectors.size()); }
};

struct VolumeDataset {
  std::vector<AcquisitionDataset> partitions;

  Index readout_samples() const { return partitions.empty() ? 0 : partitions.front().readout_samples(); }
  Index pe_lines() const { return partitions.empty() ? 0 : partitions.front().pe_lines(); }
  Index detector_count() const { return partitions.empty() ? 0 : partitions.front().detector_count(); }
};

enum class ClusterMethod {
  threshold, // greedy contiguous runs anchored on each group's first window
  kmeans,    // Lloyd iterations over correlation profiles; groups may be non-contiguous
};

struct CorrectionConfig {
  int dkx = 7;
  int dky = 1;
  int first_pass_window = 1;
  double cluster_threshold = 0.5;
  double rank_cutoff = 1e-12;
  std::optional<int> max_groups;
  ClusterMethod method = ClusterMethod::threshold;
};

/// Convolution support of the impulse responses, both odd so taps are centered.
struct WindowSpec {
  int dkx = 1;
  int dky = 1;

  int half_x() const { return (dkx - 1) / 2; }
  int half_y() const { return (dky - 1) / 2; }
  int taps() const { return dkx * dky; }
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool valid() const { return violations.empty(); }

  std::string summary() const
  {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty())
        out += "; ";
      out += v;
    }
    return out;
  }
};

namespace detail {

inline void check_finite(const CMatrix& m, const std::string& name, ValidationReport& report)
{
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) {
      const cplx v = m(r, c);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        report.violations.push_back("non-finite at (" + std::to_string(r) + "," + std::to_string(c) +
                                    ") in " + name);
        return;
      }
    }
  }
}

} // namespace detail

/// Reports every invariant violation; never throws. Detectors are numbered from 1.
inline ValidationReport validate_dataset(const AcquisitionDataset& ds)
{
  ValidationReport report;
  const Index rows = ds.primary.rows();
  const Index cols = ds.primary.cols();
  if (rows < 1 || cols < 1)
    report.violations.push_back("primary is empty (" + dims_string(rows, cols) + ")");
  if (ds.detectors.empty())
    report.violations.push_back("no detector channels (N_c = 0)");

  for (std::size_t i = 0; i < ds.detectors.size(); ++i) {
    const auto& d = ds.detectors[i];
    if (d.rows() != rows || d.cols() != cols)
      report.violations.push_back("detector " + std::to_string(i + 1) + " dims " + dims_string(d.rows(), d.cols()) +
                                  " ≠ " + dims_string(rows, cols));
  }
  if (ds.ground_truth && (ds.ground_truth->rows() != rows || ds.ground_truth->cols() != cols))
    report.violations.push_back("ground_truth dims " + dims_string(ds.ground_truth->rows(), ds.ground_truth->cols()) +
                                " ≠ " + dims_string(rows, cols));

  detail::check_finite(ds.primary, "primary", report);
  for (std::size_t i = 0; i < ds.detectors.size(); ++i)
    detail::check_finite(ds.detectors[i], "detector " + std::to_string(i + 1), report);
  if (ds.ground_truth)
    detail::check_finite(*ds.ground_truth, "ground_truth", report);
  return report;
}

inline ValidationReport validate_volume(const VolumeDataset& vol)
{
  ValidationReport report;
  if (vol.partitions.empty()) {
    report.violations.push_back("volume has no partitions");
    return report;
  }
  const auto& first = vol.partitions.front();
  for (std::size_t p = 0; p < vol.partitions.size(); ++p) {
    const auto& part = vol.partitions[p];
    const std::string tag = "partition " + std::to_string(p) + ": ";
    for (const auto& v : validate_dataset(part).violations)
      report.violations.push_back(tag + v);
    if (part.readout_samples() != first.readout_samples() || part.pe_lines() != first.pe_lines())
      report.violations.push_back(tag + "dims " + dims_string(part.readout_samples(), part.pe_lines()) + " ≠ " +
                                  dims_string(first.readout_samples(), first.pe_lines()));
    if (part.detector_count() != first.detector_count())
      report.violations.push_back(tag + "N_c " + std::to_string(part.detector_count()) + " ≠ " +
                                  std::to_string(first.detector_count()));
  }
  return report;
}

inline ValidationReport validate_config(const CorrectionConfig& cfg, std::optional<Index> pe_lines = std::nullopt)
{
  ValidationReport report;
  if (cfg.dkx < 1 || cfg.dkx % 2 == 0)
    report.violations.push_back("dkx must be an odd positive integer (got " + std::to_string(cfg.dkx) + ")");
  if (cfg.dky < 1 || cfg.dky % 2 == 0)
    report.violations.push_back("dky must be an odd positive integer (got " + std::to_string(cfg.dky) + ")");
  if (cfg.first_pass_window < 1)
    report.violations.push_back("first_pass_window must be ≥ 1 (got " + std::to_string(cfg.first_pass_window) + ")");
  if (pe_lines && cfg.first_pass_window > *pe_lines)
    report.violations.push_back("first_pass_window " + std::to_string(cfg.first_pass_window) + " exceeds N_PE " +
                                std::to_string(*pe_lines));
  if (!(cfg.cluster_threshold > 0.0 && cfg.cluster_threshold <= 1.0))
    report.violations.push_back("cluster_threshold must lie in (0, 1]");
  if (!(cfg.rank_cutoff > 0.0))
    report.violations.push_back("rank_cutoff must be > 0");
  if (cfg.max_groups && *cfg.max_groups < 1)
    report.violations.push_back("max_groups must be ≥ 1");
  return report;
}

/// Impulse-response coefficients for one temporal window, ordered detector-major,
/// then dy, then dx (both ascending from the negative half-width).
struct ResponseVector {
  CVector coefficients;
  int window_id = 0;
};

struct ResponseMatrix {
  std::vector<ResponseVector> columns;

  Index size() const { return static_cast<Index>(columns.size()); }

  CMatrix as_matrix() const
  {
    if (columns.empty())
      return {};
    CMatrix h(columns.front().coefficients.size(), size());
    for (Index j = 0; j < size(); ++j)
      h.col(j) = columns[static_cast<std::size_t>(j)].coefficients;
    return h;
  }
};

struct ClusterGroup {
  std::vector<int> windows;
  std::vector<Index> lines;
};

struct ClusterPlan {
  std::vector<ClusterGroup> groups;

  Index group_count() const { return static_cast<Index>(groups.size()); }

  std::vector<Index> group_sizes() const
  {
    std::vector<Index> out;
    for (const auto& g : groups)
      out.push_back(static_cast<Index>(g.lines.size()));
    return out;
  }
};

/// PE lines covered by first-pass window `window` of width `width`; the last window may be short.
inline std::vector<Index> window_lines(int window, int width, Index pe_lines)
{
  std::vector<Index> lines;
  const Index begin = static_cast<Index>(window) * width;
  const Index end = std::min<Index>(begin + width, pe_lines);
  for (Index l = begin; l < end; ++l)
    lines.push_back(l);
  return lines;
}

inline int window_count(int width, Index pe_lines)
{
  return static_cast<int>((pe_lines + width - 1) / width);
}

} // namespace editer
