#pragma once

// EDITER: dynamic estimation and removal of external interference.
//
//   1. split the PE lines into first-pass windows of W1 lines
//   2. fit an impulse response per window (dky forced to 1)
//   3. correlate the unit-normalized responses
//   4. cluster windows into N_G temporal groups
//   5. per group: fit h over the group with the full (dkx, dky) window and
//      subtract E·h from the primary data

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "editer/convop.hpp"
#include "editer/kspace.hpp"

namespace editer {

struct CorrelationMatrix {
  RMatrix values;

  Index size() const { return values.rows(); }
  double operator()(Index i, Index j) const { return values(i, j); }
};

struct GroupDiagnostics {
  double residual_norm = 0.0; // ‖s − E·h‖ over the group
  double signal_norm = 0.0;   // ‖s‖ over the group
  Index rank = 0;             // singular values kept by the solve
};

struct CorrectionDiagnostics {
  std::vector<GroupDiagnostics> groups;
  CorrelationMatrix correlation;
  double first_pass_seconds = 0.0;
  double clustering_seconds = 0.0;
  double correction_seconds = 0.0;
  double total_seconds = 0.0;
};

struct CorrectionResult {
  AcquisitionDataset corrected;
  ClusterPlan plan;
  std::vector<ResponseVector> responses;
  CorrectionDiagnostics diagnostics;
};

struct ClusterCorrection {
  CMatrix corrected_lines; // N_kx × |group|
  ResponseVector response;
  GroupDiagnostics diagnostics;
};

struct LeastSquaresFit {
  CVector solution;
  Index rank = 0;
  RVector singular_values;
};

/// Minimum-norm least squares through a QR-reduced SVD. Singular values at or
/// below rank_cutoff·σ_max are treated as zero.
inline LeastSquaresFit min_norm_solve(const CMatrix& a, const CVector& b, double rank_cutoff)
{
  if (b.size() != a.rows())
    fail(ErrorKind::invalid_argument, "least squares: rhs length " + std::to_string(b.size()) + " ≠ rows " +
                                          std::to_string(a.rows()));
  const Index n = a.cols();
  LeastSquaresFit fit;
  fit.solution = CVector::Zero(n);
  if (n == 0 || a.rows() == 0)
    return fit;

  CMatrix reduced;
  CVector rhs;
  if (a.rows() > n) {
    Eigen::HouseholderQR<CMatrix> qr(a);
    reduced = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    rhs = (qr.householderQ().adjoint() * b).head(n);
  } else {
    reduced = a;
    rhs = b;
  }

  Eigen::JacobiSVD<CMatrix> svd(reduced, Eigen::ComputeThinU | Eigen::ComputeThinV);
  fit.singular_values = svd.singularValues();
  const double smax = fit.singular_values.size() ? fit.singular_values(0) : 0.0;
  const double cut = smax * rank_cutoff;
  CVector coeff = svd.matrixU().adjoint() * rhs;
  for (Index k = 0; k < coeff.size(); ++k) {
    const double sv = fit.singular_values(k);
    if (sv > cut && sv > 0.0) {
      coeff(k) /= sv;
      ++fit.rank;
    } else {
      coeff(k) = 0.0;
    }
  }
  fit.solution = svd.matrixV() * coeff;
  for (const auto& v : fit.solution)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      fail(ErrorKind::numerical, "least squares: non-finite solution");
  return fit;
}

/// h = E†s with relative singular-value cutoff.
inline ResponseVector estimate_response(const ConvOperator& op, const CVector& s, double rank_cutoff)
{
  if (s.size() != op.rows())
    fail(ErrorKind::invalid_argument, "estimate_response: signal length " + std::to_string(s.size()) +
                                          " ≠ operator rows " + std::to_string(op.rows()));
  return {min_norm_solve(op.dense, s, rank_cutoff).solution, 0};
}

namespace detail {

inline void require_valid(const AcquisitionDataset& ds, const CorrectionConfig& cfg)
{
  auto report = validate_dataset(ds);
  if (!report.valid())
    fail(ErrorKind::validation, "invalid dataset: " + report.summary());
  auto cfg_report = validate_config(cfg, ds.pe_lines());
  if (!cfg_report.valid())
    fail(ErrorKind::invalid_argument, "invalid config: " + cfg_report.summary());
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/// One response per window of W1 consecutive PE lines, each fit with dky = 1.
inline ResponseMatrix first_pass(const AcquisitionDataset& ds, const CorrectionConfig& cfg)
{
  detail::require_valid(ds, cfg);
  const WindowSpec w{cfg.dkx, 1};
  const int nw = window_count(cfg.first_pass_window, ds.pe_lines());
  ResponseMatrix h;
  h.columns.reserve(static_cast<std::size_t>(nw));
  for (int k = 0; k < nw; ++k) {
    const auto lines = window_lines(k, cfg.first_pass_window, ds.pe_lines());
    const auto op = build_operator(ds.detectors, lines, w);
    auto rv = estimate_response(op, gather_lines(ds.primary, lines), cfg.rank_cutoff);
    rv.window_id = k;
    h.columns.push_back(std::move(rv));
  }
  return h;
}

/// C_ij = |<h_i/‖h_i‖, h_j/‖h_j‖>|. All-zero columns correlate 1 with each other
/// (and themselves) and 0 with every nonzero column.
inline CorrelationMatrix correlation_matrix(const ResponseMatrix& h)
{
  const Index n = h.size();
  CorrelationMatrix c;
  c.values = RMatrix::Zero(n, n);
  if (n == 0)
    return c;

  CMatrix unit = h.as_matrix();
  std::vector<bool> zero(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    const double norm = unit.col(j).norm();
    zero[static_cast<std::size_t>(j)] = !(norm > 0.0);
    if (norm > 0.0)
      unit.col(j) /= norm;
  }
  for (Index i = 0; i < n; ++i) {
    c.values(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      double v;
      const bool zi = zero[static_cast<std::size_t>(i)];
      const bool zj = zero[static_cast<std::size_t>(j)];
      if (zi || zj)
        v = (zi && zj) ? 1.0 : 0.0;
      else
        v = std::min(1.0, std::abs(unit.col(i).dot(unit.col(j))));
      c.values(i, j) = v;
      c.values(j, i) = v;
    }
  }
  return c;
}

namespace detail {

inline void attach_lines(ClusterPlan& plan, int window_width, Index pe_lines)
{
  for (auto& g : plan.groups) {
    std::sort(g.windows.begin(), g.windows.end());
    g.lines.clear();
    for (int w : g.windows)
      for (Index l : window_lines(w, window_width, pe_lines))
        g.lines.push_back(l);
  }
}

inline void merge_to_cap(std::vector<ClusterGroup>& groups, const CorrelationMatrix& c, int cap)
{
  while (static_cast<int>(groups.size()) > cap) {
    std::size_t best = 0;
    double best_corr = -1.0;
    for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
      const double v = c(groups[g].windows.front(), groups[g + 1].windows.front());
      if (v > best_corr) {
        best_corr = v;
        best = g;
      }
    }
    auto& into = groups[best];
    auto& from = groups[best + 1];
    into.windows.insert(into.windows.end(), from.windows.begin(), from.windows.end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }
}

inline std::vector<ClusterGroup> threshold_runs(const CorrelationMatrix& c, double r)
{
  std::vector<ClusterGroup> groups;
  const Index n = c.size();
  for (Index w = 0; w < n; ++w) {
    if (groups.empty() || c(groups.back().windows.front(), w) < r)
      groups.push_back({});
    groups.back().windows.push_back(static_cast<int>(w));
  }
  return groups;
}

// Lloyd iterations on the rows of C. Initial centers: window 0, then repeatedly
// the window farthest from its nearest center (lowest index on ties).
inline std::vector<ClusterGroup> kmeans_groups(const CorrelationMatrix& c, int k)
{
  const Index n = c.size();
  k = std::clamp<int>(k, 1, static_cast<int>(n));
  std::vector<Index> centers_idx{0};
  RVector nearest = RVector::Constant(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers_idx.size()) < k) {
    const Index last = centers_idx.back();
    for (Index i = 0; i < n; ++i)
      nearest(i) = std::min(nearest(i), (c.values.row(i) - c.values.row(last)).squaredNorm());
    Index far = 0;
    for (Index i = 1; i < n; ++i)
      if (nearest(i) > nearest(far))
        far = i;
    if (!(nearest(far) > 0.0))
      break;
    centers_idx.push_back(far);
  }
  RMatrix centers(static_cast<Index>(centers_idx.size()), n);
  for (std::size_t j = 0; j < centers_idx.size(); ++j)
    centers.row(static_cast<Index>(j)) = c.values.row(centers_idx[j]);

  std::vector<Index> label(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < centers.rows(); ++j) {
        const double d = (c.values.row(i) - centers.row(j)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (label[static_cast<std::size_t>(i)] != best) {
        label[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed)
      break;
    for (Index j = 0; j < centers.rows(); ++j) {
      RVector sum = RVector::Zero(n);
      Index count = 0;
      for (Index i = 0; i < n; ++i)
        if (label[static_cast<std::size_t>(i)] == j) {
          sum += c.values.row(i).transpose();
          ++count;
        }
      if (count > 0)
        centers.row(j) = (sum / static_cast<double>(count)).transpose();
    }
  }

  // groups ordered by their first window
  std::vector<ClusterGroup> groups;
  std::vector<Index> group_of_label(static_cast<std::size_t>(centers.rows()), -1);
  for (Index i = 0; i < n; ++i) {
    auto& slot = group_of_label[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])];
    if (slot < 0) {
      slot = static_cast<Index>(groups.size());
      groups.push_back({});
    }
    groups[static_cast<std::size_t>(slot)].windows.push_back(static_cast<int>(i));
  }
  return groups;
}

} // namespace detail

/// Groups windows by thresholding C. The default walks windows in acquisition
/// order: a window joins the current group iff its correlation with the group's
/// first window is ≥ r, otherwise it starts a new group. `pe_lines` maps windows
/// back to lines (defaults to N_w·W1).
inline ClusterPlan cluster_windows(const CorrelationMatrix& c, const CorrectionConfig& cfg,
                                   std::optional<Index> pe_lines = std::nullopt)
{
  ClusterPlan plan;
  if (c.size() == 0)
    return plan;
  const Index npe = pe_lines.value_or(c.size() * cfg.first_pass_window);

  auto groups = detail::threshold_runs(c, cfg.cluster_threshold);
  if (cfg.method == ClusterMethod::kmeans)
    groups = detail::kmeans_groups(c, cfg.max_groups.value_or(static_cast<int>(groups.size())));
  else if (cfg.max_groups)
    detail::merge_to_cap(groups, c, *cfg.max_groups);

  plan.groups = std::move(groups);
  detail::attach_lines(plan, cfg.first_pass_window, npe);
  return plan;
}

/// Fits h over the group with the full (dkx, dky) window and returns s − E·h on the group lines.
inline ClusterCorrection correct_cluster(const AcquisitionDataset& ds, std::span<const Index> group,
                                         const CorrectionConfig& cfg)
{
  if (group.empty())
    fail(ErrorKind::invalid_argument, "correct_cluster: empty group");
  const auto op = build_operator(std::span<const CMatrix>(ds.detectors), group, WindowSpec{cfg.dkx, cfg.dky});
  const CVector s = gather_lines(ds.primary, group);
  auto fit = min_norm_solve(op.dense, s, cfg.rank_cutoff);
  const CVector residual = s - op.dense * fit.solution;

  ClusterCorrection out;
  out.corrected_lines = Eigen::Map<const CMatrix>(residual.data(), ds.readout_samples(),
                                                  static_cast<Index>(group.size()));
  out.response.coefficients = std::move(fit.solution);
  out.diagnostics.residual_norm = residual.norm();
  out.diagnostics.signal_norm = s.norm();
  out.diagnostics.rank = fit.rank;
  return out;
}

inline ClusterCorrection correct_cluster(const AcquisitionDataset& ds, const std::vector<Index>& group,
                                         const CorrectionConfig& cfg)
{
  return correct_cluster(ds, std::span<const Index>(group), cfg);
}

inline CorrectionResult run_editer(const AcquisitionDataset& ds, const CorrectionConfig& cfg)
{
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  detail::require_valid(ds, cfg);

  CorrectionResult result;
  auto t0 = clock::now();
  const ResponseMatrix h = first_pass(ds, cfg);
  result.diagnostics.first_pass_seconds = detail::seconds_since(t0);

  t0 = clock::now();
  result.diagnostics.correlation = correlation_matrix(h);
  result.plan = cluster_windows(result.diagnostics.correlation, cfg, ds.pe_lines());
  result.diagnostics.clustering_seconds = detail::seconds_since(t0);

  t0 = clock::now();
  result.corrected.primary = ds.primary;
  result.corrected.detectors = ds.detectors;
  result.corrected.ground_truth = ds.ground_truth;
  result.corrected.partition_index = ds.partition_index;
  for (std::size_t g = 0; g < result.plan.groups.size(); ++g) {
    const auto& lines = result.plan.groups[g].lines;
    auto part = correct_cluster(ds, lines, cfg);
    for (std::size_t li = 0; li < lines.size(); ++li)
      result.corrected.primary.col(lines[li]) = part.corrected_lines.col(static_cast<Index>(li));
    part.response.window_id = static_cast<int>(g);
    result.responses.push_back(std::move(part.response));
    result.diagnostics.groups.push_back(part.diagnostics);
  }
  result.diagnostics.correction_seconds = detail::seconds_since(t0);
  result.diagnostics.total_seconds = detail::seconds_since(t_start);
  return result;
}

struct PartitionOutcome {
  std::optional<CorrectionResult> result;
  std::string error; // empty on success
  ErrorKind error_kind = ErrorKind::numerical;

  bool ok() const { return result.has_value(); }
};

/// Corrects each partition independently. Output order matches input order and
/// does not depend on `workers`; a failing partition is reported in place.
inline std::vector<PartitionOutcome> run_editer_volume(const VolumeDataset& vol, const CorrectionConfig& cfg,
                                                       int workers = 1)
{
  const std::size_t n = vol.partitions.size();
  std::vector<PartitionOutcome> out(n);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t p = next++; p < n; p = next++) {
      try {
        out[p].result = run_editer(vol.partitions[p], cfg);
      } catch (const Error& e) {
        out[p].error = e.what();
        out[p].error_kind = e.kind();
      } catch (const std::exception& e) {
        out[p].error = e.what();
      }
    }
  };

  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (nthreads <= 1) {
    work();
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t)
    pool.emplace_back(work);
  pool.clear();
  return out;
}

} // namespace editer
