#pragma once

// Block-Toeplitz EMI convolution operator E.
//
// Row r of E is the primary-coil sample (kx = r mod N_kx, line = lines[r / N_kx]).
// Column (i, dy, dx) holds e_i(kx - dx, line - dy), with dx in [-(dkx-1)/2, (dkx-1)/2]
// and dy likewise; columns are ordered detector-major, then dy, then dx, both
// ascending. Samples outside the acquired matrix read as zero. Shifts along ky
// read the full detector matrix, so a neighbor outside the covered line set is
// still used when it exists.

#include <span>
#include <string>
#include <vector>

#include "editer/kspace.hpp"

namespace editer {

struct ConvOperator {
  CMatrix dense;
  std::vector<Index> line_ids;
  WindowSpec window;
  Index readout_samples = 0;
  Index detector_count = 0;

  Index rows() const { return dense.rows(); }
  Index cols() const { return dense.cols(); }
};

inline Index tap_index(Index detector, int dy, int dx, WindowSpec w)
{
  return detector * w.taps() + static_cast<Index>(dy + w.half_y()) * w.dkx + (dx + w.half_x());
}

inline ConvOperator build_operator(std::span<const CMatrix> detectors, std::span<const Index> lines, WindowSpec w)
{
  if (lines.empty())
    fail(ErrorKind::invalid_argument, "build_operator: empty line set");
  if (detectors.empty())
    fail(ErrorKind::invalid_argument, "build_operator: no detector channels");
  if (w.dkx < 1 || w.dky < 1 || w.dkx % 2 == 0 || w.dky % 2 == 0)
    fail(ErrorKind::invalid_argument, "build_operator: window sizes must be odd and positive (got " +
                                          std::to_string(w.dkx) + "×" + std::to_string(w.dky) + ")");

  const Index nkx = detectors.front().rows();
  const Index npe = detectors.front().cols();
  for (const auto& d : detectors)
    if (d.rows() != nkx || d.cols() != npe)
      fail(ErrorKind::invalid_argument, "build_operator: detector matrices differ in size");
  if (w.dkx > nkx || w.dky > npe)
    fail(ErrorKind::invalid_argument, "build_operator: window " + std::to_string(w.dkx) + "×" + std::to_string(w.dky) +
                                          " larger than data extent " + dims_string(nkx, npe));
  for (Index l : lines)
    if (l < 0 || l >= npe)
      fail(ErrorKind::invalid_argument, "build_operator: line " + std::to_string(l) + " outside [0, " +
                                            std::to_string(npe) + ")");

  const Index nc = static_cast<Index>(detectors.size());
  ConvOperator op;
  op.line_ids.assign(lines.begin(), lines.end());
  op.window = w;
  op.readout_samples = nkx;
  op.detector_count = nc;
  op.dense = CMatrix::Zero(nkx * static_cast<Index>(lines.size()), nc * w.taps());

  for (Index i = 0; i < nc; ++i) {
    const CMatrix& det = detectors[static_cast<std::size_t>(i)];
    for (int dy = -w.half_y(); dy <= w.half_y(); ++dy) {
      for (int dx = -w.half_x(); dx <= w.half_x(); ++dx) {
        const Index col = tap_index(i, dy, dx, w);
        for (std::size_t li = 0; li < lines.size(); ++li) {
          const Index src_line = lines[li] - dy;
          if (src_line < 0 || src_line >= npe)
            continue;
          // rows kx with 0 <= kx - dx < nkx
          const Index kx_begin = std::max<Index>(0, dx);
          const Index kx_end = std::min<Index>(nkx, nkx + dx);
          if (kx_end <= kx_begin)
            continue;
          const Index row0 = static_cast<Index>(li) * nkx;
          op.dense.col(col).segment(row0 + kx_begin, kx_end - kx_begin) =
              det.col(src_line).segment(kx_begin - dx, kx_end - kx_begin);
        }
      }
    }
  }
  return op;
}

inline ConvOperator build_operator(const std::vector<CMatrix>& detectors, const std::vector<Index>& lines, WindowSpec w)
{
  return build_operator(std::span<const CMatrix>(detectors), std::span<const Index>(lines), w);
}

/// Stacks the given columns of `m` into one vector, matching the operator's row order.
inline CVector gather_lines(const CMatrix& m, std::span<const Index> lines)
{
  const Index nkx = m.rows();
  CVector out(nkx * static_cast<Index>(lines.size()));
  for (std::size_t li = 0; li < lines.size(); ++li)
    out.segment(static_cast<Index>(li) * nkx, nkx) = m.col(lines[li]);
  return out;
}

/// EMI estimate E·h, reshaped to N_kx × |lines|.
inline CMatrix predict_emi(const ConvOperator& op, const CVector& h)
{
  if (h.size() != op.cols())
    fail(ErrorKind::invalid_argument, "predict_emi: response length " + std::to_string(h.size()) +
                                          " ≠ operator columns " + std::to_string(op.cols()));
  const CVector flat = op.dense * h;
  return Eigen::Map<const CMatrix>(flat.data(), op.readout_samples, static_cast<Index>(op.line_ids.size()));
}

inline CMatrix predict_emi(const ConvOperator& op, const ResponseVector& h)
{
  return predict_emi(op, h.coefficients);
}

} // namespace editer
