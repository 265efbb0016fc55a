#pragma once

// Cartesian reconstruction and the two image-quality metrics: NRMSE against a
// reference image, and percent EMI removed from the standard deviation of an
// object-free region of interest.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "editer/common.hpp"

namespace editer {

struct MagnitudeImage {
  RMatrix pixels;

  Index rows() const { return pixels.rows(); }
  Index cols() const { return pixels.cols(); }
};

/// Inclusive, zero-based pixel ranges.
struct RoiSpec {
  Index row0 = 0;
  Index row1 = 0;
  Index col0 = 0;
  Index col1 = 0;

  Index rows() const { return row1 - row0 + 1; }
  Index cols() const { return col1 - col0 + 1; }
  Index pixel_count() const { return rows() * cols(); }
};

namespace detail {

// out[i] = in[(i + shift) mod n]
inline std::vector<cplx> rotate(std::span<const cplx> in, Index shift)
{
  const Index n = static_cast<Index>(in.size());
  std::vector<cplx> out(in.size());
  for (Index i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = in[static_cast<std::size_t>(((i + shift) % n + n) % n)];
  return out;
}

// Centered orthonormal inverse DFT of one vector: fftshift(ifft(ifftshift(x))) · sqrt(n).
inline std::vector<cplx> centered_ifft(std::span<const cplx> in, Eigen::FFT<double>& fft)
{
  const Index n = static_cast<Index>(in.size());
  const auto pre = rotate(in, n / 2);
  std::vector<cplx> mid;
  fft.inv(mid, pre);
  auto out = rotate(mid, -(n / 2));
  const double scale = std::sqrt(static_cast<double>(n));
  for (auto& v : out)
    v *= scale;
  return out;
}

} // namespace detail

/// Centered, orthonormal inverse 2D DFT (k-space center at index (N/2, M/2)).
inline CMatrix kspace_to_image(const CMatrix& kspace)
{
  Eigen::FFT<double> fft;
  CMatrix img = kspace;
  std::vector<cplx> buf;
  for (Index c = 0; c < img.cols(); ++c) {
    buf.assign(img.col(c).data(), img.col(c).data() + img.rows());
    const auto t = detail::centered_ifft(buf, fft);
    for (Index r = 0; r < img.rows(); ++r)
      img(r, c) = t[static_cast<std::size_t>(r)];
  }
  for (Index r = 0; r < img.rows(); ++r) {
    buf.resize(static_cast<std::size_t>(img.cols()));
    for (Index c = 0; c < img.cols(); ++c)
      buf[static_cast<std::size_t>(c)] = img(r, c);
    const auto t = detail::centered_ifft(buf, fft);
    for (Index c = 0; c < img.cols(); ++c)
      img(r, c) = t[static_cast<std::size_t>(c)];
  }
  return img;
}

inline MagnitudeImage reconstruct(const CMatrix& kspace)
{
  if (kspace.size() == 0)
    fail(ErrorKind::invalid_argument, "reconstruct: empty k-space");
  return {kspace_to_image(kspace).cwiseAbs()};
}

/// ‖img − ref‖₂ / ‖ref‖₂
inline double nrmse(const MagnitudeImage& img, const MagnitudeImage& ref)
{
  if (img.rows() != ref.rows() || img.cols() != ref.cols())
    fail(ErrorKind::invalid_argument, "nrmse: image dims " + dims_string(img.rows(), img.cols()) + " ≠ reference " +
                                          dims_string(ref.rows(), ref.cols()));
  const double denom = ref.pixels.norm();
  if (!(denom > 0.0))
    fail(ErrorKind::invalid_argument, "nrmse: zero reference image");
  return (img.pixels - ref.pixels).norm() / denom;
}

inline void check_roi(const RoiSpec& roi, Index rows, Index cols)
{
  if (roi.row0 < 0 || roi.col0 < 0 || roi.row1 < roi.row0 || roi.col1 < roi.col0 || roi.row1 >= rows ||
      roi.col1 >= cols)
    fail(ErrorKind::invalid_argument, "roi " + std::to_string(roi.row0) + ":" + std::to_string(roi.row1) + "," +
                                          std::to_string(roi.col0) + ":" + std::to_string(roi.col1) +
                                          " outside image " + dims_string(rows, cols));
  if (roi.pixel_count() < 2)
    fail(ErrorKind::invalid_argument, "roi must cover at least 2 pixels");
}

/// Population standard deviation over the ROI.
inline double roi_std(const MagnitudeImage& img, const RoiSpec& roi)
{
  check_roi(roi, img.rows(), img.cols());
  const auto block = img.pixels.block(roi.row0, roi.col0, roi.rows(), roi.cols());
  const double mean = block.mean();
  return std::sqrt((block.array() - mean).square().mean());
}

struct EmiRemoval {
  double sigma_uncorrected = 0.0;
  double sigma_corrected = 0.0;
  double percent = 0.0;
  bool overcorrected = false; // σ_C > σ_UN
};

/// |(σ_UN − σ_C) / σ_UN| × 100 from two standard deviations.
inline EmiRemoval emi_removal_from_sigma(double sigma_un, double sigma_c)
{
  if (!(sigma_un > 0.0))
    fail(ErrorKind::invalid_argument, "percent EMI removed: uncorrected ROI standard deviation is zero");
  EmiRemoval out;
  out.sigma_uncorrected = sigma_un;
  out.sigma_corrected = sigma_c;
  out.percent = std::abs((sigma_un - sigma_c) / sigma_un) * 100.0;
  out.overcorrected = sigma_c > sigma_un;
  return out;
}

inline EmiRemoval emi_removal(const MagnitudeImage& uncorrected, const MagnitudeImage& corrected, const RoiSpec& roi)
{
  if (uncorrected.rows() != corrected.rows() || uncorrected.cols() != corrected.cols())
    fail(ErrorKind::invalid_argument, "percent EMI removed: image dims differ");
  return emi_removal_from_sigma(roi_std(uncorrected, roi), roi_std(corrected, roi));
}

inline double percent_emi_removed(const MagnitudeImage& uncorrected, const MagnitudeImage& corrected,
                                  const RoiSpec& roi)
{
  return emi_removal(uncorrected, corrected, roi).percent;
}

/// Volume form: ROI σ is averaged over partitions before the percentage is taken.
inline EmiRemoval emi_removal_volume(std::span<const MagnitudeImage> uncorrected,
                                     std::span<const MagnitudeImage> corrected, const RoiSpec& roi)
{
  if (uncorrected.size() != corrected.size() || uncorrected.empty())
    fail(ErrorKind::invalid_argument, "volume EMI removal: partition counts differ or are zero");
  double su = 0.0;
  double sc = 0.0;
  for (std::size_t p = 0; p < uncorrected.size(); ++p) {
    su += roi_std(uncorrected[p], roi);
    sc += roi_std(corrected[p], roi);
  }
  const double n = static_cast<double>(uncorrected.size());
  return emi_removal_from_sigma(su / n, sc / n);
}

/// Relative NRMSE reduction in percent: (before − after) / before × 100.
inline double nrmse_improvement(double nrmse_before, double nrmse_after)
{
  if (!(nrmse_before > 0.0))
    fail(ErrorKind::invalid_argument, "nrmse improvement: baseline NRMSE is zero");
  return (nrmse_before - nrmse_after) / nrmse_before * 100.0;
}

} // namespace editer
